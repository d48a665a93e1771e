"""Similarity measures and the repeated-trial evaluation harness.

Each trial draws a random formation, predicts two steps from it, and for
each measure picks the bundled play whose first formation scores lowest
against the observation.  The observation and both predictions are then
scored against that play's three formations.
"""

from __future__ import annotations

import csv
import io
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from formcast.errors import ValidationError
from formcast.formation import Formation, formation_from_positions
from formcast.grid import GridSpec
from formcast.model import TransitionTable
from formcast.predictor import predict_play
from formcast.simulator import Play, random_formation
from formcast.vision import make_package

MEASURES = ("count", "distance")

RUNNING_AVG_CSV = "running_avg.csv"
CONFIDENCE_CSV = "confidence.csv"


def _check_ids(a: Formation, b: Formation) -> None:
    if set(a.states) != set(b.states):
        raise ValidationError("formations cover different robot ids")


def count_measure(predicted: Formation, expected: Formation) -> int:
    """Number of robots whose full state differs."""
    _check_ids(predicted, expected)
    return sum(predicted.states[rid] != expected.states[rid] for rid in predicted.states)


def distance_measure(predicted: Formation, expected: Formation) -> int:
    """Summed Manhattan distance between position cells; centroid and velocity ignored."""
    _check_ids(predicted, expected)
    total = 0
    for rid, s in predicted.states.items():
        e = expected.states[rid].position
        total += abs(s.position.cx - e.cx) + abs(s.position.cy - e.cy)
    return total


MEASURE_FUNCS = {"count": count_measure, "distance": distance_measure}


def discretize_play(spec: GridSpec, play: Play) -> list[Formation]:
    """The play's formations as training would see them, velocities chained."""
    out, prev = [], None
    for raw in play.formations:
        prev = formation_from_positions(spec, raw, prev)
        out.append(prev)
    return out


def select_play(
    kind: str,
    observed_initial: Formation,
    plays: Sequence[Play],
    spec: GridSpec,
    discrete: dict[int, list[Formation]] | None = None,
) -> int:
    """Id of the play whose first formation scores lowest; ties go to the lowest id."""
    if not plays:
        raise ValidationError("no plays to select from")
    measure = MEASURE_FUNCS[kind]
    best_id, best = None, None
    for play in sorted(plays, key=lambda p: p.id):
        first = discrete[play.id][0] if discrete else discretize_play(spec, play)[0]
        score = measure(observed_initial, first)
        if best is None or score < best:
            best_id, best = play.id, score
    return best_id


@dataclass
class TrialResult:
    trial: int
    selected: dict[str, int]
    scores: dict[str, tuple[int, int, int]]
    confidence: tuple[float, ...]

    def total(self, kind: str) -> int:
        return sum(self.scores[kind])


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([seed, trial]))


def run_trial(
    table: TransitionTable,
    spec: GridSpec,
    plays: Sequence[Play],
    rng: np.random.Generator,
    trial: int = 0,
    discrete: dict[int, list[Formation]] | None = None,
) -> TrialResult:
    if discrete is None:
        discrete = {p.id: discretize_play(spec, p) for p in plays}
    pkg = make_package(trial, 0.0, random_formation(rng, spec))
    observed = formation_from_positions(spec, pkg.positions())
    predictions = predict_play(table, spec, pkg, steps=2)
    sequence = [observed] + [p.formation for p in predictions]

    selected, scores = {}, {}
    for kind in MEASURES:
        pid = select_play(kind, observed, plays, spec, discrete)
        measure = MEASURE_FUNCS[kind]
        selected[kind] = pid
        scores[kind] = tuple(measure(got, want) for got, want in zip(sequence, discrete[pid]))
    return TrialResult(trial, selected, scores, tuple(p.confidence for p in predictions))


@dataclass
class EvaluationReport:
    n_tests: int
    sums: dict[str, int]
    formation_sums: dict[str, list[int]]
    confidence_sums: list[float]
    selections: dict[str, dict[int, int]]
    running: list[tuple[int, float, float]] = field(repr=False, default_factory=list)
    confidence_rows: list[tuple[int, float, float]] = field(repr=False, default_factory=list)

    def per_play(self, kind: str) -> float:
        return self.sums[kind] / self.n_tests

    def per_formation(self, kind: str) -> float:
        return self.sums[kind] / (3 * self.n_tests)

    def per_formation_step(self, kind: str) -> list[float]:
        """Average score of formation 1, 2 and 3 separately."""
        return [s / self.n_tests for s in self.formation_sums[kind]]

    def mean_confidence(self) -> list[float]:
        return [s / self.n_tests for s in self.confidence_sums]

    def summary(self) -> str:
        buf = io.StringIO()
        buf.write(f"Number of tests: {self.n_tests}\n\n")
        buf.write(f"{'':30}{'Average measure per play':>28}{'Average measure per formation':>32}\n")
        for kind, label in (("count", "Count similarity measure"), ("distance", "Distance similarity measure")):
            buf.write(f"{label:30}{self.per_play(kind):>28.4f}{self.per_formation(kind):>32.4f}\n")
        buf.write("\nAverage measure by formation (1 observed, 2-3 predicted)\n")
        for kind in MEASURES:
            steps = "  ".join(f"{v:.4f}" for v in self.per_formation_step(kind))
            buf.write(f"  {kind:10}{steps}\n")
        buf.write("\nAverage confidence level\n")
        for k, c in enumerate(self.mean_confidence(), 1):
            buf.write(f"  prediction {k}: {c:.6g}\n")
        buf.write("\nSelected plays\n")
        for kind in MEASURES:
            picks = ", ".join(f"play {pid}: {n}" for pid, n in sorted(self.selections[kind].items()))
            buf.write(f"  {kind:10}{picks}\n")
        return buf.getvalue()


def run_evaluation(
    table: TransitionTable,
    spec: GridSpec,
    plays: Sequence[Play],
    n_tests: int = 5000,
    seed: int = 0,
    csv_dir: str | Path | None = None,
) -> EvaluationReport:
    """Run ``n_tests`` seeded trials; optionally stream the two CSVs into ``csv_dir``."""
    if n_tests < 1:
        raise ValidationError("n_tests must be positive")
    if not plays:
        raise ValidationError("no plays to evaluate against")
    discrete = {p.id: discretize_play(spec, p) for p in plays}
    report = EvaluationReport(
        n_tests=n_tests,
        sums={k: 0 for k in MEASURES},
        formation_sums={k: [0, 0, 0] for k in MEASURES},
        confidence_sums=[0.0, 0.0],
        selections={k: {p.id: 0 for p in plays} for k in MEASURES},
    )
    with ExitStack() as stack:
        writers = None
        if csv_dir is not None:
            csv_dir = Path(csv_dir)
            csv_dir.mkdir(parents=True, exist_ok=True)
            run_fh = stack.enter_context(open(csv_dir / RUNNING_AVG_CSV, "w", newline=""))
            conf_fh = stack.enter_context(open(csv_dir / CONFIDENCE_CSV, "w", newline=""))
            writers = (csv.writer(run_fh, lineterminator="\n"), csv.writer(conf_fh, lineterminator="\n"))
            writers[0].writerow(["trial", "count_avg", "distance_avg"])
            writers[1].writerow(["trial", "conf_step1", "conf_step2"])

        for i in range(n_tests):
            res = run_trial(table, spec, plays, trial_rng(seed, i), i, discrete)
            for kind in MEASURES:
                report.sums[kind] += res.total(kind)
                for k, s in enumerate(res.scores[kind]):
                    report.formation_sums[kind][k] += s
                report.selections[kind][res.selected[kind]] += 1
            for k, c in enumerate(res.confidence):
                report.confidence_sums[k] += c
            n = i + 1
            running = (n, report.sums["count"] / n, report.sums["distance"] / n)
            conf_row = (n, *res.confidence)
            report.running.append(running)
            report.confidence_rows.append(conf_row)
            if writers:
                writers[0].writerow([running[0], repr(running[1]), repr(running[2])])
                writers[1].writerow([conf_row[0], repr(conf_row[1]), repr(conf_row[2])])
    return report

