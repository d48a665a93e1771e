"""Exit criteria for the toolkit, one test per criterion.

Each test prints a single ``AC<n> PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.
"""

import csv
import itertools
import math
import sys
import time

import numpy as np
import pytest

from formcast.cli import main
from formcast.evaluator import run_trial, trial_rng
from formcast.grid import Cell, GridSpec, PlayerState, decode_state, encode_state
from formcast.model import (
    TrainingSession,
    TransitionTable,
    centroid_block,
    load_table,
    most_likely_centroid,
    most_likely_transition,
    new_table,
    train_stream,
)
from formcast.predictor import formation_from_package, predict_play
from formcast.simulator import builtin_plays, generate, random_formation
from formcast.vision import make_package

from conftest import play_packages

SPEC = GridSpec()
VERDICTS = []


def verdict(n, ok, text):
    line = f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {text}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def test_ac01_state_space_cardinality(capsys):
    start = time.perf_counter()
    code = main(["states"])
    elapsed = time.perf_counter() - start
    rows = capsys.readouterr().out.splitlines()
    indices, decoded = [], set()
    for row in rows:
        idx, t, p, v = row.split("\t")
        digits = [int(d) for part in (t, p, v) for d in part.split(",")]
        state = PlayerState(Cell(*digits[0:2]), Cell(*digits[2:4]), Cell(*digits[4:6]))
        assert encode_state(SPEC, state) == int(idx)
        indices.append(int(idx))
        decoded.add(state)
    capacity = new_table(SPEC).capacity
    ok = (
        code == 0
        and len(rows) == 216
        and indices == list(range(216))
        and len(decoded) == 216
        and capacity == 6**6 == 46656
        and elapsed < 1.0
    )
    verdict(1, ok, f"{len(rows)} states, indices 0..{indices[-1]}, capacity {capacity}, {elapsed:.3f}s (<1s)")


def test_ac02_codec_round_trip():
    fwd = all(encode_state(SPEC, decode_state(SPEC, i)) == i for i in range(216))
    tuples = itertools.product(range(3), range(2), range(3), range(2), range(3), range(2))
    back = 0
    for d in tuples:
        s = PlayerState(Cell(d[0], d[1]), Cell(d[2], d[3]), Cell(d[4], d[5]))
        assert decode_state(SPEC, encode_state(SPEC, s)) == s
        back += 1
    sample = encode_state(SPEC, PlayerState(Cell(1, 1), Cell(2, 1), Cell(0, 0)))
    verdict(2, fwd and back == 216 and sample == 138, f"encode.decode over 216 indices, decode.encode over {back} tuples, <(1,1),(2,1),(0,0)> -> {sample}")


def test_ac03_centroid_blocks():
    blocks = []
    for cx in range(3):
        for cy in range(2):
            # start index written out as t_y*(gl^2*gw^2) + t_x*(gl^2*gw^3)
            start = cy * (3**2 * 2**2) + cx * (3**2 * 2**3)
            b = centroid_block(SPEC, Cell(cx, cy))
            assert tuple(b) == (start, start + 36)
            blocks.append(b)
    covered = sorted(i for b in blocks for i in range(b.start, b.end))
    disjoint = all(a.end <= b.start or b.end <= a.start for a, b in itertools.combinations(blocks, 2))
    mid = tuple(centroid_block(SPEC, Cell(1, 1)))
    verdict(3, covered == list(range(216)) and disjoint and mid == (108, 144), f"6 blocks tile [0,216) disjointly, centroid (1,1) -> [{mid[0]}, {mid[1]})")


def test_ac04_simulator_mix():
    plays = builtin_plays()
    start = time.perf_counter()
    stream = []
    # whole draws only, so the last play triple is never cut
    for u, pkg in generate(20240601, 10**6, plays, interval=0):
        if len(stream) >= 10_000 and stream[-1][1].draw != pkg.draw:
            break
        stream.append((u, pkg))
    elapsed = time.perf_counter() - start
    frac = sum(1 for u, _ in stream if u) / len(stream)
    triples_ok = True
    i = 0
    while i < len(stream):
        u, pkg = stream[i]
        if u:
            chunk = stream[i : i + 3]
            triples_ok &= [c[0] for c in chunk] == [u] * 3
            triples_ok &= [c[1].positions() for c in chunk] == list(plays[u - 1].formations)
            triples_ok &= len({c[1].draw for c in chunk}) == 1
            i += 3
        else:
            i += 1
    ok = abs(frac - 0.9) <= 0.02 and triples_ok and elapsed < 5.0
    verdict(4, ok, f"play fraction {frac:.4f} over {len(stream)} packages (0.9 +/- 0.02), ordered triples {triples_ok}, {elapsed:.2f}s (<5s)")


def test_ac05_counting_identity():
    tables = [train_stream(TrainingSession(SPEC), play_packages(p), episodic=True) for p in builtin_plays()]
    per_play = [t.total_recorded for t in tables]
    merged = tables[0] + tables[1] + tables[2]
    distinct = merged.nonzero_count()
    verdict(5, per_play == [12, 12, 12] and distinct == 36, f"per-play recordings {per_play}, merged distinct entries {distinct} (= 6*2*3 = 36)")


def _full_scan(table):
    """Per (from centroid, to centroid) sums, row totals and per (row, to centroid) argmax."""
    cent = [decode_state(SPEC, i).centroid for i in range(SPEC.state_count)]
    block_sum, from_total, row_total, row_best = {}, {}, {}, {}
    for i, row in enumerate(table.counts.tolist()):
        ci = cent[i]
        for j, c in enumerate(row):
            if not c:
                continue
            key = (ci, cent[j])
            block_sum[key] = block_sum.get(key, 0) + c
            from_total[ci] = from_total.get(ci, 0) + c
            row_total[i] = row_total.get(i, 0) + c
            best = row_best.get((i, cent[j]))
            if best is None or c > best[1]:
                row_best[(i, cent[j])] = (j, c)
    return block_sum, from_total, row_total, row_best


def test_ac06_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    centroids = [Cell(x, y) for x in range(3) for y in range(2)]
    checked = ties = 0
    agree = True
    for _ in range(100):
        density = rng.choice([0.001, 0.005, 0.02, 0.1])
        mask = rng.random((216, 216)) < density
        counts = np.where(mask, rng.integers(1, int(rng.integers(2, 4)), (216, 216)), 0)
        table = TransitionTable(SPEC, counts.astype(np.int64))
        block_sum, from_total, row_total, row_best = _full_scan(table)
        for fc in centroids:
            if fc not in from_total:
                expected = None
            else:
                sums = [block_sum.get((fc, tc), 0) for tc in centroids]
                top = max(sums)
                ties += sums.count(top) > 1
                expected = (centroids[sums.index(top)], top / from_total[fc])
            agree &= most_likely_centroid(table, fc) == expected
        for i in range(216):
            for tc in centroids:
                best = row_best.get((i, tc))
                expected = None if best is None else (best[0], best[1] / row_total[i])
                block = centroid_block(SPEC, tc)
                if best is not None:
                    ties += int(np.sum(counts[i, block.start : block.end] == best[1])) > 1
                agree &= most_likely_transition(table, i, block) == expected
                checked += 1
    elapsed = time.perf_counter() - start
    verdict(6, agree and ties > 0 and elapsed < 10.0, f"100 random tables, {checked} transition + 600 centroid queries match full scan ({ties} tie cases), {elapsed:.2f}s (<10s)")


def test_ac07_perfect_replay():
    results = []
    for play in builtin_plays():
        table = train_stream(TrainingSession(SPEC), play_packages(play), episodic=True)
        pkgs = play_packages(play)
        f1 = formation_from_package(SPEC, pkgs[0])
        f2 = formation_from_package(SPEC, pkgs[1], f1)
        f3 = formation_from_package(SPEC, pkgs[2], f2)
        preds = predict_play(table, SPEC, pkgs[0], steps=2)
        results.append(
            preds[0].formation == f2 and preds[1].formation == f3 and [p.p_formation for p in preds] == [1.0, 1.0]
        )
    verdict(7, all(results), f"single-play tables replay formations 2 and 3 with p_formation = 1.0: {results}")


@pytest.fixture(scope="module")
def table_15k():
    return train_stream(TrainingSession(SPEC), (p for _, p in generate(7, 15000)), limit=15000)


def test_ac08_probability_algebra(table_15k):
    exact = bounded = monotone = True
    for i in range(1000):
        pkg = make_package(i, 0.0, random_formation(trial_rng(808, i)))
        preds = predict_play(table_15k, SPEC, pkg, steps=2)
        prev = 1.0
        for p in preds:
            product = p.p_centroid
            for rid in range(1, 7):
                product *= p.per_player_p[rid]
            exact &= p.p_formation == product
            probs = [p.p_centroid, p.p_formation, p.confidence, *p.per_player_p.values()]
            bounded &= all(0.0 <= q <= 1.0 for q in probs)
            monotone &= p.confidence <= prev
            prev = p.confidence
    verdict(8, exact and bounded and monotone, f"1000 trials: exact product {exact}, probabilities in [0,1] {bounded}, confidence non-increasing {monotone}")


def test_ac09_measure_bounds(table_15k):
    plays = builtin_plays()
    n = 1000
    count_ok = total_ok = True
    total = 0
    for i in range(n):
        res = run_trial(table_15k, SPEC, plays, trial_rng(909, i), i)
        count_ok &= all(0 <= s <= 6 for s in res.scores["count"])
        total_ok &= 0 <= res.total("count") <= 18
        total += res.total("count")
    per_play = total / n
    per_formation = total / (3 * n)
    ratio_ok = math.isclose(per_formation, per_play / 3, rel_tol=4 * sys.float_info.epsilon)
    verdict(9, count_ok and total_ok and ratio_ok, f"count per formation in [0,6] {count_ok}, per play in [0,18] {total_ok}, per-formation {per_formation:.6f} = per-play {per_play:.6f} / 3")


def _pipeline(tmp, capsys):
    tmp.mkdir()
    log, table, csvs = tmp / "sim.vpl", tmp / "model.ftab", tmp / "csv"
    assert main(["simulate", "--seed", "2015", "--draws", "15000", "--interval", "0", "--out", str(log)]) == 0
    assert main(["train", "--in", str(log), "--table", str(table), "--packages", "15000"]) == 0
    assert main(["evaluate", "--table", str(table), "--tests", "5000", "--seed", "5000", "--csv-dir", str(csvs)]) == 0
    summary = capsys.readouterr().out
    return log, table, csvs, summary


@pytest.mark.slow
def test_ac10_end_to_end(tmp_path, capsys):
    start = time.perf_counter()
    runs = [_pipeline(tmp_path / name, capsys) for name in ("a", "b")]
    elapsed = time.perf_counter() - start
    (log, table, csvs, summary), (log_b, table_b, csvs_b, summary_b) = runs

    consumed = load_table(table).total_recorded == 6 * (15000 - 1)
    identical = (
        log.read_bytes() == log_b.read_bytes()
        and table.read_bytes() == table_b.read_bytes()
        and all((csvs / f).read_bytes() == (csvs_b / f).read_bytes() for f in ("running_avg.csv", "confidence.csv"))
        and summary.split("Number of tests")[1] == summary_b.split("Number of tests")[1]
    )
    with open(csvs / "running_avg.csv") as fh:
        rows = list(csv.DictReader(fh))
    tail = rows[-len(rows) // 10 :]
    spread = {}
    for key in ("count_avg", "distance_avg"):
        vals = [float(r[key]) for r in tail]
        spread[key] = (max(vals) - min(vals)) / vals[-1]
    with open(csvs / "confidence.csv") as fh:
        conf = list(csv.DictReader(fh))
    c1 = sum(float(r["conf_step1"]) for r in conf) / len(conf)
    c2 = sum(float(r["conf_step2"]) for r in conf) / len(conf)
    ok = (
        consumed
        and identical
        and len(rows) == 5000
        and all(s < 0.05 for s in spread.values())
        and c1 > c2
        and elapsed < 300
    )
    verdict(
        10,
        ok,
        f"15000 packages trained, 5000 tests x2 runs in {elapsed:.1f}s (<300s), byte-identical {identical}, "
        f"final-10% spread count {spread['count_avg']:.4f} distance {spread['distance_avg']:.4f} (<0.05), "
        f"mean confidence {c1:.4g} > {c2:.4g}",
    )
