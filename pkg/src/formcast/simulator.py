"""Synthetic vision feed: predesigned plays mixed with random noise formations.

Each draw picks ``u`` uniformly from {0, 1, 2, 3}.  ``u == 0`` emits one
formation with every robot at an independent uniform position on the
field; otherwise the three formations of play ``u`` are emitted in order.
Three quarters of the draws are plays contributing three packages each, so
the long-run share of play packages is 2.25 / 2.5 = 0.9.

Randomness comes from numpy's PCG64 generator seeded with the run seed, so
a (seed, draws) pair fixes the emitted byte stream.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

from formcast.errors import ValidationError
from formcast.grid import DEFAULT_SPEC, GridSpec
from formcast.vision import ROBOT_IDS, VisionPackage, make_package, send_datagram, write_package

NOMINAL_INTERVAL = 2.0

RawFormation = dict[int, tuple[float, float]]


@dataclass(frozen=True)
class Play:
    id: int
    name: str
    formations: tuple[RawFormation, ...]

    def validate(self, spec: GridSpec = DEFAULT_SPEC) -> None:
        if len(self.formations) != 3:
            raise ValidationError(f"play {self.id}: expected 3 formations, got {len(self.formations)}")
        for k, f in enumerate(self.formations, 1):
            if sorted(f) != list(ROBOT_IDS):
                raise ValidationError(f"play {self.id} formation {k}: robot ids must be 1..6")
            for rid, (x, y) in f.items():
                if not spec.contains(x, y):
                    raise ValidationError(
                        f"play {self.id} formation {k}: robot {rid} at ({x}, {y}) is off the field"
                    )


def plays_from_json(doc: dict, spec: GridSpec = DEFAULT_SPEC) -> list[Play]:
    try:
        plays = []
        for entry in doc["plays"]:
            formations = tuple(
                {int(r["id"]): (float(r["x"]), float(r["y"])) for r in f} for f in entry["formations"]
            )
            for f, raw in zip(formations, entry["formations"]):
                if len(f) != len(raw):
                    raise ValidationError(f"play {entry['id']}: duplicate robot id")
            plays.append(Play(int(entry["id"]), str(entry.get("name", "")), formations))
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed plays document: {exc!r}") from None
    if not plays:
        raise ValidationError("plays document holds no plays")
    ids = [p.id for p in plays]
    if len(set(ids)) != len(ids) or min(ids) < 1:
        raise ValidationError(f"play ids must be distinct positive integers, got {ids}")
    for p in plays:
        p.validate(spec)
    return plays


def plays_to_json(plays: Sequence[Play]) -> dict:
    return {
        "plays": [
            {
                "id": p.id,
                "name": p.name,
                "formations": [
                    [{"id": rid, "x": x, "y": y} for rid, (x, y) in sorted(f.items())]
                    for f in p.formations
                ],
            }
            for p in plays
        ]
    }


def load_plays(path: str | Path | None = None, spec: GridSpec = DEFAULT_SPEC) -> list[Play]:
    """Read a plays file; ``None`` loads the bundled pass-shoot and corner plays."""
    if path is None:
        text = resources.files("formcast").joinpath("data/plays.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"plays file is not JSON: {exc}") from None
    return plays_from_json(doc, spec)


def builtin_plays() -> list[Play]:
    return load_plays(None)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_formation(rng: np.random.Generator, spec: GridSpec = DEFAULT_SPEC) -> RawFormation:
    """Six independent uniform positions on the field, truncated to 0.1 mm."""
    xs = rng.uniform(spec.field_min_x, spec.field_min_x + spec.field_width, 6)
    ys = rng.uniform(spec.field_min_y, spec.field_min_y + spec.field_height, 6)
    return {rid: (math.floor(x * 10) / 10, math.floor(y * 10) / 10) for rid, x, y in zip(ROBOT_IDS, xs, ys)}


def draw_next(
    rng: np.random.Generator, plays: Sequence[Play], spec: GridSpec = DEFAULT_SPEC
) -> tuple[int, list[RawFormation]]:
    """One draw: ``(0, [noise])`` or ``(u, play u's three formations)``."""
    u = int(rng.integers(0, len(plays) + 1))
    if u == 0:
        return 0, [random_formation(rng, spec)]
    return plays[u - 1].id, list(plays[u - 1].formations)


def generate(
    seed: int,
    draws: int,
    plays: Sequence[Play] | None = None,
    spec: GridSpec = DEFAULT_SPEC,
    interval: float = NOMINAL_INTERVAL,
) -> Iterator[tuple[int, VisionPackage]]:
    """Yield ``(play id or 0, package)`` for ``draws`` draws, with seq counting from 0."""
    if draws < 0:
        raise ValidationError("draws must be non-negative")
    plays = builtin_plays() if plays is None else plays
    stamp = interval if interval > 0 else NOMINAL_INTERVAL
    rng = make_rng(seed)
    seq = 0
    for d in range(draws):
        u, formations = draw_next(rng, plays, spec)
        for f in formations:
            yield u, make_package(seq, seq * stamp, f, draw=d)
            seq += 1


@dataclass
class SimulatorConfig:
    seed: int
    draws: int
    interval: float = NOMINAL_INTERVAL
    out: str | Path | None = None
    udp: str | None = None
    plays: list[Play] | None = None
    spec: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if self.interval < 0:
            raise ValidationError("interval must be >= 0")
        if self.draws < 1:
            raise ValidationError("draws must be positive")
        if (self.out is None) == (self.udp is None):
            raise ValidationError("exactly one of out or udp must be given")


@dataclass
class SimulationSummary:
    packages: int = 0
    play_packages: int = 0
    noise_packages: int = 0

    @property
    def play_fraction(self) -> float:
        return self.play_packages / self.packages if self.packages else 0.0

    def __str__(self) -> str:
        return (
            f"emitted {self.packages} packages: {self.play_packages} play, "
            f"{self.noise_packages} noise (play fraction {self.play_fraction:.4f})"
        )


class PartialOutputError(OSError):
    def __init__(self, summary: SimulationSummary, cause: OSError):
        super().__init__(f"{cause}; {summary.packages} packages were emitted before the failure")
        self.summary = summary


def emit(
    packages: Iterator[tuple[int, VisionPackage]],
    sink: IO[bytes] | None = None,
    udp: str | None = None,
    interval: float = 0.0,
    sleep=time.sleep,
) -> SimulationSummary:
    summary = SimulationSummary()
    try:
        for u, pkg in packages:
            if summary.packages and interval > 0:
                sleep(interval)
            if udp is not None:
                send_datagram(pkg, udp)
            else:
                write_package(pkg, sink)
            summary.packages += 1
            if u:
                summary.play_packages += 1
            else:
                summary.noise_packages += 1
    except OSError as exc:
        raise PartialOutputError(summary, exc) from exc
    return summary


def run(config: SimulatorConfig, stdout: IO[str] | None = None) -> SimulationSummary:
    packages = generate(config.seed, config.draws, config.plays, config.spec, config.interval)
    if config.udp is not None:
        summary = emit(packages, udp=config.udp, interval=config.interval)
    else:
        with open(config.out, "wb") as fh:
            summary = emit(packages, sink=fh, interval=config.interval)
    print(summary, file=stdout or sys.stdout)
    return summary
