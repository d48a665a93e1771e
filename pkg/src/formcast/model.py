"""Transition count table, centroid-block queries and the training loop.

Rows are FROM states and columns TO states.  Counts are raw lifetime
counts with no smoothing; a query over rows that hold no evidence returns
``None`` instead of a made-up distribution.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

import numpy as np

from formcast.errors import TableFormatError, ValidationError
from formcast.formation import Formation, formation_from_package
from formcast.grid import Cell, GridSpec, encode_state
from formcast.vision import ROBOT_IDS, VisionPackage

log = logging.getLogger(__name__)

MAX_ENTRIES = 1 << 28
FORMAT_VERSION = "v1"
_HEADER = re.compile(r"^FTABLE (\S+) gl=(\d+) gw=(\d+) n=(\d+) total=(\d+)$")


class CentroidBlock(NamedTuple):
    start: int
    end: int

    def __contains__(self, index) -> bool:
        return self.start <= index < self.end


class TransitionTable:
    def __init__(self, spec: GridSpec, counts: np.ndarray | None = None):
        n = spec.state_count
        if n * n > MAX_ENTRIES:
            raise ValidationError(
                f"a {spec.cells_x}x{spec.cells_y} grid needs a {n}x{n} table, too large"
            )
        self.spec = spec
        if counts is None:
            counts = np.zeros((n, n), dtype=np.int64)
        elif counts.shape != (n, n):
            raise ValidationError(f"counts shape {counts.shape} != {(n, n)}")
        self.counts = counts
        self.total_recorded = int(counts.sum())

    @property
    def n(self) -> int:
        return self.spec.state_count

    @property
    def capacity(self) -> int:
        return self.n * self.n

    def _check(self, index: int) -> None:
        if not 0 <= index < self.n:
            raise ValidationError(f"state index {index} outside [0, {self.n})")

    def record(self, frm: int, to: int) -> None:
        self._check(frm)
        self._check(to)
        self.counts[frm, to] += 1
        self.total_recorded += 1

    def row_total(self, frm: int) -> int:
        self._check(frm)
        return int(self.counts[frm].sum())

    def nonzero(self) -> Iterator[tuple[int, int, int]]:
        """``(from, to, count)`` for every nonzero entry, ascending."""
        rows, cols = np.nonzero(self.counts)
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j, int(self.counts[i, j])

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.counts))

    def same_grid(self, other: "TransitionTable") -> bool:
        return (self.spec.cells_x, self.spec.cells_y) == (other.spec.cells_x, other.spec.cells_y)

    def __add__(self, other: "TransitionTable") -> "TransitionTable":
        if not self.same_grid(other):
            raise ValidationError("cannot merge tables over different grids")
        return TransitionTable(self.spec, self.counts + other.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransitionTable):
            return NotImplemented
        return (
            self.same_grid(other)
            and self.total_recorded == other.total_recorded
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return (
            f"TransitionTable({self.spec.cells_x}x{self.spec.cells_y}, "
            f"total={self.total_recorded}, nonzero={self.nonzero_count()})"
        )


def new_table(spec: GridSpec) -> TransitionTable:
    return TransitionTable(spec)


def record(table: TransitionTable, frm: int, to: int) -> None:
    table.record(frm, to)


def centroid_block(spec: GridSpec, centroid: Cell) -> CentroidBlock:
    spec.cell(*centroid)
    gl, gw = spec.cells_x, spec.cells_y
    start = centroid.cy * (gl**2 * gw**2) + centroid.cx * (gl**2 * gw**3)
    return CentroidBlock(start, start + spec.block_size)


def block_centroid(spec: GridSpec, block_number: int) -> Cell:
    """Centroid owning the ``block_number``-th block of ``block_size`` states."""
    cx, cy = divmod(block_number, spec.cells_y)
    return spec.cell(cx, cy)


def most_likely_centroid(table: TransitionTable, from_centroid: Cell) -> tuple[Cell, float] | None:
    """Most likely next centroid from the FROM centroid's rows.

    Column counts are summed per TO centroid block; the probability is the
    winning block's sum over all counts in those rows.  Ties go to the lowest
    block.  Returns None when the rows are empty.
    """
    spec = table.spec
    block = centroid_block(spec, from_centroid)
    rows = table.counts[block.start : block.end]
    total = int(rows.sum())
    if total == 0:
        return None
    per_block = rows.sum(axis=0).reshape(spec.n_cells, spec.block_size).sum(axis=1)
    best = int(np.argmax(per_block))
    return block_centroid(spec, best), int(per_block[best]) / total


def most_likely_transition(
    table: TransitionTable, frm: int, block: CentroidBlock
) -> tuple[int, float] | None:
    """Most likely TO state inside ``block``, with probability over the whole row."""
    table._check(frm)
    if not (0 <= block.start < block.end <= table.n):
        raise ValidationError(f"block {block} outside [0, {table.n})")
    row = table.counts[frm]
    total = int(row.sum())
    if total == 0:
        return None
    segment = row[block.start : block.end]
    j = int(np.argmax(segment))
    if segment[j] == 0:
        return None
    return block.start + j, int(segment[j]) / total


@dataclass
class TrainingSession:
    spec: GridSpec
    table: TransitionTable | None = None
    previous: Formation | None = None
    packages_consumed: int = 0
    skipped: int = 0
    _last_draw: int | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is None:
            self.table = new_table(self.spec)

    def reset(self) -> None:
        """Forget the previous formation so the next package starts a new episode."""
        self.previous = None
        self._last_draw = None

    def feed(self, pkg: VisionPackage, episodic: bool = False) -> int:
        """Consume one package; returns the number of transitions recorded."""
        if episodic:
            if pkg.draw is None:
                raise ValidationError("episodic training needs packages tagged with a draw")
            if pkg.draw != self._last_draw:
                self.previous = None
            self._last_draw = pkg.draw
        current = formation_from_package(self.spec, pkg, self.previous)
        recorded = 0
        if self.previous is not None:
            for rid in ROBOT_IDS:
                self.table.record(
                    encode_state(self.spec, self.previous.states[rid]),
                    encode_state(self.spec, current.states[rid]),
                )
                recorded += 1
        self.previous = current
        self.packages_consumed += 1
        return recorded


def train_stream(
    session: TrainingSession,
    packages: Iterable[VisionPackage],
    episodic: bool = False,
    limit: int | None = None,
) -> TransitionTable:
    """Feed packages into the session, stopping after ``limit`` consumed packages."""
    for pkg in packages:
        if limit is not None and session.packages_consumed >= limit:
            break
        try:
            session.feed(pkg, episodic)
        except ValidationError as exc:
            if episodic and pkg.draw is None:
                raise
            session.skipped += 1
            log.warning("skipping package seq=%s: %s", getattr(pkg, "seq", "?"), exc)
    return session.table


def save_table(table: TransitionTable, sink: IO[str] | str | Path) -> None:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            save_table(table, fh)
        return
    spec = table.spec
    sink.write(
        f"FTABLE {FORMAT_VERSION} gl={spec.cells_x} gw={spec.cells_y} "
        f"n={table.n} total={table.total_recorded}\n"
    )
    for i, j, c in table.nonzero():
        sink.write(f"{i} {j} {c}\n")


def load_table(source: IO[str] | str | Path, spec: GridSpec | None = None) -> TransitionTable:
    """Read a table file.  ``spec`` supplies the field rectangle and must match the header's grid."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            return load_table(fh, spec)
    header = source.readline().rstrip("\r\n")
    m = _HEADER.match(header)
    if not m:
        raise TableFormatError(f"bad table header {header!r}")
    version, gl, gw, n, total = m.group(1), *map(int, m.groups()[1:])
    if version != FORMAT_VERSION:
        raise TableFormatError(f"unsupported table version {version}")
    if spec is None:
        spec = GridSpec(cells_x=gl, cells_y=gw)
    elif (spec.cells_x, spec.cells_y) != (gl, gw):
        raise TableFormatError(
            f"table grid {gl}x{gw} does not match requested {spec.cells_x}x{spec.cells_y}"
        )
    if n != spec.state_count:
        raise TableFormatError(f"header n={n} but a {gl}x{gw} grid has {spec.state_count} states")
    table = new_table(spec)
    last = (-1, -1)
    for lineno, line in enumerate(source, start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            i, j, c = (int(p) for p in parts)
        except ValueError:
            raise TableFormatError(f"line {lineno}: expected '<from> <to> <count>'") from None
        if not (0 <= i < n and 0 <= j < n) or not 0 < c < 2**63:
            raise TableFormatError(f"line {lineno}: entry out of range")
        if (i, j) <= last:
            raise TableFormatError(f"line {lineno}: entries not in ascending order")
        last = (i, j)
        table.counts[i, j] = c
    table.total_recorded = int(table.counts.sum())
    if table.total_recorded != total:
        raise TableFormatError(f"entries sum to {table.total_recorded}, header says {total}")
    return table
