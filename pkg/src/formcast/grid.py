"""Field discretization and the mixed-radix state codec.

A player state is six digits: team centroid cell ``(t_x, t_y)``, position
cell ``(p_x, p_y)`` and velocity ``(v_x, v_y)``.  Velocity is the modular
cell displacement since the previous package, so together with the
current position it determines the previous position exactly.

Digits are packed most-significant first in the order
``t_x, t_y, p_x, p_y, v_x, v_y``; x digits have radix ``cells_x`` and y
digits radix ``cells_y``.  On the default 3x2 grid the place values are
72, 36, 12, 6, 2, 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

from formcast.errors import ValidationError

DIGIT_NAMES = ("t_x", "t_y", "p_x", "p_y", "v_x", "v_y")


class Cell(NamedTuple):
    cx: int
    cy: int

    def __str__(self) -> str:
        return f"{self.cx},{self.cy}"


@dataclass(frozen=True)
class GridSpec:
    """Field rectangle in millimetres and the number of cells along each axis."""

    field_min_x: float = 0.0
    field_min_y: float = 0.0
    field_width: float = 6000.0
    field_height: float = 4000.0
    cells_x: int = 3
    cells_y: int = 2

    def __post_init__(self):
        if not (isinstance(self.cells_x, int) and isinstance(self.cells_y, int)):
            raise ValidationError("cell counts must be integers")
        if self.cells_x < 1 or self.cells_y < 1:
            raise ValidationError(
                f"cell counts must be positive, got {self.cells_x}x{self.cells_y}"
            )
        for name in ("field_min_x", "field_min_y", "field_width", "field_height"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.field_width <= 0 or self.field_height <= 0:
            raise ValidationError("field width and height must be positive")

    @property
    def n_cells(self) -> int:
        return self.cells_x * self.cells_y

    @property
    def state_count(self) -> int:
        return self.n_cells**3

    @property
    def block_size(self) -> int:
        """Number of states sharing one team centroid."""
        return self.n_cells**2

    @property
    def radices(self) -> tuple[int, ...]:
        gl, gw = self.cells_x, self.cells_y
        return (gl, gw, gl, gw, gl, gw)

    @property
    def weights(self) -> tuple[int, ...]:
        """Place value of each digit, in ``DIGIT_NAMES`` order."""
        gl, gw = self.cells_x, self.cells_y
        return (
            gl**2 * gw**3,
            gl**2 * gw**2,
            gl * gw**2,
            gl * gw,
            gw,
            1,
        )

    def cell(self, cx: int, cy: int) -> Cell:
        """Build a cell, checking it lies on this grid."""
        if not (0 <= cx < self.cells_x and 0 <= cy < self.cells_y):
            raise ValidationError(
                f"cell ({cx},{cy}) outside {self.cells_x}x{self.cells_y} grid"
            )
        return Cell(cx, cy)

    def contains(self, x: float, y: float) -> bool:
        return (
            self.field_min_x <= x < self.field_min_x + self.field_width
            and self.field_min_y <= y < self.field_min_y + self.field_height
        )


DEFAULT_SPEC = GridSpec()


@dataclass(frozen=True)
class PlayerState:
    centroid: Cell
    position: Cell
    velocity: Cell

    @property
    def digits(self) -> tuple[int, int, int, int, int, int]:
        return (*self.centroid, *self.position, *self.velocity)

    def previous_position(self, spec: GridSpec) -> Cell:
        return Cell(
            (self.position.cx - self.velocity.cx) % spec.cells_x,
            (self.position.cy - self.velocity.cy) % spec.cells_y,
        )

    def __str__(self) -> str:
        return f"<({self.centroid}),({self.position}),({self.velocity})>"


def _axis_cell(value: float, lo: float, extent: float, cells: int) -> int:
    ratio = (value - lo) / (extent / cells)
    if not math.isfinite(ratio):
        return 0 if ratio < 0 else cells - 1
    return min(max(math.floor(ratio), 0), cells - 1)


def to_cell(spec: GridSpec, x: float, y: float) -> Cell:
    """Map field coordinates to a grid cell; points off the field clamp to the edge."""
    if math.isnan(x) or math.isnan(y):
        raise ValidationError("coordinates must not be NaN")
    return Cell(
        _axis_cell(x, spec.field_min_x, spec.field_width, spec.cells_x),
        _axis_cell(y, spec.field_min_y, spec.field_height, spec.cells_y),
    )


def centroid_cell(spec: GridSpec, positions: Sequence[tuple[float, float]]) -> Cell:
    if len(positions) != 6:
        raise ValidationError(f"expected 6 positions, got {len(positions)}")
    mean_x = math.fsum(p[0] for p in positions) / 6
    mean_y = math.fsum(p[1] for p in positions) / 6
    return to_cell(spec, mean_x, mean_y)


def velocity(spec: GridSpec, previous: Cell, current: Cell) -> Cell:
    """Modular displacement from ``previous`` to ``current``."""
    return Cell(
        (current.cx - previous.cx) % spec.cells_x,
        (current.cy - previous.cy) % spec.cells_y,
    )


def encode_state(spec: GridSpec, state: PlayerState) -> int:
    index = 0
    for name, digit, radix, weight in zip(
        DIGIT_NAMES, state.digits, spec.radices, spec.weights
    ):
        if not 0 <= digit < radix:
            raise ValidationError(f"digit {name}={digit} outside [0, {radix})")
        index += digit * weight
    return index


def decode_state(spec: GridSpec, index: int) -> PlayerState:
    if not 0 <= index < spec.state_count:
        raise ValidationError(f"state index {index} outside [0, {spec.state_count})")
    digits = []
    for weight in spec.weights:
        digit, index = divmod(index, weight)
        digits.append(digit)
    t_x, t_y, p_x, p_y, v_x, v_y = digits
    return PlayerState(Cell(t_x, t_y), Cell(p_x, p_y), Cell(v_x, v_y))


def iter_states(spec: GridSpec) -> Iterator[tuple[int, PlayerState]]:
    for i in range(spec.state_count):
        yield i, decode_state(spec, i)


def enumerate_states(spec: GridSpec) -> list[tuple[int, PlayerState]]:
    return list(iter_states(spec))


def format_state_row(index: int, state: PlayerState) -> str:
    """One TSV row of the state listing."""
    return f"{index}\t{state.centroid}\t{state.position}\t{state.velocity}"
