from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from formcast.errors import ValidationError
from formcast.grid import Cell, GridSpec, PlayerState, centroid_cell, encode_state, to_cell, velocity
from formcast.vision import ROBOT_IDS, VisionPackage


@dataclass(frozen=True)
class Formation:
    """Six player states sharing one team centroid."""

    states: Mapping[int, PlayerState]
    centroid: Cell

    def __post_init__(self):
        if sorted(self.states) != list(ROBOT_IDS):
            raise ValidationError(f"formation needs robot ids 1..6, got {sorted(self.states)}")

    def indices(self, spec: GridSpec) -> dict[int, int]:
        return {rid: encode_state(spec, s) for rid, s in sorted(self.states.items())}

    def positions(self) -> dict[int, Cell]:
        return {rid: s.position for rid, s in self.states.items()}


def formation_from_positions(
    spec: GridSpec,
    positions: Mapping[int, tuple[float, float]],
    prev: Formation | None = None,
) -> Formation:
    if sorted(positions) != list(ROBOT_IDS):
        raise ValidationError(f"expected robot ids 1..6, got {sorted(positions)}")
    centroid = centroid_cell(spec, [positions[rid] for rid in ROBOT_IDS])
    states = {}
    for rid in ROBOT_IDS:
        cell = to_cell(spec, *positions[rid])
        if prev is None:
            vel = Cell(0, 0)
        else:
            if rid not in prev.states:
                raise ValidationError(f"robot {rid} missing from previous formation")
            vel = velocity(spec, prev.states[rid].position, cell)
        states[rid] = PlayerState(centroid, cell, vel)
    return Formation(states, centroid)


def formation_from_package(
    spec: GridSpec, pkg: VisionPackage, prev: Formation | None = None
) -> Formation:
    """Discretize a package; velocities chain from ``prev`` or are zero without it."""
    return formation_from_positions(spec, pkg.positions(), prev)
