"""Multi-step formation prediction with chained confidence.

A step first picks the most likely next team centroid, then moves every
player to its most likely TO state inside that centroid's block.  The
formation probability is the centroid probability times the six player
probabilities, and confidence multiplies formation probabilities along the
chain, starting from 1 for the observed formation.

When the table holds no evidence for the centroid or for a player, that
factor is 0, the player keeps its position and velocity digits (restamped
with the chosen centroid), and it is listed in ``unseen_ids``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from formcast.errors import ValidationError
from formcast.formation import Formation, formation_from_package, formation_from_positions
from formcast.grid import GridSpec, PlayerState, decode_state, encode_state
from formcast.model import TransitionTable, centroid_block, most_likely_centroid, most_likely_transition
from formcast.vision import ROBOT_IDS, VisionPackage

__all__ = [
    "Formation",
    "Prediction",
    "formation_from_package",
    "formation_from_positions",
    "predict_step",
    "predict_play",
]


@dataclass(frozen=True)
class Prediction:
    formation: Formation
    p_formation: float
    confidence: float
    per_player_p: dict[int, float]
    p_centroid: float
    unseen_ids: frozenset[int] = field(default_factory=frozenset)
    centroid_unseen: bool = False

    def to_dict(self, spec: GridSpec) -> dict:
        indices = self.formation.indices(spec)
        return {
            "centroid": list(self.formation.centroid),
            "p_centroid": self.p_centroid,
            "centroid_unseen": self.centroid_unseen,
            "players": [
                {
                    "id": rid,
                    "index": indices[rid],
                    "centroid": list(s.centroid),
                    "position": list(s.position),
                    "velocity": list(s.velocity),
                    "p": self.per_player_p[rid],
                    "unseen": rid in self.unseen_ids,
                }
                for rid, s in sorted(self.formation.states.items())
            ],
            "p_formation": self.p_formation,
            "confidence": self.confidence,
        }


def formation_probability(p_centroid: float, per_player_p: dict[int, float]) -> float:
    p = p_centroid
    for rid in ROBOT_IDS:
        p *= per_player_p[rid]
    return p


def predict_step(
    table: TransitionTable,
    spec: GridSpec,
    current: Formation,
    base_confidence: float = 1.0,
) -> Prediction:
    if not 0.0 <= base_confidence <= 1.0:
        raise ValidationError(f"base confidence {base_confidence} outside [0, 1]")
    found = most_likely_centroid(table, current.centroid)
    if found is None:
        target, p_centroid = current.centroid, 0.0
    else:
        target, p_centroid = found
    block = centroid_block(spec, target)

    states: dict[int, PlayerState] = {}
    per_player: dict[int, float] = {}
    unseen = set()
    for rid in ROBOT_IDS:
        state = current.states[rid]
        hit = most_likely_transition(table, encode_state(spec, state), block)
        if hit is None:
            states[rid] = PlayerState(target, state.position, state.velocity)
            per_player[rid] = 0.0
            unseen.add(rid)
        else:
            j, p = hit
            states[rid] = decode_state(spec, j)
            per_player[rid] = p

    p_formation = formation_probability(p_centroid, per_player)
    return Prediction(
        formation=Formation(states, target),
        p_formation=p_formation,
        confidence=base_confidence * p_formation,
        per_player_p=per_player,
        p_centroid=p_centroid,
        unseen_ids=frozenset(unseen),
        centroid_unseen=found is None,
    )


def predict_from(
    table: TransitionTable, spec: GridSpec, base: Formation, steps: int = 2
) -> list[Prediction]:
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    out = []
    current, confidence = base, 1.0
    for _ in range(steps):
        pred = predict_step(table, spec, current, confidence)
        out.append(pred)
        current, confidence = pred.formation, pred.confidence
    return out


def predict_play(
    table: TransitionTable, spec: GridSpec, initial: VisionPackage, steps: int = 2
) -> list[Prediction]:
    """Observe ``initial`` (confidence 1) and chain ``steps`` predictions from it."""
    return predict_from(table, spec, formation_from_package(spec, initial), steps)


def predictions_to_json(predictions: list[Prediction], spec: GridSpec) -> str:
    steps = []
    for k, p in enumerate(predictions, 1):
        d = p.to_dict(spec)
        d["step"] = k
        steps.append(d)
    return json.dumps({"steps": steps}, indent=2)


def format_predictions(predictions: list[Prediction], spec: GridSpec) -> str:
    lines = []
    for k, p in enumerate(predictions, 1):
        lines.append(
            f"step {k}: centroid ({p.formation.centroid}) p_centroid={p.p_centroid:.6g} "
            f"p_formation={p.p_formation:.6g} confidence={p.confidence:.6g}"
        )
        for rid, s in sorted(p.formation.states.items()):
            flag = "  unseen" if rid in p.unseen_ids else ""
            lines.append(
                f"  robot {rid}: {s} index={encode_state(spec, s)} p={p.per_player_p[rid]:.6g}{flag}"
            )
    return "\n".join(lines)

