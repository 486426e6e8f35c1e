"""Curriculum schedules over the three scenario randomization factors.

A curriculum is an ordered list of phases, each switching on a subset of
{object randomization, trigger variation, wrist movement} from a given
epoch. The six named presets differ in what gets introduced when:

- C1: objects -> +trigger -> +wrist      (staged, trigger first)
- C2: objects -> +wrist -> +trigger      (staged, wrist first)
- C3: objects -> +trigger +wrist at once (last two phases merged)
- C4: objects +trigger -> +wrist        (first two phases merged)
- C5: objects +wrist -> +trigger        (first two phases merged)
- C6: everything from epoch 0           (no curriculum)

Single-phase presets (P1, P2, P2b, P3, P3b) exist for ablations and
short smoke runs.
"""
from __future__ import annotations

from dataclasses import dataclass

from .scenario import FactorSwitches

PHASE2_START = 1200
PHASE3_START = 1600

_OBJ = FactorSwitches(True, False, False)
_OBJ_TRIG = FactorSwitches(True, True, False)
_OBJ_WRIST = FactorSwitches(True, False, True)
_ALL = FactorSwitches(True, True, True)


@dataclass(frozen=True)
class PhaseSpec:
    name: str
    start: int
    switches: FactorSwitches


@dataclass(frozen=True)
class CurriculumSpec:
    name: str
    phases: tuple

    def __post_init__(self):
        if not self.phases or self.phases[0].start != 0:
            raise ValueError("first phase must start at epoch 0")
        starts = [p.start for p in self.phases]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ValueError("phase starts must be strictly increasing")

    def phase_at(self, epoch: int) -> PhaseSpec:
        current = self.phases[0]
        for p in self.phases:
            if epoch >= p.start:
                current = p
        return current

    def phase_index(self, epoch: int) -> int:
        return self.phases.index(self.phase_at(epoch))

    def boundaries(self) -> list:
        return [p.start for p in self.phases[1:]]


def _spec(name: str, *phases) -> CurriculumSpec:
    return CurriculumSpec(name, tuple(PhaseSpec(n, s, sw) for n, s, sw in phases))


PRESETS = {
    "C1": _spec(
        "C1",
        ("P1", 0, _OBJ),
        ("P2", PHASE2_START, _OBJ_TRIG),
        ("P3", PHASE3_START, _ALL),
    ),
    "C2": _spec(
        "C2",
        ("P1", 0, _OBJ),
        ("P2b", PHASE2_START, _OBJ_WRIST),
        ("P3b", PHASE3_START, _ALL),
    ),
    "C3": _spec("C3", ("P1", 0, _OBJ), ("P3", PHASE2_START, _ALL)),
    "C4": _spec("C4", ("P2", 0, _OBJ_TRIG), ("P3", PHASE3_START, _ALL)),
    "C5": _spec("C5", ("P2b", 0, _OBJ_WRIST), ("P3b", PHASE3_START, _ALL)),
    "C6": _spec("C6", ("P3", 0, _ALL)),
    "P1": _spec("P1", ("P1", 0, _OBJ)),
    "P2": _spec("P2", ("P2", 0, _OBJ_TRIG)),
    "P2b": _spec("P2b", ("P2b", 0, _OBJ_WRIST)),
    "P3": _spec("P3", ("P3", 0, _ALL)),
    "P3b": _spec("P3b", ("P3b", 0, _ALL)),
}


def preset(name: str) -> CurriculumSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown curriculum {name!r}; choose from {sorted(PRESETS)}") from None
