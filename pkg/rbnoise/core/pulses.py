"""Compile Clifford cores into timed pulse schedules.

Time is measured in units of the primitive pi/2 pulse at full Rabi rate, so a segment
of angle theta driven at relative rate omega_rel lasts |theta| / (omega_rel * pi/2).
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Self

import numpy as np
from cachetools import LRUCache, cached
from dataclasses_json import DataClassJsonMixin

from rbnoise.core.rotations import (
    HALF_PI,
    IDENTITY,
    PAULIS,
    Core,
    Rotation,
    Unitary2,
    clifford,
    rz,
    unitary_of,
)


class UnsupportedGate(ValueError):
    """Raised if a gate cannot be expanded in the requested family."""

    pass


class Family(Enum):
    PRIMITIVE = "primitive"
    CORPSE = "corpse"
    WAMF = "wamf"
    BB1 = "bb1"

    @classmethod
    def all(cls) -> list["Family"]:
        return list(cls)

    @classmethod
    def composite(cls) -> list["Family"]:
        return [cls.CORPSE, cls.WAMF, cls.BB1]


# Walsh amplitude-modulated filter coefficients (X0, X3) in units of pi
WAMF_COEFFICIENTS = {
    np.pi / 4: (2.25, 0.36),
    np.pi / 2: (2.5, 0.64),
    np.pi: (3.0, 1.0),
}

PRIMITIVE_IDLE = 2.0


@dataclass(frozen=True)
class PulseSegment(DataClassJsonMixin):
    theta: float
    omega_rel: float = 1.0
    phi: float = 0.0
    # free evolution length for undriven segments
    idle: float = 0.0

    def __post_init__(self):
        if not 0 < self.omega_rel <= 1:
            raise ValueError(f"Invalid relative Rabi rate {self.omega_rel}")
        if self.theta == 0 and self.idle < 0:
            raise ValueError(f"Invalid idle duration {self.idle}")

    @classmethod
    def wait(cls, duration: float) -> Self:
        return cls(0.0, 1.0, 0.0, duration)

    @property
    def driven(self) -> bool:
        return self.theta != 0

    @property
    def duration(self) -> float:
        if not self.driven:
            return self.idle
        return abs(self.theta) / (self.omega_rel * HALF_PI)

    @property
    def rate(self) -> float:
        """Angular speed of the ideal rotation in rad per time unit."""
        return self.omega_rel * HALF_PI if self.driven else 0.0

    @property
    def axis(self) -> np.ndarray:
        phi = self.phi + (np.pi if self.theta < 0 else 0.0)
        return np.array([np.cos(phi), np.sin(phi), 0.0])

    @property
    def unitary(self) -> Unitary2:
        if not self.driven:
            return IDENTITY.copy()
        axis = tuple(float(x) for x in self.axis)
        return unitary_of(Rotation(axis, abs(self.theta)))

    def export(self) -> dict:
        return {
            "theta": self.theta,
            "omega_rel": self.omega_rel,
            "phi": self.phi,
            "duration": self.duration,
        }


@dataclass(frozen=True)
class PulseSchedule:
    family: Family
    segments: tuple[PulseSegment, ...] = field(default_factory=tuple)
    target: int | None = None

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def ideal_unitary(self) -> Unitary2:
        u = IDENTITY.copy()
        for segment in self.segments:
            u = segment.unitary @ u
        return u

    def to_json(self) -> str:
        return json.dumps(
            {
                "family": self.family.value,
                "target": self.target,
                "segments": [s.export() for s in self.segments],
            }
        )


def _corpse(theta_t: float, phase: float) -> list[PulseSegment]:
    k = np.arcsin(np.sin(theta_t / 2) / 2)
    return [
        PulseSegment(2 * np.pi + theta_t / 2 - k, 1.0, phase),
        PulseSegment(2 * np.pi - 2 * k, 1.0, phase + np.pi),
        PulseSegment(theta_t / 2 - k, 1.0, phase),
    ]


def _wamf(theta_t: float, phase: float) -> list[PulseSegment]:
    for angle, (x0, x3) in WAMF_COEFFICIENTS.items():
        if np.isclose(theta_t, angle):
            x0, x3 = x0 * np.pi, x3 * np.pi
            break
    else:
        raise UnsupportedGate(f"WAMF has no coefficients for theta={theta_t}")
    outer = PulseSegment((x0 + x3) / 4, 1.0, phase)
    inner = PulseSegment((x0 - x3) / 2, (x0 - x3) / (x0 + x3), phase)
    return [outer, inner, outer]


def _bb1(theta_t: float, phase: float) -> list[PulseSegment]:
    phi = np.arccos(-theta_t / (4 * np.pi))
    return [
        PulseSegment(theta_t, 1.0, phase),
        PulseSegment(np.pi, 1.0, phase + phi),
        PulseSegment(2 * np.pi, 1.0, phase + 3 * phi),
        PulseSegment(np.pi, 1.0, phase + phi),
    ]


EXPANSIONS = {
    Family.PRIMITIVE: lambda theta_t, phase: [PulseSegment(theta_t, 1.0, phase)],
    Family.CORPSE: _corpse,
    Family.WAMF: _wamf,
    Family.BB1: _bb1,
}


def compile_rotation(theta_t: float, axis_phase: float, family: Family) -> PulseSchedule:
    """Schedule for a rotation by theta_t > 0 about (cos phase, sin phase, 0)."""
    if theta_t <= 0:
        raise UnsupportedGate(f"Invalid target angle {theta_t}")
    return PulseSchedule(family, tuple(EXPANSIONS[family](theta_t, axis_phase)))


def rotary_echo(family: Family) -> list[PulseSegment]:
    # X(pi) then X(-pi): BB1 flips the phase of the second half, which cancels
    # amplitude errors; the detuning-robust families keep driving, X(-pi) = X(pi)
    # up to a global phase, which cancels static detuning.
    second = np.pi if family == Family.BB1 else 0.0
    return [PulseSegment(np.pi, 1.0, 0.0), PulseSegment(np.pi, 1.0, second)]


@cached(cache=LRUCache(maxsize=256))
def compile_clifford(index: int, family: Family = Family.PRIMITIVE) -> PulseSchedule:
    """Compile the physical core of Clifford ``index`` into a pulse schedule."""
    element = clifford(index)
    core = element.core
    if core == Core.NONE:
        segments = []
    elif core == Core.WAIT:
        if family == Family.PRIMITIVE:
            segments = [PulseSegment.wait(PRIMITIVE_IDLE)]
        else:
            segments = rotary_echo(family)
    else:
        segments = EXPANSIONS[family](core.target_angle, core.axis_phase)
    return PulseSchedule(family, tuple(segments), index)


def schedule_duration(schedule: PulseSchedule) -> float:
    return schedule.duration


def clifford_unitary(index: int, family: Family = Family.PRIMITIVE) -> Unitary2:
    """Ideal unitary of the compiled Clifford, z frame changes included."""
    element = clifford(index)
    core = compile_clifford(index, family).ideal_unitary()
    return rz(element.phi_post) @ core @ rz(element.phi_pre)


def schedule_infidelity(
    schedule: PulseSchedule, detuning: float = 0.0, amplitude: float = 0.0
) -> float:
    """1 - |Tr(U_ideal^dagger U_noisy)/2|^2 under static noise.

    Summed from the Pauli components of the error so that tiny infidelities keep
    their relative precision.
    """
    from rbnoise.core.engine import evolve

    ideal = schedule.ideal_unitary()
    noisy = evolve(schedule, detuning=detuning, amplitude=amplitude)
    v = np.imag(np.einsum("kab,ba->k", PAULIS, ideal.conj().T @ noisy)) / 2
    return float(np.sum(v**2))


def mean_clifford_duration(family: Family) -> float:
    return float(np.mean([compile_clifford(i, family).duration for i in range(1, 25)]))
