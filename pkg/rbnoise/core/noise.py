"""Piecewise-constant noise traces on the lab-time axis of a compiled sequence."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from dataclasses_json import DataClassJsonMixin, Undefined, config

from rbnoise.core.pulses import PulseSchedule


class Channel(Enum):
    DETUNING = "detuning"
    AMPLITUDE = "amplitude"
    # unit z error after every gate, analytic walk model only
    DEPHASING = "dephasing"

    @classmethod
    def concurrent(cls) -> list["Channel"]:
        return [cls.DETUNING, cls.AMPLITUDE]


class Correlation(Enum):
    FULL = "full"
    PER_PI2_TIME = "per_pi2_time"
    BLOCK = "block"
    MIXED = "mixed"


class Spatial(Enum):
    SHARED = "shared"
    INDEPENDENT = "independent"


GRADIENT_LIMIT = 0.05


@dataclass
class NoiseSpec(DataClassJsonMixin):
    dataclass_json_config = config(undefined=Undefined.RAISE)["dataclasses_json"]

    channel: Channel = Channel.DETUNING
    correlation: Correlation = Correlation.FULL
    rms2: float = 0.0
    # block length in virtual gates, BLOCK mode and the correlated part of MIXED
    block_gates: Optional[int] = None
    rms2_correlated: float = 0.0
    rms2_uncorrelated: float = 0.0
    spatial: Spatial = Spatial.SHARED

    def __post_init__(self):
        for name in ("rms2", "rms2_correlated", "rms2_uncorrelated"):
            if getattr(self, name) < 0:
                raise ValueError(f"Invalid noise variance {name}={getattr(self, name)}")
        if self.block_gates is not None and self.block_gates < 1:
            raise ValueError(f"Invalid block length {self.block_gates}")
        if self.correlation == Correlation.BLOCK and self.block_gates is None:
            raise ValueError("Block correlation requires block_gates")
        if self.channel == Channel.DEPHASING:
            raise ValueError("Interleaved dephasing is not a concurrent noise channel")

    @property
    def total_rms2(self) -> float:
        if self.correlation == Correlation.MIXED:
            return self.rms2_correlated + self.rms2_uncorrelated
        return self.rms2


@dataclass(frozen=True)
class SequenceTiming:
    starts: np.ndarray
    durations: np.ndarray

    @classmethod
    def from_schedules(cls, schedules: Sequence[PulseSchedule]) -> "SequenceTiming":
        durations = np.array([s.duration for s in schedules], dtype=float)
        starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
        return cls(starts, durations)

    @property
    def total(self) -> float:
        return float(self.starts[-1] + self.durations[-1]) if len(self.starts) else 0.0

    @property
    def gates(self) -> int:
        return len(self.starts)

    def grid_edges(self) -> np.ndarray:
        """Cell edges every pi/2-time unit, last cell clipped at the end."""
        total = self.total
        if total == 0:
            return np.array([0.0, 0.0])
        return np.append(np.arange(0.0, np.ceil(total)), total)

    def block_edges(self, block_gates: int | None) -> np.ndarray:
        """Cell edges at the start of every block of ``block_gates`` virtual gates."""
        if block_gates is None or block_gates >= self.gates:
            return np.array([0.0, self.total])
        return np.append(self.starts[::block_gates], self.total)


@dataclass(frozen=True)
class NoiseTrace:
    edges: np.ndarray
    values: np.ndarray
    realization: int = 0
    seed: int | None = None

    def __post_init__(self):
        if len(self.edges) != len(self.values) + 1:
            raise ValueError(
                f"Invalid trace: {len(self.edges)} edges for {len(self.values)} values"
            )
        if np.any(np.diff(self.edges) < 0):
            raise ValueError("Invalid trace: edges must be non-decreasing")

    @classmethod
    def constant(cls, value: float, duration: float) -> "NoiseTrace":
        return cls(np.array([0.0, duration]), np.array([float(value)]))

    @property
    def duration(self) -> float:
        return float(self.edges[-1])

    def cell_of(self, t: np.ndarray | float) -> np.ndarray:
        index = np.searchsorted(self.edges, t, side="right") - 1
        return np.clip(index, 0, len(self.values) - 1)

    def value_at(self, t: np.ndarray | float) -> np.ndarray:
        return self.values[self.cell_of(t)]

    def to_csv_rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(a), float(b), float(v))
            for a, b, v in zip(self.edges[:-1], self.edges[1:], self.values)
        ]


def combine_traces(a: NoiseTrace, b: NoiseTrace) -> NoiseTrace:
    """Sum of two traces on the union of their edges."""
    edges = np.union1d(a.edges, b.edges)
    if len(edges) < 2:
        edges = np.array([edges[0], edges[0]])
    middles = 0.5 * (edges[:-1] + edges[1:])
    values = a.value_at(middles) + b.value_at(middles)
    return NoiseTrace(edges, values, a.realization, a.seed)


def _normal(rng: np.random.Generator, rms2: float, size: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(rms2), size=size)


def _sample(edges: np.ndarray, rms2: float, rng: np.random.Generator) -> NoiseTrace:
    return NoiseTrace(edges, _normal(rng, rms2, len(edges) - 1))


def sample_trace(
    spec: NoiseSpec,
    timing: SequenceTiming,
    rng: np.random.Generator,
    realization: int = 0,
    seed: int | None = None,
) -> NoiseTrace:
    """Draw one realization of ``spec`` on the lab-time axis of ``timing``."""
    match spec.correlation:
        case Correlation.FULL:
            trace = _sample(timing.block_edges(None), spec.rms2, rng)
        case Correlation.PER_PI2_TIME:
            trace = _sample(timing.grid_edges(), spec.rms2, rng)
        case Correlation.BLOCK:
            trace = _sample(timing.block_edges(spec.block_gates), spec.rms2, rng)
        case Correlation.MIXED:
            correlated_rng, uncorrelated_rng = rng.spawn(2)
            correlated = _sample(
                timing.block_edges(spec.block_gates),
                spec.rms2_correlated,
                correlated_rng,
            )
            uncorrelated = _sample(
                timing.grid_edges(), spec.rms2_uncorrelated, uncorrelated_rng
            )
            trace = combine_traces(correlated, uncorrelated)
        case _:
            raise ValueError(f"Invalid correlation mode {spec.correlation}")
    return NoiseTrace(trace.edges, trace.values, realization, seed)


@dataclass(frozen=True)
class GradientProfile:
    multipliers: np.ndarray
    detuning_offsets: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def qubits(self) -> int:
        return len(self.multipliers)


def gradient_profile(
    num_qubits: int, gamma: float, detuning_gradient: float = 0.0
) -> GradientProfile:
    """Per-qubit Rabi multipliers g_q = 1 + q*gamma and static detuning offsets."""
    if num_qubits < 1:
        raise ValueError(f"Invalid qubit count {num_qubits}")
    if abs(gamma) >= GRADIENT_LIMIT:
        raise ValueError(f"Invalid gradient {gamma}, need |gamma| < {GRADIENT_LIMIT}")
    q = np.arange(num_qubits, dtype=float)
    return GradientProfile(1.0 + q * gamma, q * detuning_gradient)
