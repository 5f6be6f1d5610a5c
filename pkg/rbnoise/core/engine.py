"""Monte Carlo simulation of randomized benchmarking under concurrent noise.

A run draws ``sequences`` random Clifford sequences of ``length`` gates, compiles them
with one pulse family and evolves every (sequence, realization, qubit) cell exactly
through piecewise-constant noise. Realizations and qubits of one sequence are evolved
together as a batch of 2x2 unitaries.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from dataclasses_json import DataClassJsonMixin, Undefined, config

from rbnoise.configs import settings
from rbnoise.const import NOISE_STREAM, SEQUENCE_STREAM, SHOTS_STREAM
from rbnoise.core.noise import (
    Channel,
    GradientProfile,
    NoiseSpec,
    NoiseTrace,
    SequenceTiming,
    Spatial,
    gradient_profile,
    sample_trace,
)
from rbnoise.core.pulses import Family, PulseSchedule, PulseSegment, compile_clifford
from rbnoise.core.rotations import (
    HALF_PI,
    CliffordSequence,
    Unitary2,
    clifford,
    generate_sequence,
)
from rbnoise.logger import logger
from rbnoise.utils import timeit

EDGE_TOLERANCE = 1e-9


class GridMisalignmentError(ValueError):
    """Raised if a noise trace does not cover the schedule it is applied to."""

    pass


class BudgetExceededError(ValueError):
    """Raised if a run would evaluate more cells than the configured budget."""

    pass


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for one (stream, sequence, realization, qubit) cell."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass
class ExperimentConfig(DataClassJsonMixin):
    dataclass_json_config = config(undefined=Undefined.RAISE)["dataclasses_json"]

    label: str = "run"
    sequences: int = 50
    length: int = 100
    realizations: int = 200
    shots: int = 0
    family: Family = Family.PRIMITIVE
    noise: list[NoiseSpec] = field(default_factory=list)
    qubits: int = 1
    gradient: float = 0.0
    detuning_gradient: float = 0.0
    kappa: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sequences < 1 or self.realizations < 1:
            raise ValueError(
                f"Invalid run size k={self.sequences}, n={self.realizations}"
            )
        if self.length < 2:
            raise ValueError(f"Invalid sequence length {self.length}, need J >= 2")
        if self.shots < 0:
            raise ValueError(f"Invalid shot count {self.shots}")
        if not 0 <= self.kappa < 0.5:
            raise ValueError(f"Invalid SPAM flip probability {self.kappa}")
        if self.seed < 0:
            raise ValueError(f"Invalid seed {self.seed}")
        # validates qubit count and gradient range
        self.profile()

    @property
    def cells(self) -> int:
        return self.sequences * self.length * self.realizations * self.qubits

    def profile(self) -> GradientProfile:
        return gradient_profile(self.qubits, self.gradient, self.detuning_gradient)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    survival: np.ndarray
    sequences: list[CliffordSequence]
    durations: np.ndarray
    estimates: Optional[np.ndarray] = None
    elapsed: float = 0.0

    @property
    def measured(self) -> np.ndarray:
        """Shot estimates when shots were taken, exact probabilities otherwise."""
        return self.survival if self.estimates is None else self.estimates

    @property
    def mean_duration(self) -> float:
        return float(np.mean(self.durations))

    def qubit(self, q: int) -> np.ndarray:
        return self.measured[:, :, q]


@dataclass(frozen=True)
class _ChannelTrace:
    channel: Channel
    edges: np.ndarray
    values: np.ndarray  # (batch, cells)

    def sample(self, t: float) -> np.ndarray:
        cells = self.values.shape[1]
        index = int(np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, cells - 1))
        return self.values[:, index]


def su2_exp(generator: np.ndarray) -> np.ndarray:
    """exp(-i g.sigma/2) for a batch of rotation vectors (..., 3) -> (..., 2, 2)."""
    angle = np.linalg.norm(generator, axis=-1)
    c = np.cos(angle / 2)
    s = 0.5 * np.sinc(angle / (2 * np.pi))
    gx, gy, gz = (s * generator[..., k] for k in range(3))
    u = np.empty(generator.shape[:-1] + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * gz
    u[..., 0, 1] = -1j * gx - gy
    u[..., 1, 0] = -1j * gx + gy
    u[..., 1, 1] = c + 1j * gz
    return u


def _apply_rz(u: np.ndarray, phi: float) -> np.ndarray:
    if phi == 0:
        return u
    u[..., 0, :] *= np.exp(-0.5j * phi)
    u[..., 1, :] *= np.exp(0.5j * phi)
    return u


def polar(u: np.ndarray) -> np.ndarray:
    """Nearest unitary to each matrix of the batch."""
    left, _, right = np.linalg.svd(u)
    return left @ right


class _Propagator:
    """Evolves a batch of unitaries through timed segments and noise traces."""

    def __init__(
        self,
        traces: list[_ChannelTrace],
        multipliers: np.ndarray,
        offsets: np.ndarray,
    ):
        self.traces = traces
        self.multipliers = multipliers
        self.offsets = offsets
        self.edges = np.unique(np.concatenate([t.edges for t in traces] or [[0.0]]))

    def _field(self, channel: Channel, t: float) -> np.ndarray:
        total = np.zeros(len(self.multipliers))
        for trace in self.traces:
            if trace.channel == channel:
                total = total + trace.sample(t)
        return total

    def _pieces(self, start: float, stop: float) -> list[tuple[float, float]]:
        inner = self.edges[
            (self.edges > start + EDGE_TOLERANCE) & (self.edges < stop - EDGE_TOLERANCE)
        ]
        points = np.concatenate([[start], inner, [stop]])
        return list(zip(points[:-1], points[1:]))

    def segment(self, u: np.ndarray, segment: PulseSegment, start: float) -> np.ndarray:
        length = segment.duration
        if length == 0:
            return u
        axis = segment.axis
        for a, b in self._pieces(start, start + length):
            middle = 0.5 * (a + b)
            detuning = self._field(Channel.DETUNING, middle) + self.offsets
            generator = np.zeros((len(self.multipliers), 3))
            generator[:, 2] = (b - a) * HALF_PI * detuning
            if segment.driven:
                amplitude = self._field(Channel.AMPLITUDE, middle)
                angle = abs(segment.theta) * (b - a) / length
                generator += np.outer(angle * self.multipliers * (1 + amplitude), axis)
            u = su2_exp(generator) @ u
        return u

    def schedule(self, u: np.ndarray, schedule: PulseSchedule, start: float) -> np.ndarray:
        t = start
        for segment in schedule.segments:
            u = self.segment(u, segment, t)
            t += segment.duration
        return u


def _identity_batch(size: int) -> np.ndarray:
    return np.broadcast_to(np.eye(2, dtype=complex), (size, 2, 2)).copy()


def _as_trace(value: NoiseTrace | float | None, duration: float) -> NoiseTrace | None:
    if value is None:
        return None
    if isinstance(value, NoiseTrace):
        if value.duration < duration - EDGE_TOLERANCE:
            raise GridMisalignmentError(
                f"Noise trace ends at {value.duration}, schedule lasts {duration}"
            )
        return value
    return NoiseTrace.constant(float(value), duration)


def _single_traces(
    duration: float, detuning: NoiseTrace | float | None, amplitude: NoiseTrace | float | None
) -> list[_ChannelTrace]:
    traces = []
    for channel, value in ((Channel.DETUNING, detuning), (Channel.AMPLITUDE, amplitude)):
        trace = _as_trace(value, duration)
        if trace is not None:
            traces.append(_ChannelTrace(channel, trace.edges, trace.values[None, :]))
    return traces


def evolve(
    schedule: PulseSchedule,
    detuning: NoiseTrace | float | None = None,
    amplitude: NoiseTrace | float | None = None,
) -> Unitary2:
    """Exact noisy unitary of one schedule starting at t = 0."""
    traces = _single_traces(schedule.duration, detuning, amplitude)
    propagator = _Propagator(traces, np.ones(1), np.zeros(1))
    return propagator.schedule(_identity_batch(1), schedule, 0.0)[0]


def sequence_schedules(sequence: CliffordSequence, family: Family) -> list[PulseSchedule]:
    return [compile_clifford(index, family) for index in sequence]


def sequence_timing(sequence: CliffordSequence, family: Family) -> SequenceTiming:
    return SequenceTiming.from_schedules(sequence_schedules(sequence, family))


def propagate_sequence(
    sequence: CliffordSequence,
    family: Family,
    traces: list[_ChannelTrace],
    multipliers: np.ndarray,
    offsets: np.ndarray,
) -> np.ndarray:
    propagator = _Propagator(traces, multipliers, offsets)
    u = _identity_batch(len(multipliers))
    timing = sequence_timing(sequence, family)
    every = settings.REORTHONORMALIZE_EVERY
    for j, index in enumerate(sequence):
        element = clifford(index)
        u = _apply_rz(u, element.phi_pre)
        u = propagator.schedule(u, compile_clifford(index, family), timing.starts[j])
        u = _apply_rz(u, element.phi_post)
        if every and (j + 1) % every == 0:
            u = polar(u)
    return u


def survival_probability(u: np.ndarray) -> np.ndarray:
    return np.abs(u[..., 0, 0]) ** 2


def apply_spam(p: np.ndarray | float, kappa: float) -> np.ndarray | float:
    """Symmetric preparation and measurement flips with probability kappa."""
    return kappa + (1 - 2 * kappa) * p


def run_sequence(
    sequence: CliffordSequence,
    family: Family = Family.PRIMITIVE,
    detuning: NoiseTrace | float | None = None,
    amplitude: NoiseTrace | float | None = None,
    kappa: float = 0.0,
) -> float:
    """Survival probability of one sequence under one noise realization."""
    duration = sequence_timing(sequence, family).total
    traces = _single_traces(duration, detuning, amplitude)
    u = propagate_sequence(sequence, family, traces, np.ones(1), np.zeros(1))
    return float(apply_spam(survival_probability(u)[0], kappa))


def qpn_sample(
    p: np.ndarray | float, shots: int, rng: np.random.Generator
) -> np.ndarray | float:
    """Binomial(shots, p) / shots."""
    if shots < 1:
        raise ValueError(f"Invalid shot count {shots}")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("Invalid probability outside [0, 1]")
    estimate = rng.binomial(shots, p) / shots
    return float(estimate) if estimate.ndim == 0 else estimate


def _source_values(
    spec: NoiseSpec,
    source: int,
    timing: SequenceTiming,
    run: ExperimentConfig,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Edges and (realizations * qubits, cells) values of one noise source."""
    rows = []
    edges = None
    for i in range(run.realizations):
        shared = None
        for q in range(run.qubits):
            if spec.spatial == Spatial.SHARED and shared is not None:
                rows.append(shared)
                continue
            qubit_key = 0 if spec.spatial == Spatial.SHARED else q
            rng = cell_rng(run.seed, NOISE_STREAM + source, k, i, qubit_key)
            trace = sample_trace(spec, timing, rng, realization=i, seed=run.seed)
            edges = trace.edges
            shared = trace.values
            rows.append(trace.values)
    return edges, np.vstack(rows)


def _simulate_sequence(args: tuple[ExperimentConfig, int]):
    run, k = args
    sequence = generate_sequence(run.length, cell_rng(run.seed, SEQUENCE_STREAM, k))
    timing = sequence_timing(sequence, run.family)
    traces = []
    for source, spec in enumerate(run.noise):
        edges, values = _source_values(spec, source, timing, run, k)
        traces.append(_ChannelTrace(spec.channel, edges, values))

    profile = run.profile()
    multipliers = np.tile(profile.multipliers, run.realizations)
    offsets = np.tile(profile.detuning_offsets, run.realizations)
    u = propagate_sequence(sequence, run.family, traces, multipliers, offsets)
    exact = apply_spam(survival_probability(u), run.kappa)
    exact = np.clip(exact.reshape(run.realizations, run.qubits), 0.0, 1.0)

    estimates = None
    if run.shots:
        estimates = qpn_sample(exact, run.shots, cell_rng(run.seed, SHOTS_STREAM, k))
    return k, sequence, timing.total, exact, estimates


def check_budget(run: ExperimentConfig, budget: int | None = None) -> None:
    budget = settings.BUDGET_CELLS if budget is None else budget
    if run.cells > budget:
        raise BudgetExceededError(
            f"Run {run.label} needs {run.cells} cells, budget is {budget}"
        )


@timeit(5_000)
def run_experiment(
    run: ExperimentConfig, workers: int | None = None, budget: int | None = None
) -> ExperimentResult:
    check_budget(run, budget)
    workers = settings.WORKERS if workers is None else workers
    logger.info(
        f"Run {run.label}: family={run.family.value} k={run.sequences} "
        f"J={run.length} n={run.realizations} q={run.qubits} workers={workers}"
    )
    start = time.perf_counter()
    shape = (run.sequences, run.realizations, run.qubits)
    survival = np.zeros(shape)
    estimates = np.zeros(shape) if run.shots else None
    sequences: list[CliffordSequence | None] = [None] * run.sequences
    durations = np.zeros(run.sequences)

    jobs = [(run, k) for k in range(run.sequences)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_simulate_sequence, jobs, chunksize=4))
    else:
        outputs = map(_simulate_sequence, jobs)

    for k, sequence, duration, exact, estimate in outputs:
        sequences[k] = sequence
        durations[k] = duration
        survival[k] = exact
        if estimates is not None:
            estimates[k] = estimate

    elapsed = time.perf_counter() - start
    logger.info(f"Run {run.label} finished in {elapsed:.2f}s")
    return ExperimentResult(run, survival, sequences, durations, estimates, elapsed)
