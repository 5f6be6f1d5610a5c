"""Analytic random-walk model of randomized benchmarking under weak noise.

Each Clifford contributes a first-order error vector; expressed in the frame before the
sequence these vectors form a walk R whose projection on the xy plane sets the
sequence infidelity, 1 - P ~ |R_xy|^2. The closed-form moments of the walk map
physical noise strengths onto error strengths and onto Gamma-distributed survival.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from cachetools import cached
from dataclasses_json import DataClassJsonMixin
from scipy import stats

from rbnoise.configs import settings
from rbnoise.core.engine import evolve
from rbnoise.core.filterfn import first_order_vector as schedule_vector
from rbnoise.core.filterfn import interval_response
from rbnoise.core.noise import Channel
from rbnoise.core.pulses import Family, compile_clifford
from rbnoise.core.rotations import (
    CLIFFORD_COUNT,
    PAULIS,
    CliffordSequence,
    adjoint,
    clifford,
    clifford_table,
    rz,
)
from rbnoise.logger import logger

Z_AXIS = np.array([0.0, 0.0, 1.0])


class StrongNoiseError(ValueError):
    """Raised if an error map rotates by pi/2 or more, where the log branch is ambiguous."""

    pass


class Bandwidth(Enum):
    PER_GATE = "per_gate"
    PER_PI2_TIME = "per_pi2_time"


class Regime(Enum):
    CORRELATED = "correlated"
    UNCORRELATED = "uncorrelated"
    MIXED = "mixed"


@dataclass(frozen=True)
class ErrorVector:
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, v: np.ndarray) -> "ErrorVector":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def error_vector(lam: np.ndarray) -> np.ndarray:
    """Pauli coefficients eps of Lambda = exp(i eps.sigma) for Lambda in SU(2)."""
    w = float(np.real(np.trace(lam))) / 2
    v = np.imag(np.einsum("kab,ba->k", PAULIS, lam)) / 2
    if w <= 0:
        raise StrongNoiseError(f"Error map rotates by at least pi/2 (Re Tr/2 = {w:.3g})")
    size = np.linalg.norm(v)
    if size == 0:
        return np.zeros(3)
    return np.arctan2(size, w) * v / size


def error_map(
    index: int,
    noise: float,
    channel: Channel = Channel.DETUNING,
    family: Family = Family.PRIMITIVE,
) -> tuple[ErrorVector, np.ndarray]:
    """Error map Lambda = U_noisy U_ideal^dagger of a compiled Clifford under static noise."""
    element = clifford(index)
    if channel == Channel.DEPHASING:
        lam = np.cos(noise) * np.eye(2) + 1j * np.sin(noise) * PAULIS[2]
        return ErrorVector(0.0, 0.0, float(noise)), lam

    schedule = compile_clifford(index, family)
    if channel == Channel.DETUNING:
        noisy_core = evolve(schedule, detuning=noise)
    else:
        noisy_core = evolve(schedule, amplitude=noise)
    pre, post = rz(element.phi_pre), rz(element.phi_post)
    ideal = post @ schedule.ideal_unitary() @ pre
    noisy = post @ noisy_core @ pre
    lam = noisy @ ideal.conj().T
    return ErrorVector.of(error_vector(lam)), lam


def first_order_vector(
    index: int, channel: Channel, family: Family = Family.PRIMITIVE
) -> np.ndarray:
    """Error vector of a Clifford at unit static noise, frame before the gate."""
    element = clifford(index)
    if channel == Channel.DEPHASING:
        return adjoint(element.unitary).T @ Z_AXIS
    vector = schedule_vector(compile_clifford(index, family), channel)
    return adjoint(rz(element.phi_pre)).T @ vector


def cell_vectors(
    index: int, channel: Channel, family: Family = Family.PRIMITIVE
) -> np.ndarray:
    """First-order vectors of each pi/2-time cell of a Clifford, frame before the gate."""
    if channel == Channel.DEPHASING:
        return first_order_vector(index, channel, family)[None, :]
    element = clifford(index)
    schedule = compile_clifford(index, family)
    duration = schedule.duration
    if duration == 0:
        return np.zeros((0, 3))
    edges = np.append(np.arange(0.0, np.ceil(duration)), duration)
    vectors = interval_response(schedule, channel, edges)
    return vectors @ adjoint(rz(element.phi_pre))


def _frames(sequence: CliffordSequence) -> list[np.ndarray]:
    """Adjoint of the ideal product before each gate."""
    products = sequence.prefix_products()[:-1]
    return [clifford(p).frame for p in products]


def walk_steps(
    sequence: CliffordSequence,
    channel: Channel = Channel.DETUNING,
    family: Family = Family.PRIMITIVE,
) -> np.ndarray:
    """Per-gate steps of the error walk in the frame before the sequence, shape (J, 3)."""
    steps = [
        frame.T @ first_order_vector(index, channel, family)
        for frame, index in zip(_frames(sequence), sequence)
    ]
    return np.array(steps)


def walk_cells(
    sequence: CliffordSequence,
    channel: Channel = Channel.DETUNING,
    family: Family = Family.PRIMITIVE,
) -> tuple[np.ndarray, np.ndarray]:
    """pi/2-cell steps of the walk and the gate each cell belongs to."""
    steps, owners = [], []
    for j, (frame, index) in enumerate(zip(_frames(sequence), sequence)):
        cells = cell_vectors(index, channel, family)
        steps.extend(cells @ frame)
        owners.extend([j] * len(cells))
    return np.array(steps).reshape(-1, 3), np.array(owners, dtype=int)


@dataclass(frozen=True)
class WalkRecord:
    steps: np.ndarray
    r3d: np.ndarray
    r2d: np.ndarray

    @property
    def survival(self) -> np.ndarray | float:
        return survival_from_walk(self.r2d)

    @property
    def exact_survival(self) -> np.ndarray | float:
        return exact_walk_survival(self.r3d)


def accumulate_walk(steps: np.ndarray, epsilons: np.ndarray) -> WalkRecord:
    """Walk R = sum_j eps_j r_j for one (J,) or many (n, J) noise draws."""
    epsilons = np.asarray(epsilons, dtype=float)
    if epsilons.shape[-1] != len(steps):
        raise ValueError(
            f"Invalid walk: {len(steps)} steps for {epsilons.shape[-1]} noise values"
        )
    r3d = epsilons @ steps
    return WalkRecord(steps, r3d, r3d[..., :2])


def survival_from_walk(r2d: np.ndarray) -> np.ndarray | float:
    p = 1.0 - np.sum(np.asarray(r2d) ** 2, axis=-1)
    return float(p) if np.ndim(p) == 0 else p


def exact_walk_survival(r3d: np.ndarray) -> np.ndarray | float:
    """Survival of |0> under exp(i R.sigma), all orders in |R|."""
    r3d = np.asarray(r3d)
    size2 = np.sum(r3d**2, axis=-1)
    xy2 = np.sum(r3d[..., :2] ** 2, axis=-1)
    size = np.sqrt(size2)
    ratio = np.divide(xy2, size2, out=np.zeros_like(size2), where=size2 > 0)
    p = 1.0 - np.sin(size) ** 2 * ratio
    return float(p) if np.ndim(p) == 0 else p


@dataclass(frozen=True)
class MomentTriple(DataClassJsonMixin):
    e2: float
    e4: float
    cov: float


@dataclass(frozen=True)
class StepMoments(DataClassJsonMixin):
    channel: Channel
    bandwidth: Bandwidth
    closed: MomentTriple
    enumerated: MomentTriple

    def agrees(self, tol: float = 1e-12) -> dict[str, bool]:
        return {
            name: abs(getattr(self.closed, name) - getattr(self.enumerated, name)) <= tol
            for name in ("e2", "e4", "cov")
        }


PI2, PI4 = np.pi**2, np.pi**4
_DETUNING_E2 = (2 / 3) * (1 / 2 + PI2 / 96)
_DETUNING_E4 = (2 / 3) * (7 / 24 + PI4 / 384)
_DETUNING_CELL_E2 = (2 / 3) * (1 / 2 + PI2 / 192)
CLOSED_FORMS = {
    (Channel.DEPHASING, Bandwidth.PER_GATE): MomentTriple(2 / 3, 2 / 3, 2 / 9),
    (Channel.DETUNING, Bandwidth.PER_GATE): MomentTriple(
        _DETUNING_E2, _DETUNING_E4, _DETUNING_E4 - _DETUNING_E2**2
    ),
    (Channel.DETUNING, Bandwidth.PER_PI2_TIME): MomentTriple(
        _DETUNING_CELL_E2,
        (2 / 3) * (1 / 4 + PI4 / 1536),
        17 / 108 + PI4 / 1152 - (4 / 9) * (1 / 2 + PI2 / 192) * (1 / 2 + PI2 / 96),
    ),
    (Channel.AMPLITUDE, Bandwidth.PER_GATE): MomentTriple(
        PI2 / 18, 5 * PI4 / 576, 29 * PI4 / 5184
    ),
    (Channel.AMPLITUDE, Bandwidth.PER_PI2_TIME): MomentTriple(
        PI2 / 36, 5 * PI4 / 2304, 29 * PI4 / 10368
    ),
}


def _axis_variances(index: int, channel: Channel, bandwidth: Bandwidth) -> np.ndarray:
    """Per-axis sum of squared cell vectors; cells carry independent noise."""
    if bandwidth == Bandwidth.PER_GATE:
        cells = first_order_vector(index, channel)[None, :]
    else:
        cells = cell_vectors(index, channel)
    return np.sum(cells**2, axis=0)


@cached(cache={})
def _enumerate(channel: Channel, bandwidth: Bandwidth) -> MomentTriple:
    # Every Clifford frame is a signed permutation, so per-axis variances permute.
    frames = [np.rint(c.frame) ** 2 for c in clifford_table()]
    u2, c2 = [], []
    for element in clifford_table():
        uncorrelated = _axis_variances(element.index, channel, bandwidth)
        correlated = _axis_variances(element.index, channel, Bandwidth.PER_GATE)
        for frame in frames:
            u2.append(np.sum((frame.T @ uncorrelated)[:2]))
            c2.append(np.sum((frame.T @ correlated)[:2]))
    u2, c2 = np.array(u2), np.array(c2)
    return MomentTriple(
        float(np.mean(u2)),
        float(np.mean(u2**2)),
        float(np.mean(u2 * c2) - np.mean(u2) * np.mean(c2)),
    )


def expected_step_moments(channel: Channel, bandwidth: Bandwidth) -> StepMoments:
    """Closed-form step moments with their brute-force enumeration over 24 x 24 frames."""
    key = (channel, bandwidth)
    if key not in CLOSED_FORMS:
        raise ValueError(f"Unsupported channel/bandwidth {channel.value}/{bandwidth.value}")
    return StepMoments(channel, bandwidth, CLOSED_FORMS[key], _enumerate(channel, bandwidth))


@dataclass(frozen=True)
class ErrorStrengths(DataClassJsonMixin):
    sigma_c2: float = 0.0
    sigma_u2: float = 0.0
    sigma_c4: float = 0.0
    sigma_u4: float = 0.0
    cross: float = 0.0

    @classmethod
    def generic(cls, sigma_c2: float = 0.0, sigma_u2: float = 0.0) -> "ErrorStrengths":
        """Unit-step walk: fourth moments are squares of the second."""
        return cls(sigma_c2, sigma_u2, sigma_c2**2, sigma_u2**2, sigma_c2 * sigma_u2)

    @property
    def regime(self) -> Regime:
        if self.sigma_c2 and self.sigma_u2:
            return Regime.MIXED
        return Regime.CORRELATED if self.sigma_c2 else Regime.UNCORRELATED


def noise_to_error(
    channel: Channel,
    bandwidth: Bandwidth,
    rho2_c: float,
    rho2_u: float,
    length: int,
    realizations: int,
) -> ErrorStrengths:
    """Physical noise variances to error strengths of the walk model."""
    if rho2_c < 0 or rho2_u < 0:
        raise ValueError("Invalid negative noise variance")
    if length * (rho2_c + rho2_u) > settings.STRONG_NOISE_THRESHOLD:
        logger.warning(
            f"J*rho^2 = {length * (rho2_c + rho2_u):.3g} is outside the weak-noise regime"
        )
    J, n = length, realizations
    c = expected_step_moments(channel, Bandwidth.PER_GATE).closed
    u = expected_step_moments(channel, bandwidth).closed
    return ErrorStrengths(
        sigma_c2=1.5 * c.e2 * rho2_c,
        sigma_u2=1.5 * u.e2 * rho2_u,
        sigma_c4=4.5 * (c.e4 + (J - 2) * c.e2**2) / (2 * J - 1) * rho2_c**2,
        sigma_u4=4.5 * ((2 + n) * u.e4 + (J - 1 - n) * u.e2**2) / (4 + 2 * J + n) * rho2_u**2,
        cross=4.5 * u.cov * rho2_c * rho2_u,
    )


@dataclass(frozen=True)
class MomentPrediction(DataClassJsonMixin):
    regime: Regime
    length: int
    realizations: int
    mean_error: float
    variance: float
    strengths: ErrorStrengths = field(default_factory=ErrorStrengths)

    @property
    def mean_survival(self) -> float:
        return 1.0 - self.mean_error


def _correlated_variance(J: int, n: int, sigma_c4: float) -> float:
    return (2 / 9) * ((n + 2) / n) * J * (2 * J - 1) * sigma_c4


def _uncorrelated_variance(J: int, n: int, sigma_u4: float) -> float:
    return (2 / (9 * n)) * J * (4 + 2 * J + n) * sigma_u4


def moments(
    regime: Regime, length: int, realizations: int, strengths: ErrorStrengths
) -> MomentPrediction:
    """Mean and variance across sequences of the noise-averaged error 1 - P."""
    J, n = length, realizations
    if J < 1 or n < 1:
        raise ValueError(f"Invalid J={J}, n={n}")
    if regime == Regime.CORRELATED:
        mean = (2 / 3) * J * strengths.sigma_c2
        var = _correlated_variance(J, n, strengths.sigma_c4)
    elif regime == Regime.UNCORRELATED:
        mean = (2 / 3) * J * strengths.sigma_u2
        var = _uncorrelated_variance(J, n, strengths.sigma_u4)
    else:
        mean = (2 / 3) * J * (strengths.sigma_c2 + strengths.sigma_u2)
        var = (
            _correlated_variance(J, n, strengths.sigma_c4)
            + _uncorrelated_variance(J, n, strengths.sigma_u4)
            + (4 / 9) * J * strengths.cross
        )
    return MomentPrediction(regime, J, n, float(mean), float(var), strengths)


def mixed_variance(
    n: np.ndarray, length: int, sigma_c2: float, sigma_u2: float
) -> np.ndarray:
    """Mixed-regime variance with unit-step fourth moments, vectorised over n."""
    n = np.asarray(n, dtype=float)
    J = length
    return (
        (2 / 9) * ((n + 2) / n) * J * (2 * J - 1) * sigma_c2**2
        + (2 / (9 * n)) * J * (4 + 2 * J + n) * sigma_u2**2
        + (4 / 9) * J * sigma_c2 * sigma_u2
    )


@dataclass(frozen=True)
class GammaParams(DataClassJsonMixin):
    shape: float
    scale: float

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2

    def distribution(self):
        return stats.gamma(a=self.shape, scale=self.scale)


def gamma_params(
    regime: Regime,
    length: int,
    realizations: int,
    sigma2: float,
    channel: Channel | None = None,
    bandwidth: Bandwidth = Bandwidth.PER_GATE,
) -> GammaParams:
    """Gamma law of the noise-averaged error.

    Without a channel sigma2 is an error strength and the unit-step walk is assumed.
    With a channel sigma2 is the physical noise variance rho^2 and the mean step of
    that channel replaces the unit step.
    """
    if regime == Regime.MIXED:
        raise ValueError("Gamma parameters are defined for single-component regimes")
    J, n = length, realizations
    e2 = 2 / 3 if channel is None else expected_step_moments(channel, bandwidth).closed.e2
    if regime == Regime.CORRELATED:
        return GammaParams(1.0, J * e2 * sigma2)
    return GammaParams(float(n), J * e2 * sigma2 / n)


def concurrent_detuning_variance(
    regime: Regime, length: int, realizations: int, rho2: float
) -> float:
    """Long-form variance for one detuning value per gate."""
    J, n = length, realizations
    c = 1 / 2 + PI2 / 96
    d = 7 / 36 + PI4 / 576
    scale = J**2 * rho2**2 / n
    if regime == Regime.UNCORRELATED:
        return scale * (
            (4 / 9) * c**2
            + (3 * d - (8 / 9) * c**2) / J
            + (n - 1) / J * (d - (4 / 9) * c**2)
        )
    if regime == Regime.CORRELATED:
        return scale * (
            (12 / 9) * c**2
            + (3 * d - (8 / 3) * c**2) / J
            + (n - 1) * ((4 / 9) * c**2 + (d - (8 / 9) * c**2) / J)
        )
    raise ValueError("Long-form variances exist for correlated or uncorrelated noise")


def saturation_ratio(regime: Regime, length: int, realizations: int) -> float:
    """V(n) / V(1) of the long-form detuning variances."""
    return concurrent_detuning_variance(
        regime, length, realizations, 1.0
    ) / concurrent_detuning_variance(regime, length, 1, 1.0)


def predict(
    channel: Channel,
    bandwidth: Bandwidth,
    rho2_c: float,
    rho2_u: float,
    length: int,
    realizations: int,
) -> dict:
    """Chain noise -> error strengths -> moments -> Gamma into a JSON-ready record."""
    strengths = noise_to_error(channel, bandwidth, rho2_c, rho2_u, length, realizations)
    prediction = moments(strengths.regime, length, realizations, strengths)
    record = {
        "channel": channel.value,
        "bandwidth": bandwidth.value,
        "rho2_correlated": rho2_c,
        "rho2_uncorrelated": rho2_u,
        "prediction": prediction.to_dict(encode_json=True),
    }
    if strengths.regime != Regime.MIXED:
        rho2 = rho2_c if strengths.regime == Regime.CORRELATED else rho2_u
        gamma = gamma_params(
            strengths.regime, length, realizations, rho2, channel, bandwidth
        )
        record["gamma"] = gamma.to_dict()
    return record


@dataclass(frozen=True)
class Autocorrelation:
    lags: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    correlation_length: float
    decay_lag: int


def error_autocorrelation(
    sequence: CliffordSequence,
    block_gates: int,
    rng: np.random.Generator,
    realizations: int = 200,
    rms2: float = 2e-3,
    max_lag: int = 100,
) -> Autocorrelation:
    """Autocorrelation of the per-gate error magnitude under block-correlated detuning."""
    if block_gates < 1:
        raise ValueError(f"Invalid block length {block_gates}")
    J = len(sequence)
    if max_lag >= J:
        raise ValueError(f"Invalid max lag {max_lag} for {J} gates")
    magnitudes = np.array(
        [np.linalg.norm(first_order_vector(i, Channel.DETUNING)) for i in sequence]
    )
    blocks = -(-J // block_gates)
    values = rng.normal(0.0, np.sqrt(rms2), size=(realizations, blocks))
    x = np.abs(np.repeat(values, block_gates, axis=1)[:, :J]) * magnitudes

    lags = np.arange(max_lag + 1)
    raw = np.array([np.mean(x[:, : J - lag] * x[:, lag:]) for lag in lags])
    # Covariance over the noise ensemble, gate by gate: the fixed magnitude pattern
    # of the sequence drops out.
    centered = x - x.mean(axis=0)
    cov = np.array([np.mean(centered[:, : J - lag] * centered[:, lag:]) for lag in lags])
    normalized = cov / cov[0]

    floor = 5.0 / np.sqrt(x.size)
    if normalized[1] <= floor:
        length = 1.0
    else:
        length = float(2 * np.sum(normalized[1:]) / normalized[1])
    below = np.flatnonzero(normalized < np.exp(-1))
    decay_lag = int(below[0]) if len(below) else max_lag
    return Autocorrelation(lags, raw, normalized, length, decay_lag)


def clifford_step_table(channel: Channel, family: Family = Family.PRIMITIVE) -> np.ndarray:
    """First-order vectors of all 24 Cliffords, shape (24, 3)."""
    return np.array(
        [first_order_vector(i, channel, family) for i in range(1, CLIFFORD_COUNT + 1)]
    )
