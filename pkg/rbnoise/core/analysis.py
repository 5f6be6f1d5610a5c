"""Statistics of survival-probability tensors.

Inputs are arrays of survival probabilities indexed [sequence, realization] (one qubit)
or [sequence, realization, qubit].
"""

from dataclasses import dataclass, field

import numpy as np
from dataclasses_json import DataClassJsonMixin
from scipy.optimize import curve_fit, least_squares

from rbnoise.configs import settings
from rbnoise.core.theory import mixed_variance
from rbnoise.logger import logger
from rbnoise.utils import timeit

MIN_JOINT_OBSERVATIONS = 10


class FitError(RuntimeError):
    """Raised if a fit cannot be set up or does not converge."""

    pass


@dataclass
class VarianceTrajectory:
    n: np.ndarray
    variance: np.ndarray
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    orderings: int = 1
    # variance across sequences of every single realization
    initial_values: np.ndarray | None = None

    def at(self, n: int) -> float:
        return float(self.variance[n - 1])

    def to_csv_rows(self) -> list[tuple[float, ...]]:
        low = self.variance if self.low is None else self.low
        high = self.variance if self.high is None else self.high
        return [
            (int(n), float(v), float(lo), float(hi))
            for n, v, lo, hi in zip(self.n, self.variance, low, high)
        ]


def _validate(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ValueError(f"Invalid survival matrix with shape {p.shape}, need (k, n)")
    if p.shape[0] < 2:
        raise ValueError("Need at least two sequences to estimate a variance")
    if p.shape[1] < 1:
        raise ValueError("Need at least one realization")
    return p


def _trajectory(p: np.ndarray) -> np.ndarray:
    running = np.cumsum(p, axis=1) / np.arange(1, p.shape[1] + 1)
    return np.var(running, axis=0, ddof=1)


def cumulative_variance(
    p: np.ndarray, ordering: np.ndarray | None = None
) -> VarianceTrajectory:
    """Variance across sequences of the running mean over the first n realizations."""
    p = _validate(p)
    if ordering is not None:
        ordering = np.asarray(ordering)
        if ordering.ndim == 1:
            p = p[:, ordering]
        else:
            p = np.take_along_axis(p, ordering, axis=1)
    n = np.arange(1, p.shape[1] + 1)
    return VarianceTrajectory(n, _trajectory(p))


@timeit(2_000)
def shuffle_ensemble(
    p: np.ndarray,
    reorderings: int | None = None,
    rng: np.random.Generator | None = None,
    include_identity: bool = True,
) -> VarianceTrajectory:
    """Mean and min/max band of trajectories over random realization orders."""
    p = _validate(p)
    reorderings = settings.SHUFFLE_REORDERINGS if reorderings is None else reorderings
    if reorderings < 1:
        raise ValueError(f"Invalid reordering count {reorderings}")
    rng = np.random.default_rng() if rng is None else rng
    k, size = p.shape
    base = np.tile(np.arange(size), (k, 1))

    total = np.zeros(size)
    low = np.full(size, np.inf)
    high = np.full(size, -np.inf)
    for r in range(reorderings):
        if r == 0 and include_identity:
            shuffled = p
        else:
            shuffled = np.take_along_axis(p, rng.permuted(base, axis=1), axis=1)
        trajectory = _trajectory(shuffled)
        total += trajectory
        np.minimum(low, trajectory, out=low)
        np.maximum(high, trajectory, out=high)

    return VarianceTrajectory(
        np.arange(1, size + 1),
        total / reorderings,
        low,
        high,
        reorderings,
        np.var(p, axis=0, ddof=1),
    )


def loglog_slope(trajectory: VarianceTrajectory, n_min: int, n_max: int) -> float:
    mask = (trajectory.n >= n_min) & (trajectory.n <= n_max)
    if mask.sum() < 2:
        raise ValueError(f"Invalid slope window [{n_min}, {n_max}]")
    slope, _ = np.polyfit(np.log(trajectory.n[mask]), np.log(trajectory.variance[mask]), 1)
    return float(slope)


@dataclass
class ErrorComponentFit(DataClassJsonMixin):
    sigma_c2: float
    sigma_u2: float
    stderr_c2: float
    stderr_u2: float
    length: int
    residual_norm: float
    converged: bool
    covariance: list[list[float]] = field(default_factory=list)


@timeit(2_000)
def fit_error_components(
    trajectory: VarianceTrajectory, length: int, n_min: int = 1
) -> ErrorComponentFit:
    """Least-squares fit of the mixed-regime variance model in log space."""
    mask = trajectory.n >= n_min
    n, v = trajectory.n[mask].astype(float), trajectory.variance[mask]
    if len(n) < 3:
        raise FitError("Need at least three trajectory points to fit")
    if np.any(v <= 0):
        raise FitError("Cannot fit a trajectory with non-positive variance")

    # error strengths are O(sqrt(V) / J); fit in those units
    scale = 1.5 * np.sqrt(v.max()) / length
    log_v = np.log(v)

    def residuals(x):
        model = mixed_variance(n, length, x[0] * scale, x[1] * scale)
        return np.log(np.maximum(model, 1e-300)) - log_v

    best = None
    for ratio in np.logspace(-2, 2, settings.FIT_STARTS):
        start = np.array([1.0, ratio]) / np.hypot(1.0, ratio)
        result = least_squares(residuals, start, bounds=(0.0, np.inf))
        logger.debug(f"Fit start ratio={ratio:.3g}: cost={result.cost:.4g} x={result.x}")
        if best is None or result.cost < best.cost:
            best = result

    dof = max(len(n) - 2, 1)
    s2 = 2 * best.cost / dof
    covariance = np.linalg.pinv(best.jac.T @ best.jac) * s2 * scale**2
    if not best.success:
        logger.warning(f"Error-component fit did not converge: {best.message}")
    return ErrorComponentFit(
        sigma_c2=float(best.x[0] * scale),
        sigma_u2=float(best.x[1] * scale),
        stderr_c2=float(np.sqrt(max(covariance[0, 0], 0.0))),
        stderr_u2=float(np.sqrt(max(covariance[1, 1], 0.0))),
        length=length,
        residual_norm=float(np.sqrt(2 * best.cost)),
        converged=bool(best.success),
        covariance=covariance.tolist(),
    )


@dataclass
class DecayFit(DataClassJsonMixin):
    p_rb: float
    kappa: float
    stderr_p: float
    stderr_kappa: float
    lengths: list[int] = field(default_factory=list)

    @property
    def interval(self) -> tuple[float, float]:
        """95% interval of p_rb."""
        return self.p_rb - 1.96 * self.stderr_p, self.p_rb + 1.96 * self.stderr_p


def rb_decay(length: np.ndarray, p_rb: float, kappa: float) -> np.ndarray:
    return 0.5 + (0.5 - kappa) * np.exp(-p_rb * np.asarray(length, dtype=float))


def fit_rb_decay(
    lengths: np.ndarray, means: np.ndarray, sem: np.ndarray | None = None
) -> DecayFit:
    """Fit 0.5 + (0.5 - kappa) exp(-p J) to mean survival against sequence length."""
    lengths = np.asarray(lengths, dtype=float)
    means = np.asarray(means, dtype=float)
    if len(np.unique(lengths)) < 3:
        raise FitError("Need at least three distinct sequence lengths")
    span = lengths.max()
    x = lengths / span

    def model(x, q, kappa):
        return 0.5 + (0.5 - kappa) * np.exp(-q * x)

    kappa0 = float(np.clip(1.0 - means[np.argmin(lengths)], 0.0, 0.49))
    tail = np.clip((means[np.argmax(lengths)] - 0.5) / (0.5 - kappa0), 1e-6, 1.0)
    q0 = max(-np.log(tail), 1e-6)
    try:
        popt, pcov = curve_fit(
            model,
            x,
            means,
            p0=[q0, kappa0],
            sigma=sem,
            absolute_sigma=sem is not None,
            bounds=([0.0, 0.0], [np.inf, 0.4999]),
        )
    except (RuntimeError, ValueError) as e:
        raise FitError(f"RB decay fit failed: {e}") from e

    stderr = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    return DecayFit(
        p_rb=float(popt[0] / span),
        kappa=float(popt[1]),
        stderr_p=float(stderr[0] / span),
        stderr_kappa=float(stderr[1]),
        lengths=[int(j) for j in np.unique(lengths)],
    )


def decay_points(
    survival_by_length: dict[int, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lengths, mean survivals and standard errors of the mean."""
    lengths = np.array(sorted(survival_by_length))
    samples = [np.asarray(survival_by_length[j], dtype=float).ravel() for j in lengths]
    means = np.array([s.mean() for s in samples])
    sem = np.array([s.std(ddof=1) / np.sqrt(len(s)) for s in samples])
    return lengths, means, sem


def error_per_gate(
    mean_survival: np.ndarray | float, length: int, kappa: float = 0.0
) -> np.ndarray | float:
    """-ln((P - 1/2) / (1/2 - kappa)) / J, which is -ln(2P - 1)/J without SPAM."""
    decay = (np.asarray(mean_survival, dtype=float) - 0.5) / (0.5 - kappa)
    if np.any(decay <= 0):
        raise ValueError("Mean survival must exceed 1/2 to define an error per gate")
    epg = -np.log(decay) / length
    return float(epg) if np.ndim(epg) == 0 else epg


@dataclass
class VarianceRatio(DataClassJsonMixin):
    ratio: float
    uncertainty: float


def variance_ratio(trajectory: VarianceTrajectory) -> VarianceRatio:
    """V(1) / V(N), the spread of single realizations over the noise-averaged spread."""
    final = float(trajectory.variance[-1])
    if final <= 0:
        raise ValueError("Final variance is zero, ratio undefined")
    if trajectory.initial_values is None:
        return VarianceRatio(float(trajectory.variance[0]) / final, float("nan"))
    initial = trajectory.initial_values
    sem = initial.std(ddof=1) / np.sqrt(len(initial)) if len(initial) > 1 else np.nan
    return VarianceRatio(float(initial.mean() / final), float(sem / final))


def cross_correlation(p: np.ndarray) -> np.ndarray:
    """Pearson correlation matrix between qubits, last axis indexes the qubit."""
    p = np.asarray(p, dtype=float)
    columns = p.reshape(-1, p.shape[-1])
    if columns.shape[1] < 2:
        raise ValueError("Need at least two qubits for a cross-correlation")
    if columns.shape[0] < MIN_JOINT_OBSERVATIONS:
        raise ValueError(
            f"Need at least {MIN_JOINT_OBSERVATIONS} joint observations, got {columns.shape[0]}"
        )
    if np.any(columns.std(axis=0) == 0):
        raise ValueError("Cannot correlate a qubit with zero variance")
    return np.corrcoef(columns, rowvar=False)


@dataclass
class QPNBounds:
    shots: int
    worst_case: float
    upper: np.ndarray
    lower: np.ndarray

    def to_csv_rows(self) -> list[tuple[float, ...]]:
        return [
            (n + 1, self.worst_case, float(u), float(lo))
            for n, (u, lo) in enumerate(zip(self.upper, self.lower))
        ]


def qpn_bounds(
    p: np.ndarray,
    shots: int,
    reorderings: int | None = None,
    rng: np.random.Generator | None = None,
) -> QPNBounds:
    """Projection-noise variance levels: 0.25/r, p(1-p)/r and p(1-p)/(n r)."""
    p = _validate(p)
    if shots < 1:
        raise ValueError(f"Invalid shot count {shots}")
    reorderings = settings.QPN_REORDERINGS if reorderings is None else reorderings
    rng = np.random.default_rng() if rng is None else rng
    k, size = p.shape
    n = np.arange(1, size + 1)
    base = np.tile(np.arange(size), (k, 1))
    upper = np.zeros(size)
    for r in range(reorderings):
        shuffled = p if r == 0 else np.take_along_axis(p, rng.permuted(base, axis=1), axis=1)
        running = np.cumsum(shuffled, axis=1) / n
        upper += np.mean(running * (1 - running), axis=0) / shots
    upper /= reorderings
    return QPNBounds(shots, 0.25 / shots, upper, upper / n)


def above_qpn_floor(
    trajectory: VarianceTrajectory, bounds: QPNBounds, margin: float = 1.0
) -> bool:
    return bool(np.all(trajectory.variance >= margin * bounds.lower))
