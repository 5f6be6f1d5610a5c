from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from dataclasses_json import DataClassJsonMixin

from rbnoise.const import REPORT_FILE
from rbnoise.core.analysis import (
    ErrorComponentFit,
    FitError,
    QPNBounds,
    VarianceRatio,
    VarianceTrajectory,
    above_qpn_floor,
    cross_correlation,
    error_per_gate,
    fit_error_components,
    loglog_slope,
    qpn_bounds,
    shuffle_ensemble,
    variance_ratio,
)
from rbnoise.logger import logger
from rbnoise.storage.bundle import Bundle, RunData, config_hash, write_csv, write_json
from rbnoise.storage.config import AnalysisSpec, CheckKind, CheckSpec

EARLY_WINDOW = 20


@dataclass
class RunSummary(DataClassJsonMixin):
    label: str
    family: str
    qubits: int
    mean_survival: float
    mean_error: float
    sem: float
    mean_duration: float
    variance_ratio: VarianceRatio
    slopes: dict[str, float] = field(default_factory=dict)
    fit: Optional[ErrorComponentFit] = None
    epg: list[float] = field(default_factory=list)
    correlation: Optional[list[list[float]]] = None
    above_qpn_floor: Optional[bool] = None


@dataclass
class CheckResult(DataClassJsonMixin):
    kind: str
    subject: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class Report(DataClassJsonMixin):
    name: str
    config_hash: str
    runs: list[RunSummary] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def run(self, label: str) -> RunSummary:
        for summary in self.runs:
            if summary.label == label:
                return summary
        raise ValueError(f"Unknown run label {label}")


@dataclass
class Curves:
    trajectory: VarianceTrajectory
    qpn: Optional[QPNBounds] = None


def _slopes(trajectory: VarianceTrajectory) -> dict[str, float]:
    size = len(trajectory.n)
    if size < 2:
        return {}
    early = min(EARLY_WINDOW, size)
    slopes = {"early": loglog_slope(trajectory, 1, early)}
    if size > early:
        slopes["late"] = loglog_slope(trajectory, early, size)
    return slopes


def _epg(data: RunData) -> list[float]:
    means = data.survival.mean(axis=(0, 1))
    try:
        return [float(x) for x in error_per_gate(means, data.config.length, data.config.kappa)]
    except ValueError as e:
        logger.warning(f"Run {data.config.label}: {e}")
        return [float("nan")] * len(means)


def summarize_run(
    data: RunData, spec: AnalysisSpec, rng: np.random.Generator
) -> tuple[RunSummary, Curves]:
    run = data.config
    p = data.survival[:, :, 0]
    per_sequence = p.mean(axis=1)
    trajectory = shuffle_ensemble(p, spec.reorderings, rng)

    fit = None
    if spec.fit and len(trajectory.n) >= 3:
        try:
            fit = fit_error_components(trajectory, run.length)
        except FitError as e:
            logger.warning(f"Run {run.label}: {e}")

    qpn, floor = None, None
    if run.shots:
        qpn = qpn_bounds(p, run.shots, spec.qpn_reorderings, rng)
        floor = above_qpn_floor(trajectory, qpn)

    correlation = None
    if run.qubits > 1:
        try:
            correlation = cross_correlation(data.survival).tolist()
        except ValueError as e:
            logger.warning(f"Run {run.label}: {e}")

    summary = RunSummary(
        label=run.label,
        family=run.family.value,
        qubits=run.qubits,
        mean_survival=float(per_sequence.mean()),
        mean_error=float(1 - per_sequence.mean()),
        sem=float(per_sequence.std(ddof=1) / np.sqrt(len(per_sequence))),
        mean_duration=data.mean_duration,
        variance_ratio=variance_ratio(trajectory),
        slopes=_slopes(trajectory),
        fit=fit,
        epg=_epg(data),
        correlation=correlation,
        above_qpn_floor=floor,
    )
    return summary, Curves(trajectory, qpn)


def _mean_offdiagonal(matrix: list[list[float]] | None, label: str) -> float:
    if matrix is None:
        raise ValueError(f"Run {label} has no cross-correlation")
    m = np.asarray(matrix)
    return float(m[~np.eye(len(m), dtype=bool)].mean())


def _fit(summary: RunSummary) -> ErrorComponentFit:
    if summary.fit is None:
        raise ValueError(f"Run {summary.label} has no error-component fit")
    return summary.fit


def evaluate_check(
    check: CheckSpec, report: Report, curves: dict[str, Curves]
) -> CheckResult:
    within = True
    detail = ""
    match check.kind:
        case CheckKind.SLOPE:
            trajectory = curves[check.run].trajectory
            n_max = check.n_max or int(trajectory.n[-1])
            value = loglog_slope(trajectory, check.n_min, n_max)
            detail = f"slope over n in [{check.n_min}, {n_max}]"
        case CheckKind.MEANS_AGREE:
            a, b = (report.run(label) for label in check.runs)
            value = abs(a.mean_error - b.mean_error) / np.hypot(a.sem, b.sem)
            detail = "|mean difference| in combined standard errors"
        case CheckKind.SIGMA_C_RATIO:
            value = _fit(report.run(check.run)).sigma_c2 / _fit(report.run(check.reference)).sigma_c2
        case CheckKind.SIGMA_U_RATIO:
            value = _fit(report.run(check.run)).sigma_u2 / _fit(report.run(check.reference)).sigma_u2
        case CheckKind.RATIO_MONOTONE:
            ratios = [report.run(label).variance_ratio.ratio for label in check.runs]
            value = float(sum(b >= a for a, b in zip(ratios, ratios[1:])))
            within = value == 0
            detail = f"ratios {['%.3g' % r for r in ratios]}"
        case CheckKind.RATIO_SPREAD:
            ratios = [report.run(label).variance_ratio.ratio for label in check.runs]
            value = max(ratios) / min(ratios)
        case CheckKind.EPG_INCREASING:
            epg = report.run(check.run).epg
            value = float(min(np.diff(epg))) if len(epg) > 1 else 0.0
            within = value > 0
            detail = f"epg {['%.3g' % e for e in epg]}"
        case CheckKind.CORRELATION_RATIO:
            run, reference = report.run(check.run), report.run(check.reference)
            value = _mean_offdiagonal(run.correlation, run.label) / _mean_offdiagonal(
                reference.correlation, reference.label
            )
        case CheckKind.ABOVE_QPN_FLOOR:
            floor = report.run(check.run).above_qpn_floor
            value = float(bool(floor))
            within = bool(floor)
        case _:
            raise ValueError(f"Unknown check {check.kind}")

    passed = bool(within and check.low <= value <= check.high)
    subject = check.run or ",".join(check.runs)
    logger.info(f"Check {check.kind.value}[{subject}]: value={value:.4g} passed={passed}")
    return CheckResult(check.kind.value, subject, passed, float(value), detail)


def analyze_bundle(
    bundle: Bundle, spec: AnalysisSpec | None = None, rng: np.random.Generator | None = None
) -> tuple[Report, dict[str, Curves]]:
    spec = bundle.study.analysis if spec is None else spec
    rng = np.random.default_rng(bundle.study.seed) if rng is None else rng
    report = Report(bundle.study.name, config_hash(bundle.study))
    curves: dict[str, Curves] = {}
    for label, data in bundle.runs.items():
        summary, curves[label] = summarize_run(data, spec, rng)
        report.runs.append(summary)
    report.checks = [evaluate_check(c, report, curves) for c in spec.checks]
    return report, curves


def write_report(folder: Path, report: Report, curves: dict[str, Curves]) -> list[str]:
    outputs = [REPORT_FILE]
    write_json(folder / REPORT_FILE, report.to_dict(encode_json=True))
    for label, curve in curves.items():
        name = f"{label}_trajectory.csv"
        write_csv(folder / name, ("n", "variance", "low", "high"), curve.trajectory.to_csv_rows())
        outputs.append(name)
        if curve.qpn is not None:
            name = f"{label}_qpn.csv"
            write_csv(folder / name, ("n", "worst_case", "upper", "lower"), curve.qpn.to_csv_rows())
            outputs.append(name)
    ratios = [
        (r.label, r.variance_ratio.ratio, r.variance_ratio.uncertainty) for r in report.runs
    ]
    write_csv(folder / "ratios.csv", ("label", "ratio", "uncertainty"), ratios)
    outputs.append("ratios.csv")
    return outputs
