"""Command-line driver: configs in, result bundles and reports out."""

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from rbnoise import __version__
from rbnoise.configs import settings
from rbnoise.const import (
    EXIT_BUDGET_EXCEEDED,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    NOISE_STREAM,
    PROJECT_NAME,
    SEQUENCE_STREAM,
)
from rbnoise.core.engine import BudgetExceededError, cell_rng, check_budget, run_experiment
from rbnoise.core.filterfn import (
    Spectrum,
    filter_transfer,
    first_order_vector,
    flatness,
    low_frequency_cutoff,
    low_frequency_weight,
    one_over_f,
)
from rbnoise.core.noise import Channel
from rbnoise.core.pulses import Family, compile_clifford
from rbnoise.core.rotations import clifford_table_records, generate_sequence, identity_index
from rbnoise.core.theory import (
    Bandwidth,
    ErrorStrengths,
    Regime,
    error_autocorrelation,
    expected_step_moments,
    gamma_params,
    moments,
    predict,
)
from rbnoise.logger import logger
from rbnoise.report import analyze_bundle, write_report
from rbnoise.storage.bundle import (
    SchemaMismatchError,
    read_bundle,
    write_bundle,
    write_csv,
    write_json,
)
from rbnoise.storage.config import ConfigError, StudyConfig, StudyKind, load_config

AUTOCORRELATION_FILE = "autocorrelation.csv"
AUTOCORRELATION_SUMMARY = "autocorrelation.json"


def _emit(payload, out: str | None) -> None:
    if out:
        write_json(Path(out), payload)
        logger.info(f"Wrote {out}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def _autocorrelation(study: StudyConfig, folder: Path) -> list[str]:
    spec = study.autocorrelation
    sequence = generate_sequence(spec.gates, cell_rng(study.seed, SEQUENCE_STREAM, 0))
    results = {}
    for block in spec.block_gates:
        rng = cell_rng(study.seed, NOISE_STREAM, block)
        results[block] = error_autocorrelation(
            sequence, block, rng, spec.realizations, spec.rms2, spec.max_lag
        )
        logger.info(
            f"Block {block}: correlation length {results[block].correlation_length:.3g} gates"
        )

    header = ["lag"] + [f"block_{b}" for b in spec.block_gates]
    lags = next(iter(results.values())).lags
    rows = [
        [int(lag)] + [float(results[b].normalized[i]) for b in spec.block_gates]
        for i, lag in enumerate(lags)
    ]
    write_csv(folder / AUTOCORRELATION_FILE, header, rows)
    summary = {
        str(b): {
            "correlation_length": results[b].correlation_length,
            "decay_lag": results[b].decay_lag,
        }
        for b in spec.block_gates
    }
    write_json(folder / AUTOCORRELATION_SUMMARY, summary)
    return [AUTOCORRELATION_FILE, AUTOCORRELATION_SUMMARY]


def cmd_simulate(args: argparse.Namespace) -> int:
    study = load_config(args.config)
    if args.seed is not None:
        study = study.with_seed(args.seed)
    folder = Path(args.out or Path(settings.OUTPUT_FOLDER) / study.name)

    if study.kind == StudyKind.AUTOCORRELATION:
        extra = _autocorrelation(study, folder)
        write_bundle(folder, study, [], extra)
        return EXIT_OK

    experiments = study.experiments()
    for run in experiments:
        check_budget(run, args.budget_cells)
    results = [run_experiment(run, args.workers, args.budget_cells) for run in experiments]
    write_bundle(folder, study, results)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    channel = Channel(args.channel)
    bandwidth = Bandwidth(args.bandwidth)
    if args.sigma2 is not None:
        regime = Regime(args.regime)
        if regime == Regime.MIXED:
            raise ConfigError("A single error strength needs a correlated or uncorrelated regime")
        c, u = (args.sigma2, 0.0) if regime == Regime.CORRELATED else (0.0, args.sigma2)
        strengths = ErrorStrengths.generic(c, u)
        prediction = moments(regime, args.length, args.realizations, strengths)
        gamma = gamma_params(regime, args.length, args.realizations, args.sigma2)
        record = {
            "prediction": prediction.to_dict(encode_json=True),
            "gamma": gamma.to_dict(),
        }
    else:
        record = predict(
            channel, bandwidth, args.rho2_c, args.rho2_u, args.length, args.realizations
        )
    steps = expected_step_moments(channel, bandwidth)
    record["step_moments"] = steps.to_dict(encode_json=True)
    record["step_moments"]["agrees"] = steps.agrees()
    _emit(record, args.out)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    bundle = read_bundle(Path(args.bundle))
    report, curves = analyze_bundle(bundle)
    folder = Path(args.out) if args.out else bundle.folder
    outputs = write_report(folder, report, curves)
    logger.info(f"Report written to {folder}: {', '.join(outputs)}")
    for check in report.checks:
        if not check.passed:
            logger.error(f"Check {check.kind}[{check.subject}] failed: value={check.value:.4g}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_clifford_table(args: argparse.Namespace) -> int:
    _emit(clifford_table_records(), args.out)
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace) -> int:
    family, channel = Family(args.family), Channel(args.channel)
    schedule = compile_clifford(args.clifford, family)
    omega = np.linspace(0.0, args.omega_max, args.points)
    spectrum = filter_transfer(schedule, omega, channel)
    dc = first_order_vector(schedule, channel)
    logger.info(f"Clifford {args.clifford} ({family.value}): |G(0)| = {np.linalg.norm(dc):.3e}")

    # z frame changes have no physical core and a zero spectrum
    if schedule.duration > 0:
        band = (low_frequency_cutoff(schedule.duration), args.omega_max)
        if omega[1] <= band[0]:
            e = spectrum.power[1:] * one_over_f(omega[1:], band[0])
            logger.info(
                f"1/f band {band[0]:.3g}..{band[1]:.3g}: "
                f"flatness={flatness(e, omega[1:], band):.3f} "
                f"low-frequency weight={low_frequency_weight(e, omega[1:], band):.3e}"
            )

    header = Spectrum.CSV_HEADER
    if args.out:
        write_csv(Path(args.out), header, spectrum.to_csv_rows())
        logger.info(f"Wrote {args.out}")
    else:
        print(",".join(header))
        for row in spectrum.to_csv_rows():
            print(",".join(format(x, ".10g") for x in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROJECT_NAME,
        description="Randomized-benchmarking simulation under correlated noise",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run a study and write a result bundle")
    simulate.add_argument("--config", required=True, help="TOML path or preset name")
    simulate.add_argument("--seed", type=int, default=None, help="Override the master seed")
    simulate.add_argument("--workers", type=int, default=None, help="Worker processes")
    simulate.add_argument("--out", default=None, help="Bundle folder")
    simulate.add_argument("--budget-cells", type=int, default=None, help="Cell budget per run")
    simulate.set_defaults(handler=cmd_simulate)

    pred = sub.add_parser("predict", help="Closed-form moments and Gamma parameters")
    pred.add_argument("--channel", default=Channel.DETUNING.value, choices=[c.value for c in Channel])
    pred.add_argument("--bandwidth", default=Bandwidth.PER_GATE.value, choices=[b.value for b in Bandwidth])
    pred.add_argument("--rho2-c", type=float, default=0.0, help="Correlated noise rms^2")
    pred.add_argument("--rho2-u", type=float, default=0.0, help="Uncorrelated noise rms^2")
    pred.add_argument("--regime", default=Regime.CORRELATED.value, choices=[r.value for r in Regime])
    pred.add_argument("--sigma2", type=float, default=None, help="Error strength, unit-step walk")
    pred.add_argument("--length", type=int, default=100, help="Sequence length J")
    pred.add_argument("--realizations", type=int, default=200, help="Noise realizations n")
    pred.add_argument("--out", default=None, help="JSON output path")
    pred.set_defaults(handler=cmd_predict)

    analyze = sub.add_parser("analyze", help="Analyze a bundle and evaluate its checks")
    analyze.add_argument("--bundle", required=True, help="Bundle folder")
    analyze.add_argument("--out", default=None, help="Report folder, defaults to the bundle")
    analyze.set_defaults(handler=cmd_analyze)

    table = sub.add_parser("clifford-table", help="Dump the 24-element Clifford table")
    table.add_argument("--out", default=None, help="JSON output path")
    table.set_defaults(handler=cmd_clifford_table)

    spectrum = sub.add_parser("spectrum", help="Filter transfer function of one Clifford")
    spectrum.add_argument("--family", default=Family.PRIMITIVE.value, choices=[f.value for f in Family])
    spectrum.add_argument("--clifford", type=int, default=identity_index(), help="Clifford index 1..24")
    spectrum.add_argument("--channel", default=Channel.DETUNING.value, choices=[c.value for c in Channel.concurrent()])
    spectrum.add_argument("--omega-max", type=float, default=50.0)
    spectrum.add_argument("--points", type=int, default=2001)
    spectrum.add_argument("--out", default=None, help="CSV output path")
    spectrum.set_defaults(handler=cmd_spectrum)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, SchemaMismatchError) as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG_ERROR
    except BudgetExceededError as e:
        logger.error(f"Budget exceeded: {e}")
        return EXIT_BUDGET_EXCEEDED
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
