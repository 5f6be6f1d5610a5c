import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
from dataclasses_json import DataClassJsonMixin

from rbnoise import __version__
from rbnoise.configs import settings
from rbnoise.const import (
    ARTIFACT_VERSION,
    CONFIG_FILE,
    MANIFEST_FILE,
    SCHEMA_VERSION,
    SURVIVAL_COLUMNS,
)
from rbnoise.core.engine import ExperimentConfig, ExperimentResult
from rbnoise.core.rotations import CliffordSequence
from rbnoise.logger import logger
from rbnoise.storage.config import StudyConfig
from rbnoise.utils import format_float, generate_short_hash


class SchemaMismatchError(ValueError):
    """Raised if a bundle was written with another schema version."""

    pass


@dataclass
class RunManifest(DataClassJsonMixin):
    name: str
    config_hash: str
    seed: int
    artifact_version: str = ARTIFACT_VERSION
    schema_version: str = SCHEMA_VERSION
    package_version: str = __version__
    outputs: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class RunData:
    config: ExperimentConfig
    survival: np.ndarray
    exact: np.ndarray
    sequences: list[CliffordSequence]
    durations: np.ndarray

    @property
    def mean_duration(self) -> float:
        return float(np.mean(self.durations))


@dataclass
class Bundle:
    folder: Path
    study: StudyConfig
    manifest: RunManifest
    runs: dict[str, RunData] = field(default_factory=dict)


def config_hash(study: StudyConfig) -> str:
    return generate_short_hash(study.to_dict(encode_json=True))


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    content = json.dumps(payload, indent=2, sort_keys=True)
    assert content, "Content to write should not be empty!"
    path.write_text(content + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")


def read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except Exception as e:
        raise ValueError(f"Could not load bundle file {path}", e)


def write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    spec = settings.CSV_FLOAT_FORMAT
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(x, spec) if isinstance(x, float) else x for x in row]
            )
    logger.debug(f"Wrote {path}")


def _survival_rows(result: ExperimentResult):
    k, n, q = result.survival.shape
    shots = result.config.shots
    measured = result.measured
    for s in range(k):
        for i in range(n):
            for j in range(q):
                yield s, i, j, shots, float(measured[s, i, j]), float(result.survival[s, i, j])


def write_run(folder: Path, result: ExperimentResult) -> list[str]:
    label = result.config.label
    write_csv(folder / f"{label}.csv", SURVIVAL_COLUMNS, _survival_rows(result))
    write_json(
        folder / f"{label}.json",
        {
            "config": result.config.to_dict(encode_json=True),
            "sequences": [list(s.indices) for s in result.sequences],
            "durations": [float(d) for d in result.durations],
        },
    )
    return [f"{label}.csv", f"{label}.json"]


def write_bundle(
    folder: Path,
    study: StudyConfig,
    results: list[ExperimentResult],
    extra_outputs: Optional[list[str]] = None,
) -> RunManifest:
    folder.mkdir(parents=True, exist_ok=True)
    write_json(folder / CONFIG_FILE, study.to_dict(encode_json=True))
    outputs = [CONFIG_FILE]
    for result in results:
        outputs += write_run(folder, result)
    manifest = RunManifest(
        name=study.name,
        config_hash=config_hash(study),
        seed=study.seed,
        outputs=outputs + (extra_outputs or []),
        timings={r.config.label: round(r.elapsed, 3) for r in results},
    )
    write_json(folder / MANIFEST_FILE, manifest.to_dict())
    logger.info(f"Bundle {study.name} written to {folder}")
    return manifest


def _read_run(folder: Path, label: str) -> RunData:
    sidecar = read_json(folder / f"{label}.json")
    run = ExperimentConfig.from_dict(sidecar["config"])
    shape = (run.sequences, run.realizations, run.qubits)
    survival, exact = np.zeros(shape), np.zeros(shape)
    with (folder / f"{label}.csv").open(newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            index = int(row["seq_id"]), int(row["realization"]), int(row["qubit"])
            survival[index] = float(row["survival"])
            exact[index] = float(row["exact"])
    sequences = [CliffordSequence(tuple(s)) for s in sidecar["sequences"]]
    return RunData(run, survival, exact, sequences, np.array(sidecar["durations"]))


def read_bundle(folder: Path) -> Bundle:
    folder = Path(folder)
    manifest = RunManifest.from_dict(read_json(folder / MANIFEST_FILE))
    if manifest.schema_version != SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"Bundle {folder} has schema {manifest.schema_version}, expected {SCHEMA_VERSION}"
        )
    study = StudyConfig.from_dict(read_json(folder / CONFIG_FILE))
    runs = {e.label: _read_run(folder, e.label) for e in study.experiments()}
    return Bundle(folder, study, manifest, runs)
