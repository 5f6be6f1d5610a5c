import json

import numpy as np
import pytest

from rbnoise.const import CONFIG_FILE, MANIFEST_FILE, SCHEMA_VERSION
from rbnoise.core.engine import run_experiment
from rbnoise.core.pulses import Family
from rbnoise.storage.bundle import (
    SchemaMismatchError,
    config_hash,
    read_bundle,
    write_bundle,
    write_csv,
)
from rbnoise.storage.config import (
    CheckKind,
    ConfigError,
    StudyKind,
    load_config,
    parse_config,
    preset_names,
)


def test_parse_config(small_study):
    study = parse_config(small_study)
    assert study.name == "tiny"
    assert study.kind == StudyKind.BENCHMARK
    assert study.analysis.reorderings == 20

    runs = study.experiments()
    assert [r.label for r in runs] == ["correlated", "uncorrelated"]
    assert all(r.seed == 7 and r.sequences == 4 and r.length == 6 for r in runs)
    assert runs[1].noise[0].block_gates == 1
    assert runs[0].family == Family.PRIMITIVE


def test_run_tables_override_defaults(small_study):
    small_study["runs"][0]["family"] = "corpse"
    small_study["runs"][0]["length"] = 8
    runs = parse_config(small_study).experiments()
    assert runs[0].family == Family.CORPSE
    assert runs[0].length == 8
    assert runs[1].length == 6


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(colour="blue"),
        lambda d: d["runs"][0].update(lenght=10),
        lambda d: d["runs"][0]["noise"][0].update(rms=1e-3),
        lambda d: d["analysis"].update(reorderings=0),
        lambda d: d["runs"][1].update(label="correlated"),
        lambda d: d.update(runs=[]),
        lambda d: d["defaults"].update(length=1),
        lambda d: d.update(analysis={"checks": [{"kind": "nonsense"}]}),
    ],
)
def test_invalid_configs(small_study, mutate):
    mutate(small_study)
    with pytest.raises(ConfigError):
        parse_config(small_study)


def test_autocorrelation_study_gets_defaults():
    study = parse_config({"name": "acf", "kind": "autocorrelation"})
    assert study.autocorrelation.block_gates == [1, 50, 100]
    assert study.experiments() == []


def test_with_seed(small_study):
    study = parse_config(small_study)
    reseeded = study.with_seed(99)
    assert reseeded.seed == 99
    assert all(r.seed == 99 for r in reseeded.experiments())
    assert config_hash(reseeded) != config_hash(study)
    assert config_hash(parse_config(small_study)) == config_hash(study)


def test_config_round_trip(small_study):
    small_study["analysis"]["checks"] = [
        {"kind": "means_agree", "runs": ["correlated", "uncorrelated"], "high": 3.0}
    ]
    study = parse_config(small_study)
    assert study.analysis.checks[0].kind == CheckKind.MEANS_AGREE
    restored = parse_config(json.loads(json.dumps(study.to_dict(encode_json=True))))
    assert restored == study


@pytest.mark.parametrize("name", preset_names())
def test_presets_load(name):
    study = load_config(name)
    assert study.name == name
    if study.kind == StudyKind.BENCHMARK:
        labels = {r.label for r in study.experiments()}
        for check in study.analysis.checks:
            assert {check.run, check.reference, *check.runs} - {""} <= labels


def test_preset_catalogue():
    assert len(preset_names()) == 7
    study = load_config("correlation_length_sweep")
    assert len(study.experiments()) == 10
    assert not study.analysis.fit
    study = load_config("multiqubit_gradient")
    assert {r.qubits for r in study.experiments()} == {5}
    assert {(r.sequences, r.length) for r in study.experiments()} == {(60, 500)}
    assert {r.gradient for r in study.experiments()} == {0.002}
    study = load_config("correlated_vs_uncorrelated")
    agree = next(c for c in study.analysis.checks if c.kind == CheckKind.MEANS_AGREE)
    assert agree.high == 2.0


def test_load_config_from_file(tmp_path):
    path = tmp_path / "study.toml"
    path.write_text(
        'name = "file"\nseed = 3\n\n[[runs]]\nlabel = "a"\nsequences = 2\nlength = 4\nrealizations = 2\n'
    )
    study = load_config(path)
    assert study.name == "file"
    assert study.experiments()[0].seed == 3

    path.write_text("name = ")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_write_csv_keeps_full_precision(tmp_path):
    path = tmp_path / "out" / "x.csv"
    write_csv(path, ("a", "b"), [(1, 0.1 + 0.2)])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert float(lines[1].split(",")[1]) == 0.1 + 0.2


def test_bundle_round_trip(tmp_path, small_study):
    study = parse_config(small_study)
    results = [run_experiment(run) for run in study.experiments()]
    manifest = write_bundle(tmp_path, study, results)
    assert manifest.config_hash == config_hash(study)
    assert CONFIG_FILE in manifest.outputs
    assert "correlated.csv" in manifest.outputs

    bundle = read_bundle(tmp_path)
    assert bundle.study == study
    assert bundle.manifest.seed == 7
    for result in results:
        data = bundle.runs[result.config.label]
        assert data.config == result.config
        assert np.array_equal(data.survival, result.survival)
        assert np.array_equal(data.exact, result.survival)
        assert [s.indices for s in data.sequences] == [s.indices for s in result.sequences]
        assert data.mean_duration == pytest.approx(result.mean_duration)


def test_schema_mismatch(tmp_path, small_study):
    study = parse_config(small_study)
    write_bundle(tmp_path, study, [run_experiment(study.experiments()[0])])
    manifest = json.loads((tmp_path / MANIFEST_FILE).read_text())
    assert manifest["schema_version"] == SCHEMA_VERSION
    manifest["schema_version"] = "0"
    (tmp_path / MANIFEST_FILE).write_text(json.dumps(manifest))
    with pytest.raises(SchemaMismatchError):
        read_bundle(tmp_path)
