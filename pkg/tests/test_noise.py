import numpy as np
import pytest
from dataclasses_json.undefined import UndefinedParameterError

from rbnoise.core.noise import (
    Channel,
    Correlation,
    NoiseSpec,
    NoiseTrace,
    SequenceTiming,
    Spatial,
    combine_traces,
    gradient_profile,
    sample_trace,
)
from rbnoise.core.pulses import compile_clifford

TIMING = SequenceTiming.from_schedules([compile_clifford(i) for i in (5, 7, 2, 1, 9, 24)])


def test_sequence_timing():
    assert TIMING.gates == 6
    assert TIMING.starts[0] == 0.0
    assert np.allclose(TIMING.starts[1:], np.cumsum(TIMING.durations)[:-1])
    assert TIMING.total == pytest.approx(TIMING.durations.sum())


def test_grid_edges():
    edges = TIMING.grid_edges()
    assert edges[0] == 0.0
    assert edges[-1] == pytest.approx(TIMING.total)
    assert np.all(np.diff(edges) <= 1.0 + 1e-12)
    assert np.all(np.diff(edges) > 0)


def test_block_edges():
    assert np.allclose(TIMING.block_edges(None), [0.0, TIMING.total])
    assert np.allclose(TIMING.block_edges(100), [0.0, TIMING.total])
    edges = TIMING.block_edges(2)
    assert np.allclose(edges, np.append(TIMING.starts[::2], TIMING.total))


def test_full_correlation_is_constant(rng, full_detuning):
    trace = sample_trace(full_detuning, TIMING, rng)
    assert len(trace.values) == 1
    assert trace.duration == pytest.approx(TIMING.total)


def test_per_pi2_time_cells(rng):
    spec = NoiseSpec(Channel.AMPLITUDE, Correlation.PER_PI2_TIME, rms2=1e-4)
    trace = sample_trace(spec, TIMING, rng, realization=3, seed=11)
    assert len(trace.values) == int(np.ceil(TIMING.total))
    assert trace.realization == 3
    assert trace.seed == 11


def test_sample_variance(rng):
    timing = SequenceTiming(np.arange(0.0, 4000.0), np.ones(4000))
    spec = NoiseSpec(Channel.DETUNING, Correlation.PER_PI2_TIME, rms2=2e-3)
    values = sample_trace(spec, timing, rng).values
    assert np.mean(values) == pytest.approx(0.0, abs=4 * np.sqrt(2e-3 / 4000))
    assert np.var(values) == pytest.approx(2e-3, rel=0.1)


def test_mixed_trace(rng):
    spec = NoiseSpec(
        Channel.DETUNING, Correlation.MIXED, rms2_correlated=2e-3, rms2_uncorrelated=5e-4
    )
    trace = sample_trace(spec, TIMING, rng)
    assert np.allclose(trace.edges, TIMING.grid_edges())
    assert spec.total_rms2 == pytest.approx(2.5e-3)


def test_block_requires_length():
    with pytest.raises(ValueError):
        NoiseSpec(Channel.DETUNING, Correlation.BLOCK, rms2=1e-3)
    with pytest.raises(ValueError):
        NoiseSpec(Channel.DETUNING, Correlation.BLOCK, rms2=1e-3, block_gates=0)
    with pytest.raises(ValueError):
        NoiseSpec(Channel.DETUNING, Correlation.FULL, rms2=-1.0)
    with pytest.raises(ValueError):
        NoiseSpec(Channel.DEPHASING, Correlation.FULL, rms2=1e-3)


def test_spec_rejects_unknown_keys():
    with pytest.raises(UndefinedParameterError):
        NoiseSpec.from_dict({"channel": "detuning", "rms": 1e-3})
    spec = NoiseSpec.from_dict({"channel": "amplitude", "spatial": "independent", "rms2": 1e-5})
    assert spec.channel == Channel.AMPLITUDE
    assert spec.spatial == Spatial.INDEPENDENT
    assert NoiseSpec.from_dict(spec.to_dict(encode_json=True)) == spec


def test_trace_lookup():
    trace = NoiseTrace(np.array([0.0, 1.0, 1.0, 3.0]), np.array([1.0, 2.0, 3.0]))
    assert trace.value_at(0.5) == 1.0
    assert trace.value_at(1.0) == 3.0
    assert trace.value_at(5.0) == 3.0
    assert trace.to_csv_rows()[0] == (0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        NoiseTrace(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        NoiseTrace(np.array([1.0, 0.0]), np.array([1.0]))


def test_combine_traces():
    a = NoiseTrace(np.array([0.0, 2.0]), np.array([1.0]))
    b = NoiseTrace(np.array([0.0, 1.0, 2.0]), np.array([0.5, -0.5]))
    combined = combine_traces(a, b)
    assert np.allclose(combined.edges, [0.0, 1.0, 2.0])
    assert np.allclose(combined.values, [1.5, 0.5])


def test_gradient_profile():
    profile = gradient_profile(5, 0.002, 1e-3)
    assert profile.qubits == 5
    assert np.allclose(profile.multipliers, [1.0, 1.002, 1.004, 1.006, 1.008])
    assert np.allclose(profile.detuning_offsets, [0.0, 1e-3, 2e-3, 3e-3, 4e-3])
    with pytest.raises(ValueError):
        gradient_profile(3, 0.05)
    with pytest.raises(ValueError):
        gradient_profile(0, 0.0)
