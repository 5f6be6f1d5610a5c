import json

import numpy as np
import pytest

from rbnoise.core.pulses import (
    Family,
    PulseSegment,
    UnsupportedGate,
    clifford_unitary,
    compile_clifford,
    compile_rotation,
    mean_clifford_duration,
    rotary_echo,
    schedule_duration,
    schedule_infidelity,
)
from rbnoise.core.rotations import (
    Core,
    clifford,
    clifford_table,
    equal_up_to_phase,
    find_element,
    identity_index,
)

X_PI = find_element(0.0, Core.X_PI, 0.0)
X_HALF = find_element(0.0, Core.X_HALF, 0.0)


def test_primitive_durations():
    assert schedule_duration(compile_clifford(X_PI)) == pytest.approx(2.0)
    assert schedule_duration(compile_clifford(X_HALF)) == pytest.approx(1.0)
    assert schedule_duration(compile_clifford(identity_index())) == pytest.approx(2.0)
    for c in clifford_table():
        if c.core == Core.NONE:
            assert compile_clifford(c.index).duration == 0.0
            assert compile_clifford(c.index, Family.BB1).segments == ()


def test_corpse_pi_expansion():
    schedule = compile_clifford(X_PI, Family.CORPSE)
    thetas = [s.theta for s in schedule.segments]
    assert thetas == pytest.approx([7 * np.pi / 3, 5 * np.pi / 3, np.pi / 3])
    assert [s.phi for s in schedule.segments] == pytest.approx([0.0, np.pi, 0.0])
    assert schedule.duration == pytest.approx(26 / 3)


def test_bb1_expansion():
    schedule = compile_rotation(np.pi, 0.0, Family.BB1)
    phi = np.arccos(-1 / 4)
    assert [s.theta for s in schedule.segments] == pytest.approx([np.pi, np.pi, 2 * np.pi, np.pi])
    assert [s.phi for s in schedule.segments] == pytest.approx([0.0, phi, 3 * phi, phi])
    assert schedule.duration == pytest.approx(10.0)


def test_wamf_expansion():
    schedule = compile_rotation(np.pi, 0.0, Family.WAMF)
    outer, inner, _ = schedule.segments
    assert outer.theta == pytest.approx(np.pi)
    assert inner.theta == pytest.approx(np.pi)
    assert inner.omega_rel == pytest.approx(0.5)
    assert schedule.duration == pytest.approx(8.0)

    with pytest.raises(UnsupportedGate):
        compile_rotation(np.pi / 3, 0.0, Family.WAMF)


@pytest.mark.parametrize("family", Family.all())
def test_compiled_cliffords_match_targets(family):
    for c in clifford_table():
        assert equal_up_to_phase(clifford_unitary(c.index, family), c.unitary, tol=1e-10)


@pytest.mark.parametrize("family", Family.all())
def test_compiled_rotations_match_targets(family):
    for theta in (np.pi / 2, np.pi):
        for phase in (0.0, np.pi / 2, np.pi):
            schedule = compile_rotation(theta, phase, family)
            axis = np.array([np.cos(phase), np.sin(phase), 0.0])
            target = PulseSegment(theta, 1.0, phase).unitary
            assert equal_up_to_phase(schedule.ideal_unitary(), target, tol=1e-10)
            assert np.allclose(PulseSegment(theta, 1.0, phase).axis, axis)


def test_invalid_segments():
    with pytest.raises(ValueError):
        PulseSegment(np.pi, 0.0)
    with pytest.raises(ValueError):
        PulseSegment(np.pi, 1.5)
    with pytest.raises(UnsupportedGate):
        compile_rotation(0.0, 0.0, Family.PRIMITIVE)


def test_negative_angle_flips_axis():
    segment = PulseSegment(-np.pi / 2, 1.0, 0.0)
    assert np.allclose(segment.axis, [-1.0, 0.0, 0.0])
    assert segment.duration == pytest.approx(1.0)


def test_rotary_echo():
    for family in Family.composite():
        schedule = compile_clifford(identity_index(), family)
        assert len(schedule.segments) == 2
        assert schedule.duration == pytest.approx(4.0)
        assert equal_up_to_phase(schedule.ideal_unitary(), np.eye(2))
    assert [s.phi for s in rotary_echo(Family.BB1)] == [0.0, np.pi]
    assert [s.phi for s in rotary_echo(Family.CORPSE)] == [0.0, 0.0]


def test_dcg_duration_overhead():
    ratio = mean_clifford_duration(Family.CORPSE) / mean_clifford_duration(Family.PRIMITIVE)
    assert 5.0 <= ratio <= 7.0
    assert mean_clifford_duration(Family.PRIMITIVE) == pytest.approx(26 / 24)


def test_corpse_suppresses_static_detuning():
    for index in (X_PI, X_HALF):
        primitive = schedule_infidelity(compile_clifford(index), detuning=1e-3)
        corpse = schedule_infidelity(compile_clifford(index, Family.CORPSE), detuning=1e-3)
        assert primitive > 1e-7
        assert corpse < 1e-2 * primitive


def test_bb1_suppresses_static_amplitude():
    for index in (X_PI, X_HALF):
        primitive = schedule_infidelity(compile_clifford(index), amplitude=1e-3)
        bb1 = schedule_infidelity(compile_clifford(index, Family.BB1), amplitude=1e-3)
        assert primitive > 1e-7
        assert bb1 < 1e-4 * primitive


def _slope(schedule, **noise):
    amplitudes = np.array([1e-3, 3e-3, 1e-2])
    name = next(iter(noise))
    values = [schedule_infidelity(schedule, **{name: a}) for a in amplitudes]
    slope, _ = np.polyfit(np.log(amplitudes), np.log(values), 1)
    return slope


def test_static_error_scaling():
    x_pi = compile_clifford(X_PI)
    assert _slope(x_pi, detuning=1) == pytest.approx(2.0, abs=0.2)
    assert _slope(compile_clifford(X_PI, Family.CORPSE), detuning=1) >= _slope(x_pi, detuning=1) + 1.5
    assert _slope(compile_clifford(X_PI, Family.BB1), amplitude=1) >= _slope(x_pi, amplitude=1) + 1.5


def test_rotary_echo_scaling():
    echo = compile_clifford(identity_index(), Family.CORPSE)
    assert _slope(echo, detuning=1) >= 3.5
    assert schedule_infidelity(compile_clifford(identity_index(), Family.BB1), amplitude=1e-2) < 1e-20


def test_schedule_json():
    payload = json.loads(compile_clifford(X_PI, Family.CORPSE).to_json())
    assert payload["family"] == "corpse"
    assert payload["target"] == X_PI
    assert len(payload["segments"]) == 3
    assert clifford(payload["target"]).core == Core.X_PI
