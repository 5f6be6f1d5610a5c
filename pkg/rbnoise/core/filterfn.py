"""Toggling-frame filter transfer functions of pulse schedules.

For a schedule with ideal control propagator U_c(t) the first-order error in the
frame before the gate is

    G(omega) = -(pi/4) * int_0^T w(t) R(t) exp(i omega t) dt

with R(t).sigma = U_c(t)^dagger (v.sigma) U_c(t), v = z for detuning and v = the drive
axis for amplitude noise, and w the relative Rabi rate for amplitude noise (one for
detuning). Time is in pi/2 units, so G(0) is the error vector of the gate at unit
static noise and first order.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from rbnoise.configs import settings
from rbnoise.core.noise import Channel
from rbnoise.core.pulses import PulseSchedule
from rbnoise.core.rotations import adjoint

Z_AXIS = np.array([0.0, 0.0, 1.0])
PREFACTOR = -np.pi / 4


@dataclass(frozen=True)
class TogglingSegment:
    start: float
    stop: float
    rate: float
    weight: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def length(self) -> float:
        return self.stop - self.start

    def at(self, t: np.ndarray) -> np.ndarray:
        s = np.asarray(t, dtype=float) - self.start
        return (
            self.a
            + np.multiply.outer(np.cos(self.rate * s), self.b)
            + np.multiply.outer(np.sin(self.rate * s), self.c)
        )

    def integral(self, s1: float, s2: float) -> np.ndarray:
        """int R over local times [s1, s2]."""
        if self.rate == 0:
            return (self.a + self.b) * (s2 - s1)
        w = self.rate
        return (
            self.a * (s2 - s1)
            + self.b * (np.sin(w * s2) - np.sin(w * s1)) / w
            + self.c * (np.cos(w * s1) - np.cos(w * s2)) / w
        )

    def transfer(self, omega: np.ndarray) -> np.ndarray:
        """int w R(t) exp(i omega t) dt over the segment, shape (len(omega), 3)."""
        w, length = self.rate, self.length
        direct = _exp_integral(omega, length)
        plus = _exp_integral(omega + w, length)
        minus = _exp_integral(omega - w, length)
        body = (
            np.multiply.outer(direct, self.a)
            + np.multiply.outer((plus + minus) / 2, self.b)
            + np.multiply.outer((plus - minus) / 2j, self.c)
        )
        return self.weight * np.exp(1j * omega * self.start)[:, None] * body


def _exp_integral(nu: np.ndarray, length: float) -> np.ndarray:
    """int_0^L exp(i nu s) ds, stable at nu = 0."""
    return length * np.exp(0.5j * nu * length) * np.sinc(nu * length / (2 * np.pi))


@dataclass(frozen=True)
class TogglingTrajectory:
    channel: Channel
    segments: tuple[TogglingSegment, ...]

    @property
    def duration(self) -> float:
        return self.segments[-1].stop if self.segments else 0.0

    def at(self, t: float) -> np.ndarray:
        for segment in self.segments:
            if segment.start <= t <= segment.stop:
                return segment.weight * segment.at(t)
        raise ValueError(f"Time {t} outside trajectory [0, {self.duration}]")


def toggling_trajectory(schedule: PulseSchedule, channel: Channel) -> TogglingTrajectory:
    if channel not in Channel.concurrent():
        raise ValueError(f"Invalid filter channel {channel}")
    frame = np.eye(3)
    t = 0.0
    segments = []
    zero = np.zeros(3)
    for pulse in schedule.segments:
        length = pulse.duration
        if length == 0:
            continue
        if not pulse.driven:
            if channel == Channel.DETUNING:
                piece = TogglingSegment(t, t + length, 0.0, 1.0, frame.T @ Z_AXIS, zero, zero)
            else:
                piece = TogglingSegment(t, t + length, 0.0, 0.0, zero, zero, zero)
        else:
            n = pulse.axis
            v = Z_AXIS if channel == Channel.DETUNING else n
            parallel = n * np.dot(n, v)
            weight = 1.0 if channel == Channel.DETUNING else pulse.omega_rel
            piece = TogglingSegment(
                t,
                t + length,
                pulse.rate,
                weight,
                frame.T @ parallel,
                frame.T @ (v - parallel),
                -frame.T @ np.cross(n, v),
            )
            frame = adjoint(pulse.unitary) @ frame
        segments.append(piece)
        t += length
    return TogglingTrajectory(channel, tuple(segments))


def interval_response(
    schedule: PulseSchedule, channel: Channel, edges: np.ndarray
) -> np.ndarray:
    """First-order error vectors accumulated inside each [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    out = np.zeros((len(edges) - 1, 3))
    for segment in toggling_trajectory(schedule, channel).segments:
        for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
            a, b = max(lo, segment.start), min(hi, segment.stop)
            if b > a:
                out[i] += segment.weight * segment.integral(
                    a - segment.start, b - segment.start
                )
    return PREFACTOR * out


def first_order_vector(schedule: PulseSchedule, channel: Channel) -> np.ndarray:
    return interval_response(schedule, channel, np.array([0.0, schedule.duration]))[0]


@dataclass(frozen=True)
class Spectrum:
    CSV_HEADER = ("omega", "re_g_x", "im_g_x", "re_g_y", "im_g_y", "re_g_z", "im_g_z", "power")

    omega: np.ndarray
    g: np.ndarray
    channel: Channel
    duration: float

    @property
    def power(self) -> np.ndarray:
        return np.sum(np.abs(self.g) ** 2, axis=1)

    def to_csv_rows(self) -> list[tuple[float, ...]]:
        return [
            (float(w), *(float(part) for x in row for part in (x.real, x.imag)), float(p))
            for w, row, p in zip(self.omega, self.g, self.power)
        ]


def filter_transfer(
    schedule: PulseSchedule, omega: np.ndarray, channel: Channel = Channel.DETUNING
) -> Spectrum:
    omega = np.asarray(omega, dtype=float)
    g = np.zeros((len(omega), 3), dtype=complex)
    for segment in toggling_trajectory(schedule, channel).segments:
        g += segment.transfer(omega)
    return Spectrum(omega, PREFACTOR * g, channel, schedule.duration)


@dataclass(frozen=True)
class EffectiveSpectrum:
    omega: np.ndarray
    e: np.ndarray


def effective_error_spectrum(
    spectrum: Spectrum, noise: np.ndarray | Callable[[np.ndarray], np.ndarray]
) -> EffectiveSpectrum:
    s = noise(spectrum.omega) if callable(noise) else np.asarray(noise, dtype=float)
    if s.shape != spectrum.omega.shape:
        raise ValueError("Noise spectrum must be sampled on the filter grid")
    if np.any(s < 0):
        raise ValueError("Invalid noise spectrum with negative values")
    return EffectiveSpectrum(spectrum.omega, spectrum.power * s)


def low_frequency_cutoff(duration: float) -> float:
    return 2 * np.pi / (settings.LOW_FREQUENCY_CUTOFF_PERIODS * duration)


def one_over_f(omega: np.ndarray, cutoff: float) -> np.ndarray:
    """1/|omega| noise, flat below the cutoff."""
    return 1.0 / np.maximum(np.abs(omega), cutoff)


def _band(omega: np.ndarray, band: tuple[float, float]) -> np.ndarray:
    lo, hi = band
    if not 0 < lo < hi:
        raise ValueError(f"Invalid band {band}")
    return (omega >= lo) & (omega <= hi)


def flatness(e: np.ndarray, omega: np.ndarray, band: tuple[float, float]) -> float:
    """Spread (max - min) / |mean| of log10 E inside the band."""
    log_e = np.log10(e[_band(omega, band)])
    return float((log_e.max() - log_e.min()) / abs(log_e.mean()))


def low_frequency_weight(
    e: np.ndarray, omega: np.ndarray, band: tuple[float, float]
) -> float:
    """Share of band-integrated E that falls in the lowest decade of the band."""
    inside = _band(omega, band)
    low = inside & (omega <= 10 * band[0])
    total = trapezoid(e[inside], omega[inside])
    return float(trapezoid(e[low], omega[low]) / total)


@dataclass(frozen=True)
class ParsevalCheck:
    time_integral: float
    frequency_integral: float

    @property
    def relative_error(self) -> float:
        return abs(self.frequency_integral - self.time_integral) / self.time_integral


def parseval_check(
    schedule: PulseSchedule,
    channel: Channel = Channel.DETUNING,
    omega_max: float = 2000.0,
    points: int = 400_001,
) -> ParsevalCheck:
    """Compare int |f|^2 dt with int |G|^2 domega / 2pi, 1/omega^2 tail added."""
    trajectory = toggling_trajectory(schedule, channel)
    # |R| = 1 everywhere, so the time side is exact
    time_integral = PREFACTOR**2 * sum(s.weight**2 * s.length for s in trajectory.segments)

    omega = np.linspace(0.0, omega_max, points)
    power = filter_transfer(schedule, omega, channel).power
    tail_start = int(0.9 * points)
    tail = np.mean(power[tail_start:] * omega[tail_start:] ** 2) / omega_max
    frequency_integral = 2 * (trapezoid(power, omega) + tail) / (2 * np.pi)
    return ParsevalCheck(float(time_integral), float(frequency_integral))
