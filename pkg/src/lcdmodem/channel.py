"""Acoustic emission synthesis and the air-channel model.

The display is abstracted as "pattern at f Hz -> tone at f Hz".  Each
schedule entry becomes a band-limited square wave whose amplitude follows
the brightness, colour coherence, screen-split and distance factors of the
model.  Noise is either injected at a requested in-band SNR or comes from a
fixed noise floor calibrated against the measured distance curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from ._spectrum import (DEFAULT_HALFWIDTH, powers_from_spectrum, snr_db,
                        spectrum_masks, windowed_spectrum)
from .audio import AudioBuffer
from .codec import FrameSchedule

# measured peak SNR (dB) vs distance (m) for one monitor
DISTANCE_TABLE_M = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0])
DISTANCE_TABLE_SNR_DB = np.array([22.53, 20.12, 18.25, 16.05, 14.21, 12.67, 11.02, 9.45, 7.88, 6.23])

# same monitor: mean intensity and SNR per brightness level 1..10
BRIGHTNESS_LEVELS = np.arange(1, 11)
BRIGHTNESS_MEAN_INTENSITY = np.array(
    [102.34, 145.67, 198.23, 256.78, 312.45, 367.12, 422.89, 478.56, 534.23, 589.90])
BRIGHTNESS_SNR_DB = np.array([5.12, 8.24, 10.78, 12.45, 14.92, 16.78, 18.45, 20.12, 21.45, 22.78])

GRAYSCALE_LEVELS = (0, 20, 40, 60, 80, 100, 120, 140, 160, 180, 200, 220, 240, 255)

REFERENCE_DISTANCE = 0.5
COLOR_COHERENCE = 1 / math.sqrt(3)


def fit_distance_curve(distances=DISTANCE_TABLE_M, snr_db=DISTANCE_TABLE_SNR_DB) -> tuple:
    """Least-squares line through (distance, SNR dB); returns (slope, intercept)."""
    slope, intercept = np.polyfit(np.asarray(distances, float), np.asarray(snr_db, float), 1)
    return float(slope), float(intercept)


DISTANCE_CURVE = fit_distance_curve()


@dataclass(frozen=True)
class ChannelModel:
    sample_rate: int = 48_000
    distance: float = REFERENCE_DISTANCE
    base_amplitude: float = 0.25
    # full-band noise power in dB re 1.0; None calibrates it to the distance curve
    noise_floor: Optional[float] = None
    brightness_mean: float = 255.0
    coherence_factor: float = 1.0
    strips_n: int = 1
    snr_distance_curve: tuple = field(default=DISTANCE_CURVE)
    band_halfwidth: float = DEFAULT_HALFWIDTH
    band_limited: bool = True

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be > 0")
        if self.strips_n < 1:
            raise ValueError("strips_n must be >= 1")
        if not 0 <= self.brightness_mean <= 255:
            raise ValueError("brightness_mean must lie in [0, 255]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")

    def predicted_snr(self, d: Optional[float] = None) -> float:
        slope, intercept = self.snr_distance_curve
        return intercept + slope * (self.distance if d is None else d)

    def amplitude(self) -> float:
        """Peak level of the square wave at the microphone.

        Splitting shares power, not amplitude: each of n strips gets 1/n of
        the power, i.e. 1/sqrt(n) of the amplitude.
        """
        return (self.base_amplitude * self.brightness_mean / 255 * self.coherence_factor
                / math.sqrt(self.strips_n) * distance_gain(self.distance, self))

    def noise_power(self) -> float:
        """Full-band white-noise variance."""
        if self.noise_floor is not None:
            return 10 ** (self.noise_floor / 10)
        fundamental = 4 / math.pi * self.base_amplitude
        ref_power = fundamental ** 2 / 2
        band_share = 2 * self.band_halfwidth / (self.sample_rate / 2)
        ref_snr = self.predicted_snr(REFERENCE_DISTANCE)
        return ref_power / (10 ** (ref_snr / 10) * band_share)

    def color(self) -> "ChannelModel":
        return replace(self, coherence_factor=COLOR_COHERENCE)


def distance_gain(d: float, model: Optional[ChannelModel] = None) -> float:
    """Linear amplitude factor from the fitted SNR-vs-distance line, 1.0 at 0.5 m."""
    if d <= 0:
        raise ValueError("distance must be > 0")
    slope = (model.snr_distance_curve if model else DISTANCE_CURVE)[0]
    return 10 ** (slope * (d - REFERENCE_DISTANCE) / 20)


def square_wave(phase: np.ndarray, freq: float, duty: float, sample_rate: float,
                band_limited: bool = True) -> np.ndarray:
    """Zero-mean +/-1 pulse train at ``phase`` (radians of the fundamental).

    High while ``phase mod 2pi < 2pi*duty``.  The band-limited form sums the
    Fourier series up to the last harmonic below Nyquist.
    """
    if not band_limited:
        high = np.mod(phase, 2 * np.pi) < 2 * np.pi * duty
        return np.where(high, 1.0, -1.0) - (2 * duty - 1)
    out = np.zeros_like(phase)
    kmax = int(math.ceil(sample_rate / 2 / freq)) - 1
    for k in range(1, kmax + 1):
        coef = 4 / (k * math.pi) * math.sin(k * math.pi * duty)
        if abs(coef) > 1e-12:
            out += coef * np.cos(k * (phase - math.pi * duty))
    return out


def _render(schedule: FrameSchedule, model: ChannelModel, amplitude: float) -> np.ndarray:
    fs = model.sample_rate
    bounds = [0]
    t = Fraction(0)
    for e in schedule.entries:
        t += e.duration
        bounds.append(round(t * fs))
    out = np.zeros(bounds[-1])
    phase0 = 0.0
    for e, a, b in zip(schedule.entries, bounds[:-1], bounds[1:]):
        if e.silent:
            phase0 = 0.0
            continue
        step = 2 * math.pi * e.freq / fs
        phase = phase0 + step * np.arange(b - a)
        out[a:b] = amplitude * square_wave(phase, e.freq, float(e.duty_cycle), fs, model.band_limited)
        phase0 = math.fmod(phase0 + step * (b - a), 2 * math.pi)
    return out


def limit(samples: np.ndarray) -> np.ndarray:
    """Scale down (never clip) so every sample lies in [-1, 1]."""
    peak = float(np.max(np.abs(samples), initial=0))
    return samples / peak if peak > 1 else samples


def synthesize(schedule: Union[FrameSchedule, Sequence[FrameSchedule]],
               model: ChannelModel = ChannelModel()) -> AudioBuffer:
    """Render one schedule, or several concurrent strip schedules summed.

    Phase runs continuously across symbol boundaries; it restarts at zero
    after a blank frame.
    """
    schedules = [schedule] if isinstance(schedule, FrameSchedule) else list(schedule)
    if len(schedules) > model.strips_n:
        raise ValueError(f"{len(schedules)} concurrent schedules but strips_n={model.strips_n}")
    carriers = sorted({f for s in schedules for f in s.carriers})
    if carriers and carriers[-1] >= model.sample_rate / 2:
        raise ValueError(f"carrier {carriers[-1]:g} Hz is not below Nyquist "
                         f"({model.sample_rate / 2:g} Hz)")
    amp = model.amplitude()
    parts = [_render(s, model, amp) for s in schedules]
    out = np.zeros(max((len(p) for p in parts), default=0))
    for p in parts:
        out[:len(p)] += p
    return AudioBuffer(limit(out), model.sample_rate, tuple(carriers))


def add_noise(buf: AudioBuffer, target_snr_db: float, seed=None,
              signal_freqs: Optional[Sequence[float]] = None,
              band_halfwidth: float = DEFAULT_HALFWIDTH) -> AudioBuffer:
    """Add white Gaussian noise at an in-band SNR.

    One noise realization is drawn, then its scale is solved for so that
    the in-band SNR estimator reads ``target_snr_db`` on the result.  The
    nominal scale (expected noise in ``carrier +/- band_halfwidth`` equal to
    ``10**(-snr/10)`` of the fundamental power) seeds the search and is used
    as is when the clean buffer itself measures below the target.  The
    result is rescaled if it would exceed full scale.
    """
    if math.isinf(target_snr_db) and target_snr_db > 0:
        return buf.with_samples(buf.samples.copy())
    freqs = tuple(signal_freqs) if signal_freqs is not None else buf.carriers
    if not freqs:
        raise ValueError("signal frequencies unknown; pass signal_freqs")
    spec, energy = windowed_spectrum(buf.samples)
    signal, noise_bins = spectrum_masks(len(buf), buf.sample_rate, freqs, band_halfwidth)
    bp = powers_from_spectrum(np.abs(spec) ** 2, signal, noise_bins, energy)
    if bp.signal <= 0 or not np.any(buf.samples):
        raise ValueError("cannot set an SNR on a silent buffer")
    rng = np.random.default_rng(seed)
    unit = rng.standard_normal(len(buf))
    scale = _noise_scale(spec, windowed_spectrum(unit)[0], signal, noise_bins, energy,
                         math.sqrt(bp.signal / (10 ** (target_snr_db / 10) * bp.n_band * energy)),
                         target_snr_db)
    return AudioBuffer(limit(buf.samples + scale * unit), buf.sample_rate, freqs)


def _noise_scale(spec, noise_spec, signal, noise_bins, energy, nominal, target) -> float:
    def excess(log_g):
        p = np.abs(spec + math.exp(log_g) * noise_spec) ** 2
        return snr_db(powers_from_spectrum(p, signal, noise_bins, energy)) - target

    if nominal <= 0 or not math.isfinite(nominal):
        return nominal
    lo = hi = math.log(nominal)
    for _ in range(40):
        if excess(lo) > 0:
            break
        lo -= 1.0
    else:
        return nominal
    for _ in range(40):
        if excess(hi) < 0:
            break
        hi += 1.0
    else:
        return nominal
    return math.exp(brentq(excess, lo, hi, xtol=1e-6))


def transmit(schedule, model: ChannelModel = ChannelModel(), snr_db: Optional[float] = None,
             seed=None) -> AudioBuffer:
    """Synthesize and pass through the channel.

    With ``snr_db`` the noise is set to that in-band SNR; otherwise the
    model's noise floor applies, so SNR follows distance, brightness and
    splitting.
    """
    clean = synthesize(schedule, model)
    if snr_db is not None:
        return add_noise(clean, snr_db, seed, band_halfwidth=model.band_halfwidth)
    rng = np.random.default_rng(seed)
    noisy = clean.samples + rng.normal(0.0, math.sqrt(model.noise_power()), len(clean))
    return AudioBuffer(limit(noisy), clean.sample_rate, clean.carriers)


def brightness_to_snr(level: float, scale: str = "level") -> float:
    """Predicted SNR (dB) from the brightness table, linear between rows.

    ``scale="level"`` takes the 1..10 brightness level; ``scale="gray"``
    maps grayscale 0..255 linearly onto that range.
    """
    if scale == "gray":
        if not 0 <= level <= 255:
            raise ValueError("grayscale level must lie in [0, 255]")
        level = 1 + 9 * level / 255
    elif scale != "level":
        raise ValueError(f"unknown scale {scale!r}")
    if not 1 <= level <= 10:
        raise ValueError("brightness level must lie in [1, 10]")
    return float(np.interp(level, BRIGHTNESS_LEVELS, BRIGHTNESS_SNR_DB))


def _as_energy_array(x):
    a = np.asarray(x)
    if a.dtype.kind in "iub":
        return a.astype(np.int64)
    return a


def grayscale_energy(intensity) -> object:
    """3 * sum(I**2): identical R, G and B channels."""
    a = _as_energy_array(intensity)
    return 3 * (a * a).sum()


def color_energy(red, green, blue) -> object:
    r, g, b = (_as_energy_array(c) for c in (red, green, blue))
    return (r * r + g * g + b * b).sum()


def grayscale_energy_ratio(rgb) -> float:
    """Colour energy over the energy of the grayscale image at each pixel's peak channel.

    ``rgb`` has shape (..., 3).  Equals 1 for gray content, 1/3 when one
    channel carries everything.
    """
    a = _as_energy_array(rgb)
    peak = a.max(axis=-1)
    gray = grayscale_energy(peak)
    if gray == 0:
        raise ValueError("image is black")
    return float(color_energy(a[..., 0], a[..., 1], a[..., 2]) / gray)


def ofdm_subcarriers(n: int, symbol_duration: float, first_index: int = 1) -> np.ndarray:
    """Frequencies k/T for k = first_index .. first_index+n-1."""
    return (first_index + np.arange(n)) / symbol_duration


def subcarrier_gram(freqs: Sequence[float], symbol_duration: float, sample_rate: float,
                    phases: Optional[Sequence[float]] = None) -> np.ndarray:
    """Normalized inner products of sampled cosines over one symbol window.

    Entry (i, j) is <c_i, c_j> / sqrt(<c_i, c_i><c_j, c_j>).
    """
    n = int(round(symbol_duration * sample_rate))
    t = np.arange(n) / sample_rate
    ph = np.zeros(len(freqs)) if phases is None else np.asarray(phases, float)
    c = np.cos(2 * np.pi * np.asarray(freqs, float)[:, None] * t[None, :] + ph[:, None])
    g = c @ c.T
    d = np.sqrt(np.diag(g))
    return g / np.outer(d, d)
