"""Band-power bookkeeping shared by the noise injector and the SNR meter.

SNR here is in-band: fundamental power inside ``carrier +/- halfwidth``
over the noise power expected inside those same bands.  The noise density
is the median of the remaining bins (harmonic bands, DC and Nyquist
excluded) divided by ln 2, which is unbiased for white Gaussian noise and
ignores the sparse leakage skirts around keyed carriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_HALFWIDTH = 100.0


@dataclass(frozen=True)
class BandPowers:
    in_band: float       # summed periodogram power over the signal bins
    n_band: int
    noise_per_bin: float
    window_energy: float  # sum(w**2); white noise of variance s2 gives s2 * this per bin

    @property
    def noise_in_band(self) -> float:
        return self.noise_per_bin * self.n_band

    @property
    def signal(self) -> float:
        return self.in_band - self.noise_in_band


def band_masks(freqs: np.ndarray, carriers: Sequence[float], halfwidth: float, nyquist: float):
    signal = np.zeros(len(freqs), dtype=bool)
    excluded = np.zeros(len(freqs), dtype=bool)
    for c in carriers:
        signal |= np.abs(freqs - c) <= halfwidth
        for k in range(2, int(nyquist // c) + 2):
            excluded |= np.abs(freqs - k * c) <= halfwidth
    excluded |= freqs <= halfwidth
    excluded[-1] = True
    noise = ~signal & ~excluded
    return signal, noise


def windowed_spectrum(samples: np.ndarray) -> tuple:
    """Hann-windowed rfft and sum(w**2)."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < 16:
        raise ValueError("buffer too short for spectral measurement")
    w = np.hanning(len(x))
    return np.fft.rfft(x * w), float(np.sum(w * w))


def spectrum_masks(n: int, sample_rate: float, carriers: Sequence[float],
                   halfwidth: float = DEFAULT_HALFWIDTH) -> tuple:
    if not carriers:
        raise ValueError("need at least one signal frequency")
    freqs = np.fft.rfftfreq(n, 1 / sample_rate)
    signal, noise = band_masks(freqs, carriers, halfwidth, sample_rate / 2)
    if not noise.any() or not signal.any():
        raise ValueError("signal bands leave no room for a noise estimate")
    return signal, noise


def powers_from_spectrum(power: np.ndarray, signal: np.ndarray, noise: np.ndarray,
                         window_energy: float) -> BandPowers:
    per_bin = float(np.median(power[noise])) / math.log(2)
    return BandPowers(float(power[signal].sum()), int(signal.sum()), per_bin, window_energy)


def band_powers(samples: np.ndarray, sample_rate: float, carriers: Sequence[float],
                halfwidth: float = DEFAULT_HALFWIDTH) -> BandPowers:
    spec, energy = windowed_spectrum(samples)
    signal, noise = spectrum_masks(len(samples), sample_rate, carriers, halfwidth)
    return powers_from_spectrum(np.abs(spec) ** 2, signal, noise, energy)


def snr_db(bp: BandPowers) -> float:
    """+inf when the noise estimate is numerically zero, -inf when no signal rises above it."""
    noise = bp.noise_in_band
    if bp.in_band <= 0:
        return -math.inf
    if noise <= 1e-12 * bp.in_band:
        return math.inf
    if bp.signal <= 0:
        return -math.inf
    return 10 * math.log10(bp.signal / noise)
