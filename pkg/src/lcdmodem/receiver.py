"""Symbol-synchronous FSK demodulation and signal measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal import get_window, lfilter

from ._spectrum import DEFAULT_HALFWIDTH, band_powers, snr_db
from .audio import AudioBuffer
from .codec import (PACKET_BITS, PACKET_BITS_WITH_HEADER, PREAMBLE, Packet, PacketError,
                    decode_packet, int_to_bits)
from .display import Number, exact
from . import imageio

_PREAMBLE_BITS = int_to_bits(PREAMBLE, 8)
# a symbol this far below the loudest one is a blank frame
SILENCE_FLOOR = 0.05


class NoTransmission(RuntimeError):
    """No preamble scored above the detection threshold."""


@dataclass(frozen=True)
class DemodConfig:
    freqs: tuple
    bit_duration: Number = Fraction(1, 10)
    # None: try both packet lengths
    header: Optional[bool] = False
    # mean normalized per-symbol margin a preamble must reach
    sync_threshold: float = 0.9
    band_halfwidth: float = DEFAULT_HALFWIDTH

    def __post_init__(self):
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))
        m = len(self.freqs)
        if m < 2 or m & (m - 1):
            raise ValueError(f"M must be a power of two >= 2, got {m}")

    @classmethod
    def from_modem(cls, modem, **kw) -> "DemodConfig":
        return cls(modem.freqs, modem.bit_duration, **kw)

    @property
    def bits_per_symbol(self) -> int:
        return len(self.freqs).bit_length() - 1

    @property
    def symbol_duration(self) -> Fraction:
        return exact(self.bit_duration) * self.bits_per_symbol

    def window(self, sample_rate: int) -> int:
        """Detection window in samples, one symbol long."""
        return round(self.symbol_duration * sample_rate)

    def preamble_symbols(self) -> np.ndarray:
        k = self.bits_per_symbol
        n = len(_PREAMBLE_BITS) // k
        groups = _PREAMBLE_BITS[: n * k].reshape(n, k)
        return groups @ (1 << np.arange(k - 1, -1, -1))


@dataclass
class DemodResult:
    bits: np.ndarray
    packets: list
    scores: np.ndarray
    measured_snr: float
    sync_offset: int
    # (bit index, PacketError) for preamble hits that failed validation
    failures: list = field(default_factory=list)
    packet_starts: list = field(default_factory=list)


def tone_energy(buf: AudioBuffer, f: float, start: int, length: int) -> float:
    """|X(f)|**2 over ``samples[start:start+length]`` via the Goertzel recurrence."""
    if start < 0 or length <= 0 or start + length > len(buf):
        raise ValueError(f"window [{start}, {start + length}) outside buffer of {len(buf)}")
    if not 0 <= f < buf.sample_rate / 2:
        raise ValueError(f"{f:g} Hz is not below Nyquist")
    x = buf.samples[start:start + length]
    w = 2 * math.pi * f / buf.sample_rate
    coeff = 2 * math.cos(w)
    s = lfilter([1.0], [1.0, -coeff, 1.0], x)
    s1 = s[-1]
    s2 = s[-2] if length > 1 else 0.0
    return float(s1 * s1 + s2 * s2 - coeff * s1 * s2)


def _window_energies(samples: np.ndarray, starts: np.ndarray, length: int,
                     freqs: Sequence[float], sample_rate: float, chunk: int = 256) -> np.ndarray:
    """Single-bin DFT energies for many windows at once, shape (len(starts), M)."""
    n = np.arange(length)
    basis = np.exp(-2j * np.pi * np.outer(n, freqs) / sample_rate)
    out = np.empty((len(starts), len(freqs)))
    for i in range(0, len(starts), chunk):
        idx = starts[i:i + chunk, None] + n[None, :]
        out[i:i + chunk] = np.abs(samples[idx] @ basis) ** 2
    return out


def _margins(energies: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Energy at the expected tone minus the strongest other tone, per row."""
    rows = np.arange(len(expected))
    hit = energies[rows, expected]
    rest = energies.copy()
    rest[rows, expected] = -np.inf
    return hit - rest.max(axis=1)


def preamble_scores(buf: AudioBuffer, cfg: DemodConfig) -> tuple:
    """Score every candidate start on a window/8 grid; returns (offsets, scores).

    Each symbol's margin is divided by the strongest tone energy seen in the
    candidate's windows, so a perfect preamble scores the symbol count and
    silent windows score about zero.
    """
    L = cfg.window(buf.sample_rate)
    expected = cfg.preamble_symbols()
    n_sym = len(expected)
    if len(buf) < n_sym * L or L < 8:
        raise ValueError("buffer shorter than the preamble")
    step = max(L // 8, 1)
    offsets = np.arange(0, len(buf) - n_sym * L + 1, step)
    starts = offsets[:, None] + L * np.arange(n_sym)[None, :]
    uniq, inv = np.unique(starts, return_inverse=True)
    e = _window_energies(buf.samples, uniq, L, cfg.freqs, buf.sample_rate)
    inv = inv.reshape(starts.shape)
    peak = e.max(axis=1)[inv].max(axis=1)
    margins = np.zeros(len(offsets))
    for j in range(n_sym):
        margins += _margins(e[inv[:, j]], np.full(len(offsets), expected[j]))
    scores = np.divide(margins, peak, out=np.zeros_like(margins), where=peak > 0)
    return offsets, scores


def find_preamble(buf: AudioBuffer, cfg: DemodConfig) -> int:
    """Sample offset of the first preamble peak.

    The first grid point reaching ``sync_threshold`` times the preamble
    length opens a one-symbol search span; the best score inside it wins.
    Taking the earliest peak keeps payloads that continue the alternating
    pattern from pulling sync one symbol late.

    Raises :class:`NoTransmission` if nothing reaches the threshold.
    """
    offsets, scores = preamble_scores(buf, cfg)
    n_sym = len(cfg.preamble_symbols())
    above = np.flatnonzero(scores >= cfg.sync_threshold * n_sym)
    if len(above) == 0:
        raise NoTransmission(f"best preamble score {scores.max():.2f} of {n_sym}")
    first = above[0]
    span = scores[first:first + 8]
    return int(offsets[first + int(np.argmax(span))])


def symbol_scores(buf: AudioBuffer, cfg: DemodConfig, offset: int) -> np.ndarray:
    L = cfg.window(buf.sample_rate)
    n = (len(buf) - offset) // L
    starts = offset + L * np.arange(max(n, 0))
    return _window_energies(buf.samples, starts, L, cfg.freqs, buf.sample_rate)


def symbols_to_bits(symbols: np.ndarray, k: int) -> np.ndarray:
    shifts = np.arange(k - 1, -1, -1)
    return ((np.asarray(symbols)[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def _packet_lengths(cfg: DemodConfig) -> tuple:
    if cfg.header is None:
        return (PACKET_BITS, PACKET_BITS_WITH_HEADER)
    return (PACKET_BITS_WITH_HEADER,) if cfg.header else (PACKET_BITS,)


def silent_symbols(scores: np.ndarray, floor: float = SILENCE_FLOOR) -> np.ndarray:
    """Symbols whose strongest tone is below ``floor`` of the loudest symbol."""
    peak = scores.max(axis=1) if len(scores) else np.zeros(0)
    return peak < floor * peak.max(initial=0)


def extract_packets(bits: np.ndarray, cfg: DemodConfig, silent: Optional[np.ndarray] = None) -> tuple:
    """Offer every symbol-aligned preamble match to the packet decoder.

    ``silent`` flags blank symbols; no preamble may overlap one, so the
    arbitrary bits decided during gaps cannot open a shifted packet.
    Returns ``(packets, starts, failures)``; a valid packet consumes its bits.
    """
    k = cfg.bits_per_symbol
    blank = np.zeros(len(bits), dtype=bool) if silent is None else np.repeat(silent, k)[:len(bits)]
    packets, starts, failures = [], [], []
    i = 0
    while i + PACKET_BITS <= len(bits):
        if blank[i:i + 8].any() or not np.array_equal(bits[i:i + 8], _PREAMBLE_BITS):
            i += k
            continue
        err = None
        for n in _packet_lengths(cfg):
            if i + n > len(bits):
                continue
            try:
                pkt = decode_packet(bits[i:i + n])
            except PacketError as exc:
                err = exc
                continue
            packets.append(pkt)
            starts.append(i)
            i += n + (-n % k)
            break
        else:
            if err is not None:
                failures.append((i, err))
            i += k
    return packets, starts, failures


def demodulate(buf: AudioBuffer, cfg: DemodConfig, offset: Optional[int] = None) -> DemodResult:
    """Sync (unless ``offset`` is given), decide each symbol by argmax energy, decode packets.

    Raises :class:`NoTransmission` when syncing finds nothing.
    """
    if offset is None:
        offset = find_preamble(buf, cfg)
    scores = symbol_scores(buf, cfg, offset)
    bits = symbols_to_bits(np.argmax(scores, axis=1), cfg.bits_per_symbol) if len(scores) \
        else np.zeros(0, np.uint8)
    packets, starts, failures = extract_packets(bits, cfg, silent_symbols(scores))
    if not packets and not failures and len(bits) >= PACKET_BITS:
        # nothing matched the preamble: report why the synced window is not a packet
        try:
            decode_packet(bits[:_packet_lengths(cfg)[0]])
        except PacketError as exc:
            failures.append((0, exc))
    snr = measure_snr(buf, cfg.freqs, cfg.band_halfwidth)
    return DemodResult(bits, packets, scores, snr, offset, failures, starts)


def measure_snr(buf: AudioBuffer, signal_freqs: Sequence[float],
                band_halfwidth: float = DEFAULT_HALFWIDTH, estimator: str = "subtract") -> float:
    """In-band SNR in dB.

    Harmonics of the carriers are left out of the noise estimate.  The
    default estimator subtracts the expected in-band noise, so it reads
    negative SNRs correctly; it returns +inf when the noise estimate is
    numerically zero and -inf when no signal rises above the noise.
    ``estimator="ratio"`` returns in-band over out-of-band power density,
    (S+N)/N, which reads about 0 dB on pure noise and never goes negative
    by much.
    """
    if len(buf) == 0:
        raise ValueError("empty buffer")
    bp = band_powers(buf.samples, buf.sample_rate, tuple(signal_freqs), band_halfwidth)
    if estimator == "ratio":
        if bp.noise_in_band <= 0:
            return math.inf
        return 10 * math.log10(bp.in_band / bp.noise_in_band)
    if estimator != "subtract":
        raise ValueError(f"unknown estimator {estimator!r}")
    return snr_db(bp)


def spectrogram(buf: AudioBuffer, window: int = 1024, hop: int = 256) -> tuple:
    """Hann-windowed STFT magnitudes, shape (frames, window//2 + 1), with bin frequencies.

    The window is the periodic Hann, so a constant leaks into bin 1 and no further.
    """
    if window < 16 or hop < 1:
        raise ValueError("need window >= 16 and hop >= 1")
    if len(buf) < window:
        raise ValueError(f"buffer of {len(buf)} samples is shorter than the window")
    frames = np.lib.stride_tricks.sliding_window_view(buf.samples, window)[::hop]
    mags = np.abs(np.fft.rfft(frames * get_window("hann", window), axis=1))
    return mags, np.fft.rfftfreq(window, 1 / buf.sample_rate)


def write_spectrogram(path, mags: np.ndarray, freqs: np.ndarray) -> Path:
    """CSV (one row per frame, header of bin frequencies) or a dB-scaled graymap."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        # frequency upward, time to the right
        return imageio.write_pgm(path, imageio.to_gray(mags.T[::-1] ** 2, log=True))
    header = ",".join(f"{f:g}" for f in freqs)
    np.savetxt(path, mags, delimiter=",", header=header, comments="", fmt="%.6g")
    return path


def bit_errors(sent: Sequence[int], received: Sequence[int]) -> int:
    sent = np.asarray(sent)
    received = np.asarray(received)[: len(sent)]
    missing = len(sent) - len(received)
    return int(np.count_nonzero(sent[: len(received)] != received)) + missing
