"""Square-wave bitmap generation.

A bitmap is scanned out in row-major order at the pixel clock, so pixel
``s`` (counting across rows) is emitted at time ``s / clock``.  A square
wave of frequency ``f`` therefore repeats every ``clock / f`` pixels.

Two generators share the same sample numbering:

* the default phase accumulator: pixel ``s`` is high iff
  ``frac(s * f / clock) < duty``, evaluated in exact integer arithmetic so
  fractional cycle sizes keep their long-run frequency;
* ``conformance=True``: the cycle size is truncated to an integer and the
  pixel is high iff ``s mod cycle < duty * cycle``.  For integer cycle sizes
  the two agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .display import DisplayConfig, Number, exact, pixel_clock
from . import imageio

_INT64_SAFE = 2**62


def cycle_size(clock: Number, freq: Number) -> Fraction:
    """Pixels per square-wave period, exact."""
    freq = exact(freq)
    if freq <= 0:
        raise ValueError(f"frequency must be > 0, got {freq}")
    return exact(clock) / freq


@dataclass(frozen=True)
class PatternSpec:
    target_freq: Number
    duty_cycle: Number = 0.5
    high_level: int = 255
    low_level: int = 0
    use_effective_clock: bool = False

    def __post_init__(self):
        d = exact(self.duty_cycle)
        if not 0 < d < 1:
            raise ValueError(f"duty cycle must be in (0, 1), got {self.duty_cycle}")
        if not 0 <= self.low_level < self.high_level <= 255:
            raise ValueError("need 0 <= low_level < high_level <= 255")
        if exact(self.target_freq) <= 0:
            raise ValueError(f"frequency must be > 0, got {self.target_freq}")

    def check_against(self, clock: Fraction) -> None:
        check_frequency(clock, self.target_freq)


def check_frequency(clock: Fraction, freq: Number) -> None:
    f = exact(freq)
    if f <= 0:
        raise ValueError(f"frequency must be > 0, got {freq}")
    if f > clock / 2:
        raise ValueError(
            f"frequency {float(f):g} Hz needs fewer than 2 pixels per cycle "
            f"at a {float(clock):g} Hz pixel clock"
        )


@dataclass(frozen=True)
class SplitSpec:
    region_freqs: tuple

    def __post_init__(self):
        object.__setattr__(self, "region_freqs", tuple(self.region_freqs))
        if not self.region_freqs:
            raise ValueError("split needs at least one region frequency")

    @property
    def n(self) -> int:
        return len(self.region_freqs)


@dataclass(frozen=True, eq=False)
class Bitmap:
    """Grayscale pixel grid, shape (height, width), uint8, read-only."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8, copy=True)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("bitmap must be a non-empty 2-D array")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Bitmap):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Bitmap({self.width}x{self.height})"

    def white_fraction(self, level: int = 255) -> float:
        return float(np.mean(self.pixels == level))

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def save_pgm(self, path) -> Path:
        return imageio.write_pgm(path, self.pixels)

    @classmethod
    def load_pgm(cls, path) -> "Bitmap":
        return cls(imageio.read_pgm(path))


def _high_mask(samples: np.ndarray, clock: Fraction, freq: Number, duty: Number,
               conformance: bool = False) -> np.ndarray:
    """Boolean high/low state for each sample number."""
    d = exact(duty)
    if conformance:
        period = int(clock / exact(freq))
        # s mod period < d * period, cleared of denominators
        lhs_scale, rhs, a, b = d.denominator, d.numerator * period, 1, period
    else:
        ratio = exact(freq) / clock
        a, b = ratio.numerator, ratio.denominator
        lhs_scale, rhs = d.denominator, d.numerator * b
    top = int(samples.max(initial=0)) * a
    if max(top, b * lhs_scale, rhs) < _INT64_SAFE:
        s = samples.astype(np.int64)
        return (s * a % b) * lhs_scale < rhs
    s = samples.astype(object)
    return np.array((s * a % b) * lhs_scale < rhs, dtype=bool)


def _row_stride(cfg: DisplayConfig, width: int, effective: bool) -> int:
    # Blanking only has a position in the scan when it is given explicitly.
    if effective and not cfg.ratio_mode:
        return width + (cfg.h_blank or 0)
    return width


def _sample_numbers(height: int, width: int, stride: int) -> np.ndarray:
    rows = np.arange(height, dtype=np.int64)[:, None] * stride
    return rows + np.arange(width, dtype=np.int64)[None, :]


def generate_square_bitmap(cfg: DisplayConfig, spec: PatternSpec,
                           conformance: bool = False) -> Bitmap:
    """Render one square-wave frame for ``spec.target_freq``.

    With ``spec.use_effective_clock`` and explicit blanking, each row end
    advances the sample counter by ``h_blank`` without emitting pixels.
    """
    clock = pixel_clock(cfg, spec.use_effective_clock)
    spec.check_against(clock)
    stride = _row_stride(cfg, cfg.width, spec.use_effective_clock)
    samples = _sample_numbers(cfg.height, cfg.width, stride)
    high = _high_mask(samples, clock, spec.target_freq, spec.duty_cycle, conformance)
    return Bitmap(np.where(high, spec.high_level, spec.low_level))


def generate_split_bitmap(cfg: DisplayConfig, split: SplitSpec, duty: Number = 0.5, *,
                          high_level: int = 255, low_level: int = 0,
                          use_effective_clock: bool = False,
                          conformance: bool = False) -> Bitmap:
    """Vertical strips, one square wave per strip.

    Strip ``i`` spans columns ``[i*w, (i+1)*w)`` with ``w = width // n`` and
    keeps its own row-major sample counter.  Leftover columns stay low.
    """
    n = split.n
    if n > cfg.width:
        raise ValueError(f"cannot split {cfg.width} columns into {n} regions")
    clock = pixel_clock(cfg, use_effective_clock)
    w = cfg.width // n
    stride = _row_stride(cfg, w, use_effective_clock)
    samples = _sample_numbers(cfg.height, w, stride)
    px = np.full((cfg.height, cfg.width), low_level, dtype=np.uint8)
    for i, freq in enumerate(split.region_freqs):
        PatternSpec(freq, duty, high_level, low_level).check_against(clock)
        high = _high_mask(samples, clock, freq, duty, conformance)
        px[:, i * w:(i + 1) * w] = np.where(high, high_level, low_level)
    return Bitmap(px)


def measure_bitmap_frequency(bmp: Bitmap | np.ndarray, clock: Number, h_blank: int = 0) -> float:
    """Recover the square-wave frequency of a bitmap from its rising edges.

    ``h_blank`` places each row at its true scan-out position when the
    pattern was generated against an explicit-blanking clock.
    """
    px = bmp.pixels if isinstance(bmp, Bitmap) else np.asarray(bmp)
    if px.ndim == 1:
        px = px[None, :]
    h, w = px.shape
    flat = px.reshape(-1)
    hi = flat > flat.min()
    if not hi.any():
        raise ValueError("no transitions: bitmap is constant")
    pos = _sample_numbers(h, w, w + h_blank).reshape(-1)
    rising = np.flatnonzero(hi[1:] & ~hi[:-1]) + 1
    if len(rising) < 2:
        raise ValueError("fewer than two rising edges; cannot measure a period")
    falling = np.flatnonzero(~hi[1:] & hi[:-1]) + 1
    falling = falling[falling > rising[0]]
    edges = pos[rising].astype(np.float64)
    gaps = np.diff(edges)
    # gaps that skipped an edge (blanking, sub-pixel high runs) count as several cycles
    guess = gaps[gaps <= 1.5 * np.median(gaps)].mean()
    k_rise = np.concatenate([[0.0], np.cumsum(np.maximum(np.rint(gaps / guess), 1))])
    # each falling edge belongs to the cycle of the rising edge before it
    k_fall = k_rise[np.searchsorted(rising, falling) - 1]
    # common period, separate offsets for the two edge kinds: least squares
    # over every edge averages out the one-pixel quantization of each
    k = np.concatenate([k_rise, k_fall])
    x = np.concatenate([edges, pos[falling].astype(np.float64)])
    kind = np.concatenate([np.zeros(len(k_rise)), np.ones(len(k_fall))])
    design = np.column_stack([k, 1 - kind, kind]) if len(k_fall) else np.column_stack([k, 1 - kind])
    period = np.linalg.lstsq(design, x, rcond=None)[0][0]
    return float(exact(clock)) / period
