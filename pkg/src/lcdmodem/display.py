"""Display timing and pixel-clock arithmetic.

All clocks are returned as :class:`fractions.Fraction` so that cycle-size
math downstream stays exact. Float inputs are converted through their
decimal string form, so ``beta=0.1`` means exactly 1/10.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional, Union

Number = Union[int, float, Fraction]


def exact(value: Number) -> Fraction:
    """Convert a user-supplied number to an exact rational."""
    if isinstance(value, bool):
        raise TypeError("boolean is not a number here")
    if isinstance(value, Rational):
        return Fraction(value)
    return Fraction(str(value))


@dataclass(frozen=True)
class DisplayConfig:
    """Visible resolution, refresh rate and blanking geometry.

    Blanking is given either explicitly (``h_blank`` extra pixels per row,
    ``v_blank`` extra rows per frame) or as an overhead ratio ``beta``.
    Leaving all three unset means no blanking.
    """

    width: int
    height: int
    refresh_rate: Number
    h_blank: Optional[int] = None
    v_blank: Optional[int] = None
    beta: Optional[Number] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"resolution must be positive, got {self.width}x{self.height}")
        if exact(self.refresh_rate) <= 0:
            raise ValueError("refresh_rate must be > 0")
        explicit = self.h_blank is not None or self.v_blank is not None
        if explicit and self.beta is not None:
            raise ValueError("give either explicit h_blank/v_blank or beta, not both")
        if (self.h_blank or 0) < 0 or (self.v_blank or 0) < 0:
            raise ValueError("blanking must be >= 0")
        if self.beta is not None and exact(self.beta) < 0:
            raise ValueError("beta must be >= 0")

    @property
    def ratio_mode(self) -> bool:
        return self.beta is not None

    @property
    def h_total(self) -> int:
        """Pixels per scan line including horizontal blanking (explicit mode)."""
        return self.width + (self.h_blank or 0)

    @property
    def v_total(self) -> int:
        return self.height + (self.v_blank or 0)

    @property
    def visible_pixels(self) -> int:
        return self.width * self.height

    @property
    def total_pixels(self) -> Fraction:
        """Pixel slots per frame, blanking included."""
        if self.ratio_mode:
            return self.visible_pixels * (1 + exact(self.beta))
        return Fraction(self.h_total * self.v_total)


def nominal_pixel_clock(cfg: DisplayConfig) -> Fraction:
    """Visible pixels times refresh rate, in Hz."""
    return cfg.visible_pixels * exact(cfg.refresh_rate)


def effective_pixel_clock(cfg: DisplayConfig) -> Fraction:
    """Pixel clock including blanking overhead, in Hz."""
    return cfg.total_pixels * exact(cfg.refresh_rate)


def visible_pixel_fraction(cfg: DisplayConfig) -> Fraction:
    return cfg.visible_pixels / cfg.total_pixels


def pixel_clock(cfg: DisplayConfig, effective: bool = False) -> Fraction:
    return effective_pixel_clock(cfg) if effective else nominal_pixel_clock(cfg)


# CEA-861 timings for the two HD modes; CVT reduced-blanking totals for 1680x1050.
PRESETS: dict[str, DisplayConfig] = {
    "1080p60-cea": DisplayConfig(1920, 1080, 60, h_blank=280, v_blank=45),
    "720p60": DisplayConfig(1280, 720, 60, h_blank=370, v_blank=30),
    "1680x1050@60": DisplayConfig(1680, 1050, 60, h_blank=160, v_blank=30),
}


def preset(name: str) -> DisplayConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown display preset {name!r}; choose from {sorted(PRESETS)}") from None
