"""Packet framing, FSK symbol mapping and carrier planning.

Wire format, MSB first in every field::

    preamble(8) [header(8): type(4) seq(4)] payload(32) checksum(8)

The checksum is the XOR of every preceding byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np

from .display import DisplayConfig, Number, exact

PREAMBLE = 0b10101010
PACKET_BITS = 48
PACKET_BITS_WITH_HEADER = 56
HARMONIC_TOLERANCE = 0.01


class PacketError(ValueError):
    reason = "invalid"


class BadLength(PacketError):
    reason = "bad-length"


class BadPreamble(PacketError):
    reason = "bad-preamble"


class BadChecksum(PacketError):
    reason = "bad-checksum"


class InfeasiblePlan(ValueError):
    def __init__(self, message: str, max_channels: int):
        super().__init__(message)
        self.max_channels = max_channels


def xor_fold(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a ^ b, values, 0)


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: Sequence[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


@dataclass(frozen=True)
class Packet:
    payload: int
    header: Optional[int] = None
    preamble: int = PREAMBLE
    checksum: int = -1

    def __post_init__(self):
        if not 0 <= self.payload < 1 << 32:
            raise ValueError(f"payload must fit 32 bits, got {self.payload:#x}")
        if self.header is not None and not 0 <= self.header < 256:
            raise ValueError("header must fit 8 bits")
        if self.checksum == -1:
            object.__setattr__(self, "checksum", xor_fold(self._body_bytes()))

    @property
    def packet_type(self) -> Optional[int]:
        return None if self.header is None else self.header >> 4

    @property
    def sequence(self) -> Optional[int]:
        return None if self.header is None else self.header & 0x0F

    @property
    def payload_bytes(self) -> bytes:
        return self.payload.to_bytes(4, "big")

    def _body_bytes(self) -> list:
        head = [self.preamble] + ([] if self.header is None else [self.header])
        return head + list(self.payload_bytes)

    def to_bytes(self) -> bytes:
        return bytes(self._body_bytes() + [self.checksum])

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.to_bytes(), dtype=np.uint8))

    def __len__(self):
        return PACKET_BITS if self.header is None else PACKET_BITS_WITH_HEADER

    def hex(self) -> str:
        return self.to_bytes().hex()


def encode_packet(payload: int, header: Optional[tuple] = None) -> Packet:
    """Build a packet; ``header`` is ``(type, seq)``, each 4 bits."""
    head = None
    if header is not None:
        ptype, seq = header
        if not (0 <= ptype < 16 and 0 <= seq < 16):
            raise ValueError("packet type and sequence number are 4 bits each")
        head = (ptype << 4) | seq
    return Packet(payload, head)


def decode_packet(bits: Sequence[int]) -> Packet:
    """Parse and validate a 48- or 56-bit packet.

    Raises :class:`BadLength`, :class:`BadPreamble` or :class:`BadChecksum`.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) not in (PACKET_BITS, PACKET_BITS_WITH_HEADER):
        raise BadLength(f"packet must be 48 or 56 bits, got {len(bits)}")
    data = np.packbits(bits).tolist()
    if data[0] != PREAMBLE:
        raise BadPreamble(f"preamble {data[0]:08b} != {PREAMBLE:08b}")
    if xor_fold(data[:-1]) != data[-1]:
        raise BadChecksum(f"checksum {data[-1]:#04x} != {xor_fold(data[:-1]):#04x}")
    header = data[1] if len(data) == 7 else None
    payload = int.from_bytes(bytes(data[-5:-1]), "big")
    return Packet(payload, header, data[0], data[-1])


def packetize(data: bytes, with_header: bool = False, packet_type: int = 0) -> list:
    """Split bytes into 32-bit payloads; an empty input still yields one packet."""
    data = bytes(data) or b"\x00"
    data += b"\x00" * (-len(data) % 4)
    out = []
    for i in range(0, len(data), 4):
        header = (packet_type, (i // 4) % 16) if with_header else None
        out.append(encode_packet(int.from_bytes(data[i:i + 4], "big"), header))
    return out


@dataclass(frozen=True)
class ModemConfig:
    freqs: tuple
    bit_duration: Number = Fraction(1, 10)
    duty_cycle: Number = 0.5

    def __post_init__(self):
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))
        m = len(self.freqs)
        if m < 2 or m & (m - 1):
            raise ValueError(f"M must be a power of two >= 2, got {m}")
        if len(set(self.freqs)) != m or min(self.freqs) <= 0:
            raise ValueError("carrier frequencies must be distinct and positive")
        if exact(self.bit_duration) <= 0:
            raise ValueError("bit duration must be > 0")

    @property
    def M(self) -> int:
        return len(self.freqs)

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def symbol_duration(self) -> Fraction:
        return exact(self.bit_duration) * self.bits_per_symbol


@dataclass(frozen=True)
class ScheduleEntry:
    """One displayed frame pattern; ``freq`` None means a blank (black) frame."""

    freq: Optional[float]
    duration: Fraction
    duty_cycle: Number = 0.5

    @property
    def silent(self) -> bool:
        return self.freq is None


@dataclass
class FrameSchedule:
    entries: list = field(default_factory=list)
    pad_bits: int = 0
    display: Optional[DisplayConfig] = None

    @property
    def total_duration(self) -> Fraction:
        return sum((e.duration for e in self.entries), Fraction(0))

    @property
    def carriers(self) -> tuple:
        return tuple(sorted({e.freq for e in self.entries if e.freq is not None}))

    def __len__(self):
        return len(self.entries)

    def extend(self, other: "FrameSchedule") -> "FrameSchedule":
        self.entries.extend(other.entries)
        self.pad_bits += other.pad_bits
        return self

    def append_gap(self, duration: Number) -> "FrameSchedule":
        if exact(duration) > 0:
            self.entries.append(ScheduleEntry(None, exact(duration)))
        return self

    def bitmap(self, entry: ScheduleEntry, use_effective_clock: bool = False):
        """Render the frame an entry displays (needs ``display``)."""
        from .pattern import Bitmap, PatternSpec, generate_square_bitmap

        if self.display is None:
            raise ValueError("schedule has no display configuration")
        if entry.silent:
            return Bitmap(np.zeros((self.display.height, self.display.width), np.uint8))
        spec = PatternSpec(entry.freq, entry.duty_cycle, use_effective_clock=use_effective_clock)
        return generate_square_bitmap(self.display, spec)

    def to_text(self) -> str:
        """One ``freq_hz duration_ms`` line per entry; blank frames use freq 0."""
        lines = []
        for e in self.entries:
            ms = e.duration * 1000
            ms_text = str(ms.numerator) if ms.denominator == 1 else repr(float(ms))
            lines.append(f"{0 if e.freq is None else e.freq:g} {ms_text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FrameSchedule":
        entries = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            f, ms = line.split()
            freq = float(f)
            entries.append(ScheduleEntry(freq if freq > 0 else None, exact(ms) / 1000))
        return cls(entries)


def bits_to_schedule(bits: Sequence[int], modem: ModemConfig,
                     display: Optional[DisplayConfig] = None) -> FrameSchedule:
    """Map bits to carrier frames.

    Groups of ``log2 M`` bits (big-endian) select ``freqs[index]``, each shown
    for ``T_b * log2 M``.  A short final group is zero-padded.
    """
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if np.any(bits > 1):
        raise ValueError("bits must be 0 or 1")
    k = modem.bits_per_symbol
    pad = -len(bits) % k
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, np.uint8)])
    weights = 1 << np.arange(k - 1, -1, -1)
    symbols = bits.reshape(-1, k) @ weights if len(bits) else []
    dur = modem.symbol_duration
    entries = [ScheduleEntry(modem.freqs[int(s)], dur, modem.duty_cycle) for s in symbols]
    return FrameSchedule(entries, pad_bits=pad, display=display)


def packets_to_schedule(packets: Sequence[Packet], modem: ModemConfig, gap_symbols: int = 2,
                        lead_symbols: Optional[int] = None,
                        display: Optional[DisplayConfig] = None) -> FrameSchedule:
    """Frame several packets with blank gaps before, between and after them."""
    gap = modem.symbol_duration * gap_symbols
    lead = gap if lead_symbols is None else modem.symbol_duration * lead_symbols
    sched = FrameSchedule(display=display).append_gap(lead)
    for i, p in enumerate(packets):
        if i:
            sched.append_gap(gap)
        sched.extend(bits_to_schedule(p.to_bits(), modem))
    return sched.append_gap(gap)


def rates(bit_duration: Number, M: int) -> tuple:
    """``(R_b, R_s)`` for a bit duration and alphabet size."""
    rb = 1 / exact(bit_duration)
    return rb, rb / int(math.log2(M))


def theoretical_rates(modem: ModemConfig) -> tuple:
    """``(R_b, R_s, B_total)`` with B_total = 2*delta_f + 2*R_s.

    ``delta_f`` is the widest carrier gap, ``max(freqs) - min(freqs)``.
    """
    rb, rs = rates(modem.bit_duration, modem.M)
    delta_f = max(modem.freqs) - min(modem.freqs)
    return float(rb), float(rs), 2 * delta_f + 2 * float(rs)


def aggregate_rate(n: int, bit_rate: Number) -> float:
    """Total bit rate of ``n`` concurrent screens or strips."""
    if n < 1:
        raise ValueError("need at least one stream")
    return n * float(bit_rate)


def channel_spacing(delta_f_fsk: float, symbol_rate: float) -> float:
    return 2 * delta_f_fsk + 2 * symbol_rate


def harmonic_conflict(fa: float, fb: float, tol: float = HARMONIC_TOLERANCE) -> bool:
    """True if the higher carrier sits within ``tol`` of an integer multiple (>= 2) of the lower."""
    lo, hi = sorted((fa, fb))
    r = hi / lo
    return r >= 2 - tol and abs(r - round(r)) <= tol


def check_plan(carriers: Sequence[float], delta_f_fsk: float, symbol_rate: float) -> list:
    """Every constraint violation in a carrier plan, as readable strings."""
    spacing = channel_spacing(delta_f_fsk, symbol_rate)
    problems = []
    for i, fa in enumerate(carriers):
        for fb in carriers[i + 1:]:
            if abs(fa - fb) < spacing:
                problems.append(f"{fa:g} and {fb:g} Hz closer than {spacing:g} Hz")
            if harmonic_conflict(fa, fb):
                problems.append(f"{fa:g} and {fb:g} Hz are harmonically related")
    return problems


def plan_frequencies(n_channels: int, band: tuple, delta_f_fsk: float,
                     symbol_rate: float) -> list:
    """Greedy lowest-first carrier allocation on a 1 Hz grid.

    Raises :class:`InfeasiblePlan` carrying the largest channel count that fits.
    """
    f_min, f_max = band
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    if not 0 < f_min <= f_max:
        raise ValueError(f"empty or invalid band {band}")
    spacing = channel_spacing(delta_f_fsk, symbol_rate)
    carriers: list = []
    cand = math.ceil(f_min)
    while cand <= f_max and len(carriers) < n_channels:
        if carriers and cand - carriers[-1] < spacing:
            cand = math.ceil(carriers[-1] + spacing)
            continue
        clash = next((f for f in carriers if harmonic_conflict(f, cand)), None)
        if clash is None:
            carriers.append(cand)
            cand = math.ceil(cand + spacing)
            continue
        k = round(cand / clash)
        # skip past the tolerance window; float rounding must not stall the scan
        cand = max(cand + 1, math.floor((k + HARMONIC_TOLERANCE) * clash) + 1)
    if len(carriers) < n_channels:
        raise InfeasiblePlan(
            f"cannot fit {n_channels} channels in [{f_min:g}, {f_max:g}] Hz "
            f"with {spacing:g} Hz spacing; at most {len(carriers)} fit",
            len(carriers),
        )
    return [float(c) for c in carriers]
