from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lcdmodem import (Bitmap, DisplayConfig, PatternSpec, SplitSpec, cycle_size,
                      generate_split_bitmap, generate_square_bitmap, measure_bitmap_frequency,
                      nominal_pixel_clock, preset)
from lcdmodem.display import effective_pixel_clock
from lcdmodem.imageio import read_pgm, write_raw

from oracles import literal_square_bitmap

CEA = preset("1080p60-cea")
CLOCK = 148_500_000


def clock_display(width, height, clock_hz):
    """Blanking-free display whose nominal clock is exactly ``clock_hz``."""
    return DisplayConfig(width, height, Fraction(clock_hz, width * height))


def test_cycle_size_examples():
    assert cycle_size(CLOCK, 15_000) == 9_900
    assert cycle_size(CLOCK, 3_000) == 49_500
    for x in (1, 60, 12345, Fraction(7, 3)):
        assert cycle_size(x, x) == 1
    assert float(cycle_size(CLOCK, 7_800)) == pytest.approx(19_038.4615, abs=1e-4)


@pytest.mark.parametrize("f", [0, -5])
def test_cycle_size_rejects_non_positive(f):
    with pytest.raises(ValueError):
        cycle_size(CLOCK, f)


def test_720p_1000hz_half_cycles():
    cfg = DisplayConfig(1280, 720, 60)
    assert nominal_pixel_clock(cfg) == 55_296_000
    flat = generate_square_bitmap(cfg, PatternSpec(1000)).pixels.reshape(-1)
    cycles = flat[: len(flat) // 55_296 * 55_296].reshape(-1, 55_296)
    assert (cycles[:, :27_648] == 255).all()
    assert (cycles[:, 27_648:] == 0).all()
    assert len(flat) // 55_296 == 16


def test_quarter_clock_gives_two_on_two_off():
    cfg = DisplayConfig(64, 4, 60)
    flat = generate_square_bitmap(cfg, PatternSpec(nominal_pixel_clock(cfg) / 4)).pixels.reshape(-1)
    assert flat[:8].tolist() == [255, 255, 0, 0, 255, 255, 0, 0]
    assert (flat.reshape(-1, 4) == [255, 255, 0, 0]).all()


def test_fractional_cycle_first_quarter_high():
    cfg = DisplayConfig(1920, 1080, 60)
    bmp = generate_square_bitmap(cfg, PatternSpec(15_000, 0.25))
    cyc = cycle_size(nominal_pixel_clock(cfg), 15_000)
    assert cyc == Fraction(41472, 5)
    flat = bmp.pixels.reshape(-1)
    # exact phase of every pixel in the first three rows, computed with Fractions
    for s in range(0, 3 * 1920, 7):
        phase = (Fraction(s) / cyc) % 1
        assert (flat[s] == 255) == (phase < Fraction(1, 4))


@pytest.mark.parametrize("duty", [0.25, 0.5, 0.75])
def test_conformance_matches_literal_loop(duty):
    cfg = clock_display(160, 90, 148_500)
    got = generate_square_bitmap(cfg, PatternSpec(1_100, duty),
                                 conformance=True)
    ref = np.array(literal_square_bitmap(148.5, 1_100, duty, 160, 90), dtype=np.uint8)
    assert np.array_equal(got.pixels, ref)


@settings(max_examples=40, deadline=None)
@given(half=st.integers(1, 400), w=st.integers(8, 200), h=st.integers(1, 40))
def test_accumulator_equals_literal_for_even_integer_cycles(half, w, h):
    cyc = 2 * half
    clock = cyc * 1000
    cfg = clock_display(w, h, clock)
    got = generate_square_bitmap(cfg, PatternSpec(1000))
    ref = np.array(literal_square_bitmap(clock / 1000, 1000, 0.5, w, h), dtype=np.uint8)
    assert np.array_equal(got.pixels, ref)


def test_conformance_truncates_fractional_cycle():
    cfg = DisplayConfig(200, 10, 60)
    clock = nominal_pixel_clock(cfg)
    f = clock / Fraction(41, 2)
    bmp = generate_square_bitmap(cfg, PatternSpec(f), conformance=True)
    flat = bmp.pixels.reshape(-1)
    assert ((np.arange(len(flat)) % 20 < 10) == (flat == 255)).all()


def test_effective_clock_skips_blanking_per_row():
    cfg = DisplayConfig(100, 20, 60, h_blank=20, v_blank=5)
    clock = effective_pixel_clock(cfg)
    f = clock / 48
    bmp = generate_square_bitmap(cfg, PatternSpec(f, use_effective_clock=True))
    # row y starts at scan position 120*y
    for y in range(cfg.height):
        start = 120 * y
        expected = ((start + np.arange(100)) % 48) < 24
        assert ((bmp.pixels[y] == 255) == expected).all()
    assert measure_bitmap_frequency(bmp, clock, h_blank=20) == pytest.approx(float(f), rel=1e-3)


def test_frequency_above_half_clock_rejected():
    cfg = DisplayConfig(64, 4, 60)
    with pytest.raises(ValueError):
        generate_square_bitmap(cfg, PatternSpec(nominal_pixel_clock(cfg) / 2 + 1))


@pytest.mark.parametrize("kwargs", [dict(duty_cycle=0), dict(duty_cycle=1),
                                    dict(high_level=0, low_level=0), dict(target_freq=0)])
def test_pattern_spec_validation(kwargs):
    args = dict(target_freq=1000) | kwargs
    with pytest.raises(ValueError):
        PatternSpec(**args)


def test_custom_levels():
    cfg = DisplayConfig(64, 4, 60)
    bmp = generate_square_bitmap(cfg, PatternSpec(nominal_pixel_clock(cfg) / 8, high_level=200, low_level=30))
    assert set(np.unique(bmp.pixels)) == {30, 200}


def test_split_two_strips():
    bmp = generate_split_bitmap(CEA, SplitSpec((3_000, 7_800)), use_effective_clock=False)
    assert bmp.pixels.shape == (1080, 1920)
    clk = effective_pixel_clock(CEA)
    assert cycle_size(clk, 3_000) == 49_500
    assert float(cycle_size(clk, 7_800)) == pytest.approx(19_038.46, abs=0.01)
    nominal = nominal_pixel_clock(CEA)
    for i, f in enumerate((3_000, 7_800)):
        strip = bmp.pixels[:, i * 960:(i + 1) * 960]
        assert measure_bitmap_frequency(strip, nominal) == pytest.approx(f, rel=1e-3)


def test_split_three_strips_effective_clock():
    freqs = (7_500, 3_400, 14_500)
    bmp = generate_split_bitmap(CEA, SplitSpec(freqs), use_effective_clock=True)
    for i, f in enumerate(freqs):
        strip = bmp.pixels[:, i * 640:(i + 1) * 640]
        # each strip counter runs over its own 640 columns plus the row blanking
        got = measure_bitmap_frequency(strip, CLOCK, h_blank=CEA.h_blank)
        assert got == pytest.approx(f, rel=1e-3)


def test_split_strip_counter_is_independent():
    cfg = DisplayConfig(30, 6, 60)
    f = nominal_pixel_clock(cfg) / 4
    bmp = generate_split_bitmap(cfg, SplitSpec((f, f, f)))
    strip = generate_square_bitmap(clock_display(10, 6, nominal_pixel_clock(cfg)), PatternSpec(f))
    for i in range(3):
        assert np.array_equal(bmp.pixels[:, 10 * i:10 * i + 10], strip.pixels)


def test_split_leftover_columns_low():
    cfg = DisplayConfig(1921, 8, 60)
    bmp = generate_split_bitmap(cfg, SplitSpec((3_000, 7_800)), low_level=7)
    assert (bmp.pixels[:, 1920] == 7).all()


def test_split_single_region_is_plain_generator():
    for eff in (False, True):
        a = generate_split_bitmap(CEA, SplitSpec((15_000,)), 0.25, use_effective_clock=eff)
        b = generate_square_bitmap(CEA, PatternSpec(15_000, 0.25, use_effective_clock=eff))
        assert a == b


def test_split_more_regions_than_columns():
    with pytest.raises(ValueError):
        generate_split_bitmap(DisplayConfig(4, 4, 60), SplitSpec((1, 1, 1, 1, 1)))


def test_measure_15khz():
    bmp = generate_square_bitmap(clock_display(1920, 1080, CLOCK), PatternSpec(15_000))
    assert measure_bitmap_frequency(bmp, CLOCK) == pytest.approx(15_000, abs=15)


def test_measure_constant_bitmap_fails():
    with pytest.raises(ValueError, match="no transitions"):
        measure_bitmap_frequency(Bitmap(np.full((10, 10), 255)), CLOCK)


def test_measure_four_pixel_cycle():
    row = np.tile([255, 255, 0, 0], 50)[None, :]
    assert measure_bitmap_frequency(row, 1000) == pytest.approx(250)


# A pattern spanning N pixels pins the period only to about 1/(2N) relative,
# so the 0.1% bound needs a few thousand pixels as well as ten cycles.
@settings(max_examples=50, deadline=None)
@given(w=st.integers(64, 640), h=st.integers(64, 120),
       clock=st.integers(1_000_000, 200_000_000),
       duty=st.sampled_from([0.1, 0.25, 0.5, 0.75, 0.9]),
       data=st.data())
def test_round_trip_frequency(w, h, clock, duty, data):
    n = w * h
    lo = 10 * clock / n
    hi = clock / 4 if duty in (0.25, 0.5, 0.75) else clock / 12
    assume(lo < hi)
    f = data.draw(st.floats(lo, hi))
    cfg = clock_display(w, h, clock)
    bmp = generate_square_bitmap(cfg, PatternSpec(f, duty))
    assert measure_bitmap_frequency(bmp, clock) == pytest.approx(f, rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(w=st.integers(16, 400), h=st.integers(1, 60), cyc=st.fractions(2, 500, max_denominator=50),
       duty=st.fractions(Fraction(1, 20), Fraction(19, 20), max_denominator=20))
def test_white_fraction_tracks_duty(w, h, cyc, duty):
    cfg = DisplayConfig(w, h, 60)
    f = nominal_pixel_clock(cfg) / cyc
    assume(cyc >= 2)
    bmp = generate_square_bitmap(cfg, PatternSpec(f, duty))
    n = w * h
    # whole periods contribute D exactly (to 1/cycle); a trailing partial period can add up to cycle/n
    assert abs(bmp.white_fraction() - float(duty)) <= 1 / float(cyc) + float(cyc) / n + 1e-12


def test_white_fraction_whole_cycles():
    cfg = DisplayConfig(99, 100, 60)  # 9900 pixels = 1000 cycles of 9.9
    bmp = generate_square_bitmap(cfg, PatternSpec(nominal_pixel_clock(cfg) / Fraction(99, 10), 0.3))
    assert abs(bmp.white_fraction() - 0.3) <= 1 / 9.9


@settings(max_examples=15, deadline=None)
@given(freqs=st.lists(st.integers(2_000, 16_000), min_size=1, max_size=4))
def test_each_split_strip_round_trips(freqs):
    bmp = generate_split_bitmap(CEA, SplitSpec(tuple(freqs)))
    w = 1920 // len(freqs)
    clock = nominal_pixel_clock(CEA)
    for i, f in enumerate(freqs):
        strip = bmp.pixels[:, i * w:(i + 1) * w]
        assert measure_bitmap_frequency(strip, clock) == pytest.approx(f, rel=1e-3)


def test_bitmap_is_read_only():
    bmp = generate_square_bitmap(DisplayConfig(16, 2, 60), PatternSpec(120))
    with pytest.raises(ValueError):
        bmp.pixels[0, 0] = 1


def test_pgm_and_raw_export(tmp_path):
    bmp = generate_square_bitmap(DisplayConfig(37, 11, 60), PatternSpec(2000, 0.3))
    path = bmp.save_pgm(tmp_path / "p.pgm")
    data = path.read_bytes()
    assert data.startswith(b"P5\n37 11\n255\n")
    assert len(data) == len(b"P5\n37 11\n255\n") + 37 * 11
    assert Bitmap.load_pgm(path) == bmp
    raw = write_raw(tmp_path / "p.raw", bmp.pixels)
    assert raw.read_bytes() == bmp.to_bytes()


def test_pgm_reader_accepts_comments(tmp_path):
    px = np.arange(12, dtype=np.uint8).reshape(3, 4)
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n4 3\n# max\n255\n" + px.tobytes())
    assert np.array_equal(read_pgm(p), px)


def test_pgm_reader_rejects_other_formats(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(ValueError):
        read_pgm(p)
