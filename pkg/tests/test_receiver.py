import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcdmodem import (AudioBuffer, ChannelModel, DemodConfig, ModemConfig, NoTransmission,
                      add_noise, demodulate, encode_packet, find_preamble, measure_snr,
                      packets_to_schedule, spectrogram, synthesize, tone_energy, transmit)
from lcdmodem.codec import FrameSchedule, ScheduleEntry
from lcdmodem.receiver import bit_errors, extract_packets, silent_symbols, write_spectrogram
from lcdmodem.imageio import read_pgm

from oracles import dft_bin_power

FS = 48_000
LEAD = 9600  # two silent 100 ms symbols open every packet schedule


def sine(f, n, amp=0.5, fs=FS):
    return AudioBuffer(amp * np.sin(2 * np.pi * f * np.arange(n) / fs), fs)


def loopback(payloads, modem, snr=20, seed=0, model=ChannelModel(), header=False, offset=None):
    headers = [(1, i % 16) if header else None for i in range(len(payloads))]
    pkts = [encode_packet(p, h) for p, h in zip(payloads, headers)]
    buf = transmit(packets_to_schedule(pkts, modem), model, snr_db=snr, seed=seed)
    cfg = DemodConfig.from_modem(modem, header=header)
    return pkts, demodulate(buf, cfg, offset)


@pytest.mark.parametrize("f, start, length", [(3000, 0, 480), (7812.5, 17, 311), (123.4, 5, 97)])
def test_goertzel_matches_brute_dft(rng, f, start, length):
    buf = AudioBuffer(rng.standard_normal(1000), FS)
    ref = dft_bin_power(buf.samples[start:start + length], f, FS)
    assert tone_energy(buf, f, start, length) == pytest.approx(ref, rel=1e-6)


def test_tone_beats_its_octave():
    buf = sine(3000, 480)  # ten cycles
    assert tone_energy(buf, 3000, 0, 160) >= 100 * tone_energy(buf, 6000, 0, 160)


def test_silence_has_no_energy():
    assert tone_energy(AudioBuffer(np.zeros(480), FS), 3000, 0, 480) == 0


@pytest.mark.parametrize("start, length, f", [(-1, 10, 100), (400, 100, 100), (0, 0, 100),
                                              (0, 10, 24_000)])
def test_tone_energy_rejects_bad_windows(start, length, f):
    with pytest.raises(ValueError):
        tone_energy(AudioBuffer(np.zeros(480), FS), f, start, length)


def test_sync_within_eighth_window(modem):
    pkts = [encode_packet(0xC0FFEE11)]
    buf = transmit(packets_to_schedule(pkts, modem), snr_db=20, seed=3)
    cfg = DemodConfig.from_modem(modem)
    assert abs(find_preamble(buf, cfg) - LEAD) <= cfg.window(FS) // 8


def test_sync_on_constructed_start(modem):
    body = synthesize(packets_to_schedule([encode_packet(0x5A5A0F0F)], modem, gap_symbols=0))
    samples = np.concatenate([np.zeros(12_000), body.samples, np.zeros(4800)])
    buf = add_noise(AudioBuffer(samples, FS, body.carriers), 20, seed=1)
    cfg = DemodConfig.from_modem(modem)
    assert abs(find_preamble(buf, cfg) - 12_000) <= cfg.window(FS) // 8
    assert [p.payload for p in demodulate(buf, cfg).packets] == [0x5A5A0F0F]


def test_noise_is_not_a_transmission(rng, modem):
    buf = AudioBuffer(0.1 * rng.standard_normal(FS * 3), FS)
    with pytest.raises(NoTransmission):
        find_preamble(buf, DemodConfig.from_modem(modem))
    with pytest.raises(NoTransmission):
        demodulate(buf, DemodConfig.from_modem(modem))


def test_short_buffer_rejected(modem):
    with pytest.raises(ValueError):
        find_preamble(AudioBuffer(np.zeros(1000), FS), DemodConfig.from_modem(modem))


def test_loopback_at_20db(modem):
    pkts, res = loopback([0xDEADBEEF], modem)
    assert res.packets == pkts
    assert bit_errors(pkts[0].to_bits(), res.bits) == 0
    assert res.scores.shape[1] == 2
    assert res.measured_snr == pytest.approx(20, abs=0.5)
    assert len(res.bits) >= 48


def test_ber_low_snr_exceeds_high_snr(modem):
    def ber(snr):
        errs = 0
        for seed in range(100):
            payload = int(np.random.default_rng(seed).integers(0, 2**32))
            pkts, res = loopback([payload], modem, snr=snr, seed=seed, offset=LEAD)
            errs += bit_errors(pkts[0].to_bits(), res.bits)
        return errs / (100 * 48)

    assert ber(-10) > ber(20) == 0


def test_checksum_failure_reported(modem):
    swapped = ModemConfig(modem.freqs[::-1], modem.bit_duration)
    buf = transmit(packets_to_schedule([encode_packet(0x12345678)], modem), snr_db=30, seed=2)
    res = demodulate(buf, DemodConfig.from_modem(swapped), offset=LEAD)
    assert res.packets == []
    assert res.failures and res.failures[0][1].reason in ("bad-checksum", "bad-preamble")
    assert len(res.bits) >= 48


def test_multiple_packets_recovered(modem):
    payloads = [0x01020304, 0xFFFFFFFF, 0, 0xAAAAAAAA]
    pkts, res = loopback(payloads, modem, seed=4)
    assert [p.payload for p in res.packets] == payloads
    assert len(res.packet_starts) == 4


def test_headers_round_trip(modem):
    payloads = [0x11111111, 0x22222222, 0x33333333]
    pkts, res = loopback(payloads, modem, header=True, seed=6)
    assert res.packets == pkts
    assert [p.sequence for p in res.packets] == [0, 1, 2]


def test_either_length_accepted(modem):
    pkts = [encode_packet(7), encode_packet(8, (2, 3))]
    buf = transmit(packets_to_schedule(pkts, modem), snr_db=25, seed=8)
    res = demodulate(buf, DemodConfig.from_modem(modem, header=None))
    assert res.packets == pkts


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_decisions_invariant_under_scaling(scale):
    modem = ModemConfig((3000, 7800), Fraction(1, 10))
    buf = transmit(packets_to_schedule([encode_packet(0x0BADF00D)], modem), snr_db=5, seed=11)
    cfg = DemodConfig.from_modem(modem)
    a = demodulate(buf, cfg, offset=LEAD)
    b = demodulate(buf.with_samples(buf.samples * scale), cfg, offset=LEAD)
    assert np.array_equal(a.bits, b.bits)


def test_four_fsk_loopback():
    modem = ModemConfig((2000, 4500, 7000, 9500), Fraction(1, 10))
    pkts, res = loopback([0x89ABCDEF, 0x01234567], modem, snr=20, seed=9)
    assert res.packets == pkts


def test_fast_symbols_at_one_metre():
    modem = ModemConfig((3000, 7800), Fraction(1, 20))
    rng = np.random.default_rng(12)
    payloads = [int(p) for p in rng.integers(0, 2**32, 20)]
    pkts, res = loopback(payloads, modem, snr=15, seed=12, model=ChannelModel(distance=1.0))
    assert res.packets == pkts


def test_two_strip_split_decodes_both():
    modems = [ModemConfig((3000, 7800), Fraction(1, 10)), ModemConfig((11_000, 15_000), Fraction(1, 10))]
    streams = [[0xCAFEBABE, 0x00C0FFEE], [0x31415926, 0x27182818]]
    scheds = [packets_to_schedule([encode_packet(p) for p in s], m) for s, m in zip(streams, modems)]
    buf = transmit(scheds, ChannelModel(strips_n=2), snr_db=18, seed=13)
    for m, s in zip(modems, streams):
        res = demodulate(buf, DemodConfig.from_modem(m))
        assert [p.payload for p in res.packets] == s


def test_snr_closes_loop(modem):
    clean = synthesize(packets_to_schedule([encode_packet(0xFEEDFACE)], modem))
    for target in (0, 12.5, 30):
        assert measure_snr(add_noise(clean, target, seed=1), modem.freqs) == pytest.approx(target, abs=0.5)


def test_noiseless_tone_is_infinite():
    assert measure_snr(sine(3000, FS), (3000,)) == math.inf


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.floats(500, 20_000), min_size=1, max_size=3))
def test_pure_noise_reads_near_zero(seed, probes):
    buf = AudioBuffer(np.random.default_rng(seed).standard_normal(FS), FS)
    assert abs(measure_snr(buf, probes, estimator="ratio")) < 3
    # signal estimate after noise subtraction is nothing
    assert measure_snr(buf, probes) < 0


def test_measure_snr_errors():
    with pytest.raises(ValueError):
        measure_snr(AudioBuffer(np.zeros(0), FS), (3000,))
    with pytest.raises(ValueError):
        measure_snr(sine(3000, FS), (3000,), estimator="peak")


def test_spectrogram_of_fsk_has_two_alternating_bands(modem):
    sched = FrameSchedule([ScheduleEntry(f, Fraction(1, 10)) for f in (3000, 7800) * 4])
    mags, freqs = spectrogram(synthesize(sched), window=1024, hop=1024)
    band = lambda f: np.abs(freqs - f) <= 100
    e0 = (mags[:, band(3000)] ** 2).sum(axis=1)
    e1 = (mags[:, band(7800)] ** 2).sum(axis=1)
    total = (mags ** 2).sum(axis=1)
    # harmonics of the square wave carry the rest
    harmonics = np.zeros(len(freqs), dtype=bool)
    for f in (9000, 15_000, 21_000, 23_400):
        harmonics |= np.abs(freqs - f) <= 100
    # frames straddling a symbol boundary spread energy; judge the clean ones
    starts = np.arange(len(mags)) * 1024
    clean = starts // 4800 == (starts + 1023) // 4800
    assert clean.sum() >= 20
    assert np.all((e0 + e1 + (mags[:, harmonics] ** 2).sum(axis=1))[clean] >= 0.999 * total[clean])
    winner = (e1 > e0).astype(int)
    # frames per symbol: 4800 / 1024 -> about 4.7
    changes = np.count_nonzero(np.diff(winner))
    assert 6 <= changes <= 8
    assert winner[0] == 0


def test_spectrogram_chirp_ridge():
    t = np.arange(2 * FS) / FS
    f0, f1 = 3000, 20_000
    x = np.sin(2 * np.pi * (f0 * t + (f1 - f0) / 4 * t ** 2))
    mags, freqs = spectrogram(AudioBuffer(x, FS), window=1024, hop=512)
    ridge = freqs[np.argmax(mags, axis=1)]
    assert np.all(np.diff(ridge) >= 0)
    assert ridge[0] < 3500 and ridge[-1] > 19_500


def test_spectrogram_dc():
    mags, freqs = spectrogram(AudioBuffer(np.full(4096, 0.3), FS), window=256, hop=256)
    # the Hann window leaks DC into bin 1 only
    assert np.all(np.argmax(mags, axis=1) == 0)
    assert mags[:, 2:].max() < 1e-9 * mags[:, 0].min()


def test_spectrogram_errors():
    with pytest.raises(ValueError):
        spectrogram(AudioBuffer(np.zeros(100), FS), window=1024)
    with pytest.raises(ValueError):
        spectrogram(AudioBuffer(np.zeros(100), FS), window=8)


def test_spectrogram_export(tmp_path):
    mags, freqs = spectrogram(sine(3000, 8192), window=512, hop=256)
    csv = write_spectrogram(tmp_path / "s.csv", mags, freqs)
    back = np.loadtxt(csv, delimiter=",", skiprows=1)
    assert back.shape == mags.shape
    assert np.allclose(back, mags, rtol=1e-5)
    img = read_pgm(write_spectrogram(tmp_path / "s.pgm", mags, freqs))
    assert img.shape == (mags.shape[1], mags.shape[0])


def test_blank_symbols_cannot_open_a_packet(modem):
    cfg = DemodConfig.from_modem(modem)
    pkt = encode_packet(0xFFFFFFFF)
    # gap decided as "10" then the packet: the bits also match two positions early
    bits = np.concatenate([[1, 0], pkt.to_bits()]).astype(np.uint8)
    silent = np.array([True, True] + [False] * 48)
    packets, starts, _ = extract_packets(bits, cfg, silent)
    assert packets == [pkt] and starts == [2]
    assert silent_symbols(np.array([[1.0, 0.0], [0.01, 0.02], [0.0, 0.9]])).tolist() == [False, True, False]
