"""``lcdmodem`` command line: gen, tx, rx, plan and analyze.

Exit codes: 0 success, 2 usage or invalid parameters, 3 decode failure,
4 infeasible frequency plan, 5 no transmission found.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import imageio
from .audio import AudioBuffer
from .channel import (DISTANCE_TABLE_M, DISTANCE_TABLE_SNR_DB, ChannelModel, brightness_to_snr,
                      transmit)
from .codec import (FrameSchedule, InfeasiblePlan, ModemConfig, ScheduleEntry, aggregate_rate,
                    check_plan, packetize, packets_to_schedule, plan_frequencies, rates,
                    channel_spacing)
from .display import DisplayConfig, PRESETS, effective_pixel_clock, exact, nominal_pixel_clock, preset
from .pattern import (PatternSpec, SplitSpec, cycle_size, generate_split_bitmap,
                      generate_square_bitmap)
from .receiver import (DemodConfig, NoTransmission, bit_errors, demodulate, measure_snr,
                       spectrogram, write_spectrogram)

EXIT_OK, EXIT_USAGE, EXIT_DECODE, EXIT_PLAN, EXIT_NO_SIGNAL = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing helpers

def _floats(text: str) -> list:
    """Comma list or ``start:stop:step`` range (stop inclusive)."""
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(n, 0))]
    return [float(p) for p in text.split(",") if p.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in _floats(text)]


def _freq_groups(text: str) -> list:
    """``a,b;c,d`` -> [[a, b], [c, d]]."""
    return [_floats(g) for g in str(text).split(";") if g.strip()]


def _payload(text: str) -> bytes:
    h = text.strip().lower()
    if h.startswith("0x"):
        h = h[2:]
    h = h.replace("_", "")
    if len(h) % 2:
        h = "0" + h
    try:
        return bytes.fromhex(h)
    except ValueError:
        raise UsageError(f"payload {text!r} is not hex") from None


def _carriers(args) -> tuple:
    if getattr(args, "freqs", None):
        return tuple(_floats(args.freqs))
    return (args.f0, args.f1)


def _display(args) -> DisplayConfig:
    if args.width is None and args.height is None:
        return preset(args.preset)
    if args.width is None or args.height is None:
        raise UsageError("--width and --height go together")
    return DisplayConfig(args.width, args.height, exact(args.refresh),
                         h_blank=args.h_blank, v_blank=args.v_blank,
                         beta=None if args.beta is None else exact(args.beta))


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(args, outputs: dict, extra: dict) -> Path:
    path = _out_dir(args) / f"{args.command}.json"
    manifest = {"command": args.command,
                "config": args.config,
                "seed": args.seed,
                "outputs": {k: str(v) for k, v in outputs.items()},
                **extra}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _num(x):
    """JSON/CSV friendly number."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return x


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    cfg = _display(args)
    clock = effective_pixel_clock(cfg) if args.effective_clock else nominal_pixel_clock(cfg)
    out = _out_dir(args)
    levels = dict(high_level=args.high, low_level=args.low)
    if args.split:
        freqs = _floats(args.split)
        bmp = generate_split_bitmap(cfg, SplitSpec(tuple(freqs)), exact(args.duty),
                                    use_effective_clock=args.effective_clock,
                                    conformance=args.conformance, **levels)
        stem = args.name or f"split_{cfg.width}x{cfg.height}_" + "_".join(f"{f:g}" for f in freqs)
        cycles = {f"{f:g}": cycle_size(clock, exact(f)) for f in freqs}
    else:
        if args.freq is None:
            raise UsageError("gen needs --freq or --split")
        spec = PatternSpec(exact(args.freq), exact(args.duty),
                           use_effective_clock=args.effective_clock, **levels)
        bmp = generate_square_bitmap(cfg, spec, conformance=args.conformance)
        stem = args.name or f"pattern_{cfg.width}x{cfg.height}_{args.freq:g}Hz_D{args.duty:g}"
        cycles = {f"{args.freq:g}": cycle_size(clock, exact(args.freq))}

    outputs = {"pgm": bmp.save_pgm(out / f"{stem}.pgm")}
    if args.raw:
        outputs["raw"] = imageio.write_raw(out / f"{stem}.raw", bmp.pixels)
    for f, c in cycles.items():
        shown = math.floor(c) if args.conformance else float(c)
        print(f"cycle size at {f} Hz: {shown:g} px ({c} exact)")
    print(f"nominal pixel clock: {float(nominal_pixel_clock(cfg)):.6g} Hz")
    print(f"effective pixel clock: {float(effective_pixel_clock(cfg)):.6g} Hz")
    print(f"white fraction: {bmp.white_fraction(args.high):.4f}")
    print(f"wrote {outputs['pgm']}")
    _write_manifest(args, outputs, {
        "display": {"width": cfg.width, "height": cfg.height,
                    "refresh_rate": _num(exact(cfg.refresh_rate)),
                    "h_blank": cfg.h_blank, "v_blank": cfg.v_blank,
                    "beta": None if cfg.beta is None else _num(exact(cfg.beta))},
        "pixel_clock_hz": _num(clock),
        "cycle_size_px": {f: _num(c) for f, c in cycles.items()},
        "duty": args.duty, "conformance": args.conformance,
    })
    return EXIT_OK


# ---------------------------------------------------------------- tx

def _tx_model(args, strips_n: int) -> ChannelModel:
    return ChannelModel(sample_rate=args.sample_rate, distance=args.distance,
                        brightness_mean=args.brightness, strips_n=strips_n)


def cmd_tx(args) -> int:
    tb = Fraction(str(args.tb_ms)) / 1000
    groups = _freq_groups(args.strip_freqs) if args.strip_freqs else [list(_carriers(args))]
    n = args.split or len(groups)
    if n < len(groups):
        raise UsageError(f"--split {n} but {len(groups)} strip frequency groups")
    modems = [ModemConfig(tuple(g), tb, exact(args.duty)) for g in groups]
    packets = packetize(_payload(args.payload), with_header=args.header is not None,
                        packet_type=args.header or 0)
    # packets go round-robin over the strips that carry data
    per_strip = [packets[i::len(modems)] for i in range(len(modems))]
    schedules = [packets_to_schedule(p, m, gap_symbols=args.gap_symbols)
                 for p, m in zip(per_strip, modems) if p]
    model = _tx_model(args, n)
    buf = transmit(schedules, model, snr_db=args.snr, seed=args.seed)

    out = _out_dir(args)
    wav = Path(args.wav) if args.wav else out / "tx.wav"
    sched_path = Path(args.schedule) if args.schedule else out / "tx.schedule"
    buf.write_wav(wav)
    sched_path.write_text("\n".join(f"# strip {i}\n{s.to_text()}" for i, s in enumerate(schedules)))

    single = replace(model, strips_n=1)
    rel_db = 20 * math.log10(model.amplitude() / single.amplitude())
    duration = max(s.total_duration for s in schedules)
    print(f"packets: {' '.join(p.hex() for p in packets)}")
    print(f"duration: {float(duration):.3f} s over {len(schedules)} strip(s) of {n}")
    print(f"per-strip level: {rel_db:+.2f} dB re one strip")
    print(f"wrote {wav} and {sched_path}")
    _write_manifest(args, {"wav": wav, "schedule": sched_path}, {
        "packets": [p.hex() for p in packets],
        "strip_carriers": [list(m.freqs) for m in modems],
        "bit_duration_s": _num(tb),
        "duration_s": _num(duration),
        "sample_rate": args.sample_rate,
        "samples": len(buf),
        "distance_m": args.distance,
        "snr_db": args.snr,
        "strips": n,
        "strip_amplitude": model.amplitude(),
        "strip_power_db_re_single": rel_db,
    })
    return EXIT_OK


# ---------------------------------------------------------------- rx

def _rx_one(buf: AudioBuffer, freqs, args, label: str) -> tuple:
    """Returns (exit code, report dict) for one carrier set."""
    header = None if args.any_header else args.header
    cfg = DemodConfig(tuple(freqs), Fraction(str(args.tb_ms)) / 1000, header=header,
                      band_halfwidth=args.halfwidth)
    try:
        res = demodulate(buf, cfg, offset=args.offset)
    except NoTransmission as exc:
        print(f"{label}no transmission found ({exc})")
        return EXIT_NO_SIGNAL, {"carriers": list(cfg.freqs), "status": "no transmission"}
    print(f"{label}sync offset: {res.sync_offset} samples")
    for start, p in zip(res.packet_starts, res.packets):
        extra = "" if p.header is None else f" type {p.packet_type} seq {p.sequence}"
        print(f"{label}packet at bit {start}: payload 0x{p.payload:08X}{extra} checksum OK")
    for start, err in res.failures:
        kind = {"bad-checksum": "checksum failure", "bad-preamble": "preamble mismatch",
                "bad-length": "truncated packet"}.get(err.reason, err.reason)
        print(f"{label}packet at bit {start}: {kind} ({err})")
    print(f"{label}measured SNR: {res.measured_snr:.2f} dB")
    code = EXIT_OK if res.packets else EXIT_DECODE
    if not res.packets and not res.failures:
        print(f"{label}no valid packet")
    return code, {
        "carriers": list(cfg.freqs), "sync_offset": res.sync_offset,
        "payloads": [f"0x{p.payload:08X}" for p in res.packets],
        "failures": [[s, e.reason] for s, e in res.failures],
        "measured_snr_db": res.measured_snr if math.isfinite(res.measured_snr) else str(res.measured_snr),
        "status": "ok" if res.packets else "decode failure",
    }


def cmd_rx(args) -> int:
    try:
        buf = AudioBuffer.read_wav(args.wav)
    except (OSError, EOFError) as exc:
        raise UsageError(f"cannot read {args.wav}: {exc}") from None
    groups = _freq_groups(args.strip_freqs) if args.strip_freqs else [list(_carriers(args))]
    codes, reports = [], []
    for i, g in enumerate(groups):
        code, rep = _rx_one(buf, g, args, f"[strip {i}] " if len(groups) > 1 else "")
        codes.append(code)
        reports.append(rep)
    outputs = {}
    if args.spectrogram:
        mags, freqs = spectrogram(buf, args.window, args.hop)
        outputs["spectrogram"] = write_spectrogram(args.spectrogram, mags, freqs)
        print(f"wrote {outputs['spectrogram']}")
    if args.out:
        _write_manifest(args, outputs, {"wav": str(args.wav), "strips": reports})
    failed = [c for c in codes if c != EXIT_OK]
    if not failed:
        return EXIT_OK
    return EXIT_NO_SIGNAL if all(c == EXIT_NO_SIGNAL for c in failed) else EXIT_DECODE


# ---------------------------------------------------------------- plan

def cmd_plan(args) -> int:
    band = tuple(_floats(args.band))
    if len(band) != 2:
        raise UsageError("--band takes low,high")
    if args.symbol_rate is not None:
        rs = args.symbol_rate
    else:
        rs = float(rates(Fraction(str(args.tb_ms)) / 1000, args.M)[1])
    spacing = channel_spacing(args.delta_f, rs)
    if args.check:
        carriers = _floats(args.check)
        problems = check_plan(carriers, args.delta_f, rs)
        for p in problems:
            print(f"violation: {p}")
        print(f"{'infeasible' if problems else 'ok'}: {len(carriers)} carriers, spacing {spacing:g} Hz")
        return EXIT_PLAN if problems else EXIT_OK
    try:
        carriers = plan_frequencies(args.channels, band, args.delta_f, rs)
    except InfeasiblePlan as exc:
        print(f"infeasible: {exc}")
        print(f"max channels: {exc.max_channels}")
        if args.out:
            _write_manifest(args, {}, {"feasible": False, "max_channels": exc.max_channels})
        return EXIT_PLAN
    print(f"spacing: {spacing:g} Hz (2*{args.delta_f:g} + 2*{rs:g})")
    for i, f in enumerate(carriers):
        print(f"channel {i}: {f:g} Hz")
    if args.out:
        _write_manifest(args, {}, {"feasible": True, "carriers": carriers, "spacing_hz": spacing})
    return EXIT_OK


# ---------------------------------------------------------------- analyze

def _packet_trial(modem: ModemConfig, model: ChannelModel, snr_db, seed_words) -> tuple:
    """One random packet through the channel at known timing: (bit errors, ok, measured SNR)."""
    rng = np.random.default_rng([*seed_words, 0])
    payload = int(rng.integers(0, 2 ** 32))
    pkt = packetize(payload.to_bytes(4, "big"))[0]
    sched = packets_to_schedule([pkt], modem)
    buf = transmit(sched, model, snr_db=snr_db, seed=[*seed_words, 1])
    cfg = DemodConfig.from_modem(modem)
    lead = round(modem.symbol_duration * 2 * model.sample_rate)
    res = demodulate(buf, cfg, offset=lead)
    errors = bit_errors(pkt.to_bits(), res.bits[:len(pkt)])
    ok = any(p.payload == payload for p in res.packets)
    return errors, ok, res.measured_snr


def _tone_snr(freq: float, seconds: float, model: ChannelModel, snr_db, seed_words) -> float:
    sched = FrameSchedule([ScheduleEntry(freq, Fraction(str(seconds)))])
    buf = transmit(sched, model, snr_db=snr_db, seed=[*seed_words, 2])
    return measure_snr(buf, (freq,), model.band_halfwidth)


def _run_point(job: tuple) -> dict:
    kind, point, i, p = job
    row = dict(point)
    if kind == "rates":
        rb, rs = rates(Fraction(str(point["tb_s"])), int(point["M"]))
        row.update(bit_rate=_num(rb), symbol_rate=round(float(rs), 6),
                   bandwidth_hz=round(2 * p["delta_f"] + 2 * float(rs), 6),
                   total_bit_rate=_num(aggregate_rate(int(point["screens"]), rb)),
                   ber="", measured_snr_db="", throughput_bps=_num(aggregate_rate(int(point["screens"]), rb)))
        return row

    modem = ModemConfig(p["freqs"], Fraction(str(p["tb_ms"])) / 1000)
    model = ChannelModel(sample_rate=p["sample_rate"], distance=point.get("distance_m", 0.5),
                         strips_n=int(point.get("strips", 1)))
    snr = point.get("snr_db")
    if kind == "brightness":
        snr = brightness_to_snr(point["level"], p["scale"])
        row["predicted_snr_db"] = round(snr, 6)
    elif kind in ("distance", "strips"):
        row["predicted_snr_db"] = round(model.predicted_snr() - 10 * math.log10(model.strips_n), 6)
    if kind == "distance":
        hit = np.flatnonzero(np.isclose(DISTANCE_TABLE_M, point["distance_m"]))
        row["table_snr_db"] = float(DISTANCE_TABLE_SNR_DB[hit[0]]) if len(hit) else ""

    errors = bits = good = 0
    snrs = []
    for t in range(p["trials"]):
        words = (p["seed"], i, t)
        e, ok, _ = _packet_trial(modem, model, snr, words)
        errors += e
        bits += 48
        good += ok
        snrs.append(_tone_snr(modem.freqs[0], p["tone_s"], model, snr, words))
    rb = float(rates(modem.bit_duration, modem.M)[0])
    row.update(ber=errors / bits, packet_rate=good / p["trials"],
               measured_snr_db=round(float(np.mean(snrs)), 6),
               throughput_bps=round(rb * 32 / 48 * good / p["trials"], 6))
    return row


def _grid(args) -> list:
    kind = args.kind
    if kind == "rates":
        pts = [{"tb_s": tb, "M": m, "screens": n}
               for tb in _floats(args.tb_s) for m in _ints(args.M_list) for n in _ints(args.screens)]
    elif kind == "distance":
        pts = [{"distance_m": d} for d in _floats(args.distances)]
    elif kind == "ber":
        pts = [{"snr_db": s} for s in _floats(args.snrs)]
    elif kind == "strips":
        pts = [{"strips": n} for n in _ints(args.strips)]
    else:
        pts = [{"level": v} for v in _floats(args.levels)]
    return pts


def cmd_analyze(args) -> int:
    points = _grid(args)
    if not points:
        raise UsageError("empty grid")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    params = {"freqs": _carriers(args), "tb_ms": args.tb_ms, "sample_rate": args.sample_rate,
              "trials": args.trials, "tone_s": args.tone_s, "seed": args.seed or 0,
              "delta_f": args.delta_f, "scale": args.scale}
    jobs = [(args.kind, pt, i, params) for i, pt in enumerate(points)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]

    out = _out_dir(args)
    csv_path = out / f"analyze_{args.kind}.csv"
    fields = list(dict.fromkeys(k for r in rows for k in r))
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)

    x_key = next(iter(points[0]))
    xs = np.arange(len(rows)) if args.kind == "rates" else [r[x_key] for r in rows]
    if args.kind == "rates":
        series = {"bit_rate": [r["bit_rate"] for r in rows],
                  "symbol_rate": [r["symbol_rate"] for r in rows]}
    else:
        series = {"measured_snr_db": [r["measured_snr_db"] for r in rows]}
        if "predicted_snr_db" in rows[0]:
            series["predicted_snr_db"] = [r["predicted_snr_db"] for r in rows]
    plot_path = imageio.plot_pgm(out / f"analyze_{args.kind}.pgm", xs, series)
    print(f"{len(rows)} grid points")
    print(f"wrote {csv_path} and {plot_path}")
    _write_manifest(args, {"csv": csv_path, "plot": plot_path},
                    {"kind": args.kind, "points": len(rows), "trials": args.trials})
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(top: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global options; their defaults are suppressed so
    # a value given before the subcommand name survives
    d = None if top else argparse.SUPPRESS
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d,
                   help="INI file; [DEFAULT] and per-command sections set option defaults")
    p.add_argument("--seed", type=int, default=d, help="RNG seed, recorded in every output")
    p.add_argument("--out", default=d, help="output directory (default: current directory)")
    return p


def _display_args(p):
    p.add_argument("--preset", default="1080p60-cea", choices=sorted(PRESETS))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--refresh", default="60", help="refresh rate in Hz")
    p.add_argument("--h-blank", type=int)
    p.add_argument("--v-blank", type=int)
    p.add_argument("--beta", help="blanking overhead ratio instead of explicit blanking")


def _modem_args(p):
    p.add_argument("--f0", type=float, default=3000.0)
    p.add_argument("--f1", type=float, default=7800.0)
    p.add_argument("--freqs", help="comma list of M carriers (overrides --f0/--f1)")
    p.add_argument("--tb-ms", type=float, default=100.0, help="bit duration in ms")
    p.add_argument("--sample-rate", type=int, default=48_000)


def build_parser() -> argparse.ArgumentParser:
    common = _common(top=False)
    parser = argparse.ArgumentParser(prog="lcdmodem", parents=[_common(top=True)],
                                     description="Display-driven acoustic FSK modem")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a square-wave bitmap")
    _display_args(g)
    g.add_argument("--freq", type=float)
    g.add_argument("--duty", type=float, default=0.5)
    g.add_argument("--split", help="comma list of strip frequencies")
    g.add_argument("--effective-clock", action="store_true",
                   help="use the blanking-inclusive pixel clock")
    g.add_argument("--conformance", action="store_true",
                   help="integer-truncated cycle size, for byte-exact comparisons")
    g.add_argument("--high", type=int, default=255)
    g.add_argument("--low", type=int, default=0)
    g.add_argument("--name", help="output file stem")
    g.add_argument("--raw", action="store_true", help="also write headerless 8-bit pixels")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("tx", parents=[common], help="encode a payload to audio")
    _modem_args(t)
    t.add_argument("--payload", default="", help="hex bytes, e.g. 0xDEADBEEF")
    t.add_argument("--header", type=int, metavar="TYPE",
                   help="add a type/sequence header with this packet type")
    t.add_argument("--duty", type=float, default=0.5)
    t.add_argument("--gap-symbols", type=int, default=2)
    t.add_argument("--wav")
    t.add_argument("--schedule")
    t.add_argument("--distance", type=float, default=0.5)
    t.add_argument("--snr", type=float, help="in-band SNR; default follows the distance model")
    t.add_argument("--brightness", type=float, default=255.0, help="pattern high level 0..255")
    t.add_argument("--split", type=int, help="strip count sharing the display's acoustic power")
    t.add_argument("--strip-freqs", help="per-strip carrier sets, e.g. '3000,7800;11000,16000'")
    t.set_defaults(func=cmd_tx)

    r = sub.add_parser("rx", parents=[common], help="demodulate a wave file")
    r.add_argument("wav")
    _modem_args(r)
    r.add_argument("--offset", type=int, help="symbol timing in samples; skips the preamble search")
    hdr = r.add_mutually_exclusive_group()
    hdr.add_argument("--header", action="store_true", help="expect 56-bit packets")
    hdr.add_argument("--any-header", action="store_true", help="accept 48- and 56-bit packets")
    r.add_argument("--strip-freqs", help="demodulate each carrier set separately")
    r.add_argument("--halfwidth", type=float, default=100.0, help="SNR band half-width in Hz")
    r.add_argument("--spectrogram", help="write an STFT as .csv or .pgm")
    r.add_argument("--window", type=int, default=1024)
    r.add_argument("--hop", type=int, default=256)
    r.set_defaults(func=cmd_rx)

    pl = sub.add_parser("plan", parents=[common], help="allocate carriers")
    pl.add_argument("--channels", type=int, default=2)
    pl.add_argument("--band", default="1000,20000", help="low,high in Hz")
    pl.add_argument("--delta-f", type=float, default=1000.0, help="FSK tone separation in Hz")
    pl.add_argument("--symbol-rate", type=float)
    pl.add_argument("--tb-ms", type=float, default=100.0)
    pl.add_argument("--M", type=int, default=2)
    pl.add_argument("--check", help="validate this comma list of carriers instead of planning")
    pl.set_defaults(func=cmd_plan)

    a = sub.add_parser("analyze", parents=[common], help="parameter sweeps to CSV and graymap")
    a.add_argument("kind", choices=["distance", "ber", "rates", "strips", "brightness"])
    _modem_args(a)
    a.add_argument("--distances", default=",".join(f"{d:g}" for d in DISTANCE_TABLE_M))
    a.add_argument("--snrs", default="-10,-5,0,5,10,15,20")
    a.add_argument("--tb-s", default="1.0,0.5,0.1")
    a.add_argument("--M-list", default="2,4,8,16")
    a.add_argument("--screens", default="1,2,4")
    a.add_argument("--delta-f", type=float, default=1000.0)
    a.add_argument("--strips", default="1,2,3,4")
    a.add_argument("--levels", default="1:10:1")
    a.add_argument("--scale", choices=["level", "gray"], default="level")
    a.add_argument("--trials", type=int, default=3)
    a.add_argument("--tone-s", type=float, default=1.0, help="steady-tone length for SNR readings")
    a.add_argument("--jobs", type=int, default=1)
    a.set_defaults(func=cmd_analyze)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    ini = configparser.ConfigParser()
    if not ini.read(known.config):
        raise UsageError(f"cannot read config {known.config}")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        section = ini[name] if ini.has_section(name) else ini.defaults()
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key in section:
            dest = key.replace("-", "_")
            if dest not in actions or dest in ("config", "help"):
                continue
            action = actions[dest]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[dest] = section.getboolean(key)
            elif action.type is not None:
                defaults[dest] = action.type(section[key])
            else:
                defaults[dest] = section[key]
        sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UsageError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InfeasiblePlan as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_PLAN
    except NoTransmission as exc:
        print(f"no transmission found ({exc})", file=sys.stderr)
        return EXIT_NO_SIGNAL
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
