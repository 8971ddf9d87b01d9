"""Binary portable graymap (P5) I/O and a minimal line-plot rasterizer."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_HEADER = re.compile(rb"\AP5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def write_pgm(path, pixels: np.ndarray) -> Path:
    px = np.asarray(pixels)
    if px.ndim != 2:
        raise ValueError("graymap needs a 2-D array")
    if px.dtype != np.uint8:
        if px.min(initial=0) < 0 or px.max(initial=0) > 255:
            raise ValueError("graymap values must lie in [0, 255]")
        px = px.astype(np.uint8)
    h, w = px.shape
    path = Path(path)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(px).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if m is None:
        raise ValueError(f"{path}: not a binary graymap (P5)")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit graymaps are not supported")
    body = data[m.end():m.end() + w * h]
    if len(body) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_raw(path, pixels: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())
    return path


def to_gray(values: np.ndarray, log: bool = False) -> np.ndarray:
    """Scale an arbitrary matrix to 0..255 (optionally in dB)."""
    v = np.asarray(values, dtype=np.float64)
    if log:
        v = 10 * np.log10(np.maximum(v, 1e-12 * max(v.max(initial=0), 1e-300)))
    lo, hi = v.min(initial=0), v.max(initial=0)
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.rint((v - lo) / (hi - lo) * 255).astype(np.uint8)


def plot_pgm(path, xs, series: dict, width: int = 480, height: int = 320, margin: int = 24) -> Path:
    """Rasterize one or more y-series against ``xs`` into a white-on-black graymap.

    Series are drawn at distinct gray levels; non-finite points are skipped.
    """
    xs = np.asarray(xs, dtype=np.float64)
    canvas = np.zeros((height, width), dtype=np.uint8)
    canvas[margin, margin:width - margin] = 96
    canvas[height - margin, margin:width - margin] = 96
    canvas[margin:height - margin, margin] = 96
    canvas[margin:height - margin, width - margin] = 96

    ys_all = np.concatenate([np.asarray(v, dtype=np.float64) for v in series.values()])
    ys_all = ys_all[np.isfinite(ys_all)]
    if len(xs) == 0 or len(ys_all) == 0:
        return write_pgm(path, canvas)
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys_all.min(), ys_all.max()
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def to_px(x, y):
        col = margin + (x - x0) / (x1 - x0) * (width - 2 * margin)
        row = height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)
        return col, row

    levels = np.linspace(255, 160, max(len(series), 1))
    for level, ys in zip(levels, series.values()):
        ys = np.asarray(ys, dtype=np.float64)
        ok = np.isfinite(ys)
        cols, rows = to_px(xs[ok], ys[ok])
        for i in range(len(cols)):
            c0, r0 = cols[i], rows[i]
            c1, r1 = (cols[i + 1], rows[i + 1]) if i + 1 < len(cols) else (c0, r0)
            steps = int(max(abs(c1 - c0), abs(r1 - r0))) + 1
            cc = np.rint(np.linspace(c0, c1, steps)).astype(int)
            rr = np.rint(np.linspace(r0, r1, steps)).astype(int)
            canvas[np.clip(rr, 0, height - 1), np.clip(cc, 0, width - 1)] = int(level)
            rr0, cc0 = int(round(r0)), int(round(c0))
            canvas[max(rr0 - 2, 0):rr0 + 3, max(cc0 - 2, 0):cc0 + 3] = int(level)
    return write_pgm(path, canvas)
