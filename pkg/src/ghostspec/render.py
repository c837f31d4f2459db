"""Heatmap rendering of lambda-vs-y maps as binary PPM (P6) images.

Counts are scaled linearly to a level ``v = round(765 * c / c_max)`` in
``0..765`` and coloured black -> red -> yellow -> white::

    R = min(v, 255)   G = clip(v - 255, 0, 255)   B = clip(v - 510, 0, 255)

so ``R + G + B == v``: the mean of the three channels is proportional to
the count, and brightness never decreases with count.  Image columns follow
the spectral axis (short wavelengths on the left); image rows follow y with
the largest y at the top.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Union

import numpy as np

from .detection import LambdaYMap
from .io import atomic_write, fmt_float

__all__ = ["LEVELS", "colorize", "to_rgb", "ppm_bytes", "write_ppm", "read_ppm", "render_map"]

LEVELS = 765


def colorize(level: np.ndarray) -> np.ndarray:
    """Map integer levels ``0..765`` to uint8 RGB triples."""
    v = np.asarray(level, dtype=np.int64)
    if np.any((v < 0) | (v > LEVELS)):
        raise ValueError("levels must lie in 0..765")
    rgb = np.stack([np.clip(v, 0, 255), np.clip(v - 255, 0, 255), np.clip(v - 510, 0, 255)], axis=-1)
    return rgb.astype(np.uint8)


def to_rgb(m: LambdaYMap) -> np.ndarray:
    """(height, width, 3) image of the map, top row = largest y."""
    counts = m.counts
    peak = counts.max() if counts.size else 0
    if peak > 0:
        level = np.rint(LEVELS * counts.astype(float) / peak).astype(np.int64)
    else:
        level = np.zeros(counts.shape, dtype=np.int64)
    return colorize(level[::-1])


def ppm_bytes(rgb: np.ndarray) -> bytes:
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_ppm(rgb: np.ndarray, path: Union[str, Path]) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(ppm_bytes(rgb))
    tmp.replace(path)


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if not m:
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    w, h = int(m.group(1)), int(m.group(2))
    pixels = np.frombuffer(data[m.end():], dtype=np.uint8)
    if pixels.size != w * h * 3:
        raise ValueError(f"{path}: pixel data has wrong length")
    return pixels.reshape(h, w, 3)


def render_map(m: LambdaYMap, out: Union[str, Path]) -> Path:
    """Write ``out`` (PPM) and ``out.axes.txt`` describing the axes and scale."""
    out = Path(out)
    write_ppm(to_rgb(m), out)
    lam, ys = m.lambda_centers, m.y_centers
    sidecar = out.with_name(out.name + ".axes.txt")
    lines = [
        "image: " + out.name,
        f"width: {m.counts.shape[1]}",
        f"height: {m.counts.shape[0]}",
        "x_axis: signal wavelength (nm), pixel centres, left to right",
        f"x_first: {fmt_float(lam[0])}",
        f"x_last: {fmt_float(lam[-1])}",
        "y_axis: position at the ICCD (mm), pixel centres, top to bottom",
        f"y_first: {fmt_float(ys[-1])}",
        f"y_last: {fmt_float(ys[0])}",
        f"max_count: {int(m.counts.max()) if m.counts.size else 0}",
        "colour: level = round(765 * count / max_count); R+G+B = level",
        f"acquisition_time_s: {fmt_float(m.acquisition_time)}",
    ]
    atomic_write(sidecar, "\n".join(lines) + "\n")
    return out
