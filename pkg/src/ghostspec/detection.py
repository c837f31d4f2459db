"""Coincidence acquisition: bucket detector on the idler, imaging
spectrometer on the signal, and accumulation into lambda-vs-y maps.

The trigger delay line and coincidence gate are folded into
``signal_path_efficiency``; accidental coincidences enter only through the
per-pixel dark rate.

Random-stream layout for a run with seed ``s``: ``stream(s, 0)`` draws the
number of pairs, ``stream(s, 1)`` draws the dark counts and
``stream(s, 2, i)`` drives event chunk ``i``.  Chunks hold
``CHUNK_EVENTS`` events, so the map depends only on the seed and never on
how many workers process the chunks.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import stream
from .scene import SceneMask, survives
from .source import PairEvent, SourceConfig, sample_pairs

__all__ = [
    "CHUNK_EVENTS",
    "DetectorConfig",
    "LambdaYMap",
    "bin_signal",
    "bin_indices",
    "config_digest",
    "merge_maps",
    "simulate_acquisition",
]

CHUNK_EVENTS = 1 << 20


@dataclass(frozen=True)
class DetectorConfig:
    bucket_efficiency: float = 0.25
    signal_path_efficiency: float = 0.2
    n_spectral_pixels: int = 256
    n_spatial_pixels: int = 128
    lambda_min: float = 770.0
    lambda_max: float = 850.0
    y_min: float = -1.5  # mm at the ICCD
    y_max: float = 1.5
    iccd_magnification: float = 1.0
    dark_rate_per_pixel: float = 1e-5  # counts / s

    def __post_init__(self):
        for name in ("bucket_efficiency", "signal_path_efficiency"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("n_spectral_pixels", "n_spatial_pixels"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                raise ValueError(f"{name} must be an integer >= 2")
        if not self.lambda_min < self.lambda_max:
            raise ValueError("lambda_min must be < lambda_max")
        if not self.y_min < self.y_max:
            raise ValueError("y_min must be < y_max")
        if not self.iccd_magnification > 0:
            raise ValueError("iccd_magnification must be > 0")
        if not self.dark_rate_per_pixel >= 0:
            raise ValueError("dark_rate_per_pixel must be >= 0")

    @property
    def shape(self) -> tuple:
        return (int(self.n_spatial_pixels), int(self.n_spectral_pixels))

    def lambda_centers(self) -> np.ndarray:
        n = int(self.n_spectral_pixels)
        step = (self.lambda_max - self.lambda_min) / n
        return self.lambda_min + (np.arange(n) + 0.5) * step

    def y_centers(self) -> np.ndarray:
        n = int(self.n_spatial_pixels)
        step = (self.y_max - self.y_min) / n
        return self.y_min + (np.arange(n) + 0.5) * step

    def describe(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(eq=False)
class LambdaYMap:
    """Coincidence counts, rows indexed by spatial pixel (increasing y) and
    columns by spectral pixel (increasing signal wavelength)."""

    counts: np.ndarray
    lambda_centers: np.ndarray
    y_centers: np.ndarray
    acquisition_time: float
    seed: Optional[int] = None
    config_digest: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.lambda_centers = np.asarray(self.lambda_centers, dtype=float)
        self.y_centers = np.asarray(self.y_centers, dtype=float)
        if self.counts.shape != (len(self.y_centers), len(self.lambda_centers)):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match axes "
                f"({len(self.y_centers)}, {len(self.lambda_centers)})"
            )
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        for name in ("lambda_centers", "y_centers"):
            axis = getattr(self, name)
            if len(axis) > 1 and not np.all(np.diff(axis) > 0):
                raise ValueError(f"{name} must be strictly increasing")

    @classmethod
    def zeros(cls, det: DetectorConfig, acquisition_time: float = 0.0, **kw) -> "LambdaYMap":
        return cls(np.zeros(det.shape, dtype=np.int64), det.lambda_centers(), det.y_centers(),
                   acquisition_time, **kw)

    @property
    def shape(self) -> tuple:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def same_calibration(self, other: "LambdaYMap") -> bool:
        return (
            self.counts.shape == other.counts.shape
            and np.array_equal(self.lambda_centers, other.lambda_centers)
            and np.array_equal(self.y_centers, other.y_centers)
        )

    def __eq__(self, other):
        if not isinstance(other, LambdaYMap):
            return NotImplemented
        return (
            self.same_calibration(other)
            and np.array_equal(self.counts, other.counts)
            and self.acquisition_time == other.acquisition_time
            and self.seed == other.seed
            and self.config_digest == other.config_digest
            and self.metadata == other.metadata
        )


def config_digest(*parts) -> str:
    """Short SHA-256 digest of configuration objects exposing ``describe()``."""
    blob = json.dumps([p.describe() for p in parts], sort_keys=True, allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def bin_indices(lambda_signal, y_signal, config: DetectorConfig):
    """Vectorized pixel lookup. Returns ``(spectral, spatial, valid)``."""
    lam = np.asarray(lambda_signal, dtype=float)
    y = config.iccd_magnification * np.asarray(y_signal, dtype=float)
    ns, ny = int(config.n_spectral_pixels), int(config.n_spatial_pixels)
    fs = ns * (lam - config.lambda_min) / (config.lambda_max - config.lambda_min)
    fy = ny * (y - config.y_min) / (config.y_max - config.y_min)
    valid = (fs >= 0) & (fs < ns) & (fy >= 0) & (fy < ny)
    spectral = np.where(valid, np.floor(np.where(valid, fs, 0)), -1).astype(np.int64)
    spatial = np.where(valid, np.floor(np.where(valid, fy, 0)), -1).astype(np.int64)
    return spectral, spatial, valid


def bin_signal(event: PairEvent, config: DetectorConfig):
    """``(spectral_pixel, spatial_pixel)`` for the signal photon, or None if
    it lands outside the calibrated area."""
    s, y, ok = bin_indices(event.lambda_signal, event.y_signal, config)
    if not ok:
        return None
    return int(s), int(y)


def _chunk_counts(seed, index, n, source, mask, det) -> np.ndarray:
    rng = stream(seed, 2, index)
    pairs = sample_pairs(source, rng, n)
    u = rng.random((3, n))
    keep = survives(mask, pairs.y_idler, pairs.lambda_idler, u[0])
    keep &= u[1] < det.bucket_efficiency
    keep &= u[2] < det.signal_path_efficiency
    s, y, valid = bin_indices(pairs.lambda_signal[keep], pairs.y_signal[keep], det)
    flat = y[valid] * int(det.n_spectral_pixels) + s[valid]
    return np.bincount(flat, minlength=det.shape[0] * det.shape[1]).reshape(det.shape)


def simulate_acquisition(
    source: SourceConfig,
    mask: SceneMask,
    det: DetectorConfig,
    duration: float,
    seed: int,
    workers: int = 1,
    metadata: Optional[dict] = None,
) -> LambdaYMap:
    """Simulate one acquisition of ``duration`` seconds.

    A pair is recorded when the idler passes the object, fires the bucket
    detector, and the signal reaches a calibrated ICCD pixel.  Dark counts
    are Poisson per pixel and added once after all chunks are merged.
    """
    if not (duration > 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be a positive number of seconds, got {duration!r}")
    n_pairs = int(stream(seed, 0).poisson(source.pair_rate * duration))
    sizes = [CHUNK_EVENTS] * (n_pairs // CHUNK_EVENTS)
    if n_pairs % CHUNK_EVENTS:
        sizes.append(n_pairs % CHUNK_EVENTS)

    counts = np.zeros(det.shape, dtype=np.int64)
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda j: _chunk_counts(seed, j[0], j[1], source, mask, det), jobs)
            for part in parts:
                counts += part
    else:
        for i, n in jobs:
            counts += _chunk_counts(seed, i, n, source, mask, det)

    if det.dark_rate_per_pixel > 0:
        counts += stream(seed, 1).poisson(det.dark_rate_per_pixel * duration, size=det.shape)

    meta = {"n_pairs": str(n_pairs)}
    meta.update(metadata or {})
    return LambdaYMap(
        counts,
        det.lambda_centers(),
        det.y_centers(),
        float(duration),
        seed=int(seed),
        config_digest=config_digest(source, mask, det),
        metadata=meta,
    )


def merge_maps(a: LambdaYMap, b: LambdaYMap) -> LambdaYMap:
    """Sum two maps taken with the same calibration."""
    if not a.same_calibration(b):
        raise ValueError("cannot merge maps with different calibration")
    # unset provenance on one side (e.g. an empty map) defers to the other;
    # conflicting values are dropped
    seed = _agree(a.seed, b.seed, None)
    digest = _agree(a.config_digest, b.config_digest, "")
    meta = {**a.metadata, **b.metadata}
    for k in set(a.metadata) & set(b.metadata):
        if a.metadata[k] != b.metadata[k]:
            del meta[k]
    return LambdaYMap(
        a.counts + b.counts,
        a.lambda_centers.copy(),
        a.y_centers.copy(),
        a.acquisition_time + b.acquisition_time,
        seed=seed,
        config_digest=digest,
        metadata=meta,
    )


def _agree(x, y, unset):
    if x == unset:
        return y
    if y == unset or x == y:
        return x
    return unset
