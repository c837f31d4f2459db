"""Objects placed in the idler arm.

An object is a set of disjoint intervals along y at the object plane, each
carrying a spectral transmission curve.  The crystal plane is imaged onto
the object with a fixed magnification, so a feature at ``y_obj`` on the
object is seen by idler photons leaving the crystal at ``y_obj / m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

__all__ = [
    "Blank",
    "Neutral",
    "Bandpass",
    "Tabulated",
    "TransmissionProfile",
    "Region",
    "SceneMask",
    "load_tabulated",
    "transmission_at",
    "apply_object",
    "survives",
]


@dataclass(frozen=True)
class Blank:
    def __call__(self, wavelength):
        return np.ones_like(np.asarray(wavelength, dtype=float))

    def describe(self) -> dict:
        return {"kind": "blank"}


@dataclass(frozen=True)
class Neutral:
    """Wavelength-independent attenuator."""

    t0: float

    def __post_init__(self):
        if not 0.0 <= self.t0 <= 1.0:
            raise ValueError(f"neutral transmission must lie in [0, 1], got {self.t0!r}")

    def __call__(self, wavelength):
        return np.full_like(np.asarray(wavelength, dtype=float), self.t0)

    def describe(self) -> dict:
        return {"kind": "neutral", "t0": self.t0}


@dataclass(frozen=True)
class Bandpass:
    """Gaussian passband ``peak * exp(-4 ln2 (lambda - center)^2 / fwhm^2)``."""

    center: float
    fwhm: float
    peak: float = 1.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("bandpass fwhm must be > 0")
        if not 0.0 <= self.peak <= 1.0:
            raise ValueError("bandpass peak must lie in [0, 1]")

    def __call__(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        return self.peak * np.exp(-4.0 * math.log(2.0) * (lam - self.center) ** 2 / self.fwhm**2)

    def describe(self) -> dict:
        return {"kind": "bandpass", "center": self.center, "fwhm": self.fwhm, "peak": self.peak}


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear curve through (wavelength, T) knots.

    Outside the knot range the end values are held constant.
    """

    wavelengths: tuple
    values: tuple

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        t = np.asarray(self.values, dtype=float)
        if lam.ndim != 1 or lam.shape != t.shape or len(lam) < 1:
            raise ValueError("tabulated profile needs matching 1-D knot arrays")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("tabulated wavelengths must be strictly increasing")
        if np.any((t < 0) | (t > 1)) or not np.all(np.isfinite(t)):
            raise ValueError("tabulated transmission values must lie in [0, 1]")
        object.__setattr__(self, "wavelengths", tuple(float(v) for v in lam))
        object.__setattr__(self, "values", tuple(float(v) for v in t))

    def __call__(self, wavelength):
        return np.interp(np.asarray(wavelength, dtype=float), self.wavelengths, self.values)

    def describe(self) -> dict:
        return {"kind": "tabulated", "wavelengths": list(self.wavelengths), "values": list(self.values)}


TransmissionProfile = Union[Blank, Neutral, Bandpass, Tabulated]


def load_tabulated(path: Union[str, Path]) -> Tabulated:
    """Read a two-column ``wavelength_nm T`` text file; ``#`` starts a comment."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
    return Tabulated(tuple(data[:, 0]), tuple(data[:, 1]))


@dataclass(frozen=True)
class Region:
    """Half-open interval ``[lo, hi)`` in mm at the object plane."""

    lo: float
    hi: float
    profile: TransmissionProfile

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"region needs lo < hi, got [{self.lo}, {self.hi})")


@dataclass(frozen=True)
class SceneMask:
    regions: tuple = ()
    magnification: float = 1.5
    default_transmission: TransmissionProfile = field(default_factory=Blank)
    # spectrum-limiting filter in front of the bucket; it does not image
    prefilter: Optional[TransmissionProfile] = None

    def __post_init__(self):
        if not self.magnification > 0:
            raise ValueError("magnification must be > 0")
        regions = tuple(sorted(self.regions, key=lambda r: r.lo))
        for a, b in zip(regions, regions[1:]):
            if b.lo < a.hi:
                raise ValueError(f"regions [{a.lo}, {a.hi}) and [{b.lo}, {b.hi}) overlap")
        object.__setattr__(self, "regions", regions)

    @classmethod
    def uniform(cls, profile: TransmissionProfile, magnification: float = 1.5, prefilter=None):
        return cls((), magnification, profile, prefilter)

    @classmethod
    def split(
        cls,
        boundary: float,
        lower: TransmissionProfile,
        upper: TransmissionProfile,
        magnification: float = 1.5,
        prefilter=None,
    ):
        """Two half-planes meeting at ``boundary`` (object-plane mm)."""
        regions = (Region(-math.inf, boundary, lower), Region(boundary, math.inf, upper))
        return cls(regions, magnification, Blank(), prefilter)

    def describe(self) -> dict:
        return {
            "regions": [[r.lo, r.hi, r.profile.describe()] for r in self.regions],
            "magnification": self.magnification,
            "default": self.default_transmission.describe(),
            "prefilter": None if self.prefilter is None else self.prefilter.describe(),
        }


def transmission_at(mask: SceneMask, y_idler_crystal, lambda_idler):
    """Probability that an idler at crystal-plane ``y`` with wavelength
    ``lambda`` gets through the object (and the prefilter, if any).

    Accepts scalars or broadcastable arrays.
    """
    y_obj = mask.magnification * np.asarray(y_idler_crystal, dtype=float)
    lam = np.asarray(lambda_idler, dtype=float)
    y_obj, lam = np.broadcast_arrays(y_obj, lam)
    t = np.asarray(mask.default_transmission(lam), dtype=float).copy()
    for region in mask.regions:
        inside = (y_obj >= region.lo) & (y_obj < region.hi)
        if np.any(inside):
            t[inside] = region.profile(lam[inside])
    if mask.prefilter is not None:
        t = t * mask.prefilter(lam)
    return float(t) if t.ndim == 0 else t


def survives(mask: SceneMask, y_idler_crystal, lambda_idler, u) -> np.ndarray:
    """Bernoulli trial with a supplied uniform draw: survive iff ``u < T``.

    Sharing ``u`` between two masks makes survival monotone in T.
    """
    return np.asarray(u) < transmission_at(mask, y_idler_crystal, lambda_idler)


def apply_object(event, mask: SceneMask, rng: np.random.Generator) -> bool:
    return bool(survives(mask, event.y_idler, event.lambda_idler, rng.random()))

