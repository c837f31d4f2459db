"""Photon-pair source: degenerate down-conversion of a CW pump.

Signal wavelengths follow a Gaussian marginal truncated to wavelengths
longer than the pump; the idler wavelength is fixed by energy conservation.
Transverse positions at the crystal plane follow the pump's Gaussian
profile, and the idler position differs from the signal position by a
Gaussian jitter of width ``correlation_width``.

Default values for the bandwidth, beam size, correlation width and pair
rate are modelling choices, not measured quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FWHM_TO_SIGMA",
    "SourceConfig",
    "PairEvent",
    "PairBatch",
    "energy_conserved_idler",
    "sample_pair",
    "sample_pairs",
]

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SourceConfig:
    """Pair source parameters. Lengths in nm (wavelengths) or mm (positions)."""

    pump_wavelength: float = 405.0
    center_signal_wavelength: float = 810.0
    spectral_fwhm: float = 20.0
    beam_waist: float = 1.0  # 1/e^2 intensity radius at the crystal
    correlation_width: float = 0.02
    pair_rate: float = 2000.0  # pairs per second

    def __post_init__(self):
        for name in ("pump_wavelength", "center_signal_wavelength", "beam_waist", "pair_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        # zero is allowed for the two widths: it gives the monochromatic and
        # perfectly correlated limits
        for name in ("spectral_fwhm", "correlation_width"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not self.center_signal_wavelength > self.pump_wavelength:
            raise ValueError("center_signal_wavelength must exceed pump_wavelength")
        if not self.spectral_fwhm < self.center_signal_wavelength:
            raise ValueError("spectral_fwhm must be smaller than center_signal_wavelength")

    @property
    def spectral_sigma(self) -> float:
        return self.spectral_fwhm * FWHM_TO_SIGMA

    @property
    def transverse_sigma(self) -> float:
        # intensity exp(-2 y^2 / w^2) is a Gaussian with sigma = w / 2
        return 0.5 * self.beam_waist

    def describe(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class PairEvent:
    lambda_signal: float
    lambda_idler: float
    y_signal: float
    y_idler: float
    x_signal: float
    x_idler: float


@dataclass
class PairBatch:
    """Column-oriented block of pair events."""

    lambda_signal: np.ndarray
    lambda_idler: np.ndarray
    y_signal: np.ndarray
    y_idler: np.ndarray
    x_signal: np.ndarray
    x_idler: np.ndarray

    def __len__(self) -> int:
        return len(self.lambda_signal)

    def event(self, i: int) -> PairEvent:
        return PairEvent(
            float(self.lambda_signal[i]),
            float(self.lambda_idler[i]),
            float(self.y_signal[i]),
            float(self.y_idler[i]),
            float(self.x_signal[i]),
            float(self.x_idler[i]),
        )


def energy_conserved_idler(lambda_signal, pump):
    """Idler wavelength from ``1/lambda_i = 1/pump - 1/lambda_s``.

    Works on scalars and arrays.  Raises ``ValueError`` if any signal
    wavelength is not longer than the pump.
    """
    lam = np.asarray(lambda_signal, dtype=float)
    if np.any(~(lam > pump)) or not pump > 0:
        raise ValueError("signal wavelength must be longer than the pump wavelength")
    # pump * lam / (lam - pump) is the same expression without two reciprocals
    out = pump * lam / (lam - pump)
    return float(out) if out.ndim == 0 else out


def sample_pairs(config: SourceConfig, rng: np.random.Generator, n: int) -> PairBatch:
    """Draw ``n`` independent pair events."""
    n = int(n)
    lam_s = config.center_signal_wavelength + config.spectral_sigma * rng.standard_normal(n)
    bad = lam_s <= config.pump_wavelength
    while np.any(bad):
        lam_s[bad] = config.center_signal_wavelength + config.spectral_sigma * rng.standard_normal(
            int(bad.sum())
        )
        bad = lam_s <= config.pump_wavelength
    lam_i = energy_conserved_idler(lam_s, config.pump_wavelength)

    sigma = config.transverse_sigma
    y_s = sigma * rng.standard_normal(n)
    x_s = sigma * rng.standard_normal(n)
    cw = config.correlation_width
    y_i = y_s + cw * rng.standard_normal(n)
    x_i = x_s + cw * rng.standard_normal(n)
    return PairBatch(lam_s, np.atleast_1d(lam_i), y_s, y_i, x_s, x_i)


def sample_pair(config: SourceConfig, rng: np.random.Generator) -> PairEvent:
    return sample_pairs(config, rng, 1).event(0)
