"""Spectra cut out of lambda-vs-y maps, plus shape comparison helpers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..detection import LambdaYMap

__all__ = [
    "SpectrumVector",
    "extract_spectrum",
    "normalize",
    "cosine_similarity",
    "match_components",
    "stack",
]


@dataclass(eq=False)
class SpectrumVector:
    values: np.ndarray
    wavelengths: np.ndarray
    label: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        if self.values.ndim != 1 or self.values.shape != self.wavelengths.shape:
            raise ValueError("spectrum values and wavelengths must be 1-D of equal length")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum values must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, SpectrumVector):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.wavelengths, other.wavelengths)
            and self.label == other.label
            and self.metadata == other.metadata
        )


def extract_spectrum(m: LambdaYMap, rows, label: Optional[str] = None) -> SpectrumVector:
    """Sum the map over spatial rows ``rows = (start, stop)`` (half-open)."""
    start, stop = int(rows[0]), int(rows[1])
    if not 0 <= start < stop <= m.counts.shape[0]:
        raise ValueError(f"row range [{start}, {stop}) is empty or outside 0..{m.counts.shape[0]}")
    values = m.counts[start:stop].sum(axis=0).astype(float)
    meta = {"rows": f"{start} {stop}"}
    if m.metadata.get("name"):
        meta["map"] = m.metadata["name"]
    return SpectrumVector(values, m.lambda_centers.copy(), label, meta)


def normalize(spectrum: SpectrumVector) -> SpectrumVector:
    """Scale to unit sum."""
    total = spectrum.values.sum()
    if not total > 0:
        raise ValueError("cannot normalize an all-zero spectrum")
    return SpectrumVector(spectrum.values / total, spectrum.wavelengths.copy(),
                          spectrum.label, dict(spectrum.metadata))


def stack(spectra: Sequence) -> np.ndarray:
    """Rows of a 2-D array from spectra or plain vectors; checks lengths agree."""
    rows = [s.values if isinstance(s, SpectrumVector) else np.asarray(s, dtype=float) for s in spectra]
    if not rows:
        raise ValueError("no spectra given")
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise ValueError("spectra have different lengths")
    return np.vstack(rows).astype(float)


def cosine_similarity(a, b) -> float:
    a = a.values if isinstance(a, SpectrumVector) else np.asarray(a, dtype=float)
    b = b.values if isinstance(b, SpectrumVector) else np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def match_components(components: Sequence, references: Sequence):
    """One-to-one matching that maximizes the summed cosine similarity.

    Returns ``(assignment, similarities)`` where component ``i`` is matched
    to reference ``assignment[i]``.  Exhaustive over permutations, so meant
    for a handful of components; on ties the lexicographically first
    permutation wins.
    """
    c, r = stack(components), stack(references)
    if len(c) != len(r):
        raise ValueError(f"{len(c)} components vs {len(r)} references")
    if len(c) > 8:
        raise ValueError("exhaustive matching supports at most 8 components")
    sim = np.array([[cosine_similarity(ci, rj) for rj in r] for ci in c])
    best, best_score = None, -np.inf
    idx = np.arange(len(c))
    for perm in itertools.permutations(range(len(c))):
        score = sim[idx, list(perm)].sum()
        if score > best_score:
            best, best_score = perm, score
    return list(best), sim[idx, list(best)]
