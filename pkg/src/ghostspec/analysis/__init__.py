"""Spectrum extraction and the three discrimination methods."""

from .kmeans import KMeansResult, kmeans, kmeans_elbow
from .lda import LDAResult, lda
from .nmf import NMFResult, dominant_component, nmf
from .spectra import SpectrumVector, cosine_similarity, extract_spectrum, match_components, normalize

__all__ = [
    "KMeansResult",
    "LDAResult",
    "NMFResult",
    "SpectrumVector",
    "cosine_similarity",
    "dominant_component",
    "extract_spectrum",
    "kmeans",
    "kmeans_elbow",
    "lda",
    "match_components",
    "nmf",
    "normalize",
]
