"""Fisher linear discriminant analysis for few samples in many dimensions.

With a couple of dozen spectra and hundreds of wavelength bins the
within-class scatter is singular.  The data are first projected onto
their leading principal components and a small ridge proportional to the
scatter trace is added before solving the generalised eigenproblem
``S_b v = lambda (S_w + ridge I) v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .spectra import SpectrumVector, stack

__all__ = ["LDAResult", "lda"]


@dataclass
class LDAResult:
    directions: np.ndarray  # (n_features, n_directions)
    projected: np.ndarray  # (n_samples, n_directions)
    class_means: np.ndarray  # (n_classes, n_directions)
    eigenvalues: np.ndarray  # between / within ratio per direction, descending
    classes: list
    mean: np.ndarray  # feature-space mean removed before projecting

    def transform(self, X) -> np.ndarray:
        return (stack(X) - self.mean) @ self.directions

    def predict(self, X) -> list:
        """Nearest projected class mean for each row of ``X``."""
        return self.predict_projected(self.transform(X))

    def predict_projected(self, Z) -> list:
        Z = np.asarray(Z, dtype=float)
        d2 = ((Z[:, None, :] - self.class_means[None, :, :]) ** 2).sum(axis=2)
        return [self.classes[i] for i in np.argmin(d2, axis=1)]

    def within_class_variance(self, labels: Sequence) -> np.ndarray:
        """Sample variance of the projections inside each class, shape (n_classes, n_directions)."""
        labels = np.asarray(labels)
        return np.array([self.projected[labels == c].var(axis=0, ddof=1) for c in self.classes])


def lda(
    spectra,
    labels: Optional[Sequence] = None,
    regularization: float = 1e-6,
    pca_predim: Optional[int] = None,
) -> LDAResult:
    """Fit discriminant directions to labelled spectra.

    ``labels`` defaults to the ``label`` attribute of each spectrum.
    ``pca_predim`` defaults to ``n_samples - n_classes``; ``regularization``
    is the ridge as a fraction of the trace of the within-class scatter.
    At most ``n_classes - 1`` directions are returned, normalised so that
    the regularised within-class scatter is the identity on them.
    """
    if labels is None:
        labels = [s.label for s in spectra if isinstance(s, SpectrumVector)]
        if len(labels) != len(spectra) or any(lab is None for lab in labels):
            raise ValueError("every spectrum needs a label")
    X = stack(spectra)
    labels = np.asarray(list(labels))
    if len(labels) != len(X):
        raise ValueError("one label per spectrum is required")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("LDA needs at least two classes")
    for c in classes:
        if (labels == c).sum() < 2:
            raise ValueError(f"class {c!r} has fewer than two samples")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")

    n, d = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    p = n - len(classes) if pca_predim is None else int(pca_predim)
    if p < 1:
        raise ValueError("pca_predim must be >= 1")
    if p < d:
        _, _, vt = np.linalg.svd(Xc, full_matrices=False)
        basis = vt[:p].T
    else:
        basis = np.eye(d)
    Z = Xc @ basis
    p = Z.shape[1]

    Sw = np.zeros((p, p))
    Sb = np.zeros((p, p))
    for c in classes:
        Zc = Z[labels == c]
        mc = Zc.mean(axis=0)
        Sw += (Zc - mc).T @ (Zc - mc)
        Sb += len(Zc) * np.outer(mc, mc)  # Z is already centred
    ridge = regularization * np.trace(Sw)
    Sw_reg = Sw + ridge * np.eye(p)
    if ridge == 0 and np.linalg.matrix_rank(Sw) < p:
        raise np.linalg.LinAlgError("within-class scatter is singular; use regularization > 0")

    evals, evecs = linalg.eigh(Sb, Sw_reg)
    keep = min(len(classes) - 1, p)
    order = np.argsort(evals)[::-1][:keep]
    evals, evecs = evals[order], evecs[:, order]
    # fix the sign so the largest-magnitude loading is positive
    for j in range(keep):
        if evecs[np.argmax(np.abs(evecs[:, j])), j] < 0:
            evecs[:, j] = -evecs[:, j]

    directions = basis @ evecs
    projected = Xc @ directions
    class_means = np.array([projected[labels == c].mean(axis=0) for c in classes])
    return LDAResult(directions, projected, class_means, np.maximum(evals, 0.0), classes, mean)
