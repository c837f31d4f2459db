"""Lloyd k-means with k-means++ seeding, point-transfer refinement,
restarts and an elbow scan.

Distances are squared Euclidean.  Callers normally pass unit-sum spectra so
that clusters reflect spectral shape rather than total flux.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..rng import stream
from .spectra import stack

__all__ = ["KMeansResult", "kmeans", "kmeans_elbow", "assign"]


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, n_features)
    assignments: np.ndarray  # (n_samples,)
    residual: float
    iterations: int
    history: list = field(default_factory=list)  # residual after every assignment step or transfer pass

    @property
    def k(self) -> int:
        return len(self.centroids)


def assign(X: np.ndarray, centroids: np.ndarray):
    """Nearest-centroid labels (lowest index on ties) and the total squared distance."""
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(len(X)), labels].sum())


def _seed_centroids(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a centre already; take any unused index
            nxt = next(i for i in range(n) if i not in chosen)
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _means(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> None:
    for j in range(len(centroids)):
        members = labels == j
        if np.any(members):
            centroids[j] = X[members].mean(axis=0)
        # an empty cluster keeps its centre, which cannot raise the residual


def _transfer(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> bool:
    """Single-point moves that lower the residual of the partition.

    Moving ``x`` from cluster ``a`` to ``b`` changes the residual by
    ``n_b/(n_b+1) |x-c_b|^2 - n_a/(n_a-1) |x-c_a|^2``.  Lloyd fixpoints
    that are not optimal often admit such a move.  Updates ``labels`` and
    ``centroids`` in place; returns whether anything moved.
    """
    k = len(centroids)
    counts = np.bincount(labels, minlength=k).astype(float)
    c = centroids.copy()
    moved_any, moved = False, True
    while moved:
        moved = False
        for i in range(len(X)):
            a = labels[i]
            if counts[a] <= 1:
                continue
            d2 = ((c - X[i]) ** 2).sum(axis=1)
            cost = counts / (counts + 1) * d2
            cost[a] = np.inf
            b = int(np.argmin(cost))
            if cost[b] < counts[a] / (counts[a] - 1) * d2[a] * (1 - 1e-12):
                c[a] = (c[a] * counts[a] - X[i]) / (counts[a] - 1)
                c[b] = (c[b] * counts[b] + X[i]) / (counts[b] + 1)
                counts[a] -= 1
                counts[b] += 1
                labels[i] = b
                moved = moved_any = True
    if moved_any:
        _means(X, labels, centroids)
    return moved_any


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float) -> KMeansResult:
    """Lloyd iterations; at each assignment fixpoint, try point transfers and resume."""
    centroids = centroids.copy()
    labels, residual = assign(X, centroids)
    history = [residual]
    it = 0
    while it < max_iter:
        it += 1
        _means(X, labels, centroids)
        new_labels, new_residual = assign(X, centroids)
        history.append(new_residual)
        fixed = np.array_equal(new_labels, labels)
        slow = residual - new_residual <= tol * residual
        labels, residual = new_labels, new_residual
        if fixed:
            if not _transfer(X, labels, centroids):
                break
            labels, residual = assign(X, centroids)
            history.append(residual)
        elif slow:
            break
    return KMeansResult(centroids, labels, residual, it, history)


def kmeans(
    spectra,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 0.0,
    restarts: int = 1,
    init=None,
    workers: int = 1,
) -> KMeansResult:
    """Cluster rows of ``spectra`` into ``k`` groups.

    Runs ``restarts`` independent k-means++ initialisations (restart ``r``
    uses ``stream(seed, k, r)``) and keeps the lowest residual, earliest
    restart on ties.  ``init`` optionally adds one extra run started from
    the given centroids; it is ranked after the random restarts.
    """
    X = stack(spectra)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    def run(r):
        return _lloyd(X, _seed_centroids(X, k, stream(seed, k, r)), max_iter, tol)

    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    if init is not None:
        init = np.asarray(init, dtype=float)
        if init.shape != (k, X.shape[1]):
            raise ValueError("init must have shape (k, n_features)")
        results.append(_lloyd(X, init, max_iter, tol))
    return min(results, key=lambda r: r.residual)  # min keeps the first of equal residuals


def kmeans_elbow(spectra, k_max: int, seed: int, restarts: int = 20, max_iter: int = 300,
                 tol: float = 0.0, workers: int = 1):
    """Best residual for each ``k`` in ``1..k_max``.

    Besides the random restarts, each ``k`` also tries the best ``k-1``
    solution plus its worst-fitted point as a new centre.  That candidate
    can never do worse than ``k-1``, so the curve is non-increasing.

    Returns ``(curve, results)``: ``curve`` is a list of ``(k, residual)``
    and ``results`` the matching ``KMeansResult`` objects.
    """
    X = stack(spectra)
    if not 1 <= k_max <= len(X):
        raise ValueError(f"k_max must lie in 1..{len(X)}")
    curve, results = [], []
    prev = None
    for k in range(1, k_max + 1):
        init = None
        if prev is not None:
            d2 = ((X - prev.centroids[prev.assignments]) ** 2).sum(axis=1)
            init = np.vstack([prev.centroids, X[int(np.argmax(d2))]])
        best = kmeans(X, k, seed, max_iter=max_iter, tol=tol, restarts=restarts, init=init,
                      workers=workers)
        curve.append((k, best.residual))
        results.append(best)
        prev = best
    return curve, results
