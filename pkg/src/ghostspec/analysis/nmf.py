"""Non-negative matrix factorisation ``V ~ W H`` by multiplicative updates.

Lee & Seung's updates for the Frobenius objective never increase
``||V - W H||_F`` and keep both factors non-negative when started from
positive matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import stream

__all__ = ["NMFResult", "nmf", "dominant_component"]

_TINY = np.finfo(float).tiny


@dataclass
class NMFResult:
    W: np.ndarray  # (n_samples, r) weights
    H: np.ndarray  # (r, n_bins) components
    residue_norm: float
    iterations: int
    history: list = field(default_factory=list)


def nmf(V, r: int, seed: int, max_iter: int = 5000, tol: float = 1e-9) -> NMFResult:
    """Factor ``V`` (samples x bins) into ``r`` non-negative components.

    Stops when the relative decrease of the residue norm drops below
    ``tol`` or after ``max_iter`` sweeps.  The initial factors are uniform
    on ``(0, 2 sqrt(mean(V) / r)]`` drawn from ``stream(seed)``.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("V must be a 2-D matrix")
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ValueError("V must be finite and non-negative")
    n, m = V.shape
    if not 1 <= r <= min(n, m):
        raise ValueError(f"rank must lie in 1..{min(n, m)}, got {r}")

    rng = stream(seed)
    scale = 2.0 * np.sqrt(max(V.mean(), _TINY) / r)
    # 1 - random() lies in (0, 1], so the start is strictly positive
    W = scale * (1.0 - rng.random((n, r)))
    H = scale * (1.0 - rng.random((r, m)))

    norm = float(np.linalg.norm(V - W @ H))
    history = [norm]
    it = 0
    for it in range(1, max_iter + 1):
        H *= (W.T @ V) / np.maximum(W.T @ W @ H, _TINY)
        W *= (V @ H.T) / np.maximum(W @ (H @ H.T), _TINY)
        new = float(np.linalg.norm(V - W @ H))
        history.append(new)
        done = norm == 0 or (norm - new) <= tol * norm
        norm = new
        if done:
            break
    return NMFResult(W, H, norm, it, history)


def dominant_component(W, sample_index: int) -> int:
    """Component with the largest weight for one sample (lowest index on ties)."""
    return int(np.argmax(np.asarray(W)[sample_index]))
