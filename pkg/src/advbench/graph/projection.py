"""Euclidean projection onto the capped box ``{s in [0,1]^N : sum(s) <= cap}``."""

from __future__ import annotations

import numpy as np


def project_capped_box(s, cap: float, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Project ``s`` onto ``[0,1]^N ∩ {Σs ≤ cap}``.

    The solution is ``clip(s − μ, 0, 1)`` with ``μ = 0`` when the clipped
    vector already fits, else the root of ``Σ clip(s − μ, 0, 1) = cap``
    found by bisection.
    """
    s = np.asarray(s, dtype=np.float64)
    if cap < 0:
        raise ValueError(f"cap must be >= 0, got {cap}")
    clipped = np.clip(s, 0.0, 1.0)
    if clipped.sum() <= cap:
        return clipped
    lo, hi = float(s.min()) - 1.0, float(s.max())
    for _ in range(max_iter):
        mu = 0.5 * (lo + hi)
        if np.clip(s - mu, 0.0, 1.0).sum() > cap:
            lo = mu
        else:
            hi = mu
        if hi - lo <= tol:
            break
    return np.clip(s - hi, 0.0, 1.0)
