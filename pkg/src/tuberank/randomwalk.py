"""Random-walk consistency scores for discarding outlying feature vectors.

Items form a fully connected graph whose transition probabilities decay
exponentially with feature distance. A damped walk restarted from a uniform
prior concentrates mass on items inside dense clusters, so the items with the
lowest scores are treated as noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist


@dataclass(frozen=True)
class WalkParams:
    alpha: float | None = None  # None: 1 / median pairwise distance
    beta: float = 0.85
    iterations: int = 100
    keep_fraction: float = 0.8
    include_self: bool = False
    tol: float = 1e-10

    def __post_init__(self):
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError(f"keep_fraction must lie in (0, 1], got {self.keep_fraction}")


@dataclass
class FilterResult:
    kept: list[str]
    removed: list[str]
    scores: np.ndarray  # aligned with the input order


def _features(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2:
        raise ValueError(f"features must be an (n, D) array, got shape {psi.shape}")
    if not np.all(np.isfinite(psi)):
        bad = int(np.flatnonzero(~np.isfinite(psi).all(axis=1))[0])
        raise ValueError(f"non-finite feature values in item {bad}")
    return psi


def median_alpha(psi) -> float:
    d = pdist(_features(psi))
    med = float(np.median(d)) if d.size else 0.0
    return 1.0 / med if med > 0 else 1.0


def transition_matrix(psi, alpha: float, include_self: bool = True) -> np.ndarray:
    """Row-stochastic P with ``P[i, j]`` proportional to ``exp(-alpha ||psi_i - psi_j||)``.

    With ``include_self`` the diagonal (distance 0) takes part in each
    row's normalisation.
    """
    psi = _features(psi)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    d = cdist(psi, psi)
    # subtracting each row's largest logit keeps exp() from underflowing
    logits = -alpha * d
    if not include_self:
        if len(psi) < 2:
            raise ValueError("excluding self-transitions needs at least 2 items")
        np.fill_diagonal(logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    W = np.exp(logits)
    return W / W.sum(axis=1, keepdims=True)


def random_walk(P, z=None, beta: float = 0.85, iterations: int = 100, tol: float = 0.0) -> np.ndarray:
    """Iterate ``s <- beta P^T s + (1 - beta) z`` from ``s = z``.

    Runs ``iterations`` steps, or fewer once the largest change drops below
    a positive ``tol``.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise ValueError(f"transition matrix must be square, got {P.shape}")
    z = np.full(n, 1.0 / n) if z is None else np.asarray(z, dtype=float)
    if z.shape != (n,):
        raise ValueError(f"prior has length {z.shape}, expected {n}")
    s = z.copy()
    for _ in range(iterations):
        nxt = beta * (P.T @ s) + (1 - beta) * z
        done = tol > 0 and np.max(np.abs(nxt - s)) < tol
        s = nxt
        if done:
            break
    return s


def filter_outliers(ids: Sequence[str], psi, params: WalkParams = WalkParams()) -> FilterResult:
    """Keep the ``keep_fraction`` highest-scoring items (ties keep the earlier item).

    The keep count is ``floor(keep_fraction * n)``, at least one.
    """
    psi = _features(psi)
    ids = [str(i) for i in ids]
    if len(ids) != len(psi):
        raise ValueError(f"{len(ids)} ids for {len(psi)} feature rows")
    if len(ids) < 2:
        raise ValueError("need at least 2 items")
    alpha = params.alpha if params.alpha is not None else median_alpha(psi)
    P = transition_matrix(psi, alpha, params.include_self)
    s = random_walk(P, None, params.beta, params.iterations, params.tol)
    n_keep = max(1, int(np.floor(params.keep_fraction * len(ids) + 1e-9)))
    order = sorted(range(len(ids)), key=lambda i: (-s[i], i))
    keep = set(order[:n_keep])
    return FilterResult([ids[i] for i in range(len(ids)) if i in keep],
                        [ids[i] for i in range(len(ids)) if i not in keep], s)
