"""Brute-force references used to check the fast solvers."""
from __future__ import annotations

import itertools

import numpy as np

from .trellis import Trellis, _path_energy


def oracle_best_path(t: Trellis, limit: int = 10 ** 6) -> tuple[tuple[int, ...], float]:
    """Enumerate all N**F paths.

    Among maximal paths the winner is the one whose ids, read from the last
    layer backwards, are lexicographically smallest; this is the order the
    DP back-pointers produce.
    """
    if t.N ** t.F > limit:
        raise ValueError(f"{t.N}**{t.F} paths exceed the enumeration limit {limit}")
    best, best_key = None, None
    for idx in itertools.product(range(t.N), repeat=t.F):
        e = _path_energy(t.node_scores, t.edge_scores, t.lambda_edge, idx)
        key = (-e, idx[::-1])
        if best_key is None or key < best_key:
            best, best_key = idx, key
    return tuple(int(t.proposal_ids[i]) for i in best), -best_key[0]


def oracle_segmentation(Z, num_segments: int) -> list[int]:
    """Exact least-squares segmentation into ``num_segments`` constant pieces.

    Returns the start indices of segments 2..num_segments. O(S N^2).
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    N = len(Z)
    if not 1 <= num_segments <= N:
        raise ValueError(f"cannot split {N} rows into {num_segments} segments")
    c1 = np.vstack([np.zeros(Z.shape[1]), np.cumsum(Z, axis=0)])
    c2 = np.concatenate([[0.0], np.cumsum((Z ** 2).sum(axis=1))])

    best = np.full((num_segments + 1, N + 1), np.inf)
    arg = np.zeros((num_segments + 1, N + 1), dtype=int)
    best[0, 0] = 0.0
    for s in range(1, num_segments + 1):
        for j in range(s, N + 1):
            i = np.arange(s - 1, j)
            seg = c1[j] - c1[i]
            # within-segment squared error of rows i..j-1
            cost = c2[j] - c2[i] - (seg ** 2).sum(axis=1) / (j - i)
            v = best[s - 1, i] + cost
            k = int(np.argmin(v))
            best[s, j], arg[s, j] = v[k], i[k]
    cuts, j = [], N
    for s in range(num_segments, 0, -1):
        j = arg[s, j]
        cuts.append(j)
    return sorted(c for c in cuts if c > 0)


def oracle_walk_stationary(P, z, beta: float) -> np.ndarray:
    """Solve (I - beta P^T) s = (1 - beta) z directly."""
    P = np.asarray(P, dtype=float)
    z = np.asarray(z, dtype=float)
    A = np.eye(len(z)) - beta * P.T
    if np.linalg.cond(A) > 1e12:
        raise np.linalg.LinAlgError("random-walk system is singular")
    return np.linalg.solve(A, (1 - beta) * z)
