"""Shot detection by weighted total-variation approximation of frame features.

The piecewise-constant fit minimises

    1/2 ||Z - X||^2 + lam * sum_{n=1}^{N-1} c_n ||X[n] - X[n-1]||

with c_n = 1 / w_n ("divide", the default) or c_n = w_n ("multiply") and
w_n = sqrt(N / (n (N - n))). Writing X as a column offset plus cumulative
sums of the row differences turns this into a group lasso, solved here by
accelerated proximal gradient with adaptive restart and a duality-gap stop.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .geometry import Tube

log = logging.getLogger(__name__)

WEIGHTINGS = ("divide", "multiply")


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float, objective: float):
        super().__init__(message)
        self.gap = gap
        self.objective = objective

    def __reduce__(self):
        return type(self), (self.args[0], self.gap, self.objective)


@dataclass
class SignalMatrix:
    """Standardised (N, K) frame features plus the raw columns and their moments."""

    Z: np.ndarray
    raw: np.ndarray
    mean: np.ndarray
    std: np.ndarray


@dataclass
class TVSolution:
    X: np.ndarray
    boundaries: np.ndarray
    lam: float
    objective: float = 0.0
    gap: float = 0.0
    n_iter: int = 0
    beta: np.ndarray | None = field(default=None, repr=False)
    path: list = field(default_factory=list, repr=False)  # see auto_segment


def standardize(raw: np.ndarray) -> SignalMatrix:
    """Zero-mean, unit-variance columns.

    A column whose spread is at rounding level (std <= 1e-9 of its largest
    magnitude) counts as constant and maps to zeros.
    """
    raw = np.asarray(raw, dtype=float)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    live = std > 1e-9 * np.maximum(1.0, np.abs(raw).max(axis=0, initial=0.0))
    safe = np.where(live, std, 1.0)
    Z = np.where(live, (raw - mean) / safe, 0.0)
    return SignalMatrix(Z, raw, mean, std)


def frame_features(proposals: Sequence[Tube], frames: np.ndarray) -> SignalMatrix:
    """Per-frame proposal speed, proposal spread and pixel change, standardised.

    Column 0 is the distance the mean box centre moved since the previous
    frame, column 1 the root total variance of the box centres, column 2 the
    summed absolute pixel difference to the previous frame. Row 0 has zero
    speed and zero pixel change.
    """
    frames = np.asarray(frames)
    T = len(frames)
    if T < 2:
        raise ValueError(f"need at least 2 frames, got {T}")
    centers: list[list[tuple[float, float]]] = [[] for _ in range(T)]
    for tube in proposals:
        for b in tube.boxes:
            if 0 <= b.frame < T:
                centers[b.frame].append(b.center)
    raw = np.zeros((T, 3))
    mean_c = np.zeros((T, 2))
    for t, cs in enumerate(centers):
        if not cs:
            raise ValueError(f"frame {t} has no proposal boxes")
        c = np.asarray(cs)
        mean_c[t] = c.mean(axis=0)
        raw[t, 1] = np.sqrt(c.var(axis=0).sum())
    raw[1:, 0] = np.linalg.norm(np.diff(mean_c, axis=0), axis=1)
    f = frames.astype(np.float64)
    raw[1:, 2] = np.abs(np.diff(f, axis=0)).reshape(T - 1, -1).sum(axis=1)
    return standardize(raw)


def penalty_weights(N: int, weighting: str = "divide") -> np.ndarray:
    """Penalty coefficient of each of the N-1 row differences."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    n = np.arange(1, N)
    w = np.sqrt(N / (n * (N - n)))
    return 1.0 / w if weighting == "divide" else w


def tv_objective(Z, X, lam: float, weighting: str = "divide") -> float:
    Z = _as_matrix(Z)
    X = _as_matrix(X)
    c = penalty_weights(len(Z), weighting)
    d = np.linalg.norm(np.diff(X, axis=0), axis=1)
    return float(0.5 * np.sum((Z - X) ** 2) + lam * c @ d)


def _as_matrix(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2:
        raise ValueError(f"expected an (N, K) signal, got shape {Z.shape}")
    return Z


def _suffix(R):
    """Entry n is the sum of rows n..N-1, for n = 1..N-1."""
    return np.cumsum(R[::-1], axis=0)[::-1][1:]


def lambda_max(Z, weighting: str = "divide") -> float:
    """Smallest lam for which the fit is constant (no boundaries)."""
    Z = _as_matrix(Z)
    y = Z - Z.mean(axis=0)
    c = penalty_weights(len(Z), weighting)
    return float(np.max(np.linalg.norm(_suffix(y), axis=1) / c)) if len(Z) > 1 else 0.0


@njit(cache=True)
def _residual(y, beta, R):
    # R = y - (L beta - mean(L beta)), L = cumulative sum with a zero first row
    N, K = y.shape
    for k in range(K):
        acc = 0.0
        tot = 0.0
        R[0, k] = 0.0
        for i in range(1, N):
            acc += beta[i - 1, k]
            R[i, k] = acc
            tot += acc
        m = tot / N
        for i in range(N):
            R[i, k] = y[i, k] - (R[i, k] - m)


@njit(cache=True)
def _suffix_into(R, G):
    N, K = R.shape
    for k in range(K):
        acc = 0.0
        for i in range(N - 1, 0, -1):
            acc += R[i, k]
            G[i - 1, k] = acc


@njit(cache=True)
def _primal_gap(y, beta, lam, c, R, G):
    N, K = y.shape
    _residual(y, beta, R)
    _suffix_into(R, G)
    primal = 0.0
    yy = 0.0
    for i in range(N):
        for k in range(K):
            primal += 0.5 * R[i, k] ** 2
            yy += y[i, k] ** 2
    s = 1.0
    for n in range(N - 1):
        bn = 0.0
        gn = 0.0
        for k in range(K):
            bn += beta[n, k] ** 2
            gn += G[n, k] ** 2
        primal += lam * c[n] * np.sqrt(bn)
        if gn > 0:
            s = min(s, lam * c[n] / np.sqrt(gn))
    resid = 0.0
    for i in range(N):
        for k in range(K):
            resid += (y[i, k] - s * R[i, k]) ** 2
    return primal, primal - (0.5 * yy - 0.5 * resid)


@njit(cache=True)
def _fista(y, c, lam, beta, step, tol, max_iter):
    N, K = y.shape
    R = np.empty((N, K))
    G = np.empty((N - 1, K))
    v = beta.copy()
    new = np.empty_like(beta)
    t = 1.0
    it = 0
    objective, gap = _primal_gap(y, beta, lam, c, R, G)
    while gap > tol * max(1.0, objective):
        if it >= max_iter:
            return beta, it, objective, gap, False
        _residual(y, v, R)
        _suffix_into(R, G)
        uphill = 0.0
        for n in range(N - 1):
            norm = 0.0
            for k in range(K):
                u = v[n, k] + step * G[n, k]
                new[n, k] = u
                norm += u * u
            norm = np.sqrt(norm)
            thr = lam * c[n] * step
            shrink = 1.0 - thr / norm if norm > thr else 0.0
            for k in range(K):
                new[n, k] *= shrink
                uphill += (v[n, k] - new[n, k]) * (new[n, k] - beta[n, k])
        if uphill > 0:
            t = 1.0  # momentum points uphill: restart
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        for n in range(N - 1):
            for k in range(K):
                v[n, k] = new[n, k] + mom * (new[n, k] - beta[n, k])
                beta[n, k] = new[n, k]
        t = t_new
        it += 1
        if it % 10 == 0:
            objective, gap = _primal_gap(y, beta, lam, c, R, G)
    return beta, it, objective, gap, True


def boundaries_of(X: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    d = np.linalg.norm(np.diff(X, axis=0), axis=1)
    return np.flatnonzero(d > eps) + 1


def tv_segment(Z, lam: float, weighting: str = "divide", tol: float = 1e-8,
               max_iter: int = 10000, eps: float = 1e-6, beta0: np.ndarray | None = None
               ) -> TVSolution:
    """Solve the weighted TV problem for one ``lam``.

    Stops once the duality gap falls below ``tol * max(1, objective)``;
    raises ConvergenceError if that does not happen within ``max_iter``.
    """
    Z = _as_matrix(Z)
    N, K = Z.shape
    if N < 2:
        raise ValueError(f"need at least 2 rows, got {N}")
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("signal contains non-finite values")
    if lam == 0:
        return TVSolution(Z.copy(), boundaries_of(Z, eps), 0.0, 0.0, 0.0, 0, np.diff(Z, axis=0))

    c = penalty_weights(N, weighting)
    y = Z - Z.mean(axis=0)
    step = 4.0 * np.sin(np.pi / (2 * N)) ** 2  # 1 / largest eigenvalue of the design Gram matrix
    beta = np.zeros((N - 1, K)) if beta0 is None else np.array(beta0, dtype=float)
    beta, it, objective, gap, ok = _fista(y, c, float(lam), beta, step, tol, max_iter)
    if not ok:
        raise ConvergenceError(
            f"TV solver did not converge in {max_iter} iterations (gap {gap:.3e})", gap, objective)
    R = np.empty_like(y)
    _residual(y, beta, R)
    X = Z - R
    return TVSolution(X, boundaries_of(X, eps), float(lam), float(objective), float(gap), int(it), beta)


def segment_means(Z, boundaries) -> np.ndarray:
    """Piecewise-constant refit: each segment replaced by its row mean."""
    Z = _as_matrix(Z)
    X = np.empty_like(Z)
    edges = [0, *[int(b) for b in boundaries], len(Z)]
    for a, b in zip(edges[:-1], edges[1:]):
        X[a:b] = Z[a:b].mean(axis=0)
    return X


def lambda_grid(Z, n: int = 16, weighting: str = "divide") -> np.ndarray:
    """``n`` log-spaced values from lambda_max down to lambda_max / 1000."""
    lmax = lambda_max(Z, weighting)
    if lmax <= 0:
        return np.zeros(0)
    return np.geomspace(lmax, lmax / 1000.0, n)


def prune_boundaries(Z, boundaries, penalty: float) -> np.ndarray:
    """Backward elimination on the segment-mean refit.

    Repeatedly drops the boundary whose removal raises the refit squared
    error the least, while that increase is below ``penalty``.
    """
    Z = _as_matrix(Z)
    b = [int(x) for x in boundaries]
    while b:
        edges = [0, *b, len(Z)]
        costs = []
        for k in range(len(b)):
            left, right = Z[edges[k]:edges[k + 1]], Z[edges[k + 1]:edges[k + 2]]
            n1, n2 = len(left), len(right)
            d = left.mean(axis=0) - right.mean(axis=0)
            costs.append(n1 * n2 / (n1 + n2) * float(d @ d))
        k = int(np.argmin(costs))
        if costs[k] >= penalty:
            break
        b.pop(k)
    return np.array(b, dtype=int)


def selection_criterion(Z, boundaries) -> float:
    """``||Z - Xr||^2 + n_boundaries * K * log N`` with Xr the segment-mean refit."""
    Z = _as_matrix(Z)
    N, K = Z.shape
    Xr = segment_means(Z, boundaries)
    return float(np.sum((Z - Xr) ** 2) + len(boundaries) * K * np.log(N))


def auto_segment(Z, grid: int = 16, weighting: str = "divide", tol: float = 1e-8,
                 max_iter: int = 10000) -> TVSolution:
    """Pick the number and position of shots without supervision.

    Every lam of the grid is solved (warm-started from the previous one),
    its boundaries are pruned by backward elimination at a cost of
    ``K log N`` per boundary, and the pruned set with the lowest
    ``||Z - Xr||^2 + n_boundaries * K * log N`` wins (Xr is the
    segment-mean refit; equal criteria keep the larger lam). The returned X
    is that refit. ``path`` lists (lam, raw TV boundary count, kept count,
    criterion) for each grid point, largest lam first.
    """
    Z = _as_matrix(Z)
    N, K = Z.shape
    if N < 2:
        raise ValueError(f"need at least 2 rows, got {N}")
    lams = lambda_grid(Z, grid, weighting)
    if lams.size == 0:
        return TVSolution(segment_means(Z, []), np.zeros(0, dtype=int), 0.0)
    penalty = K * np.log(N)
    best, best_crit, path, beta = None, np.inf, [], None
    for lam in lams:
        fit = tv_segment(Z, lam, weighting, tol, max_iter, beta0=beta)
        beta = fit.beta
        kept = prune_boundaries(Z, fit.boundaries, penalty)
        crit = selection_criterion(Z, kept)
        path.append((float(lam), len(fit.boundaries), len(kept), crit))
        if crit < best_crit:
            best_crit = crit
            best = TVSolution(segment_means(Z, kept), kept, float(lam), fit.objective, fit.gap,
                              fit.n_iter, fit.beta)
    best.path = path
    log.debug("auto_segment: lam=%.4g, %d boundaries", best.lam, len(best.boundaries))
    return best


def segment_frames(proposals: Sequence[Tube], frames: np.ndarray, grid: int = 16,
                   weighting: str = "divide", tol: float = 1e-8, max_iter: int = 10000) -> TVSolution:
    """Shot boundaries of a video from its proposals and frames.

    Row 0 of the speed and pixel-change features is a placeholder (there is
    no previous frame), so rows 1..N-1 are standardised and segmented, and
    frame 0 joins the first shot.
    """
    raw = frame_features(proposals, frames).raw
    if len(raw) < 3:
        return TVSolution(np.zeros_like(raw), np.zeros(0, dtype=int), 0.0)
    sol = auto_segment(standardize(raw[1:]).Z, grid, weighting, tol, max_iter)
    sol.X = np.vstack([sol.X[:1], sol.X])
    sol.boundaries = sol.boundaries + 1
    return sol


def shots_to_ranges(boundaries, N: int) -> list[tuple[int, int]]:
    """Half-open frame ranges between consecutive boundaries, covering [0, N)."""
    if isinstance(boundaries, TVSolution):
        boundaries = boundaries.boundaries
    b = [int(x) for x in boundaries]
    if any(not 1 <= x <= N - 1 for x in b) or b != sorted(set(b)):
        raise ValueError(f"boundaries {b} must be increasing and lie in [1, {N - 1}]")
    edges = [0, *b, N]
    return list(zip(edges[:-1], edges[1:]))
