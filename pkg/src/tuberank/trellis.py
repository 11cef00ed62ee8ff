"""Layered sub-proposal graph and its dynamic-programming solution.

Each of the F layers holds one node per proposal (that proposal's
sub-proposal in the layer's temporal segment). A path picks one node per
layer; its energy is

    E(P) = sum_f Phi[f, p_f] + lambda_edge * Psi[f, p_f, p_{f+1}]

with no edge term after the last layer. Paths are extracted greedily: the
best path is taken, its nodes are removed, and the search repeats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import Tube, iou_xywh
from .scoring import (ScoreWeights, SubProposal, edge_score, minmax_normalize, node_score,
                      subproposal_actionness)


@dataclass
class Trellis:
    """Scores of an F-layer trellis over N proposals.

    ``node_scores`` is (F, N); ``edge_scores`` is (F-1, N, N) where
    ``edge_scores[f, j, i]`` links proposal j in layer f to proposal i in
    layer f+1. Column k of every layer belongs to ``proposal_ids[k]``,
    which is sorted ascending so that index order is id order.
    """

    node_scores: np.ndarray
    edge_scores: np.ndarray
    proposal_ids: np.ndarray
    lambda_edge: float = 1.0
    layers: list[list[SubProposal]] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.node_scores = np.asarray(self.node_scores, dtype=float)
        self.edge_scores = np.asarray(self.edge_scores, dtype=float)
        self.proposal_ids = np.asarray(self.proposal_ids, dtype=int)
        F, N = self.node_scores.shape
        if F < 1:
            raise ValueError("a trellis needs at least one layer")
        if self.edge_scores.shape != (F - 1, N, N):
            raise ValueError(f"edge scores must be {(F - 1, N, N)}, got {self.edge_scores.shape}")
        if self.proposal_ids.shape != (N,):
            raise ValueError("one proposal id per column expected")
        if np.any(np.diff(self.proposal_ids) <= 0):
            raise ValueError("proposal ids must be strictly increasing")

    @property
    def F(self) -> int:
        return self.node_scores.shape[0]

    @property
    def N(self) -> int:
        return self.node_scores.shape[1]

    def index_of(self, proposal_id: int) -> int:
        k = int(np.searchsorted(self.proposal_ids, proposal_id))
        if k >= self.N or self.proposal_ids[k] != proposal_id:
            raise KeyError(f"proposal {proposal_id} is not in the trellis")
        return k

    def energy(self, path: Sequence[int]) -> float:
        """Energy of a path given as proposal ids, accumulated in DP order."""
        idx = [self.index_of(p) for p in path]
        if len(idx) != self.F:
            raise ValueError(f"path has {len(idx)} entries for {self.F} layers")
        return _path_energy(self.node_scores, self.edge_scores, self.lambda_edge, idx)


def _path_energy(node, edge, lam, idx) -> float:
    # same association as the DP recursion so that equal paths give equal floats
    e = node[0, idx[0]]
    for f in range(1, len(idx)):
        e = node[f, idx[f]] + (lam * edge[f - 1, idx[f - 1], idx[f]] + e)
    return float(e)


@dataclass
class RankedProposal:
    rank: int
    path: tuple[int, ...]
    energy: float
    video_id: str = ""
    tube: Tube | None = None


def split_subproposals(tube: Tube, F: int) -> list[SubProposal]:
    """Cut a tube into F contiguous pieces; the first ``len % F`` get one extra frame."""
    if F < 1:
        raise ValueError(f"F must be at least 1, got {F}")
    T = len(tube)
    if T < F:
        raise ValueError(
            f"tube {tube.video_id}/{tube.proposal_id} has {T} frames, fewer than F={F}"
        )
    base, extra = divmod(T, F)
    out, start = [], 0
    for f in range(F):
        n = base + (1 if f < extra else 0)
        out.append(SubProposal(tube.proposal_id, f, tube.boxes[start:start + n]))
        start += n
    return out


def build_trellis(layers: Sequence[Sequence[SubProposal]], weights: ScoreWeights = ScoreWeights(),
                  sigma: float = 1.0) -> Trellis:
    """Score every node and every consecutive-layer edge.

    Motion scores are min-max normalised over all nodes before being
    combined with actionness. Sub-proposals without an appearance vector
    contribute zero appearance similarity.
    """
    if not layers or not layers[0]:
        raise ValueError("cannot build a trellis from an empty proposal set")
    ids = sorted(sp.proposal_id for sp in layers[0])
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate proposal ids in layer 0")
    ordered = []
    for f, layer in enumerate(layers):
        by_id = {sp.proposal_id: sp for sp in layer}
        if sorted(by_id) != ids or len(layer) != len(ids):
            raise ValueError(f"layer {f} does not hold exactly one node per proposal")
        for sp in layer:
            if sp.segment_index != f:
                raise ValueError(f"sub-proposal {sp.proposal_id} has segment {sp.segment_index} in layer {f}")
        ordered.append([by_id[i] for i in ids])

    F, N = len(ordered), len(ids)
    phi_i = np.array([[subproposal_actionness(sp) for sp in layer] for layer in ordered])
    phi_m = minmax_normalize([[sp.motion for sp in layer] for layer in ordered])
    nodes = node_score(phi_i, phi_m, weights)

    edges = np.zeros((max(F - 1, 0), N, N))
    for f in range(F - 1):
        last = np.array([sp.boxes[-1].as_tuple() for sp in ordered[f]])
        first = np.array([sp.boxes[0].as_tuple() for sp in ordered[f + 1]])
        psi_o = iou_xywh(last[:, None, :], first[None, :, :])
        a = [sp.appearance for sp in ordered[f]]
        b = [sp.appearance for sp in ordered[f + 1]]
        if any(x is None for x in a + b):
            psi_a = np.zeros((N, N))
        else:
            if sigma <= 0:
                raise ValueError(f"sigma must be positive, got {sigma}")
            psi_a = np.exp(-cdist(np.asarray(a, float), np.asarray(b, float)) / sigma)
        edges[f] = edge_score(psi_o, psi_a, weights)
    return Trellis(nodes, edges, ids, weights.lambda_edge, layers=ordered)


def _best_path_idx(node, edge, lam, active):
    F, N = node.shape
    back = np.zeros((F, N), dtype=int)
    D = np.where(active[0], node[0], -np.inf)
    cols = np.arange(N)
    for f in range(1, F):
        cand = lam * edge[f - 1] + D[:, None]
        arg = np.argmax(cand, axis=0)  # first maximum = smallest proposal id
        back[f] = arg
        D = np.where(active[f], node[f] + cand[arg, cols], -np.inf)
    end = int(np.argmax(D))
    path = [end]
    for f in range(F - 1, 0, -1):
        path.append(int(back[f, path[-1]]))
    return path[::-1], float(D[end])


def best_path(t: Trellis, active: np.ndarray | None = None) -> tuple[tuple[int, ...], float]:
    """Maximum-energy path as (proposal ids per layer, energy).

    Ties resolve to the smaller proposal id at every argmax. ``active`` is
    an optional (F, N) mask of nodes still available.
    """
    if active is None:
        active = np.ones(t.node_scores.shape, dtype=bool)
    empty = np.flatnonzero(~active.any(axis=1))
    if t.N == 0 or empty.size:
        layer = int(empty[0]) if empty.size else 0
        raise ValueError(f"layer {layer} has no nodes")
    idx, energy = _best_path_idx(t.node_scores, t.edge_scores, t.lambda_edge, active)
    return tuple(int(t.proposal_ids[i]) for i in idx), energy


def rank_proposals(t: Trellis, K: int, video_id: str = "") -> list[RankedProposal]:
    """Extract up to K paths, removing each selected path's nodes before the next search."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    active = np.ones(t.node_scores.shape, dtype=bool)
    layer_idx = np.arange(t.F)
    out = []
    while len(out) < K and active.any(axis=1).all():
        idx, energy = _best_path_idx(t.node_scores, t.edge_scores, t.lambda_edge, active)
        active[layer_idx, idx] = False
        path = tuple(int(t.proposal_ids[i]) for i in idx)
        tube = assemble(path, t.layers, video_id, proposal_id=len(out)) if t.layers else None
        out.append(RankedProposal(len(out) + 1, path, energy, video_id, tube))
    return out


def assemble(path: Sequence[int], layers: Sequence[Sequence[SubProposal]], video_id: str = "",
             proposal_id: int | None = None) -> Tube:
    """Concatenate the boxes of the chosen sub-proposals in layer order."""
    if len(path) != len(layers):
        raise ValueError(f"path has {len(path)} entries for {len(layers)} layers")
    boxes = []
    for f, pid in enumerate(path):
        sp = next((s for s in layers[f] if s.proposal_id == pid), None)
        if sp is None:
            raise KeyError(f"proposal {pid} has no node in layer {f}")
        boxes.extend(sp.boxes)
    return Tube(video_id, path[0] if proposal_id is None else proposal_id, boxes)
