"""Node and edge scores of the sub-proposal graph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox, iou
from .motion import patch_motion_score


@dataclass(frozen=True)
class ScoreWeights:
    lambda_i: float = 1.0   # actionness
    lambda_m: float = 1.0   # motion
    lambda_o: float = 1.0   # shape consistency
    lambda_a: float = 1.0   # appearance similarity
    lambda_edge: float = 1.0

    def __post_init__(self):
        for name in ("lambda_i", "lambda_m", "lambda_o", "lambda_a", "lambda_edge"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")


@dataclass
class SubProposal:
    """The part of one proposal that falls in one temporal segment.

    ``actionness`` is aligned with ``boxes``; NaN marks a missing score.
    ``motion`` holds the raw (unnormalised) motion score once computed.
    """

    proposal_id: int
    segment_index: int
    boxes: list[BoundingBox]
    actionness: np.ndarray | None = None
    appearance: np.ndarray | None = None
    motion: float = 0.0

    def __post_init__(self):
        if not self.boxes:
            raise ValueError(f"sub-proposal {self.proposal_id}/{self.segment_index} has no boxes")
        if self.actionness is None:
            self.actionness = np.full(len(self.boxes), np.nan)
        self.actionness = np.asarray(self.actionness, dtype=float)
        if self.actionness.shape != (len(self.boxes),):
            raise ValueError("actionness must align with boxes")

    @property
    def frames(self) -> range:
        return range(self.boxes[0].frame, self.boxes[-1].frame + 1)


def subproposal_actionness(sp: SubProposal) -> float:
    """Mean per-patch actionness; raises KeyError naming the first missing patch."""
    missing = np.flatnonzero(np.isnan(sp.actionness))
    if missing.size:
        frame = sp.boxes[missing[0]].frame
        raise KeyError(f"no actionness score for proposal {sp.proposal_id}, frame {frame}")
    return float(np.mean(sp.actionness))


def subproposal_motion_score(sp: SubProposal, per_frame_candidates) -> float:
    """Mean over the sub-proposal's boxes of the highest-overlap motion-box score.

    ``per_frame_candidates`` maps a frame index to ``(boxes, scores)``.
    """
    return float(np.mean([patch_motion_score(b, per_frame_candidates[b.frame]) for b in sp.boxes]))


def minmax_normalize(values) -> np.ndarray:
    """Rescale to [0, 1]; a constant input maps to zeros."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def node_score(phi_i, phi_m, w: ScoreWeights = ScoreWeights()):
    return w.lambda_i * phi_i + w.lambda_m * phi_m


def edge_score(psi_o, psi_a, w: ScoreWeights = ScoreWeights()):
    return w.lambda_o * psi_o + w.lambda_a * psi_a


def shape_score(sp_i: SubProposal, sp_j: SubProposal) -> float:
    """IoU between the last box of ``sp_i`` and the first box of the next segment's ``sp_j``."""
    if sp_j.segment_index != sp_i.segment_index + 1:
        raise ValueError(
            f"segments {sp_i.segment_index} and {sp_j.segment_index} are not adjacent"
        )
    return iou(sp_i.boxes[-1], sp_j.boxes[0])


def appearance_similarity(a, b, sigma: float = 1.0):
    """``exp(-||a - b|| / sigma)``; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"descriptor length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d = np.linalg.norm(a - b, axis=-1)
    out = np.exp(-d / sigma)
    return float(out) if out.ndim == 0 else out
