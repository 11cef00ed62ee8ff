"""End-to-end ranking of one video: NMS, scoring, trellis search, optional shot split."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .changepoint import TVSolution, segment_frames, shots_to_ranges
from .config import RunConfig
from .geometry import Tube, nms, pad_to_span
from .hog import DESCRIPTOR_LENGTH, hog_descriptor
from .motion import FlowField, box_region, flow_derivative_score, generate_motion_boxes, video_motion_edges
from .scoring import SubProposal, subproposal_motion_score
from .trellis import RankedProposal, build_trellis, rank_proposals, split_subproposals

log = logging.getLogger(__name__)


@dataclass
class VideoInput:
    video_id: str
    proposals: list[Tube]
    flow: FlowField
    frames: np.ndarray                            # (T, H, W) grayscale
    actionness: Mapping[tuple[int, int], float]   # (proposal_id, frame) -> score

    def __post_init__(self):
        T = len(self.frames)
        if self.flow.shape != self.frames.shape:
            raise ValueError(
                f"video {self.video_id}: flow shape {self.flow.shape} does not match frames {self.frames.shape}")
        for tube in self.proposals:
            if tube.video_id != self.video_id:
                raise ValueError(f"proposal {tube.proposal_id} belongs to video {tube.video_id}, not {self.video_id}")
            if tube.start < 0 or tube.end > T:
                raise ValueError(
                    f"proposal {tube.proposal_id} spans frames [{tube.start}, {tube.end}), video has {T}")


def _appearance(sp: SubProposal, frames: np.ndarray) -> np.ndarray:
    """Mean HOG over the sub-proposal's patches; patches falling outside the frame are skipped."""
    H, W = frames.shape[1:]
    descs = []
    for b in sp.boxes:
        rs, cs = box_region(b, H, W)
        patch = frames[b.frame][rs, cs]
        if patch.size:
            descs.append(hog_descriptor(patch))
    return np.mean(descs, axis=0) if descs else np.zeros(DESCRIPTOR_LENGTH)


class _Candidates(dict):
    """Per-frame motion boxes, generated on first use."""

    def __init__(self, edges, params):
        super().__init__()
        self.edges, self.params = edges, params

    def __missing__(self, frame):
        self[frame] = generate_motion_boxes(self.edges[frame], self.params)
        return self[frame]


def rank_span(video: VideoInput, cfg: RunConfig, start: int, end: int,
              edges: np.ndarray | None = None, candidates: Mapping | None = None) -> list[RankedProposal]:
    """Rank proposals restricted to frames [start, end).

    Proposals are cropped (or padded by repeating their end boxes) to the
    span, reduced by NMS on their flow-derivative score, cut into
    ``min(F, end - start)`` sub-proposals and ranked on the trellis. Padded
    frames reuse the actionness of the nearest original frame.
    """
    if edges is None:
        edges = video_motion_edges(video.flow)
    if candidates is None:
        candidates = _Candidates(edges, cfg.box_params)
    sources = [t for t in video.proposals if t.start < end and t.end > start]
    if not sources:
        log.warning("video %s: no proposal covers frames [%d, %d)", video.video_id, start, end)
        return []
    tubes = [pad_to_span(t, start, end) for t in sources]
    scores = [flow_derivative_score(t, video.flow, edges) for t in tubes]
    keep = sorted(nms(tubes, scores, cfg.nms_threshold))
    log.debug("video %s [%d, %d): %d of %d proposals survive NMS",
              video.video_id, start, end, len(keep), len(tubes))

    F = min(cfg.F, end - start)
    layers: list[list[SubProposal]] = [[] for _ in range(F)]
    for i in keep:
        src, tube = sources[i], tubes[i]
        lo, hi = max(src.start, start), min(src.end, end) - 1
        for sp in split_subproposals(tube, F):
            sp.actionness = np.array([
                video.actionness.get((sp.proposal_id, min(max(b.frame, lo), hi)), np.nan) for b in sp.boxes])
            sp.motion = subproposal_motion_score(sp, candidates)
            sp.appearance = _appearance(sp, video.frames)
            layers[sp.segment_index].append(sp)
    trellis = build_trellis(layers, cfg.weights, cfg.sigma)
    return rank_proposals(trellis, cfg.K, video.video_id)


def segment_video(video: VideoInput, cfg: RunConfig) -> TVSolution:
    return segment_frames(video.proposals, video.frames, cfg.seg_grid, cfg.seg_weighting,
                          cfg.seg_tol, cfg.seg_max_iter)


def rank_video(video: VideoInput, cfg: RunConfig, untrimmed: bool = False) -> list[RankedProposal]:
    """Ranked proposals of one video; with ``untrimmed``, ranked separately within each shot.

    Ranks restart at 1 in every shot. A single detected shot gives exactly
    the trimmed result.
    """
    T = len(video.frames)
    edges = video_motion_edges(video.flow)
    candidates = _Candidates(edges, cfg.box_params)
    spans = [(0, T)]
    if untrimmed:
        spans = shots_to_ranges(segment_video(video, cfg), T)
        log.info("video %s: %d shot(s)", video.video_id, len(spans))
    out: list[RankedProposal] = []
    for a, b in spans:
        out.extend(rank_span(video, cfg, a, b, edges, candidates))
    return out


def split_by_video(proposals: Sequence[Tube]) -> dict[str, list[Tube]]:
    out: dict[str, list[Tube]] = {}
    for t in proposals:
        out.setdefault(t.video_id, []).append(t)
    return out
