"""Localisation metrics over ranked tubes: accuracy@t, MABO, CorLoc, recall@K."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import Tube, tube_overlap
from .trellis import RankedProposal

THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


def best_overlap(tubes: Sequence[Tube], gts: Sequence[Tube]) -> float:
    return max((tube_overlap(t, g) for t in tubes for g in gts), default=0.0)


def _check_gt(videos, gt):
    missing = sorted(set(videos) - set(gt))
    if missing:
        raise KeyError(f"no ground truth for video(s) {', '.join(missing)}")


def localization_accuracy(top1: Mapping[str, Tube], gt: Mapping[str, Sequence[Tube]],
                          thresholds: Sequence[float] = THRESHOLDS) -> dict[float, float]:
    """Fraction of ground-truth videos whose top-ranked tube overlaps a GT tube by >= t.

    Videos with ground truth but no proposal count as misses.
    """
    _check_gt(top1, gt)
    if not gt:
        return {t: 0.0 for t in thresholds}
    ov = np.array([best_overlap([top1[v]], gt[v]) if v in top1 else 0.0 for v in sorted(gt)])
    return {t: float(np.mean(ov >= t)) for t in thresholds}


def mabo(ranked: Mapping[str, Sequence[Tube]], gt: Mapping[str, Sequence[Tube]],
         K: int | None = None, labels: Mapping[str, str] | None = None) -> float:
    """Mean over classes of the average best overlap of the top-K tubes per video.

    Without ``labels`` (video -> class) every video belongs to one class.
    """
    if K is not None and K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    _check_gt(ranked, gt)
    per_class: dict[str, list[float]] = defaultdict(list)
    for v in sorted(gt):
        tubes = list(ranked.get(v, ()))[:K]
        cls = labels.get(v, "") if labels else ""
        per_class[cls].append(best_overlap(tubes, gt[v]))
    if not per_class:
        return 0.0
    return float(np.mean([np.mean(x) for x in per_class.values()]))


def corloc(top1: Mapping[str, Sequence[Tube]], gt: Mapping[str, Sequence[Tube]],
           threshold: float) -> float:
    """Fraction of GT instances covered (overlap >= threshold) by some top-1 tube of their video.

    ``top1`` holds the rank-1 tube of every shot of a video (one tube for a
    trimmed video).
    """
    _check_gt(top1, gt)
    hits = [best_overlap(list(top1.get(v, ())), [g]) >= threshold for v in sorted(gt) for g in gt[v]]
    return float(np.mean(hits)) if hits else 0.0


def recall_at_k(ranked: Mapping[str, Sequence[Tube]], gt: Mapping[str, Sequence[Tube]],
                threshold: float, K_max: int) -> np.ndarray:
    """Entry K-1: fraction of videos with a tube among their top K reaching ``threshold``."""
    _check_gt(ranked, gt)
    if not gt:
        return np.zeros(K_max)
    first_hit = []
    for v in sorted(gt):
        hit = next((k for k, t in enumerate(ranked.get(v, ())) if best_overlap([t], gt[v]) >= threshold),
                   None)
        first_hit.append(np.inf if hit is None else hit + 1)
    first_hit = np.array(first_hit)
    return np.array([np.mean(first_hit <= k) for k in range(1, K_max + 1)])


@dataclass
class EvalReport:
    accuracy: dict[float, float]
    mabo: float
    mabo_k: int | None
    corloc: dict[float, float]
    recall: np.ndarray
    recall_threshold: float
    n_videos: int = 0
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str, str, float]]:
        out = [("accuracy", f"{t:g}", "", v) for t, v in self.accuracy.items()]
        out.append(("mabo", "", "" if self.mabo_k is None else str(self.mabo_k), self.mabo))
        out += [("corloc", f"{t:g}", "", v) for t, v in self.corloc.items()]
        out += [("recall", f"{self.recall_threshold:g}", str(k + 1), float(v)) for k, v in enumerate(self.recall)]
        return out


def group_ranked(proposals: Sequence[RankedProposal]) -> tuple[dict[str, list[Tube]], dict[str, list[Tube]]]:
    """Per video: all tubes in rank order, and the rank-1 tubes (one per shot).

    Ranks restart at 1 in every shot of an untrimmed video; tubes of equal
    rank are ordered by decreasing energy, then file order.
    """
    by_video: dict[str, list[tuple]] = defaultdict(list)
    for i, p in enumerate(proposals):
        by_video[p.video_id].append((p.rank, -p.energy, i, p))
    ranked, top1 = {}, {}
    for v, items in by_video.items():
        items.sort(key=lambda x: x[:3])
        ranked[v] = [p.tube for *_, p in items]
        top1[v] = [p.tube for *_, p in items if p.rank == 1]
    return ranked, top1


def evaluate(proposals: Sequence[RankedProposal], gt_tubes: Sequence[Tube],
             labels: Mapping[tuple[str, int], str] | None = None,
             thresholds: Sequence[float] = THRESHOLDS, mabo_k: int | None = None,
             recall_threshold: float = 0.5, K_max: int | None = None) -> EvalReport:
    gt: dict[str, list[Tube]] = defaultdict(list)
    for g in gt_tubes:
        gt[g.video_id].append(g)
    gt = dict(gt)
    video_labels = None
    if labels:
        video_labels = {vid: labels[(vid, tubes[0].proposal_id)] for vid, tubes in gt.items()}
    ranked, top1 = group_ranked(proposals)
    best_top1 = {v: r[0] for v, r in ranked.items() if r}
    if K_max is None:
        K_max = max((len(r) for r in ranked.values()), default=1)
    return EvalReport(
        accuracy=localization_accuracy(best_top1, gt, thresholds),
        mabo=mabo(ranked, gt, mabo_k, video_labels),
        mabo_k=mabo_k,
        corloc={t: corloc(top1, gt, t) for t in thresholds},
        recall=recall_at_k(ranked, gt, recall_threshold, max(K_max, 1)),
        recall_threshold=recall_threshold,
        n_videos=len(gt),
    )
