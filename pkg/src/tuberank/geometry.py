"""Boxes, tubes and the overlap arithmetic shared by every other module."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box on one frame; (x, y) is the top-left corner."""

    frame: int
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"negative frame index {self.frame}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size ({self.w}, {self.h}) on frame {self.frame}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + 0.5 * self.w, self.y + 0.5 * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.w, self.h


@dataclass
class Tube:
    """A temporally contiguous sequence of boxes (one action proposal)."""

    video_id: str
    proposal_id: int
    boxes: list[BoundingBox] = field(default_factory=list)

    def __post_init__(self):
        if not self.boxes:
            raise ValueError(f"tube {self.video_id}/{self.proposal_id} has no boxes")
        for prev, cur in zip(self.boxes, self.boxes[1:]):
            if cur.frame != prev.frame + 1:
                raise ValueError(
                    f"tube {self.video_id}/{self.proposal_id}: frame {cur.frame} "
                    f"does not follow frame {prev.frame}"
                )

    @property
    def start(self) -> int:
        return self.boxes[0].frame

    @property
    def end(self) -> int:
        """Exclusive end frame."""
        return self.boxes[-1].frame + 1

    def __len__(self) -> int:
        return len(self.boxes)

    def box_at(self, frame: int) -> BoundingBox | None:
        i = frame - self.start
        if 0 <= i < len(self.boxes):
            return self.boxes[i]
        return None

    def as_array(self) -> np.ndarray:
        """(T, 4) array of x, y, w, h."""
        return np.array([b.as_tuple() for b in self.boxes], dtype=float)

    @classmethod
    def from_array(cls, video_id: str, proposal_id: int, start: int, xywh) -> "Tube":
        xywh = np.asarray(xywh, dtype=float).reshape(-1, 4)
        boxes = [BoundingBox(start + i, *map(float, row)) for i, row in enumerate(xywh)]
        return cls(video_id, proposal_id, boxes)


def iou_xywh(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise IoU of broadcastable (..., 4) x, y, w, h arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ix = np.minimum(a[..., 0] + a[..., 2], b[..., 0] + b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    iy = np.minimum(a[..., 1] + a[..., 3], b[..., 1] + b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    # rounding can push a containment case a hair above 1
    return np.minimum(out, 1.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when both are degenerate."""
    return float(iou_xywh(np.array(a.as_tuple()), np.array(b.as_tuple())))


def tube_overlap(a: Tube, b: Tube) -> float:
    """Mean per-frame IoU over the union of the frames covered by either tube.

    Frames covered by only one of the tubes count as zero overlap.
    """
    lo, hi = max(a.start, b.start), min(a.end, b.end)
    n_union = len(a) + len(b) - max(0, hi - lo)
    if hi <= lo:
        return 0.0
    aa = a.as_array()[lo - a.start:hi - a.start]
    bb = b.as_array()[lo - b.start:hi - b.start]
    return float(iou_xywh(aa, bb).sum() / n_union)


def nms(tubes: Sequence[Tube], scores: Sequence[float], threshold: float = 0.8) -> list[int]:
    """Greedy non-maximal suppression over tubes.

    Tubes are visited by decreasing score (lower ``proposal_id`` first on
    ties); a tube is dropped when its overlap with any already kept tube
    exceeds ``threshold``. Returns the kept indices in visiting order.
    """
    if len(tubes) != len(scores):
        raise ValueError(f"{len(tubes)} tubes but {len(scores)} scores")
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    order = sorted(range(len(tubes)), key=lambda i: (-scores[i], tubes[i].proposal_id, i))
    kept: list[int] = []
    for i in order:
        if all(tube_overlap(tubes[i], tubes[k]) <= threshold for k in kept):
            kept.append(i)
    return kept


def pad_to_span(tube: Tube, start: int, end: int) -> Tube:
    """Crop ``tube`` to [start, end) and extend it by repeating its terminal boxes.

    Raises ValueError when the tube has no frame inside the span.
    """
    lo, hi = max(tube.start, start), min(tube.end, end)
    if hi <= lo:
        raise ValueError(
            f"tube {tube.video_id}/{tube.proposal_id} has no frames in [{start}, {end})"
        )
    core = tube.as_array()[lo - tube.start:hi - tube.start]
    head = np.repeat(core[:1], lo - start, axis=0)
    tail = np.repeat(core[-1:], end - hi, axis=0)
    return Tube.from_array(tube.video_id, tube.proposal_id, start, np.vstack([head, core, tail]))
