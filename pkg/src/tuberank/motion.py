"""Motion cues from optical flow.

Motion edges are Sobel gradient magnitudes of the two flow channels, summed.
Thresholded 8-connected components of the edge map act as motion contours,
and a box scores by how much contour mass it fully encloses relative to its
perimeter.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit
from scipy import ndimage
from skimage.filters import threshold_otsu

from .geometry import BoundingBox, Tube, iou_xywh


@dataclass
class FlowField:
    """Per-frame optical flow, ``u`` and ``v`` of shape (T, H, W)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float32)
        self.v = np.asarray(self.v, dtype=np.float32)
        if self.u.ndim != 3 or self.u.shape != self.v.shape:
            raise ValueError(f"u and v must share a (T, H, W) shape, got {self.u.shape} and {self.v.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.u.shape

    def __len__(self) -> int:
        return self.u.shape[0]


@dataclass
class Contour:
    pixels: np.ndarray  # (P, 2) rows and cols
    total_magnitude: float
    extent: tuple[int, int, int, int]  # row_min, col_min, row_max, col_max (inclusive)

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass
class MotionBoxParams:
    """Sliding-window grid used to propose motion boxes on one frame."""

    scales: Sequence[float] = (0.1, 0.2, 0.4, 0.6, 0.8)
    aspects: Sequence[float] = (0.5, 1.0, 2.0)
    stride: float = 0.25  # fraction of the window side
    top_m: int = 200
    nms_iou: float = 0.7
    kappa: float = 1.5
    threshold: float | None = None  # None: Otsu on the nonzero magnitudes


def _sobel_magnitude(channel: np.ndarray) -> np.ndarray:
    c = channel.astype(np.float64)
    out = np.zeros_like(c)
    gx = (c[:-2, 2:] + 2 * c[1:-1, 2:] + c[2:, 2:]) - (c[:-2, :-2] + 2 * c[1:-1, :-2] + c[2:, :-2])
    gy = (c[2:, :-2] + 2 * c[2:, 1:-1] + c[2:, 2:]) - (c[:-2, :-2] + 2 * c[:-2, 1:-1] + c[:-2, 2:])
    out[1:-1, 1:-1] = np.hypot(gx, gy)
    return out


def motion_edges(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Motion edge map of one flow frame: |Sobel(u)| + |Sobel(v)|, zero border."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError(f"flow channels must be matching 2-D grids, got {u.shape} and {v.shape}")
    if u.shape[0] < 3 or u.shape[1] < 3:
        raise ValueError(f"flow frame {u.shape} is smaller than 3x3")
    return _sobel_magnitude(u) + _sobel_magnitude(v)


def motion_threshold(edge_map: np.ndarray) -> float:
    """Otsu threshold of the nonzero magnitudes (inf for an all-zero map)."""
    nz = edge_map[edge_map > 0]
    if nz.size == 0:
        return np.inf
    if np.ptp(nz) == 0:
        return float(nz[0])
    return float(threshold_otsu(nz))


_EIGHT = np.ones((3, 3), dtype=bool)


def extract_contours(edge_map: np.ndarray, threshold: float) -> list[Contour]:
    """8-connected components of the pixels with magnitude >= ``threshold``."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    labels, n = ndimage.label(edge_map >= threshold, structure=_EIGHT)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    sums = ndimage.sum_labels(edge_map, labels, idx)
    contours = []
    for k, sl in enumerate(ndimage.find_objects(labels)):
        rr, cc = np.nonzero(labels[sl] == k + 1)
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        extent = (sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1)
        contours.append(Contour(np.column_stack([rr, cc]), float(sums[k]), extent))
    return contours


def _perimeter_norm(boxes: np.ndarray, kappa: float) -> np.ndarray:
    return (2.0 * (boxes[:, 2] + boxes[:, 3])) ** kappa


def score_boxes(boxes: np.ndarray, contours: Sequence[Contour], kappa: float = 1.5) -> np.ndarray:
    """Vectorised enclosure score of (B, 4) x, y, w, h boxes.

    A pixel (r, c) is the unit square [c, c+1] x [r, r+1]; a contour counts
    only when all of its pixels lie inside the box.
    """
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    if not contours or len(boxes) == 0:
        return np.zeros(len(boxes))
    ext = np.array([c.extent for c in contours], dtype=float)
    mags = np.array([c.total_magnitude for c in contours])
    x0, y0 = boxes[:, 0:1], boxes[:, 1:2]
    x1, y1 = x0 + boxes[:, 2:3], y0 + boxes[:, 3:4]
    inside = (
        (x0 <= ext[:, 1]) & (ext[:, 3] + 1 <= x1)
        & (y0 <= ext[:, 0]) & (ext[:, 2] + 1 <= y1)
    )
    num = inside @ mags
    # nothing enclosed also covers boxes too small for the perimeter term to be representable
    empty = (boxes[:, 2] <= 0) | (boxes[:, 3] <= 0) | (num == 0)
    den = np.where(empty, 1.0, _perimeter_norm(boxes, kappa))
    return np.where(empty, 0.0, num / den)


def box_contour_score(box: BoundingBox, contours: Sequence[Contour], kappa: float = 1.5) -> float:
    """Enclosed contour magnitude divided by ``(2 (w + h)) ** kappa``."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if box.w <= 0 or box.h <= 0:
        return 0.0
    total = 0.0
    for c in contours:
        rows, cols = c.pixels[:, 0], c.pixels[:, 1]
        if (np.all(cols >= box.x) and np.all(cols + 1 <= box.x + box.w)
                and np.all(rows >= box.y) and np.all(rows + 1 <= box.y + box.h)):
            total += c.total_magnitude
    if total == 0:
        return 0.0
    return total / (2.0 * (box.w + box.h)) ** kappa


def grid_boxes(height: int, width: int, scales: Sequence[float], aspects: Sequence[float],
               stride: float = 0.25) -> np.ndarray:
    """All sliding windows of the grid, as a (B, 4) x, y, w, h array.

    Window side is ``scale * min(H, W)``; ``aspect`` is width over height;
    the step in both directions is ``stride * side``.
    """
    out = []
    base = min(height, width)
    for s in scales:
        side = s * base
        step = max(stride * side, 1.0)
        for a in aspects:
            w, h = side * np.sqrt(a), side / np.sqrt(a)
            if w > width + 1e-9 or h > height + 1e-9:
                continue
            xs = np.arange(0.0, width - w + 1e-9, step)
            ys = np.arange(0.0, height - h + 1e-9, step)
            gx, gy = np.meshgrid(xs, ys)
            n = gx.size
            out.append(np.column_stack([gx.ravel(), gy.ravel(), np.full(n, w), np.full(n, h)]))
    if not out:
        return np.zeros((0, 4))
    return np.vstack(out)


@lru_cache(maxsize=16)
def _cached_grid(height, width, scales, aspects, stride):
    boxes = grid_boxes(height, width, scales, aspects, stride)
    boxes.setflags(write=False)
    return boxes


@njit(cache=True)
def _nms_kernel(boxes, order, iou_threshold, top_m):
    n = boxes.shape[0]
    x1, y1 = boxes[:, 0], boxes[:, 1]
    x2, y2 = x1 + boxes[:, 2], y1 + boxes[:, 3]
    area = boxes[:, 2] * boxes[:, 3]
    alive = np.ones(n, dtype=np.bool_)
    kept = np.empty(min(n, top_m), dtype=np.int64)
    k = 0
    for i in order:
        if not alive[i]:
            continue
        kept[k] = i
        k += 1
        if k >= top_m:
            break
        for j in range(n):
            if not alive[j]:
                continue
            iw = min(x2[i], x2[j]) - max(x1[i], x1[j])
            ih = min(y2[i], y2[j]) - max(y1[i], y1[j])
            inter = max(iw, 0.0) * max(ih, 0.0)
            union = area[i] + area[j] - inter
            ov = inter / union if union > 0 else 0.0
            if ov > iou_threshold:
                alive[j] = False
    return kept[:k]


def box_nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float, top_m: int) -> np.ndarray:
    """Greedy box NMS; returns kept indices (stable order on equal scores)."""
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return _nms_kernel(boxes, order, float(iou_threshold), int(top_m)).astype(int)


def generate_motion_boxes(edge_map: np.ndarray, params: MotionBoxParams | None = None
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Score every grid window of one frame and keep the NMS'd top ``top_m``.

    Returns ``(boxes, scores)`` with boxes as (M, 4) x, y, w, h.
    """
    params = params or MotionBoxParams()
    H, W = edge_map.shape
    boxes = _cached_grid(H, W, tuple(params.scales), tuple(params.aspects), params.stride)
    thr = params.threshold if params.threshold is not None else motion_threshold(edge_map)
    contours = extract_contours(edge_map, thr) if np.isfinite(thr) else []
    scores = score_boxes(boxes, contours, params.kappa)
    keep = box_nms(boxes, scores, params.nms_iou, params.top_m)
    return boxes[keep], scores[keep]


def patch_motion_score(box: BoundingBox, candidates: tuple[np.ndarray, np.ndarray]) -> float:
    """Score of the candidate box with the highest IoU to ``box`` (0 if none overlap)."""
    boxes, scores = candidates
    if len(boxes) == 0:
        return 0.0
    ious = iou_xywh(np.array(box.as_tuple()), np.asarray(boxes))
    k = int(np.argmax(ious))
    if ious[k] <= 0:
        return 0.0
    return float(scores[k])


def box_region(box: BoundingBox | Sequence[float], height: int, width: int) -> tuple[slice, slice]:
    """Pixel rows/cols whose centres fall inside the box, clipped to the frame."""
    x, y, w, h = box.as_tuple() if isinstance(box, BoundingBox) else box
    c0 = max(0, int(np.ceil(x - 0.5)))
    c1 = min(width, int(np.floor(x + w - 0.5)) + 1)
    r0 = max(0, int(np.ceil(y - 0.5)))
    r1 = min(height, int(np.floor(y + h - 0.5)) + 1)
    return slice(r0, max(r0, r1)), slice(c0, max(c0, c1))


def flow_derivative_score(tube: Tube, flow: FlowField, edges: np.ndarray | None = None) -> float:
    """Mean motion-edge magnitude inside the tube's boxes, averaged over frames.

    ``edges`` may hold precomputed (T, H, W) motion edges for the video.
    """
    T, H, W = flow.shape
    if tube.start < 0 or tube.end > T:
        raise ValueError(f"flow has {T} frames, tube spans [{tube.start}, {tube.end})")
    vals = []
    for b in tube.boxes:
        em = edges[b.frame] if edges is not None else motion_edges(flow.u[b.frame], flow.v[b.frame])
        rs, cs = box_region(b, H, W)
        patch = em[rs, cs]
        vals.append(float(patch.mean()) if patch.size else 0.0)
    return float(np.mean(vals))


def video_motion_edges(flow: FlowField) -> np.ndarray:
    return np.stack([motion_edges(flow.u[t], flow.v[t]) for t in range(len(flow))])
