"""Seeded synthetic scenes: a textured rectangle moving over a textured
background, its optical flow, ground truth, proposals and actionness.

Every artifact draws from its own stream, spawned from the scene seed with
``numpy.random.SeedSequence`` and driven by PCG64, so adding or changing one
artifact never perturbs another:

====  ==============================
idx   stream
====  ==============================
0     background texture
1     object texture
2     flow noise and clutter
3     jittered ground-truth copies
4     fragment-corrupted proposals
5     distractor tubes
6     actionness noise
7     proposal id permutation
====  ==============================
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.ndimage import gaussian_filter

from . import formats
from .geometry import Tube, iou_xywh
from .motion import FlowField, box_region

N_STREAMS = 8
MANIFEST = "MANIFEST.sha256"


class SpecError(ValueError):
    """Invalid scene description; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic video.

    Parameters
    ----------
    seed : int
        Root seed of all random streams.
    T, H, W : int
        Frame count and resolution.
    gt_box : (x, y, w, h)
        Ground-truth box in frame 0.
    velocity : (vx, vy)
        Per-frame displacement of the box (pixels/frame).
    cut_frame, velocity_after : optional
        From ``cut_frame`` on, the box moves with ``velocity_after``;
        this plants a change of motion regime (a second shot).
    jitter : float
        Standard deviation (pixels) of per-frame noise added to x, y, w, h of
        every GT copy and corrupted proposal.
    num_jittered : int
        Number of jittered GT copies.
    corruptions : tuple of tuples
        One proposal per entry; the entry lists the segments in which the
        proposal follows the GT, in every other segment it sits at a random
        location with zero IoU.
    distractors : int
        Uniform random tubes spanning the video.
    clutter : float
        Per-pixel probability of a random flow spike.
    flow_noise, actionness_noise : float
        Gaussian noise levels.
    segments : int
        Temporal segment count used by the corruption recipe.
    """

    seed: int = 0
    T: int = 40
    H: int = 96
    W: int = 128
    gt_box: tuple[float, float, float, float] = (20.0, 30.0, 24.0, 32.0)
    velocity: tuple[float, float] = (1.5, 0.5)
    cut_frame: int | None = None
    velocity_after: tuple[float, float] | None = None
    jitter: float = 2.0
    num_jittered: int = 5
    corruptions: tuple[tuple[int, ...], ...] = ()
    distractors: int = 10
    clutter: float = 0.0
    flow_noise: float = 0.05
    actionness_noise: float = 0.1
    segments: int = 5
    video_id: str = "scene"

    def __post_init__(self):
        def need(ok, name, msg):
            if not ok:
                raise SpecError(name, msg)

        need(self.seed >= 0, "seed", "must be non-negative")
        need(self.segments >= 1, "segments", "must be at least 1")
        need(self.T >= self.segments, "T", f"must be at least segments={self.segments}")
        need(self.H >= 3 and self.W >= 3, "H" if self.H < 3 else "W", "frames must be at least 3x3")
        need(len(self.gt_box) == 4, "gt_box", "needs 4 values x, y, w, h")
        need(self.gt_box[2] >= 1 and self.gt_box[3] >= 1, "gt_box", "width and height must be >= 1")
        need(len(self.velocity) == 2, "velocity", "needs 2 values vx, vy")
        if self.cut_frame is not None:
            need(1 <= self.cut_frame < self.T, "cut_frame", f"must lie in [1, {self.T - 1}]")
            need(self.velocity_after is not None and len(self.velocity_after) == 2, "velocity_after",
                 "needs 2 values when cut_frame is set")
        need(self.jitter >= 0, "jitter", "must be non-negative")
        need(self.num_jittered >= 0, "num_jittered", "must be non-negative")
        need(self.distractors >= 0, "distractors", "must be non-negative")
        need(0 <= self.clutter <= 1, "clutter", "must lie in [0, 1]")
        need(self.flow_noise >= 0, "flow_noise", "must be non-negative")
        need(self.actionness_noise >= 0, "actionness_noise", "must be non-negative")
        for segs in self.corruptions:
            need(len(segs) > 0, "corruptions", "every entry needs at least one segment")
            need(all(0 <= s < self.segments for s in segs), "corruptions",
                 f"segment indices must lie in [0, {self.segments})")
        need(self.num_jittered + len(self.corruptions) + self.distractors >= 1, "num_jittered",
             "the scene needs at least one proposal")
        need(bool(self.video_id) and "," not in self.video_id, "video_id", "must be non-empty without commas")
        gt = self.gt_track()
        x, y, w, h = gt[:, 0], gt[:, 1], gt[:, 2], gt[:, 3]
        inside = (x >= 0) & (y >= 0) & (x + w <= self.W) & (y + h <= self.H)
        if not inside.all():
            t = int(np.flatnonzero(~inside)[0])
            raise SpecError("gt_box", f"ground-truth box leaves the frame at frame {t}")

    def gt_track(self) -> np.ndarray:
        """(T, 4) ground-truth boxes before rounding."""
        v = self.velocities()
        # v[t] is the step from frame t-1 into frame t
        offset = np.vstack([np.zeros(2), np.cumsum(v[1:], axis=0)])
        track = np.tile(np.asarray(self.gt_box, float), (self.T, 1))
        track[:, :2] += offset
        return track

    def velocities(self) -> np.ndarray:
        """(T, 2) per-frame velocity; frames from ``cut_frame`` on use ``velocity_after``."""
        v = np.tile(np.asarray(self.velocity, float), (self.T, 1))
        if self.cut_frame is not None:
            v[self.cut_frame:] = self.velocity_after
        return v

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SceneSpec":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in fields:
                raise SpecError(key, "unknown field")
            kwargs[key] = _coerce(key, fields[key].type, value)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "SceneSpec":
        return dataclasses.replace(self, **changes)


def _coerce(key, type_name, value):
    try:
        if type_name == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if type_name == "int | None":
            return None if value is None else _coerce(key, "int", value)
        if type_name == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if type_name == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if type_name.endswith("| None") and value is None:
            return None
        if type_name.startswith("tuple[tuple"):
            return tuple(tuple(_coerce(key, "int", s) for s in segs) for segs in value)
        if type_name.startswith("tuple[float"):
            return tuple(_coerce(key, "float", v) for v in value)
    except (TypeError, ValueError):
        raise SpecError(key, f"cannot interpret {value!r} as {type_name}") from None
    raise SpecError(key, f"unsupported type {type_name}")


def load_spec(path) -> SceneSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise formats.FormatError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise formats.FormatError(f"{path}: expected a JSON object")
    return SceneSpec.from_dict(data)


def standard_spec(seed: int, **changes) -> SceneSpec:
    """Jittered GT copies (2 px), 10 distractors, actionness noise 0.1."""
    return SceneSpec(seed=seed, **changes)


def corruption_spec(seed: int, **changes) -> SceneSpec:
    """Proposal A follows the GT in segments 0-2, proposal B in 3-4; no intact copy."""
    base = dict(seed=seed, jitter=1.0, num_jittered=0, corruptions=((0, 1, 2), (3, 4)))
    base.update(changes)
    return SceneSpec(**base)


@dataclass
class Scene:
    spec: SceneSpec
    frames: np.ndarray          # (T, H, W) uint8
    flow: FlowField
    gt: Tube
    proposals: list[Tube]       # sorted by proposal_id
    actionness: dict[tuple[int, int], float]
    roles: dict[int, str] = field(default_factory=dict)  # id -> jittered / corrupted / distractor


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(N_STREAMS)]


def segment_ranges(T: int, F: int) -> list[tuple[int, int]]:
    """Front-loaded equal split of T frames, matching the sub-proposal split."""
    base, extra = divmod(T, F)
    out, start = [], 0
    for f in range(F):
        n = base + (1 if f < extra else 0)
        out.append((start, start + n))
        start += n
    return out


def _clip_boxes(b: np.ndarray, H: int, W: int) -> np.ndarray:
    b = b.copy()
    b[:, 2] = np.clip(b[:, 2], 1.0, W)
    b[:, 3] = np.clip(b[:, 3], 1.0, H)
    b[:, 0] = np.clip(b[:, 0], 0.0, W - b[:, 2])
    b[:, 1] = np.clip(b[:, 1], 0.0, H - b[:, 3])
    return np.round(b, 2)


def _jittered(gt: np.ndarray, sigma: float, rng, H, W) -> np.ndarray:
    return _clip_boxes(gt + rng.normal(0.0, sigma, gt.shape) if sigma > 0 else gt, H, W)


def _displaced(gt: np.ndarray, rng, H, W, tries: int = 1000) -> np.ndarray:
    """A static box of the GT size with zero IoU against every GT box of the span."""
    w, h = gt[0, 2], gt[0, 3]
    for _ in range(tries):
        cand = np.array([rng.uniform(0, W - w), rng.uniform(0, H - h), w, h])
        cand = _clip_boxes(cand[None], H, W)[0]
        if np.all(iou_xywh(cand[None], gt) == 0):
            return np.tile(cand, (len(gt), 1))
    raise SpecError("gt_box", "no room to displace a corrupted proposal away from the ground truth")


def _distractor(T, H, W, rng) -> np.ndarray:
    w, h = rng.uniform(0.1, 0.4) * W, rng.uniform(0.1, 0.4) * H
    x, y = rng.uniform(0, W - w), rng.uniform(0, H - h)
    vx, vy = rng.uniform(-1, 1, 2)
    t = np.arange(T)
    # bounce off the frame borders
    xs = np.abs((x + vx * t) % (2 * (W - w)))
    ys = np.abs((y + vy * t) % (2 * (H - h)))
    xs = np.where(xs > W - w, 2 * (W - w) - xs, xs)
    ys = np.where(ys > H - h, 2 * (H - h) - ys, ys)
    return _clip_boxes(np.column_stack([xs, ys, np.full(T, w), np.full(T, h)]), H, W)


def _texture(rng, H, W, lo, hi, smooth) -> np.ndarray:
    tex = gaussian_filter(rng.random((H, W)), smooth)
    tex = (tex - tex.min()) / max(tex.max() - tex.min(), 1e-12)
    return lo + (hi - lo) * tex


def gen_scene(spec: SceneSpec) -> Scene:
    """Render all artifacts of one scene; identical specs give bit-identical output."""
    T, H, W = spec.T, spec.H, spec.W
    rng = _streams(spec.seed)
    gt_xywh = np.round(spec.gt_track(), 2)

    background = _texture(rng[0], H, W, 30.0, 120.0, 2.0)
    obj = _texture(rng[1], H, W, 140.0, 250.0, 1.0)
    frames = np.empty((T, H, W), dtype=np.uint8)
    u = np.zeros((T, H, W), dtype=np.float32)
    v = np.zeros((T, H, W), dtype=np.float32)
    vel = spec.velocities()
    spike = max(1.0, float(np.abs(vel).max()))
    for t in range(T):
        img = background.copy()
        rs, cs = box_region(gt_xywh[t], H, W)
        img[rs, cs] = obj[: rs.stop - rs.start, : cs.stop - cs.start]
        frames[t] = np.clip(np.round(img), 0, 255).astype(np.uint8)
        ut = np.zeros((H, W))
        vt = np.zeros((H, W))
        ut[rs, cs], vt[rs, cs] = vel[t]
        if spec.flow_noise > 0:
            ut += rng[2].normal(0.0, spec.flow_noise, (H, W))
            vt += rng[2].normal(0.0, spec.flow_noise, (H, W))
        if spec.clutter > 0:
            mask = rng[2].random((H, W)) < spec.clutter
            ut[mask] += rng[2].uniform(-spike, spike, int(mask.sum()))
            vt[mask] += rng[2].uniform(-spike, spike, int(mask.sum()))
        u[t], v[t] = ut, vt

    tracks, roles = [], []
    for _ in range(spec.num_jittered):
        tracks.append(_jittered(gt_xywh, spec.jitter, rng[3], H, W))
        roles.append("jittered")
    segs = segment_ranges(T, spec.segments)
    for correct in spec.corruptions:
        track = _jittered(gt_xywh, spec.jitter, rng[4], H, W)
        for f, (a, b) in enumerate(segs):
            if f not in correct:
                track[a:b] = _displaced(gt_xywh[a:b], rng[4], H, W)
        tracks.append(track)
        roles.append("corrupted")
    for _ in range(spec.distractors):
        tracks.append(_distractor(T, H, W, rng[5]))
        roles.append("distractor")

    ids = rng[7].permutation(len(tracks))
    proposals, actionness, role_of = [], {}, {}
    for k, track in enumerate(tracks):
        pid = int(ids[k])
        proposals.append(Tube.from_array(spec.video_id, pid, 0, track))
        role_of[pid] = roles[k]
    proposals.sort(key=lambda t: t.proposal_id)
    for tube in proposals:
        track = tube.as_array()
        score = iou_xywh(track, gt_xywh)
        if spec.actionness_noise > 0:
            score = score + rng[6].normal(0.0, spec.actionness_noise, T)
        for t, s in enumerate(np.clip(score, 0.0, 1.0)):
            actionness[(tube.proposal_id, t)] = float(s)
    gt = Tube.from_array(spec.video_id, 0, 0, gt_xywh)
    return Scene(spec, frames, FlowField(u, v), gt, proposals, actionness, role_of)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_scene(scene: Scene, out_dir) -> Path:
    """Write the scene under ``out_dir`` and a ``sha256sum``-style manifest.

    Layout: ``frames/frame_NNNNNN.pgm``, ``flow.tflw``, ``proposals.csv``,
    ``actionness.csv``, ``gt.csv``, ``scene.json`` and ``MANIFEST.sha256``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vid = scene.spec.video_id
    formats.write_frames(out / "frames", scene.frames)
    formats.write_flow(out / "flow.tflw", scene.flow)
    formats.write_proposals(out / "proposals.csv", scene.proposals)
    formats.write_actionness(out / "actionness.csv", vid, scene.actionness)
    formats.write_proposals(out / "gt.csv", [scene.gt])
    formats.atomic_write(out / "scene.json", json.dumps(scene.spec.to_dict(), indent=2, sort_keys=True) + "\n")
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != MANIFEST)
    lines = [f"{_sha256(p)}  {p.relative_to(out).as_posix()}\n" for p in files]
    formats.atomic_write(out / MANIFEST, "".join(lines))
    return out


def verify_manifest(out_dir) -> list[str]:
    """Relative paths whose checksum does not match the manifest (empty when intact)."""
    out = Path(out_dir)
    bad = []
    for line in (out / MANIFEST).read_text(encoding="utf-8").splitlines():
        digest, rel = line.split("  ", 1)
        p = out / rel
        if not p.is_file() or _sha256(p) != digest:
            bad.append(rel)
    return bad
