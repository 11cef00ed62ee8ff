"""On-disk formats: CSV tables, PGM frames, binary flow and ranked JSON lines.

Readers reject malformed input instead of repairing it; error messages carry
the file and the line (or byte offset) at fault.
"""
from __future__ import annotations

import csv
import io
import json
import os
import re
import struct
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import BoundingBox, Tube
from .motion import FlowField
from .trellis import RankedProposal

PROPOSAL_HEADER = ["video_id", "proposal_id", "frame", "x", "y", "w", "h"]
ACTIONNESS_HEADER = ["video_id", "proposal_id", "frame", "score"]
SHOTS_HEADER = ["video_id", "shot", "start", "end"]
FLOW_MAGIC = b"TFLW"
FRAME_PATTERN = re.compile(r"^frame_(\d{6})\.pgm$")


class FormatError(ValueError):
    pass


def fmt_float(v: float) -> str:
    """Shortest text that reads back as the same double."""
    return repr(float(v))


def fmt_sig(v: float, digits: int = 9) -> str:
    return format(float(v), f".{digits}g")


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(path, header: Sequence[str], optional: Sequence[str] = ()):
    """Yield (line_number, row dict); the header must match exactly (plus optional columns)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected header {','.join(header)}") from None
        allowed = [list(header) + list(optional[:k]) for k in range(len(optional) + 1)]
        if got not in allowed:
            raise FormatError(f"{path}:1: header {','.join(got)!r}, expected {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(got):
                raise FormatError(f"{path}:{lineno}: expected {len(got)} fields, got {len(row)}")
            yield lineno, dict(zip(got, row))


def _num(path, lineno, row, key, kind=float):
    try:
        v = kind(row[key])
    except ValueError:
        raise FormatError(f"{path}:{lineno}: bad {key} value {row[key]!r}") from None
    if kind is float and not np.isfinite(v):
        raise FormatError(f"{path}:{lineno}: non-finite {key}")
    return v


def _tubes_from_rows(path, rows) -> tuple[list[Tube], dict]:
    groups: dict[tuple[str, int], list] = defaultdict(list)
    extra: dict[tuple[str, int], dict] = {}
    for lineno, row in rows:
        pid = _num(path, lineno, row, "proposal_id", int)
        frame = _num(path, lineno, row, "frame", int)
        x, y, w, h = (_num(path, lineno, row, k) for k in ("x", "y", "w", "h"))
        if frame < 0:
            raise FormatError(f"{path}:{lineno}: negative frame {frame}")
        if w < 0 or h < 0:
            raise FormatError(f"{path}:{lineno}: negative box size ({w}, {h})")
        key = (row["video_id"], pid)
        groups[key].append((frame, lineno, (x, y, w, h)))
        if "label" in row:
            if extra.get(key, row["label"]) != row["label"]:
                raise FormatError(f"{path}:{lineno}: label changes within tube {key}")
            extra[key] = row["label"]
    tubes = []
    for key in sorted(groups):
        items = sorted(groups[key])
        for (f0, _, _), (f1, line1, _) in zip(items, items[1:]):
            if f1 != f0 + 1:
                what = "duplicate" if f1 == f0 else "non-contiguous"
                raise FormatError(
                    f"{path}:{line1}: {what} frame {f1} after {f0} in proposal {key[0]}/{key[1]}")
        boxes = [BoundingBox(f, *xywh) for f, _, xywh in items]
        tubes.append(Tube(key[0], key[1], boxes))
    return tubes, extra


def load_proposals(path) -> list[Tube]:
    """Tubes from a ``video_id,proposal_id,frame,x,y,w,h`` CSV, sorted by (video, id)."""
    tubes, _ = _tubes_from_rows(path, _read_csv(path, PROPOSAL_HEADER))
    return tubes


def load_ground_truth(path) -> tuple[list[Tube], dict[tuple[str, int], str]]:
    """Ground-truth tubes; an optional trailing ``label`` column gives the action class."""
    return _tubes_from_rows(path, _read_csv(path, PROPOSAL_HEADER, optional=("label",)))


def proposals_text(tubes: Sequence[Tube], labels: Mapping[tuple[str, int], str] | None = None) -> str:
    header = PROPOSAL_HEADER + (["label"] if labels is not None else [])
    rows = []
    for t in tubes:
        for b in t.boxes:
            row = [t.video_id, t.proposal_id, b.frame, *map(fmt_float, b.as_tuple())]
            if labels is not None:
                row.append(labels[(t.video_id, t.proposal_id)])
            rows.append(row)
    return _csv_text(header, rows)


def write_proposals(path, tubes: Sequence[Tube], labels=None) -> None:
    atomic_write(path, proposals_text(tubes, labels))


def load_actionness_all(path) -> dict[str, dict[tuple[int, int], float]]:
    out: dict[str, dict[tuple[int, int], float]] = defaultdict(dict)
    for lineno, row in _read_csv(path, ACTIONNESS_HEADER):
        pid = _num(path, lineno, row, "proposal_id", int)
        frame = _num(path, lineno, row, "frame", int)
        score = _num(path, lineno, row, "score")
        if not 0 <= score <= 1:
            raise FormatError(f"{path}:{lineno}: score {score} outside [0, 1]")
        table = out[row["video_id"]]
        if (pid, frame) in table:
            raise FormatError(
                f"{path}:{lineno}: duplicate score for video {row['video_id']}, "
                f"proposal {pid}, frame {frame}")
        table[(pid, frame)] = score
    return dict(out)


def load_actionness(path, video_id: str | None = None) -> dict[tuple[int, int], float]:
    """Map (proposal_id, frame) to score for one video.

    Without ``video_id`` the file must describe a single video.
    """
    per_video = load_actionness_all(path)
    if video_id is not None:
        return per_video.get(video_id, {})
    if len(per_video) > 1:
        raise FormatError(f"{path}: holds {len(per_video)} videos; pass video_id")
    return next(iter(per_video.values()), {})


def write_actionness(path, video_id: str, table: Mapping[tuple[int, int], float]) -> None:
    rows = [[video_id, pid, frame, fmt_float(s)] for (pid, frame), s in sorted(table.items())]
    atomic_write(path, _csv_text(ACTIONNESS_HEADER, rows))


def flow_bytes(flow: FlowField) -> bytes:
    T, H, W = flow.shape
    parts = [FLOW_MAGIC, struct.pack("<III", T, H, W)]
    for t in range(T):
        parts.append(flow.u[t].astype("<f4").tobytes())
        parts.append(flow.v[t].astype("<f4").tobytes())
    return b"".join(parts)


def write_flow(path, flow: FlowField) -> None:
    atomic_write(path, flow_bytes(flow))


def parse_flow(data: bytes, source: str = "<bytes>") -> FlowField:
    if len(data) < 16:
        raise FormatError(f"{source}: {len(data)} bytes is too short for a flow header")
    if data[:4] != FLOW_MAGIC:
        raise FormatError(f"{source}: bad magic {data[:4]!r} at byte 0, expected {FLOW_MAGIC!r}")
    T, H, W = struct.unpack_from("<III", data, 4)
    expected = 16 + T * 2 * H * W * 4
    if len(data) != expected:
        raise FormatError(f"{source}: expected {expected} bytes for {T}x{H}x{W} flow, got {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=16).reshape(T, 2, H, W)
    return FlowField(arr[:, 0].astype(np.float32), arr[:, 1].astype(np.float32))


def load_flow(path) -> FlowField:
    return parse_flow(Path(path).read_bytes(), str(path))


def pgm_bytes(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"PGM frames must be 2-D uint8, got {img.dtype} {img.shape}")
    H, W = img.shape
    return f"P5\n{W} {H}\n255\n".encode("ascii") + img.tobytes()


def parse_pgm(data: bytes, source: str = "<bytes>") -> np.ndarray:
    if data[:2] != b"P5":
        raise FormatError(f"{source}: not a binary PGM (magic {data[:2]!r}, expected b'P5')")
    pos, fields = 2, []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"{source}: malformed PGM header at byte {pos}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"{source}: missing whitespace after PGM header at byte {pos}")
    pos += 1
    W, H, maxval = fields
    if maxval != 255:
        raise FormatError(f"{source}: maxval {maxval}, expected 255")
    if len(data) - pos != W * H:
        raise FormatError(f"{source}: expected {W * H} pixel bytes after byte {pos}, got {len(data) - pos}")
    return np.frombuffer(data, dtype=np.uint8, offset=pos).reshape(H, W).copy()


def write_frames(directory, frames: np.ndarray) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, img in enumerate(frames):
        atomic_write(directory / f"frame_{t:06d}.pgm", pgm_bytes(img))


def load_frames(directory) -> np.ndarray:
    """(T, H, W) uint8 frames from ``frame_000000.pgm``, ``frame_000001.pgm``, ..."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: frames directory does not exist")
    found = {}
    for p in directory.iterdir():
        m = FRAME_PATTERN.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise FormatError(f"{directory}: no frame_NNNNNN.pgm files")
    for t in range(max(found) + 1):
        if t not in found:
            raise FormatError(f"{directory}: frame_{t:06d}.pgm is missing (gap in numbering)")
    frames = [parse_pgm(found[t].read_bytes(), str(found[t])) for t in range(len(found))]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise FormatError(f"{directory}: frames have differing sizes {sorted(shapes)}")
    return np.stack(frames)


def ranked_line(p: RankedProposal) -> str:
    if p.tube is None:
        raise ValueError(f"ranked proposal {p.rank} has no tube")
    boxes = [[b.frame, float(b.x), float(b.y), float(b.w), float(b.h)] for b in p.tube.boxes]
    sep = (",", ":")
    return (
        '{"video_id":' + json.dumps(p.video_id)
        + ',"rank":' + str(int(p.rank))
        + ',"energy":' + f"{p.energy:.9f}"
        + ',"path":' + json.dumps([int(i) for i in p.path], separators=sep)
        + ',"boxes":' + json.dumps(boxes, separators=sep)
        + "}"
    )


def ranked_text(proposals: Sequence[RankedProposal]) -> str:
    return "".join(ranked_line(p) + "\n" for p in proposals)


def write_ranked(path, proposals: Sequence[RankedProposal]) -> None:
    atomic_write(path, ranked_text(proposals))


def parse_ranked(text: str, source: str = "<text>") -> list[RankedProposal]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            boxes = [BoundingBox(int(f), float(x), float(y), float(w), float(h))
                     for f, x, y, w, h in obj["boxes"]]
            tube = Tube(obj["video_id"], int(obj["rank"]) - 1, boxes)
            out.append(RankedProposal(int(obj["rank"]), tuple(int(i) for i in obj["path"]),
                                      float(obj["energy"]), obj["video_id"], tube))
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
    return out


def load_ranked(path) -> list[RankedProposal]:
    return parse_ranked(Path(path).read_text(encoding="utf-8"), str(path))


def load_features(path) -> tuple[list[str], np.ndarray]:
    """``id,f0,f1,...`` CSV into (ids, (n, D) array)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id" or len(header) < 2:
            raise FormatError(f"{path}:1: expected header id,f0,f1,...")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric feature value") from None
            if not all(np.isfinite(vals)):
                raise FormatError(f"{path}:{lineno}: non-finite feature value")
            ids.append(row[0])
            rows.append(vals)
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate ids")
    return ids, np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)


def write_features(path, ids: Sequence[str], psi: np.ndarray) -> None:
    psi = np.asarray(psi, dtype=float)
    header = ["id"] + [f"f{k}" for k in range(psi.shape[1])]
    atomic_write(path, _csv_text(header, ([i, *map(fmt_float, row)] for i, row in zip(ids, psi))))


def write_filter_result(path, ids: Sequence[str], scores: np.ndarray, kept: Iterable[str]) -> None:
    kept = set(kept)
    rows = [[i, fmt_sig(s), "kept" if i in kept else "removed"] for i, s in zip(ids, scores)]
    atomic_write(path, _csv_text(["id", "score", "status"], rows))


def write_metrics(path, rows: Iterable[tuple[str, str, str, float]]) -> None:
    """``metric,threshold,k,value`` CSV; values at 9 significant digits."""
    atomic_write(path, _csv_text(["metric", "threshold", "k", "value"],
                                 ([m, t, k, fmt_sig(v)] for m, t, k, v in rows)))


def write_shots(path, shots: Mapping[str, Sequence[tuple[int, int]]]) -> None:
    rows = [[vid, k, a, b] for vid in sorted(shots) for k, (a, b) in enumerate(shots[vid])]
    atomic_write(path, _csv_text(SHOTS_HEADER, rows))


def load_shots(path) -> dict[str, list[tuple[int, int]]]:
    out: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for lineno, row in _read_csv(path, SHOTS_HEADER):
        out[row["video_id"]].append((_num(path, lineno, row, "start", int),
                                     _num(path, lineno, row, "end", int)))
    return dict(out)
