"""Command-line driver: ``tuberank {rank,segment,filter-features,eval,synth}``.

Exit status is 0 on success, 1 for unreadable or invalid input and 2 when
the shot segmentation solver fails to converge. Log verbosity comes from
``TUBERANK_LOG`` (error, warn, info or debug; default warn).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import formats
from .changepoint import ConvergenceError, segment_frames, shots_to_ranges
from .config import ConfigError, load_config
from .metrics import evaluate
from .pipeline import VideoInput, rank_video, split_by_video
from .randomwalk import filter_outliers
from .synth import SpecError, gen_scene, load_spec, write_scene

log = logging.getLogger("tuberank")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
VIDEO_PLACEHOLDER = "{video}"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setup_logging():
    name = os.environ.get("TUBERANK_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.warning("ignoring TUBERANK_LOG=%r; expected one of %s", name, ", ".join(LOG_LEVELS))


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    return out


def _video_path(template: str, video_id: str, n_videos: int) -> Path:
    if VIDEO_PLACEHOLDER in template:
        return Path(template.replace(VIDEO_PLACEHOLDER, video_id))
    if n_videos > 1:
        raise UsageError(f"{n_videos} videos in the proposals file; put {VIDEO_PLACEHOLDER} in {template!r}")
    return Path(template)


def _load_video(video_id, tubes, flow_t, frames_t, actionness, n) -> VideoInput:
    flow = formats.load_flow(_video_path(flow_t, video_id, n))
    frames = formats.load_frames(_video_path(frames_t, video_id, n))
    return VideoInput(video_id, tubes, flow, frames, actionness)


def _rank_one(job):
    video_id, tubes, flow_t, frames_t, actionness, n, cfg, untrimmed = job
    video = _load_video(video_id, tubes, flow_t, frames_t, actionness, n)
    return rank_video(video, cfg, untrimmed)


def _map(fn, jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def cmd_rank(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    by_video = split_by_video(formats.load_proposals(args.proposals))
    scores = formats.load_actionness_all(args.actionness)
    n = len(by_video)
    jobs = [(vid, by_video[vid], args.flow, args.frames, scores.get(vid, {}), n, cfg, args.untrimmed)
            for vid in sorted(by_video)]
    results = _map(_rank_one, jobs, args.jobs)
    ranked = [p for r in results for p in r]
    formats.write_ranked(args.out, ranked)
    log.info("wrote %d ranked proposals for %d video(s) to %s", len(ranked), n, args.out)
    return 0


def _segment_one(job):
    video_id, tubes, frames_t, n, cfg = job
    frames = formats.load_frames(_video_path(frames_t, video_id, n))
    sol = segment_frames(tubes, frames, cfg.seg_grid, cfg.seg_weighting, cfg.seg_tol, cfg.seg_max_iter)
    return video_id, shots_to_ranges(sol, len(frames))


def cmd_segment(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    by_video = split_by_video(formats.load_proposals(args.proposals))
    n = len(by_video)
    if n == 0:
        raise UsageError(f"{args.proposals}: no proposals")
    jobs = [(vid, by_video[vid], args.frames, n, cfg) for vid in sorted(by_video)]
    shots = dict(_map(_segment_one, jobs, args.jobs))
    formats.write_shots(args.out, shots)
    return 0


def cmd_filter(args) -> int:
    overrides = _overrides(args.set)
    if args.keep is not None:
        overrides["walk_keep"] = args.keep
    cfg = load_config(args.config, overrides)
    ids, psi = formats.load_features(args.features)
    res = filter_outliers(ids, psi, cfg.walk_params)
    formats.write_filter_result(args.out, ids, res.scores, res.kept)
    log.info("kept %d of %d items", len(res.kept), len(ids))
    return 0


def cmd_eval(args) -> int:
    ranked = formats.load_ranked(args.ranked)
    gt, labels = formats.load_ground_truth(args.gt)
    r_ids = {p.video_id for p in ranked}
    g_ids = {g.video_id for g in gt}
    if r_ids != g_ids:
        only_r, only_g = sorted(r_ids - g_ids), sorted(g_ids - r_ids)
        raise UsageError(
            "video ids differ between ranked output and ground truth"
            + (f"; only ranked: {', '.join(only_r)}" if only_r else "")
            + (f"; only ground truth: {', '.join(only_g)}" if only_g else ""))
    report = evaluate(ranked, gt, labels or None, mabo_k=args.mabo_k,
                      recall_threshold=args.recall_threshold, K_max=args.k_max)
    formats.write_metrics(args.out, report.rows())
    return 0


def cmd_synth(args) -> int:
    spec = load_spec(args.spec)
    write_scene(gen_scene(spec), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tuberank", description="Rank and recombine spatio-temporal action proposals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_flags(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")

    r = sub.add_parser("rank", help="rank recombined proposals per video")
    r.add_argument("--proposals", required=True)
    r.add_argument("--flow", required=True, help=f"TFLW file; may contain {VIDEO_PLACEHOLDER}")
    r.add_argument("--frames", required=True, help=f"PGM frame directory; may contain {VIDEO_PLACEHOLDER}")
    r.add_argument("--actionness", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--untrimmed", action="store_true", help="split into shots first and rank per shot")
    r.add_argument("--jobs", type=int, default=1, help="videos processed in parallel")
    config_flags(r)
    r.set_defaults(func=cmd_rank)

    s = sub.add_parser("segment", help="detect shot boundaries")
    s.add_argument("--proposals", required=True)
    s.add_argument("--frames", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    config_flags(s)
    s.set_defaults(func=cmd_segment)

    f = sub.add_parser("filter-features", help="random-walk outlier filtering of feature vectors")
    f.add_argument("--features", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--keep", help="fraction of items to keep")
    config_flags(f)
    f.set_defaults(func=cmd_filter)

    e = sub.add_parser("eval", help="localisation metrics of ranked proposals")
    e.add_argument("--ranked", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--mabo-k", type=int, default=None, help="proposals per video counted by MABO (default all)")
    e.add_argument("--recall-threshold", type=float, default=0.5)
    e.add_argument("--k-max", type=int, default=None, help="length of the recall curve")
    e.set_defaults(func=cmd_eval)

    y = sub.add_parser("synth", help="generate a synthetic scene")
    y.add_argument("--spec", required=True, help="JSON scene description")
    y.add_argument("--out", required=True)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("tuberank: error: --jobs must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"tuberank: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except (formats.FormatError, ConfigError, SpecError, UsageError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"tuberank: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
