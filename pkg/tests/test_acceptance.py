"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines go straight to the terminal) or as a script with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.distance import cdist

sys.path.insert(0, str(Path(__file__).parent))
from conftest import cluster_with_outliers, make_tube  # noqa: E402

from tuberank import formats  # noqa: E402
from tuberank.changepoint import (auto_segment, lambda_grid, segment_means, tv_objective,  # noqa: E402
                                  tv_segment)
from tuberank.cli import main  # noqa: E402
from tuberank.config import RunConfig  # noqa: E402
from tuberank.geometry import tube_overlap  # noqa: E402
from tuberank.motion import (MotionBoxParams, extract_contours, grid_boxes, motion_edges,  # noqa: E402
                             motion_threshold, score_boxes)
from tuberank.oracles import oracle_best_path, oracle_segmentation, oracle_walk_stationary  # noqa: E402
from tuberank.pipeline import VideoInput, rank_video  # noqa: E402
from tuberank.randomwalk import filter_outliers, median_alpha, random_walk, transition_matrix  # noqa: E402
from tuberank.synth import corruption_spec, gen_scene, standard_spec  # noqa: E402
from tuberank.trellis import RankedProposal, Trellis, best_path, rank_proposals  # noqa: E402

_capture = None


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _capture
    _capture = capsys
    yield
    _capture = None


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] AC{n:<2} {title}: {detail}"
    if _capture is not None:
        with _capture.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def video_of(scene) -> VideoInput:
    return VideoInput(scene.spec.video_id, scene.proposals, scene.flow, scene.frames, scene.actionness)


def reference_energy(t: Trellis, idx) -> float:
    """Node scores plus lambda times edge scores, summed left to right."""
    e = sum(t.node_scores[f, i] for f, i in enumerate(idx))
    return e + t.lambda_edge * sum(t.edge_scores[f, idx[f], idx[f + 1]] for f in range(t.F - 1))


def random_trellises(count: int = 200, quantized: bool = False):
    """``count`` trellises with N <= 6, F <= 5 and scores uniform in [0, 1].

    ``quantized`` rounds scores to {0, 0.5, 1} so that equal-energy paths
    (tie cases) are common and their sums exact.
    """
    rng = np.random.default_rng(2024 + quantized)
    for _ in range(count):
        N, F = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        node, edge = rng.random((F, N)), rng.random((F - 1, N, N))
        if quantized:
            node, edge = np.round(node * 2) / 2, np.round(edge * 2) / 2
        ids = np.sort(rng.choice(1000, N, replace=False))
        yield Trellis(node, edge, ids, float(rng.choice([0.5, 1.0, 2.0])))


def n_optimal(t: Trellis, energy: float) -> int:
    return sum(reference_energy(t, idx) == energy for idx in itertools.product(range(t.N), repeat=t.F))


def test_ac01_dp_exactness():
    bad, ties, dp_time, total = 0, 0, 0.0, 0
    for quantized in (False, True):
        for t in random_trellises(200, quantized):
            start = time.perf_counter()
            path, e = best_path(t)
            dp_time += time.perf_counter() - start
            o_path, o_e = oracle_best_path(t)
            total += 1
            if path != o_path or abs(e - o_e) > 1e-9:
                bad += 1
            if quantized and n_optimal(t, o_e) > 1:
                ties += 1
    report(1, "DP exactness", bad == 0 and dp_time < 5.0,
           f"{total - bad}/{total} trellises match the enumeration oracle "
           f"(200 uniform + 200 quantized, {ties} with tied optima); DP time {dp_time:.3f} s (< 5 s)")


def test_ac02_top_k_extraction():
    bad_disjoint = bad_energy = total = 0
    worst = 0.0
    for t in random_trellises(200):
        ranked = rank_proposals(t, t.N)
        total += 1
        for f in range(t.F):
            col = [p.path[f] for p in ranked]
            bad_disjoint += len(set(col)) != len(col)
        for p in ranked:
            err = abs(p.energy - reference_energy(t, [t.index_of(i) for i in p.path]))
            worst = max(worst, err)
            bad_energy += err > 1e-9
    report(2, "Top-K extraction", bad_disjoint == 0 and bad_energy == 0,
           f"{total} trellises with K = N: {bad_disjoint} node-sharing layers, "
           f"max energy error {worst:.2e} (<= 1e-9)")


def test_ac03_recombination_superiority():
    wins = 0
    for seed in range(50):
        scene = gen_scene(corruption_spec(seed))
        top = rank_video(video_of(scene), RunConfig(K=1))[0]
        best_input = max(tube_overlap(t, scene.gt) for t in scene.proposals)
        wins += tube_overlap(top.tube, scene.gt) > best_input
    report(3, "Recombination superiority", wins >= 48,
           f"rank-1 beats every input proposal in {wins}/50 corruption scenes (>= 48)")


def test_ac04_end_to_end_localization():
    overlaps = []
    for seed in range(100):
        scene = gen_scene(standard_spec(seed))
        top = rank_video(video_of(scene), RunConfig(K=1))[0]
        overlaps.append(tube_overlap(top.tube, scene.gt))
    hits = int(np.sum(np.array(overlaps) >= 0.5))
    report(4, "End-to-end localization", hits >= 90,
           f"top-1 overlap >= 0.5 in {hits}/100 standard scenes (>= 90); median overlap {np.median(overlaps):.3f}")


def three_levels(noise_seed=None, sigma=0.1):
    Z = np.repeat([0.0, 0.5, 1.0], 60)[:, None]
    if noise_seed is not None:
        Z = Z + sigma * np.random.default_rng(noise_seed).normal(size=Z.shape)
    return Z


def noiseless_fixtures():
    """(Z, planted boundaries) pairs."""
    yield three_levels(), [60, 120]
    yield np.repeat([[0.0, 0.0], [3.0, 1.0]], [17, 23], axis=0), [17]
    yield np.repeat([[1.0, 0.0, 2.0], [0.0, 0.0, 0.0], [2.0, 1.0, 0.0], [2.0, 3.0, 1.0]],
                    [25, 40, 10, 45], axis=0), [25, 65, 75]
    yield np.repeat([[0.0], [5.0], [-2.0], [1.0]], [30, 30, 30, 30], axis=0), [30, 60, 90]
    yield np.full((50, 2), 4.0), []


def test_ac05_changepoint_correctness():
    exact = all(list(auto_segment(Z).boundaries) == planted for Z, planted in noiseless_fixtures())
    within = 0
    for seed in range(50):
        Z = three_levels(seed)
        b = np.array(auto_segment(Z).boundaries)
        ref = np.array(oracle_segmentation(Z, 3))
        within += len(b) == len(ref) and bool(np.all(np.abs(b - ref) <= 2))
    report(5, "Change-point correctness", exact and within >= 48,
           f"noiseless fixtures exact: {exact}; noisy (sigma 0.1, jump 0.5) within +-2 frames of the "
           f"oracle in {within}/50 seeds (>= 95%)")


def test_ac06_tv_optimality():
    worst_auto, worst_grid, monotone = 0.0, 0.0, True
    for Z, planted in noiseless_fixtures():
        ref_X = segment_means(Z, oracle_segmentation(Z, len(planted) + 1))
        sol = auto_segment(Z)
        ref = tv_objective(Z, ref_X, sol.lam)
        worst_auto = max(worst_auto, abs(tv_objective(Z, sol.X, sol.lam) - ref) / max(abs(ref), 1e-12))
        counts = []
        for lam in lambda_grid(Z):
            fit = tv_segment(Z, lam)
            ref = tv_objective(Z, ref_X, lam)
            worst_grid = max(worst_grid, (tv_objective(Z, fit.X, lam) - ref) / max(abs(ref), 1e-12))
            counts.append(len(fit.boundaries))
        monotone &= all(a <= b for a, b in zip(counts, counts[1:]))  # grid runs from large to small lam
    ok = worst_auto <= 1e-6 and worst_grid <= 1e-6 and monotone
    report(6, "TV solver optimality", ok,
           f"relative gap of the selected X {worst_auto:.2e}, worst excess of a grid solution over the "
           f"oracle-restricted point {max(worst_grid, 0.0):.2e} (<= 1e-6); boundary count monotone in lam: {monotone}")


def test_ac07_random_walk():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        n, D = int(rng.integers(5, 60)), int(rng.integers(1, 10))
        psi = rng.normal(size=(n, D)) * rng.uniform(0.1, 5)
        for include_self in (False, True):
            P = transition_matrix(psi, median_alpha(psi), include_self)
            z = np.full(n, 1.0 / n)
            s = random_walk(P, z, 0.85, 200)
            worst = max(worst, float(np.max(np.abs(s - oracle_walk_stationary(P, z, 0.85)))))
    planted, separation = 0, np.inf
    for seed in range(20):
        ids, psi = cluster_with_outliers(seed)
        is_out = np.array([i.startswith("out") for i in ids])
        diam = cdist(psi[~is_out], psi[~is_out]).max()
        separation = min(separation, cdist(psi[is_out], psi[~is_out]).min() / diam)
        res = filter_outliers(ids, psi)
        lowest = {ids[i] for i in np.argsort(res.scores, kind="stable")[:10]}
        planted += lowest == {i for i, o in zip(ids, is_out) if o}
    report(7, "Random-walk correctness", worst <= 1e-6 and planted == 20 and separation >= 10,
           f"max deviation from the linear solve {worst:.2e} (<= 1e-6) on 20 feature sets; "
           f"planted outliers are the 10 lowest scores in {planted}/20 seeds "
           f"(outlier separation >= {separation:.1f} cluster diameters)")


def test_ac08_motion_score_ordering():
    params = MotionBoxParams()
    H, W = 72, 96
    grid = grid_boxes(H, W, params.scales, params.aspects, params.stride)
    rng = np.random.default_rng(8)
    good = frames = 0
    margins = []
    while frames < 20:
        w, h = int(rng.integers(8, 30)), int(rng.integers(8, 30))
        x, y = int(rng.integers(2, W - w - 2)), int(rng.integers(2, H - h - 2))
        vx, vy = rng.uniform(-3, 3, size=2)
        u, v = np.zeros((H, W)), np.zeros((H, W))
        u[y:y + h, x:x + w], v[y:y + h, x:x + w] = vx, vy
        edges = motion_edges(u, v)
        contours = extract_contours(edges, motion_threshold(edges))
        px = np.vstack([c.pixels for c in contours])
        inside = ((px[None, :, 1] >= grid[:, None, 0]) & (px[None, :, 1] + 1 <= grid[:, None, 0] + grid[:, None, 2])
                  & (px[None, :, 0] >= grid[:, None, 1])
                  & (px[None, :, 0] + 1 <= grid[:, None, 1] + grid[:, None, 3])).sum(axis=1)
        enclosing = inside == len(px)
        if not enclosing.any():
            continue  # no grid window can hold this rectangle; draw another
        frames += 1
        scores = score_boxes(grid, contours, params.kappa)
        best_enclosing = scores[enclosing].max()
        weak = scores[inside <= len(px) / 2]
        good += bool(best_enclosing > weak.max())
        margins.append(best_enclosing - weak.max())
    report(8, "Motion-score ordering", good == 20,
           f"enclosing grid box outscores every box covering <= half the contour pixels in {good}/20 frames "
           f"({len(grid)} grid boxes each; smallest margin {min(margins):.3g})")


def test_ac09_metric_fixture(tmp_path):
    ranked = [RankedProposal(1, (0,), 1.0, v, make_tube(v, 1, 0, [(0, 0, 10 * o, 10)]))
              for v, o in (("a", 0.55), ("b", 0.25), ("c", 0.15))]
    formats.write_ranked(tmp_path / "ranked.jsonl", ranked)
    formats.write_proposals(tmp_path / "gt.csv", [make_tube(v, 0, 0, [(0, 0, 10, 10)]) for v in "abc"])
    code = main(["eval", "--ranked", str(tmp_path / "ranked.jsonl"), "--gt", str(tmp_path / "gt.csv"),
                 "--out", str(tmp_path / "metrics.csv")])
    rows = {(m, t): float(x) for m, t, _, x in
            (r.split(",") for r in (tmp_path / "metrics.csv").read_text().splitlines()[1:])}
    a2, a5, m = rows[("accuracy", "0.2")], rows[("accuracy", "0.5")], rows[("mabo", "")]
    ok = code == 0 and abs(a2 - 2 / 3) < 1e-9 and abs(a5 - 1 / 3) < 1e-9 and abs(m - 0.3167) <= 1e-4
    report(9, "Metric fixtures", ok, f"accuracy@0.2 = {a2:.6f}, accuracy@0.5 = {a5:.6f}, MABO = {m:.6f}")


def test_ac10_runtime():
    rng = np.random.default_rng(10)
    make = lambda: Trellis(rng.random((5, 100)), rng.random((4, 100, 100)), np.arange(100), 1.0)  # noqa: E731
    rank_proposals(make(), 20)  # warm-up: load compiled kernels
    times = []
    for _ in range(20):
        t = make()
        start = time.perf_counter()
        out = rank_proposals(t, 20)
        times.append(time.perf_counter() - start)
        assert len(out) == 20
    report(10, "Runtime", max(times) < 0.02,
           f"DP + top-20 extraction at N = 100, F = 5: mean {np.mean(times) * 1e3:.2f} ms, "
           f"max {max(times) * 1e3:.2f} ms over 20 videos (< 20 ms)")


def _pipeline_run(root: Path) -> dict[str, bytes]:
    spec = root / "spec.json"
    spec.write_text(json.dumps(standard_spec(31, video_id="det").to_dict()))
    scene = root / "scene"
    cmds = [
        ["synth", "--spec", str(spec), "--out", str(scene)],
        ["rank", "--proposals", str(scene / "proposals.csv"), "--flow", str(scene / "flow.tflw"),
         "--frames", str(scene / "frames"), "--actionness", str(scene / "actionness.csv"),
         "--out", str(root / "ranked.jsonl")],
        ["rank", "--proposals", str(scene / "proposals.csv"), "--flow", str(scene / "flow.tflw"),
         "--frames", str(scene / "frames"), "--actionness", str(scene / "actionness.csv"),
         "--out", str(root / "ranked_untrimmed.jsonl"), "--untrimmed"],
        ["eval", "--ranked", str(root / "ranked.jsonl"), "--gt", str(scene / "gt.csv"),
         "--out", str(root / "metrics.csv")],
    ]
    for c in cmds:
        assert main(c) == 0, c
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_ac11_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a, b = _pipeline_run(tmp_path / "a"), _pipeline_run(tmp_path / "b")
    same = sorted(k for k in a if a[k] == b.get(k))
    report(11, "Determinism", a.keys() == b.keys() and len(same) == len(a),
           f"{len(same)}/{len(a)} output files byte-identical across two synth -> rank -> eval runs")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_ac"):
            continue
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
