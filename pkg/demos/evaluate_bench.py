"""Localisation metrics over a small synthetic benchmark."""
from tuberank.config import RunConfig
from tuberank.metrics import evaluate
from tuberank.pipeline import VideoInput, rank_video
from tuberank.synth import gen_scene, standard_spec

ranked, gts = [], []
for seed in range(10):
    scene = gen_scene(standard_spec(seed, video_id=f"v{seed:02d}"))
    video = VideoInput(scene.spec.video_id, scene.proposals, scene.flow, scene.frames, scene.actionness)
    ranked += rank_video(video, RunConfig(K=10))
    gts.append(scene.gt)

report = evaluate(ranked, gts)
print("accuracy@t:", "  ".join(f"{t:g}: {v:.2f}" for t, v in report.accuracy.items()))
print(f"MABO: {report.mabo:.3f}")
print("recall@K (t=0.5):", " ".join(f"{v:.2f}" for v in report.recall))
