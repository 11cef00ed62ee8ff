"""Two half-correct proposals are stitched into one tube that beats both."""
from tuberank.config import RunConfig
from tuberank.geometry import tube_overlap
from tuberank.pipeline import VideoInput, rank_video
from tuberank.synth import corruption_spec, gen_scene

for seed in range(5):
    scene = gen_scene(corruption_spec(seed))
    video = VideoInput(scene.spec.video_id, scene.proposals, scene.flow, scene.frames, scene.actionness)
    top = rank_video(video, RunConfig(K=1))[0]
    fragments = {t.proposal_id: tube_overlap(t, scene.gt)
                 for t in scene.proposals if scene.roles[t.proposal_id] == "corrupted"}
    best_input = max(tube_overlap(t, scene.gt) for t in scene.proposals)
    frag = ", ".join(f"#{k} {v:.3f}" for k, v in sorted(fragments.items()))
    print(f"seed {seed}: fragments {frag} | best input {best_input:.3f} | "
          f"rank-1 path {list(top.path)} overlap {tube_overlap(top.tube, scene.gt):.3f}")
