"""Shot boundaries from a planted velocity change, and the lambda path that chose them."""
from tuberank.changepoint import segment_frames, shots_to_ranges
from tuberank.synth import SceneSpec, gen_scene

spec = SceneSpec(seed=0, jitter=0.0, distractors=0, cut_frame=20, velocity=(2.0, 0.0), velocity_after=(0.0, 0.0))
scene = gen_scene(spec)
sol = segment_frames(scene.proposals, scene.frames)
print(f"planted change at frame {spec.cut_frame}; detected boundaries {sol.boundaries.tolist()}")
print(f"shots: {shots_to_ranges(sol, spec.T)}")
print("lambda       tv-boundaries  kept  criterion")
for lam, raw, kept, crit in sol.path:
    mark = "  <- selected" if lam == sol.lam else ""
    print(f"{lam:10.4g}  {raw:>13}  {kept:>4}  {crit:9.3f}{mark}")
