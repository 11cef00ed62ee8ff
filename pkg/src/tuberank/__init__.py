"""Action proposal ranking and recombination on a sub-proposal trellis.

Proposals (per-frame box tubes) are cut into temporal segments, scored by
actionness, motion and boundary consistency, and recombined by a
maximum-energy path search. Helpers cover shot segmentation of untrimmed
videos, random-walk outlier filtering, evaluation metrics and seeded
synthetic scenes.
"""
from .changepoint import ConvergenceError, TVSolution, auto_segment, frame_features, tv_segment
from .config import ConfigError, RunConfig, load_config
from .geometry import BoundingBox, Tube, iou, nms, tube_overlap
from .hog import hog_descriptor
from .metrics import EvalReport, corloc, evaluate, localization_accuracy, mabo, recall_at_k
from .motion import FlowField, box_contour_score, generate_motion_boxes, motion_edges
from .pipeline import VideoInput, rank_video
from .randomwalk import WalkParams, filter_outliers, random_walk, transition_matrix
from .scoring import ScoreWeights, SubProposal
from .synth import SceneSpec, gen_scene, write_scene
from .trellis import RankedProposal, Trellis, best_path, build_trellis, rank_proposals

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "ConfigError", "ConvergenceError", "EvalReport", "FlowField", "RankedProposal",
    "RunConfig", "SceneSpec", "ScoreWeights", "SubProposal", "TVSolution", "Trellis", "Tube",
    "VideoInput", "WalkParams", "auto_segment", "best_path", "box_contour_score", "build_trellis",
    "corloc", "evaluate", "filter_outliers", "frame_features", "gen_scene", "generate_motion_boxes",
    "hog_descriptor", "iou", "load_config", "localization_accuracy", "mabo", "motion_edges", "nms",
    "random_walk", "rank_proposals", "rank_video", "recall_at_k", "transition_matrix", "tube_overlap",
    "tv_segment", "write_scene",
]
