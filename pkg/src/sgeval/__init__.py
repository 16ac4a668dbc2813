"""Deterministic evaluation toolkit for scene graph generation.

Operates on serialized detections and scene graphs: VG-style Recall@K,
Open-Images-style weighted mAP and composite score, frequency-prior
baselines, ground-truth-substitution error ablation, and cross-model
comparison, plus a synthetic scene generator for desk-scale verification.
"""

__version__ = "0.1.0"

from .core import (BoundingBox, DetectedObject, EvalConfig, RelationPrediction,
                   SceneGraph, Vocabulary, apply_mode, triplet_score)
from .errors import SgEvalError
from .ingest import DatasetSplit, read_scene_graphs, read_vocabulary, write_report
from .matching import MatchResult, Triplet, iou, match_triplets, phrase_box
from .oi import OiReport, average_precision, composite_score, oi_evaluate, wmap
from .vg import VgRecallReport, vg_recall
from .freq import FrequencyPrior, build_prior, predict_with_prior
from .ablation import AblationLevel, run_ablation, restrict_to_gt_pairs, substitute_gt_objects
from .compare import ComparisonMatrix, ensemble_accuracy, pairwise_similarity
from .synth import SynthConfig, degradation_chain, generate

__all__ = [
    "AblationLevel", "BoundingBox", "ComparisonMatrix", "DatasetSplit",
    "DetectedObject", "EvalConfig", "FrequencyPrior", "MatchResult", "OiReport",
    "RelationPrediction", "SceneGraph", "SgEvalError", "SynthConfig", "Triplet",
    "VgRecallReport", "Vocabulary", "apply_mode", "average_precision",
    "build_prior", "composite_score", "degradation_chain", "ensemble_accuracy",
    "generate", "iou", "match_triplets", "oi_evaluate", "pairwise_similarity",
    "phrase_box", "predict_with_prior", "read_scene_graphs", "read_vocabulary",
    "restrict_to_gt_pairs", "run_ablation", "substitute_gt_objects",
    "triplet_score", "vg_recall", "wmap", "write_report",
]
