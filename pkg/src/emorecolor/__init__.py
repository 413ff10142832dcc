"""Emotion-guided image recoloring via retrieval and histogram transfer."""

from .emotion import CHANNELS, EmotionDistribution, bhattacharyya, select_candidates
from .pipeline import PipelineParams, TransferPlan, TransformResult, preview_targets, transform

__all__ = [
    "CHANNELS",
    "EmotionDistribution",
    "PipelineParams",
    "TransferPlan",
    "TransformResult",
    "bhattacharyya",
    "preview_targets",
    "select_candidates",
    "transform",
]
