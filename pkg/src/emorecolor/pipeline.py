"""End-to-end orchestration: emotion filter -> feature k-NN -> weighted
histogram blend -> color transfer, with a serializable provenance plan."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import color, emotion, features, retrieval, transfer
from .datastore import Database
from .errors import StageError


@dataclass(frozen=True)
class PipelineParams:
    k: int = 10
    omega_multiplier: float = 1.5
    transfer: transfer.TransferParams = field(default_factory=transfer.TransferParams)


@dataclass(frozen=True)
class TransferPlan:
    """Complete provenance for one transformation: which targets were
    selected, with what weights, under which parameters."""

    source_id: str
    target_distribution: dict[str, float]
    candidates: dict  # size, omega, fallback_used
    targets: tuple[dict, ...]  # id, distance, bc, weight
    histogram_digest: str
    params: dict
    feature_signature: str

    def to_canonical_json(self) -> str:
        """Canonical form: sorted keys, floats rounded to 9 places.
        Identical plans serialize byte-identically (golden-testable)."""
        return json.dumps(_round_floats(self._as_dict()), sort_keys=True,
                          separators=(",", ":"))

    def _as_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "target_distribution": self.target_distribution,
            "candidates": self.candidates,
            "targets": list(self.targets),
            "histogram_digest": self.histogram_digest,
            "params": self.params,
            "feature_signature": self.feature_signature,
        }


@dataclass(frozen=True)
class TransformResult:
    output: np.ndarray  # 8-bit sRGB, same shape as the source
    plan: TransferPlan
    timings_ms: dict[str, float]


def _round_floats(obj):
    if isinstance(obj, float):
        return round(obj, 9)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _stage(name: str, fn, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        result = fn()
    except Exception as exc:
        raise StageError(name, exc) from exc
    timings[name] = (time.perf_counter() - start) * 1000.0
    return result


def _build_plan(
    source_id: str,
    source_image: np.ndarray,
    target: emotion.EmotionDistribution,
    db: Database,
    params: PipelineParams,
    timings: dict[str, float],
) -> tuple[TransferPlan, color.ColorHistogram]:
    candidates = _stage(
        "select_candidates",
        lambda: emotion.select_candidates(
            db.distributions(), target, params.omega_multiplier, min_size=params.k
        ),
        timings,
    )

    specs = features.resolve_specs(db.signature)
    source_features = _stage(
        "extract_features", lambda: features.extract(source_image, specs), timings
    )

    candidate_records = [
        (cid, db.by_id(cid).features, bc) for cid, bc in candidates.entries
    ]
    selection = _stage(
        "knn_select",
        lambda: retrieval.knn_select(source_features, candidate_records, params.k),
        timings,
    )

    bcs = [bc for _, _, bc in selection.targets]
    blended = _stage(
        "blend_histograms",
        lambda: color.blend_histograms(
            [db.by_id(tid).histogram for tid, _, _ in selection.targets], bcs
        ),
        timings,
    )

    total_bc = sum(bcs)
    plan = TransferPlan(
        source_id=source_id,
        target_distribution=target.as_dict(),
        candidates={
            "size": len(candidates.entries),
            "omega": candidates.omega,
            "fallback_used": candidates.fallback_used,
        },
        targets=tuple(
            {"id": tid, "distance": dist, "bc": bc, "weight": bc / total_bc}
            for tid, dist, bc in selection.targets
        ),
        histogram_digest=blended.digest(),
        params={
            "k": params.k,
            "omega_multiplier": params.omega_multiplier,
            "strength": params.transfer.strength,
            "smoothing_passes": params.transfer.smoothing_passes,
            "bins": params.transfer.binning.bins,
        },
        feature_signature=features.signature_string(db.signature),
    )
    return plan, blended


def preview_targets(
    source_image: np.ndarray,
    target: emotion.EmotionDistribution,
    db: Database,
    params: PipelineParams = PipelineParams(),
    source_id: str = "source",
) -> TransferPlan:
    """Dry run: the exact plan transform would use, with no pixel work."""
    timings: dict[str, float] = {}
    plan, _ = _build_plan(source_id, source_image, target, db, params, timings)
    return plan


def transform(
    source_image: np.ndarray,
    target: emotion.EmotionDistribution,
    db: Database,
    params: PipelineParams = PipelineParams(),
    source_id: str = "source",
) -> TransformResult:
    """Recolor the source toward the target emotion distribution.

    Deterministic for fixed inputs and configuration; every stage error is
    tagged with its stage name.
    """
    timings: dict[str, float] = {}
    plan, blended = _build_plan(source_id, source_image, target, db, params, timings)

    output = _stage(
        "transfer",
        lambda: color.lab_to_rgb(
            transfer.transfer_colors(
                color.rgb_to_lab(source_image), blended, params.transfer
            )
        ),
        timings,
    )
    return TransformResult(output=output, plan=plan, timings_ms=timings)
