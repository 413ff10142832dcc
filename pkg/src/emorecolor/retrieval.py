"""Exact K-nearest-neighbor target selection in feature space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCandidates, SignatureMismatch
from .features import FeatureVector


@dataclass(frozen=True)
class TargetSelection:
    """K candidates nearest the source; (id, euclidean distance, bc),
    sorted by distance ascending then id ascending."""

    targets: tuple[tuple[str, float, float], ...]
    k_requested: int

    @property
    def k_returned(self) -> int:
        return len(self.targets)

    def ids(self) -> list[str]:
        return [t[0] for t in self.targets]


def knn_select(
    source: FeatureVector,
    candidates: list[tuple[str, FeatureVector, float]],
    k: int = 10,
) -> TargetSelection:
    """Exact Euclidean K-NN over the candidate set (distances in float64).

    Emotion6 scale makes exact search cheap, and it keeps the output
    oracle-checkable against a full sort.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not candidates:
        raise EmptyCandidates("no candidates to select targets from")
    for cid, fv, _ in candidates:
        if fv.signature != source.signature:
            raise SignatureMismatch(f"candidate {cid!r} has a different feature signature")

    src = source.concatenated().astype(np.float64)
    matrix = np.stack([fv.concatenated() for _, fv, _ in candidates]).astype(np.float64)
    distances = np.sqrt(((matrix - src) ** 2).sum(axis=1))

    k_eff = min(k, len(candidates))
    if k_eff < len(candidates):
        pool = np.argpartition(distances, k_eff - 1)[:k_eff]
    else:
        pool = np.arange(len(candidates))
    order = sorted(pool, key=lambda i: (distances[i], candidates[i][0]))
    # argpartition can split a tie group arbitrarily at the boundary;
    # resolve by re-checking against the full ordering when ties touch k
    if k_eff < len(candidates):
        kth = distances[order[-1]]
        tied = np.flatnonzero(distances <= kth)
        if len(tied) > k_eff:
            order = sorted(tied, key=lambda i: (distances[i], candidates[i][0]))[:k_eff]

    targets = tuple(
        (candidates[i][0], float(distances[i]), candidates[i][2]) for i in order
    )
    return TargetSelection(targets=targets, k_requested=k)
