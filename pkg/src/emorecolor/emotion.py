"""Emotion-distribution arithmetic: validation, Bhattacharyya similarity,
and threshold-based candidate selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyDatabase

CHANNELS = ("anger", "disgust", "fear", "joy", "sadness", "surprise", "neutral")

_SUM_WINDOW = (0.99, 1.01)
_SUM_TOL = 1e-9


@dataclass(frozen=True)
class EmotionDistribution:
    """7 probabilities in the fixed channel order, summing to 1.

    Inputs whose sum lies in [0.99, 1.01] are renormalized; anything
    further off is rejected.
    """

    p: tuple[float, ...]

    def __init__(self, p: Iterable[float]):
        values = tuple(float(x) for x in p)
        if len(values) != len(CHANNELS):
            raise ValueError(f"expected {len(CHANNELS)} probabilities, got {len(values)}")
        if any(x < 0.0 for x in values):
            raise ValueError("probabilities must be non-negative")
        total = sum(values)
        if not (_SUM_WINDOW[0] <= total <= _SUM_WINDOW[1]):
            raise ValueError(f"probabilities sum to {total:.6f}, outside {_SUM_WINDOW}")
        object.__setattr__(self, "p", tuple(x / total for x in values))

    @classmethod
    def from_mapping(cls, weights: dict[str, float]) -> "EmotionDistribution":
        """Build a distribution from channel-name weights; missing channels are 0.

        Weights are normalized, so any non-negative scale works.
        """
        unknown = set(weights) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown emotion channels: {sorted(unknown)}")
        raw = [max(0.0, float(weights.get(c, 0.0))) for c in CHANNELS]
        total = sum(raw)
        if total <= 0.0:
            raise ValueError("at least one emotion weight must be positive")
        return cls([x / total for x in raw])

    @classmethod
    def one_hot(cls, channel: str) -> "EmotionDistribution":
        return cls.from_mapping({channel: 1.0})

    def as_dict(self) -> dict[str, float]:
        return dict(zip(CHANNELS, self.p))

    def __getitem__(self, channel: str) -> float:
        return self.p[CHANNELS.index(channel)]


@dataclass(frozen=True)
class CandidateSet:
    """Images whose emotion similarity to the target exceeds the threshold.

    entries are (image id, bc) sorted by bc descending, id ascending.
    fallback_used marks the top-min_size rescue when the strict filter
    left too few entries.
    """

    entries: tuple[tuple[str, float], ...]
    omega: float
    fallback_used: bool = field(default=False)

    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]


def bhattacharyya(a: EmotionDistribution, b: EmotionDistribution) -> float:
    """Bhattacharyya coefficient between two emotion distributions.

    1 for identical distributions, 0 for disjoint supports.
    """
    return min(1.0, sum(math.sqrt(x * y) for x, y in zip(a.p, b.p)))


def select_candidates(
    db_distributions: Sequence[tuple[str, EmotionDistribution]],
    target: EmotionDistribution,
    omega_multiplier: float = 1.5,
    min_size: int = 1,
) -> CandidateSet:
    """Keep database entries with bc strictly above omega_multiplier * mean(bc).

    Falls back to the top-min_size entries by bc (flagged) when the strict
    threshold leaves fewer than min_size survivors; the threshold can
    exceed max(bc) on flat databases, which would otherwise stall the
    pipeline.
    """
    if not db_distributions:
        raise EmptyDatabase("no emotion distributions to select from")
    if omega_multiplier <= 0:
        raise ValueError("omega_multiplier must be positive")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")

    scored = [(image_id, bhattacharyya(target, dist)) for image_id, dist in db_distributions]
    omega = omega_multiplier * (sum(bc for _, bc in scored) / len(scored))

    ordered = sorted(scored, key=lambda e: (-e[1], e[0]))
    surviving = [e for e in ordered if e[1] > omega]
    if len(surviving) >= min_size:
        return CandidateSet(entries=tuple(surviving), omega=omega)
    return CandidateSet(entries=tuple(ordered[:min_size]), omega=omega, fallback_used=True)
