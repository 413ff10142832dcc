"""Reshape a Lab image's per-channel distributions toward a target
histogram via monotone CDF matching, with optional progressive passes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .color import LAB_RANGES, Binning, ColorHistogram, LabImage, compute_histogram
from .errors import BinningMismatch


@dataclass(frozen=True)
class TransferParams:
    """strength 1 = full match; smoothing_passes > 0 walks through
    intermediate histograms between source and target."""

    strength: float = 1.0
    smoothing_passes: int = 0
    binning: Binning = field(default_factory=Binning)

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")
        if self.smoothing_passes < 0:
            raise ValueError("smoothing_passes must be >= 0")


def _cdf_at_edges(densities: np.ndarray) -> np.ndarray:
    cdf = np.concatenate([[0.0], np.cumsum(densities)])
    cdf[-1] = 1.0
    return np.minimum(cdf, 1.0)


def match_channel(
    values: np.ndarray,
    source_hist: np.ndarray,
    target_hist: np.ndarray,
    edges: np.ndarray,
    strength: float = 1.0,
) -> np.ndarray:
    """CDF-match one channel: m(v) = Q_target(F_source(v)), blended with the
    input by strength. Both histograms are densities over the same edges.

    The mapping is monotone non-decreasing by construction (both interps
    run over non-decreasing tables).
    """
    if source_hist.shape != target_hist.shape or len(edges) != len(source_hist) + 1:
        raise BinningMismatch("source and target histograms must share binning")
    v = np.asarray(values, dtype=np.float64)
    cdf_s = _cdf_at_edges(source_hist)
    cdf_t = _cdf_at_edges(target_hist)
    # break flat CDF segments so the inverse lookup stays well defined
    ramp = np.linspace(0.0, 1e-9, len(cdf_t))
    quantiles = np.interp(np.clip(v, edges[0], edges[-1]), edges, cdf_s)
    matched = np.interp(quantiles, cdf_t + ramp, edges)
    return (1.0 - strength) * v + strength * matched


def _match_toward(image: LabImage, target: ColorHistogram, strength: float) -> LabImage:
    source = compute_histogram(image, target.binning)
    out = np.empty_like(image.data)
    for ch in range(3):
        edges = target.binning.edges(ch)
        remapped = match_channel(
            image.data[..., ch].ravel(),
            source.channel(ch),
            target.channel(ch),
            edges,
            strength,
        )
        lo, hi = LAB_RANGES[ch]
        out[..., ch] = np.clip(remapped.reshape(image.data.shape[:2]), lo, hi)
    return LabImage(out)


def transfer_colors(
    source: LabImage, target_hist: ColorHistogram, params: TransferParams
) -> LabImage:
    """Match L, a, b independently toward the target histogram.

    With smoothing_passes = n > 0, pass t matches toward the histogram mix
    (1 - t/n) * source + (t/n) * target, so intermediate images move
    gradually; the endpoint equals single-pass matching.
    """
    if params.binning != target_hist.binning:
        raise BinningMismatch("params and target histogram binning differ")
    if params.smoothing_passes == 0:
        return _match_toward(source, target_hist, params.strength)

    source_hist = compute_histogram(source, target_hist.binning)
    current = source
    n = params.smoothing_passes
    for t in range(1, n + 1):
        alpha = t / n
        mixed = (1.0 - alpha) * source_hist.densities + alpha * target_hist.densities
        mixed /= mixed.sum(axis=1, keepdims=True)
        intermediate = ColorHistogram(binning=target_hist.binning, densities=mixed)
        current = _match_toward(current, intermediate, params.strength)
    return current
