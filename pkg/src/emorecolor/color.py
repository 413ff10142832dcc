"""sRGB <-> CIELab conversion and per-channel Lab histograms, including
similarity-weighted histogram blending."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroWeights, BinningMismatch

# sRGB -> XYZ (D65, 2 degree observer)
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ2RGB = np.linalg.inv(_RGB2XYZ)
_WHITE = np.array([0.95047, 1.0, 1.08883])

_DELTA = 6.0 / 29.0

LAB_RANGES = ((0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0))
CHANNEL_NAMES = ("L", "a", "b")


@dataclass(frozen=True)
class LabImage:
    """CIELab raster, float64 (H, W, 3), channels clamped to LAB_RANGES."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError("LabImage expects an (H, W, 3) array")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("LabImage dimensions must be positive")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Binning:
    """Uniform per-channel binning over the full Lab channel ranges."""

    bins: int = 256

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("need at least 2 bins per channel")

    def edges(self, channel: int) -> np.ndarray:
        lo, hi = LAB_RANGES[channel]
        return np.linspace(lo, hi, self.bins + 1)

    def width(self, channel: int) -> float:
        lo, hi = LAB_RANGES[channel]
        return (hi - lo) / self.bins

    def descriptor(self) -> dict:
        return {"bins": self.bins, "ranges": [list(r) for r in LAB_RANGES]}


@dataclass(frozen=True)
class ColorHistogram:
    """Per-channel (L, a, b) normalized densities under a shared binning."""

    binning: Binning
    densities: np.ndarray  # shape (3, bins)

    def __post_init__(self):
        if self.densities.shape != (3, self.binning.bins):
            raise ValueError("densities shape must be (3, bins)")
        if np.any(self.densities < 0):
            raise ValueError("densities must be non-negative")
        sums = self.densities.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError(f"per-channel densities must sum to 1, got {sums}")

    def channel(self, channel: int) -> np.ndarray:
        return self.densities[channel]

    def digest(self) -> str:
        payload = json.dumps(
            {
                "binning": self.binning.descriptor(),
                "densities": [[round(float(v), 12) for v in row] for row in self.densities],
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c > 0.0031308, 1.055 * np.power(c, 1.0 / 2.4) - 0.055, 12.92 * c)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA, t**3, 3 * _DELTA**2 * (t - 4.0 / 29.0))


def rgb_to_lab(image: np.ndarray) -> LabImage:
    """Convert an 8-bit sRGB raster (H, W, 3) to CIELab under D65."""
    rgb = np.asarray(image, dtype=np.float64) / 255.0
    linear = _srgb_to_linear(rgb)
    xyz = linear @ _RGB2XYZ.T
    fxyz = _lab_f(xyz / _WHITE)
    lab = np.empty_like(fxyz)
    lab[..., 0] = 116.0 * fxyz[..., 1] - 16.0
    lab[..., 1] = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    lab[..., 2] = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    for ch in range(3):
        lo, hi = LAB_RANGES[ch]
        lab[..., ch] = np.clip(lab[..., ch], lo, hi)
    return LabImage(lab)


def lab_to_rgb(image: LabImage) -> np.ndarray:
    """Convert CIELab back to an 8-bit sRGB raster; out-of-gamut values clamp."""
    lab = image.data
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    linear = xyz @ _XYZ2RGB.T
    srgb = _linear_to_srgb(linear)
    return np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)


def compute_histogram(image: LabImage, binning: Binning = Binning()) -> ColorHistogram:
    """Per-channel normalized Lab histogram; every pixel lands in one bin."""
    densities = np.empty((3, binning.bins))
    total = image.data.shape[0] * image.data.shape[1]
    for ch in range(3):
        lo, hi = LAB_RANGES[ch]
        values = np.clip(image.data[..., ch].ravel(), lo, hi)
        counts, _ = np.histogram(values, bins=binning.bins, range=(lo, hi))
        densities[ch] = counts / total
    return ColorHistogram(binning=binning, densities=densities)


def blend_histograms(histograms: list[ColorHistogram], weights: list[float]) -> ColorHistogram:
    """Convex combination of histograms with weights normalized to sum 1.

    Raw similarity scores are accepted as weights; normalization keeps the
    output a proper density regardless of their scale.
    """
    if not histograms:
        raise ValueError("need at least one histogram")
    if len(histograms) != len(weights):
        raise ValueError("histograms and weights must have equal length")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    binning = histograms[0].binning
    for h in histograms[1:]:
        if h.binning != binning:
            raise BinningMismatch("all histograms in a blend must share binning")
    total = sum(weights)
    if total <= 0.0:
        raise AllZeroWeights("at least one blend weight must be positive")
    w = np.asarray(weights, dtype=np.float64) / total
    stacked = np.stack([h.densities for h in histograms])  # (n, 3, bins)
    blended = np.tensordot(w, stacked, axes=1)
    return ColorHistogram(binning=binning, densities=blended)
