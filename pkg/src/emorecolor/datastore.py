"""Ingest emotion-annotated image collections, persist feature/histogram
sidecars, and serve an immutable in-memory database.

Manifest format: UTF-8 CSV with LF line endings, '#' comment lines
ignored, header row required:

    id,path,anger,disgust,fear,joy,sadness,surprise,neutral

Sidecars live next to the manifest under sidecars/<signature>__b<bins>/ so
ablation runs over different feature layers coexist.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import features as feat
from .color import Binning, ColorHistogram, compute_histogram, rgb_to_lab
from .emotion import CHANNELS, EmotionDistribution
from .errors import BinningMismatch, ManifestParseError, MissingSidecar, ParseError
from .features import FeatureVector, Signature

_HEADER = ("id", "path") + CHANNELS

DEFAULT_SIGNATURE: Signature = (("fallback", "g4"),)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: str
    distribution: EmotionDistribution
    features: FeatureVector | None = None
    histogram: ColorHistogram | None = None


@dataclass(frozen=True)
class Database:
    """Immutable in-memory database; all records carry features and
    histograms under one signature and binning."""

    records: tuple[ImageRecord, ...]
    signature: Signature
    binning: Binning
    image_root: Path
    digest: str

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, image_id: str) -> ImageRecord:
        for r in self.records:
            if r.image_id == image_id:
                return r
        raise KeyError(image_id)

    def distributions(self) -> list[tuple[str, EmotionDistribution]]:
        return [(r.image_id, r.distribution) for r in self.records]


@dataclass
class IngestReport:
    accepted: int = 0
    extracted: int = 0
    reused: int = 0
    rejected: list[tuple[str, str]] = field(default_factory=list)
    digest: str = ""


def _sidecar_dir(manifest_path: Path, signature: Signature, binning: Binning) -> Path:
    key = feat.signature_string(signature).replace(":", "-").replace("+", "_")
    return manifest_path.parent / "sidecars" / f"{key}__b{binning.bins}"


def parse_manifest(manifest_path: Path) -> tuple[list[tuple[str, str, list[float]]], list[tuple[str, str]]]:
    """Return (valid rows as (id, path, 7 raw probabilities), rejections)."""
    if not manifest_path.exists():
        raise ManifestParseError(f"manifest not found: {manifest_path}")
    rows: list[tuple[str, str, list[float]]] = []
    rejected: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(manifest_path, encoding="utf-8", newline="") as fh:
        lines = [l for l in fh if l.strip() and not l.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise ManifestParseError(f"{manifest_path}: empty manifest") from None
    if header != _HEADER:
        raise ManifestParseError(
            f"{manifest_path}: header {header} does not match expected {_HEADER}"
        )
    for row in reader:
        if len(row) != len(_HEADER):
            rejected.append((row[0] if row else "?", "WrongColumnCount"))
            continue
        image_id, path = row[0].strip(), row[1].strip()
        if image_id in seen:
            rejected.append((image_id, "DuplicateId"))
            continue
        try:
            probs = [float(x) for x in row[2:]]
        except ValueError:
            rejected.append((image_id, "NonNumericProbability"))
            continue
        total = sum(probs)
        if any(p < 0 for p in probs):
            rejected.append((image_id, "NegativeProbability"))
            continue
        if not (0.99 <= total <= 1.01):
            rejected.append((image_id, "DistributionSumOutOfRange"))
            continue
        seen.add(image_id)
        rows.append((image_id, path, probs))
    return rows, rejected


def _load_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _histogram_sidecar_path(sidecar_dir: Path) -> Path:
    return sidecar_dir / "histograms.jsonl"


def _feature_sidecar_path(sidecar_dir: Path) -> Path:
    return sidecar_dir / "features.jsonl"


def save_histograms(path: Path, histograms: dict[str, ColorHistogram]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for image_id in sorted(histograms):
            h = histograms[image_id]
            record = {
                "id": image_id,
                "binning": h.binning.descriptor(),
                "densities": {
                    "L": [float(x) for x in h.densities[0]],
                    "a": [float(x) for x in h.densities[1]],
                    "b": [float(x) for x in h.densities[2]],
                },
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_histograms(path: Path, binning: Binning) -> dict[str, ColorHistogram]:
    histograms: dict[str, ColorHistogram] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                image_id = record["id"]
                stored_bins = record["binning"]["bins"]
                dens = record["densities"]
                densities = np.array([dens["L"], dens["a"], dens["b"]], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad histogram record: {exc}") from exc
            if stored_bins != binning.bins:
                raise BinningMismatch(
                    f"{path}: stored {stored_bins} bins, configured {binning.bins}"
                )
            histograms[image_id] = ColorHistogram(binning=binning, densities=densities)
    return histograms


def _canonical_record(r: ImageRecord) -> dict:
    return {
        "id": r.image_id,
        "path": r.path,
        "p": [round(float(x), 9) for x in r.distribution.p],
        "features": [
            [b, l, [round(float(x), 9) for x in v]] for b, l, v in r.features.parts
        ],
        "histogram": [
            [round(float(x), 9) for x in row] for row in r.histogram.densities
        ],
    }


def database_digest(records: list[ImageRecord]) -> str:
    payload = json.dumps(
        [_canonical_record(r) for r in sorted(records, key=lambda r: r.image_id)],
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def ingest(
    manifest_path: str | Path,
    image_root: str | Path | None = None,
    signature: Signature = DEFAULT_SIGNATURE,
    binning: Binning = Binning(),
) -> IngestReport:
    """Validate the manifest, extract features/histograms for rows lacking
    sidecar entries, rewrite the sidecars, and report counts + digest.

    Re-running with complete sidecars performs zero extraction and yields
    an identical digest. Bad rows are collected, never fatal.
    """
    manifest_path = Path(manifest_path)
    image_root = Path(image_root) if image_root else manifest_path.parent
    rows, rejected = parse_manifest(manifest_path)
    report = IngestReport(rejected=rejected)

    sidecar_dir = _sidecar_dir(manifest_path, signature, binning)
    sidecar_dir.mkdir(parents=True, exist_ok=True)
    feat_path = _feature_sidecar_path(sidecar_dir)
    hist_path = _histogram_sidecar_path(sidecar_dir)

    vectors: dict[str, FeatureVector] = {}
    histograms: dict[str, ColorHistogram] = {}
    if feat_path.exists():
        vectors = feat.load_precomputed(feat_path, signature)
    if hist_path.exists():
        histograms = load_histograms(hist_path, binning)

    specs = feat.resolve_specs(signature)
    records: list[ImageRecord] = []
    for image_id, rel_path, probs in rows:
        full_path = image_root / rel_path
        if not full_path.exists():
            report.rejected.append((image_id, f"MissingImage:{rel_path}"))
            continue
        dist = EmotionDistribution(probs)
        if image_id in vectors and image_id in histograms:
            report.reused += 1
        else:
            pixels = _load_image(full_path)
            vectors[image_id] = feat.extract(pixels, specs)
            histograms[image_id] = compute_histogram(rgb_to_lab(pixels), binning)
            report.extracted += 1
        records.append(
            ImageRecord(
                image_id=image_id,
                path=rel_path,
                distribution=dist,
                features=vectors[image_id],
                histogram=histograms[image_id],
            )
        )
        report.accepted += 1

    keep = {r.image_id for r in records}
    feat.save_precomputed(feat_path, {i: v for i, v in vectors.items() if i in keep})
    save_histograms(hist_path, {i: h for i, h in histograms.items() if i in keep})
    report.digest = database_digest(records)
    return report


def load(
    manifest_path: str | Path,
    image_root: str | Path | None = None,
    signature: Signature = DEFAULT_SIGNATURE,
    binning: Binning = Binning(),
) -> Database:
    """Load a previously ingested database; sidecars must be complete."""
    manifest_path = Path(manifest_path)
    image_root = Path(image_root) if image_root else manifest_path.parent
    rows, _ = parse_manifest(manifest_path)

    sidecar_dir = _sidecar_dir(manifest_path, signature, binning)
    feat_path = _feature_sidecar_path(sidecar_dir)
    hist_path = _histogram_sidecar_path(sidecar_dir)
    if not feat_path.exists() or not hist_path.exists():
        raise MissingSidecar(
            f"sidecars for signature {feat.signature_string(signature)!r} "
            f"(bins={binning.bins}) not found under {sidecar_dir}; run ingest first"
        )
    vectors = feat.load_precomputed(feat_path, signature)
    histograms = load_histograms(hist_path, binning)

    records: list[ImageRecord] = []
    for image_id, rel_path, probs in rows:
        if image_id not in vectors:
            raise MissingSidecar(f"record {image_id!r} missing from feature sidecar")
        if image_id not in histograms:
            raise MissingSidecar(f"record {image_id!r} missing from histogram sidecar")
        records.append(
            ImageRecord(
                image_id=image_id,
                path=rel_path,
                distribution=EmotionDistribution(probs),
                features=vectors[image_id],
                histogram=histograms[image_id],
            )
        )
    records.sort(key=lambda r: r.image_id)
    return Database(
        records=tuple(records),
        signature=signature,
        binning=binning,
        image_root=image_root,
        digest=database_digest(records),
    )
