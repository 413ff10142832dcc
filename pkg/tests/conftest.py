import csv
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from emorecolor import datastore
from emorecolor.color import Binning
from emorecolor.features import parse_signature

FIXTURE_SIGNATURES = ("fallback:g4", "fallback:g2")


def synthetic_image(seed: int, width: int = 48, height: int = 32) -> np.ndarray:
    """Deterministic colorful test image: tinted gradient plus noise."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=3)
    xs = np.linspace(0, 1, width)[None, :, None]
    ys = np.linspace(0, 1, height)[:, None, None]
    tilt = rng.uniform(-80, 80, size=3)
    img = base + xs * tilt + ys * rng.uniform(-80, 80, size=3)
    img += rng.normal(0, 12, size=(height, width, 3))
    return np.clip(img, 0, 255).astype(np.uint8)


def fixture_distribution(index: int) -> list[float]:
    """12 spread-out distributions cycling dominant channels."""
    p = [1.0] * 7
    p[index % 7] += 5.0 + index
    total = sum(p)
    return [x / total for x in p]


def build_fixture_db(root: Path, n_records: int = 12) -> Path:
    """Write a synthetic manifest + images and ingest both fixture signatures."""
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    manifest = root / "manifest.csv"
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "path", "anger", "disgust", "fear", "joy",
                         "sadness", "surprise", "neutral"])
        for i in range(n_records):
            image_id = f"img_{i:03d}"
            rel = f"images/{image_id}.png"
            Image.fromarray(synthetic_image(seed=100 + i)).save(root / rel)
            writer.writerow([image_id, rel] + [f"{p:.6f}" for p in fixture_distribution(i)])
    for sig in FIXTURE_SIGNATURES:
        datastore.ingest(manifest, root, signature=parse_signature(sig), binning=Binning(256))
    return manifest


@pytest.fixture(scope="session")
def fixture_manifest(tmp_path_factory) -> Path:
    return build_fixture_db(tmp_path_factory.mktemp("fixture_db"))


@pytest.fixture(scope="session")
def fixture_db(fixture_manifest):
    return datastore.load(fixture_manifest, signature=parse_signature("fallback:g4"))
