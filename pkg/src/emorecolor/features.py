"""Semantic feature vectors: pluggable backends producing L2-normalized,
concatenated sub-vectors, plus a precomputed-sidecar loader."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass

import numpy as np

from . import color
from .errors import BackendFailure, ParseError, SignatureMismatch, UnknownBackend

log = logging.getLogger(__name__)

Signature = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class BackendSpec:
    backend: str
    layer: str
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("expected output dim must be positive")


@dataclass(frozen=True)
class FeatureVector:
    """Concatenation of per-backend L2-normalized sub-vectors.

    All-zero raw outputs are kept all-zero (flagged in zero_parts) instead
    of dividing by zero. Vectors are comparable only within one signature.
    """

    parts: tuple[tuple[str, str, np.ndarray], ...]
    zero_parts: tuple[int, ...] = ()

    @property
    def signature(self) -> Signature:
        return tuple((b, l) for b, l, _ in self.parts)

    @property
    def dim(self) -> int:
        return sum(len(v) for _, _, v in self.parts)

    def concatenated(self) -> np.ndarray:
        return np.concatenate([v for _, _, v in self.parts])


def signature_string(sig: Signature) -> str:
    return "+".join(f"{b}:{l}" for b, l in sig)


def parse_signature(s: str) -> Signature:
    parts = []
    for piece in s.split("+"):
        if ":" not in piece:
            raise ParseError(f"bad signature piece {piece!r}, expected backend:layer")
        backend, layer = piece.split(":", 1)
        parts.append((backend, layer))
    return tuple(parts)


def _normalize(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return raw, True
    return raw / norm, False


def fallback_descriptor(image: np.ndarray, grid: int = 4) -> np.ndarray:
    """Deterministic hand-crafted descriptor: per-cell mean Lab over a
    grid x grid split plus a 64-bin global hue histogram.

    Exists so retrieval is testable without any neural model; length is
    grid*grid*3 + 64.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    lab = color.rgb_to_lab(image).data
    cells = []
    for rows in np.array_split(lab, grid, axis=0):
        for cell in np.array_split(rows, grid, axis=1):
            cells.append(cell.reshape(-1, 3).mean(axis=0))
    cell_part = np.concatenate(cells)

    rgb = np.asarray(image, dtype=np.float64).reshape(-1, 3) / 255.0
    mx = rgb.max(axis=1)
    mn = rgb.min(axis=1)
    delta = mx - mn
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        hue = np.where(
            mx == r,
            (g - b) / delta,
            np.where(mx == g, 2.0 + (b - r) / delta, 4.0 + (r - g) / delta),
        )
    hue = np.where(delta == 0.0, 0.0, (hue / 6.0) % 1.0)
    counts, _ = np.histogram(hue, bins=64, range=(0.0, 1.0))
    hue_part = counts / len(hue)
    return np.concatenate([cell_part, hue_part])


class FallbackBackend:
    """Layer id 'g<N>' selects the grid size, e.g. 'g4'."""

    def _grid(self, layer: str) -> int:
        if not layer.startswith("g"):
            raise BackendFailure(f"fallback backend layer must look like 'g4', got {layer!r}")
        try:
            grid = int(layer[1:])
        except ValueError as exc:
            raise BackendFailure(f"bad fallback layer {layer!r}") from exc
        if grid < 1:
            raise BackendFailure("fallback grid must be >= 1")
        return grid

    def expected_dim(self, layer: str) -> int:
        g = self._grid(layer)
        return g * g * 3 + 64

    def extract_raw(self, image: np.ndarray, layer: str) -> np.ndarray:
        return fallback_descriptor(image, self._grid(layer))


class OnnxBackend:
    """Model-inference backend over an ONNX interchange file.

    Shared stateful resource: session creation and inference are
    serialized behind a lock so concurrent callers see a thread-safe
    facade.
    """

    def __init__(self, model_path: str, input_name: str = "input", image_size: int = 224):
        self.model_path = model_path
        self.input_name = input_name
        self.image_size = image_size
        self._lock = threading.Lock()
        self._session = None

    def _ensure_session(self):
        if self._session is not None:
            return
        try:
            import onnxruntime  # noqa: PLC0415
        except ImportError as exc:
            raise BackendFailure("onnxruntime is not installed") from exc
        try:
            self._session = onnxruntime.InferenceSession(self.model_path)
        except Exception as exc:
            raise BackendFailure(f"could not load model {self.model_path}: {exc}") from exc

    def expected_dim(self, layer: str) -> int:
        with self._lock:
            self._ensure_session()
            for out in self._session.get_outputs():
                if out.name == layer:
                    return int(np.prod([d for d in out.shape if isinstance(d, int)]))
        raise BackendFailure(f"model has no output named {layer!r}")

    def extract_raw(self, image: np.ndarray, layer: str) -> np.ndarray:
        from PIL import Image  # noqa: PLC0415

        resized = Image.fromarray(np.asarray(image, dtype=np.uint8)).resize(
            (self.image_size, self.image_size)
        )
        batch = np.asarray(resized, dtype=np.float32).transpose(2, 0, 1)[None] / 255.0
        with self._lock:
            self._ensure_session()
            outputs = self._session.run([layer], {self.input_name: batch})
        return np.asarray(outputs[0], dtype=np.float64).ravel()


_REGISTRY: dict[str, object] = {"fallback": FallbackBackend()}


def register_backend(backend_id: str, backend) -> None:
    _REGISTRY[backend_id] = backend


def get_backend(backend_id: str):
    try:
        return _REGISTRY[backend_id]
    except KeyError:
        raise UnknownBackend(f"no backend registered under {backend_id!r}") from None


def extract(image: np.ndarray, specs: list[BackendSpec]) -> FeatureVector:
    """Run each backend in spec order, L2-normalize its output, concatenate."""
    if np.asarray(image).size == 0:
        raise ValueError("image must be non-empty")
    parts = []
    zero_parts = []
    for i, spec in enumerate(specs):
        backend = get_backend(spec.backend)
        raw = np.asarray(backend.extract_raw(image, spec.layer), dtype=np.float64)
        if len(raw) != spec.dim:
            raise BackendFailure(
                f"{spec.backend}:{spec.layer} produced {len(raw)} values, expected {spec.dim}"
            )
        normalized, is_zero = _normalize(raw)
        if is_zero:
            zero_parts.append(i)
        parts.append((spec.backend, spec.layer, normalized))
    return FeatureVector(parts=tuple(parts), zero_parts=tuple(zero_parts))


def resolve_specs(sig: Signature) -> list[BackendSpec]:
    """Turn a signature into concrete specs using registered backends."""
    return [
        BackendSpec(backend=b, layer=l, dim=get_backend(b).expected_dim(l)) for b, l in sig
    ]


def save_precomputed(path, vectors: dict[str, FeatureVector]) -> None:
    """Write a line-delimited feature sidecar (one JSON record per image)."""
    with open(path, "w", encoding="utf-8") as fh:
        for image_id in sorted(vectors):
            fv = vectors[image_id]
            record = {
                "id": image_id,
                "signature": [list(p) for p in fv.signature],
                "parts": [[b, l, [float(x) for x in v]] for b, l, v in fv.parts],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_precomputed(path, expected_signature: Signature) -> dict[str, FeatureVector]:
    """Load a feature sidecar, enforcing the signature and re-checking
    per-part normalization (renormalizes with a warning past 1e-3)."""
    vectors: dict[str, FeatureVector] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                image_id = record["id"]
                stored_sig = tuple((b, l) for b, l in record["signature"])
                raw_parts = record["parts"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad feature record: {exc}") from exc
            if stored_sig != expected_signature:
                raise SignatureMismatch(
                    f"{path}:{lineno}: stored signature {signature_string(stored_sig)} "
                    f"!= expected {signature_string(expected_signature)}"
                )
            parts = []
            zero_parts = []
            for i, (b, l, values) in enumerate(raw_parts):
                vec = np.asarray(values, dtype=np.float64)
                norm = float(np.linalg.norm(vec))
                if norm == 0.0:
                    zero_parts.append(i)
                else:
                    if abs(norm - 1.0) > 1e-3:
                        log.warning(
                            "feature part %s:%s of %s has norm %.6f; renormalizing",
                            b, l, image_id, norm,
                        )
                    vec = vec / norm
                parts.append((b, l, vec))
            vectors[image_id] = FeatureVector(parts=tuple(parts), zero_parts=tuple(zero_parts))
    return vectors
