import json
import logging

import numpy as np
import pytest

from emorecolor import features
from emorecolor.errors import BackendFailure, ParseError, SignatureMismatch, UnknownBackend
from emorecolor.features import (
    BackendSpec,
    FeatureVector,
    extract,
    fallback_descriptor,
    load_precomputed,
    parse_signature,
    register_backend,
    resolve_specs,
    save_precomputed,
    signature_string,
)


class _StubBackend:
    """Deterministic backend producing a fixed-dim raw vector."""

    def __init__(self, dim, scale=1.0):
        self.dim = dim
        self.scale = scale

    def expected_dim(self, layer):
        return self.dim

    def extract_raw(self, image, layer):
        return np.arange(1, self.dim + 1, dtype=np.float64) * self.scale


@pytest.fixture
def stub_backends():
    saved = dict(features._REGISTRY)
    register_backend("stub_big", _StubBackend(4096))
    register_backend("stub_small", _StubBackend(1024))
    yield
    features._REGISTRY.clear()
    features._REGISTRY.update(saved)


def gray(value=128, shape=(16, 16)):
    return np.full((*shape, 3), value, dtype=np.uint8)


class TestExtract:
    def test_concatenated_dim_5120(self, stub_backends):
        specs = [BackendSpec("stub_big", "fc7", 4096), BackendSpec("stub_small", "pool5", 1024)]
        fv = extract(gray(), specs)
        assert fv.dim == 5120
        assert fv.signature == (("stub_big", "fc7"), ("stub_small", "pool5"))

    def test_parts_l2_normalized(self, stub_backends):
        fv = extract(gray(), [BackendSpec("stub_small", "x", 1024)])
        assert np.linalg.norm(fv.parts[0][2]) == pytest.approx(1.0, abs=1e-6)

    def test_normalization_example(self):
        raw = np.array([3.0, 4.0])
        normalized = raw / np.linalg.norm(raw)
        assert np.allclose(normalized, [0.6, 0.8])

    def test_spec_order_controls_part_order(self, stub_backends):
        a = BackendSpec("stub_big", "fc7", 4096)
        b = BackendSpec("stub_small", "pool5", 1024)
        fv_ab = extract(gray(), [a, b])
        fv_ba = extract(gray(), [b, a])
        assert fv_ab.signature == tuple(reversed(fv_ba.signature))
        assert np.array_equal(fv_ab.parts[0][2], fv_ba.parts[1][2])

    def test_unknown_backend(self):
        with pytest.raises(UnknownBackend):
            extract(gray(), [BackendSpec("nonexistent", "x", 8)])

    def test_dim_mismatch_is_backend_failure(self, stub_backends):
        with pytest.raises(BackendFailure):
            extract(gray(), [BackendSpec("stub_big", "fc7", 99)])

    def test_all_zero_part_flagged(self, stub_backends):
        register_backend("zero", _StubBackend(8, scale=0.0))
        fv = extract(gray(), [BackendSpec("zero", "x", 8)])
        assert fv.zero_parts == (0,)
        assert np.all(fv.parts[0][2] == 0.0)

    def test_deterministic(self):
        specs = resolve_specs((("fallback", "g4"),))
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (24, 24, 3)).astype(np.uint8)
        fv1 = extract(img, specs)
        fv2 = extract(img.copy(), specs)
        assert np.array_equal(fv1.concatenated(), fv2.concatenated())


class TestFallbackDescriptor:
    def test_length(self):
        assert len(fallback_descriptor(gray(), grid=4)) == 4 * 4 * 3 + 64
        assert len(fallback_descriptor(gray(), grid=1)) == 3 + 64

    def test_uniform_gray_g1(self):
        desc = fallback_descriptor(gray(128), grid=1)
        # mean Lab of mid gray: positive L, near-zero a and b
        assert desc[0] > 0
        assert abs(desc[1]) < 0.1 and abs(desc[2]) < 0.1
        hue = desc[3:]
        assert hue.sum() == pytest.approx(1.0)
        assert np.count_nonzero(hue) == 1

    def test_mirror_changes_descriptor(self):
        img = np.zeros((8, 16, 3), dtype=np.uint8)
        img[:, :8] = (255, 0, 0)
        img[:, 8:] = (0, 0, 255)
        d = fallback_descriptor(img, grid=2)
        d_mirror = fallback_descriptor(img[:, ::-1], grid=2)
        assert not np.array_equal(d, d_mirror)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            fallback_descriptor(gray(), grid=0)

    def test_fallback_backend_layer_parsing(self):
        backend = features.get_backend("fallback")
        assert backend.expected_dim("g4") == 112
        with pytest.raises(BackendFailure):
            backend.expected_dim("fc7")


class TestSignatures:
    def test_round_trip(self):
        sig = (("fallback", "g4"), ("onnx", "fc7"))
        assert parse_signature(signature_string(sig)) == sig

    def test_parse_rejects_bad_piece(self):
        with pytest.raises(ParseError):
            parse_signature("nolayer")


class TestSidecar:
    def _vectors(self):
        specs = resolve_specs((("fallback", "g2"),))
        rng = np.random.default_rng(1)
        return {
            f"img{i}": extract(rng.integers(0, 256, (12, 12, 3)).astype(np.uint8), specs)
            for i in range(3)
        }

    def test_save_load_round_trip(self, tmp_path):
        vectors = self._vectors()
        path = tmp_path / "features.jsonl"
        save_precomputed(path, vectors)
        loaded = load_precomputed(path, (("fallback", "g2"),))
        assert set(loaded) == set(vectors)
        for image_id, fv in vectors.items():
            assert np.abs(loaded[image_id].concatenated() - fv.concatenated()).max() < 1e-7

    def test_signature_mismatch(self, tmp_path):
        path = tmp_path / "features.jsonl"
        save_precomputed(path, self._vectors())
        with pytest.raises(SignatureMismatch):
            load_precomputed(path, (("fallback", "g4"),))

    def test_denormalized_vector_renormalized_with_warning(self, tmp_path, caplog):
        path = tmp_path / "features.jsonl"
        record = {
            "id": "x",
            "signature": [["fallback", "g2"]],
            "parts": [["fallback", "g2", [0.0, 1.01] + [0.0] * 74]],
        }
        path.write_text(json.dumps(record) + "\n")
        with caplog.at_level(logging.WARNING):
            loaded = load_precomputed(path, (("fallback", "g2"),))
        assert "renormalizing" in caplog.text
        assert np.linalg.norm(loaded["x"].concatenated()) == pytest.approx(1.0, abs=1e-12)

    def test_corrupt_line_raises_parse_error(self, tmp_path):
        path = tmp_path / "features.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(ParseError):
            load_precomputed(path, (("fallback", "g2"),))


def test_feature_vector_dim_property():
    fv = FeatureVector(parts=(("a", "x", np.zeros(3)), ("b", "y", np.zeros(5))))
    assert fv.dim == 8
