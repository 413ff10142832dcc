"""HTTP facade over the pipeline: stateless transform/preview endpoints,
database stats, thumbnails, and a health check."""

from __future__ import annotations

import base64
import binascii
import io
import json

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image, UnidentifiedImageError

from . import datastore, features, pipeline
from .emotion import CHANNELS, EmotionDistribution
from .errors import EmorecolorError
from .transfer import TransferParams

DEFAULT_SIZE_CAP = 16 * 1024 * 1024


def _error(status: int, message: str, field: str | None = None) -> JSONResponse:
    body = {"error": message}
    if field:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def _parse_emotion(raw) -> EmotionDistribution:
    if isinstance(raw, dict):
        return EmotionDistribution.from_mapping({k: float(v) for k, v in raw.items()})
    if isinstance(raw, (list, tuple)):
        if len(raw) != len(CHANNELS):
            raise ValueError(f"expected {len(CHANNELS)} values, got {len(raw)}")
        total = sum(float(v) for v in raw)
        if total <= 0:
            raise ValueError("emotion values must not all be zero")
        return EmotionDistribution([float(v) / total for v in raw])
    raise ValueError("emotion must be a mapping or a 7-element list")


def _decode_image(b64: str, size_cap: int) -> np.ndarray:
    data = base64.b64decode(b64, validate=True)
    if len(data) > size_cap:
        raise _Oversize(len(data))
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))


class _Oversize(Exception):
    def __init__(self, size: int):
        super().__init__(f"image payload {size} bytes exceeds cap")
        self.size = size


def create_app(
    db: datastore.Database | None = None,
    cors_origin: str | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> FastAPI:
    app = FastAPI(title="emorecolor")
    app.state.db = db
    app.state.size_cap = size_cap

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware  # noqa: PLC0415

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _require_db() -> datastore.Database | JSONResponse:
        if app.state.db is None:
            return _error(503, "database not loaded")
        return app.state.db

    async def _parse_request(request: Request):
        """Returns (pixels, target, params, source_id) or an error response."""
        db = _require_db()
        if isinstance(db, JSONResponse):
            return db
        try:
            body = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        if "image_b64" not in body:
            return _error(400, "missing field", field="image_b64")
        if "emotion" not in body:
            return _error(400, "missing field", field="emotion")
        try:
            pixels = _decode_image(body["image_b64"], app.state.size_cap)
        except _Oversize as exc:
            return _error(413, str(exc), field="image_b64")
        except (binascii.Error, ValueError, UnidentifiedImageError, OSError):
            return _error(400, "image_b64 is not a decodable PNG/JPEG", field="image_b64")
        try:
            target = _parse_emotion(body["emotion"])
        except (ValueError, TypeError) as exc:
            return _error(400, str(exc), field="emotion")
        try:
            params = pipeline.PipelineParams(
                k=int(body.get("k", 10)),
                omega_multiplier=float(body.get("omega_multiplier", 1.5)),
                transfer=TransferParams(
                    strength=float(body.get("strength", 1.0)),
                    smoothing_passes=int(body.get("passes", 0)),
                    binning=db.binning,
                ),
            )
            if params.k < 1:
                raise ValueError("k must be >= 1")
        except (ValueError, TypeError) as exc:
            return _error(400, str(exc), field="params")
        return pixels, target, params, str(body.get("source_id", "upload"))

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/v1/database/stats")
    async def stats():
        db = _require_db()
        if isinstance(db, JSONResponse):
            return db
        return {
            "records": len(db),
            "feature_signature": features.signature_string(db.signature),
            "bins": db.binning.bins,
            "digest": db.digest,
        }

    @app.post("/v1/preview")
    async def preview(request: Request):
        parsed = await _parse_request(request)
        if isinstance(parsed, JSONResponse):
            return parsed
        pixels, target, params, source_id = parsed
        db = app.state.db
        try:
            plan = pipeline.preview_targets(pixels, target, db, params, source_id=source_id)
        except EmorecolorError as exc:
            return _error(422, str(exc))
        doc = json.loads(plan.to_canonical_json())
        for t in doc["targets"]:
            t["thumbnail"] = f"/thumbnails/{t['id']}"
        return Response(
            content=json.dumps({"plan": doc}, sort_keys=True, separators=(",", ":")),
            media_type="application/json",
        )

    @app.post("/v1/transform")
    async def transform(request: Request):
        parsed = await _parse_request(request)
        if isinstance(parsed, JSONResponse):
            return parsed
        pixels, target, params, source_id = parsed
        db = app.state.db
        try:
            result = pipeline.transform(pixels, target, db, params, source_id=source_id)
        except EmorecolorError as exc:
            return _error(422, str(exc))
        buf = io.BytesIO()
        Image.fromarray(result.output).save(buf, format="PNG")
        return Response(
            content=json.dumps(
                {
                    "image_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
                    "plan": json.loads(result.plan.to_canonical_json()),
                    "timings_ms": result.timings_ms,
                },
                sort_keys=True,
            ),
            media_type="application/json",
        )

    @app.get("/thumbnails/{image_id}")
    async def thumbnail(image_id: str):
        db = _require_db()
        if isinstance(db, JSONResponse):
            return db
        try:
            record = db.by_id(image_id)
        except KeyError:
            return _error(404, f"no record {image_id!r}")
        path = db.image_root / record.path
        if not path.exists():
            return _error(404, f"image file for {image_id!r} not found")
        return FileResponse(path)

    return app
