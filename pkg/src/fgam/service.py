"""What-if serving layer: prediction, decomposition, and curve sweeps over
a loaded model, plus the feature schema for building clients.

Payloads are raw clinical units; standardization happens server-side. The
loaded model is an immutable snapshot shared by request handlers; reloading
swaps the snapshot between requests. Every response carries the model
file's version hash."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .explain import (
    StaticFeatureError,
    contributions_payload,
    curve_payload,
    predict_payload,
    schema_payload,
)
from .persistence import ModelBundle, PayloadError, UnknownLevelError, load_model
from .schema import SchemaError

log = logging.getLogger("fgam")

MAX_CURVE_POINTS = 1000


@dataclass
class ServeState:
    bundle: ModelBundle
    strict_categories: bool = False
    request_counts: dict[str, int] = field(default_factory=dict)

    def count(self, endpoint: str) -> None:
        self.request_counts[endpoint] = self.request_counts.get(endpoint, 0) + 1


def _error(status: int, message: str, fields: dict | None = None, version: str = ""):
    body = {"error": message, "model_version": version}
    if fields:
        body["fields"] = fields
    return JSONResponse(status_code=status, content=body)


async def _json_body(request: Request) -> dict:
    try:
        return json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise PayloadError({"body": f"invalid JSON: {exc.msg}"}) from None


def _validate_curve_request(body) -> tuple[dict, str, list | None, int]:
    problems = {}
    if not isinstance(body, dict):
        raise PayloadError({"body": "must be a JSON object"})
    feature = body.get("feature")
    if not isinstance(feature, str):
        problems["feature"] = "feature name (string) required"
    payload = body.get("payload")
    if not isinstance(payload, dict):
        problems["payload"] = "payload object required"
    grid = body.get("grid")
    if grid is not None:
        if (
            not isinstance(grid, list)
            or not grid
            or not all(isinstance(g, (int, float)) and not isinstance(g, bool) for g in grid)
        ):
            problems["grid"] = "grid must be a non-empty list of numbers"
        elif len(grid) > MAX_CURVE_POINTS:
            problems["grid"] = f"grid capped at {MAX_CURVE_POINTS} points"
    points = body.get("points", 50)
    if not isinstance(points, int) or isinstance(points, bool) or not 2 <= points <= MAX_CURVE_POINTS:
        problems["points"] = f"points must be an integer in [2, {MAX_CURVE_POINTS}]"
    if problems:
        raise PayloadError(problems)
    return payload, feature, grid, points


def create_app(
    bundle: ModelBundle,
    strict_categories: bool = False,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="fgam what-if service", docs_url=None, redoc_url=None)
    app.state.serve = ServeState(bundle=bundle, strict_categories=strict_categories)

    def state() -> ServeState:
        return app.state.serve

    @app.exception_handler(RequestValidationError)
    async def _on_validation_error(request, exc):
        return _error(400, "request validation failed", version=state().bundle.version_hash)

    @app.exception_handler(PayloadError)
    async def _on_payload_error(request, exc: PayloadError):
        return _error(400, "payload validation failed", exc.problems,
                      version=state().bundle.version_hash)

    @app.exception_handler(UnknownLevelError)
    async def _on_unknown_level(request, exc: UnknownLevelError):
        return _error(422, str(exc), {exc.feature: "unknown categorical level"},
                      version=state().bundle.version_hash)

    @app.exception_handler(StaticFeatureError)
    async def _on_static_feature(request, exc: StaticFeatureError):
        return _error(400, str(exc), {exc.feature: "not modifiable"},
                      version=state().bundle.version_hash)

    @app.exception_handler(SchemaError)
    async def _on_schema_error(request, exc: SchemaError):
        return _error(400, str(exc), version=state().bundle.version_hash)

    @app.get("/schema")
    async def get_schema():
        s = state()
        s.count("schema")
        body = schema_payload(s.bundle)
        body["model_version"] = s.bundle.version_hash
        return body

    @app.get("/health")
    async def get_health():
        s = state()
        return {
            "status": "ok",
            "model_version": s.bundle.version_hash,
            "request_counts": s.request_counts,
        }

    @app.post("/predict")
    async def post_predict(request: Request):
        s = state()
        s.count("predict")
        payload = await _json_body(request)
        body = predict_payload(s.bundle, payload, s.strict_categories)
        body["model_version"] = s.bundle.version_hash
        return body

    @app.post("/contributions")
    async def post_contributions(request: Request):
        s = state()
        s.count("contributions")
        payload = await _json_body(request)
        body = contributions_payload(s.bundle, payload, s.strict_categories)
        body["model_version"] = s.bundle.version_hash
        return body

    @app.post("/curve")
    async def post_curve(request: Request):
        s = state()
        s.count("curve")
        body = await _json_body(request)
        payload, feature, grid, points = _validate_curve_request(body)
        out = curve_payload(
            s.bundle, payload, feature, grid=grid, points=points,
            strict_categories=s.strict_categories,
        )
        out["model_version"] = s.bundle.version_hash
        return out

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def reload_model(app: FastAPI, path: str | Path) -> None:
    """Swap the served snapshot; in-flight requests keep the old one."""
    old = app.state.serve
    app.state.serve = ServeState(
        bundle=load_model(path), strict_categories=old.strict_categories
    )
    log.info("model reloaded from %s", path)


def create_app_from_file(
    path: str | Path, strict_categories: bool = False, ui_dir=None
) -> FastAPI:
    return create_app(load_model(path), strict_categories, ui_dir)
