"""HTTP surface: JSON bodies, multipart image uploads, busy semantics."""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..analyze import AnalysisUnavailable, StageError, UnknownInsight
from ..clarify import ClarifyUnavailable
from ..gateway import TransportError
from ..mark_model import DuplicateShapeId
from ..policy_model import WireFormatError
from ..ripple import NoOpEdit
from ..vignette import TestUnavailable
from .service import (
    IdentificationInvalid,
    ServiceError,
    SessionBusy,
    SessionService,
    StaleIdentification,
)
from .state import IllegalTransition, StorageError


class CreateSessionBody(BaseModel):
    scenarioContext: str


class SketchBody(BaseModel):
    shapes: list[dict[str, Any]]


class ClarifyBody(BaseModel):
    message: str


class PatchPolicyBody(BaseModel):
    field: str
    value: str


class StageBody(BaseModel):
    target: str


class AcceptBody(BaseModel):
    accept: bool


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="sbac", version="0.1.0")
    app.state.service = service

    def fail(status: int, exc: Exception) -> HTTPException:
        return HTTPException(status_code=status, detail=str(exc))

    @app.exception_handler(SessionBusy)
    async def _busy(_request, exc):
        return JSONResponse(status_code=409, content={"detail": f"session busy: {exc}"})

    @app.post("/sessions")
    def create_session(body: CreateSessionBody) -> dict[str, Any]:
        state = service.create_session(body.scenarioContext)
        return service.session_view(state.session_id)

    @app.get("/sessions/{sid}")
    def get_session(sid: str) -> dict[str, Any]:
        try:
            return service.session_view(sid)
        except KeyError as exc:
            raise fail(404, exc)

    @app.get("/sessions/{sid}/sketch")
    def get_sketch(sid: str) -> dict[str, Any]:
        try:
            state = service.get(sid)
        except KeyError as exc:
            raise fail(404, exc)
        return {"shapes": [s.to_wire() for s in state.sketch_snapshot]}

    @app.put("/sessions/{sid}/sketch")
    def put_sketch(sid: str, body: SketchBody) -> dict[str, Any]:
        try:
            state = service.put_sketch(sid, body.shapes)
        except KeyError as exc:
            raise fail(404, exc)
        except (WireFormatError, DuplicateShapeId) as exc:
            raise fail(422, exc)
        return {"shapes": [s.to_wire() for s in state.sketch_snapshot]}

    @app.post("/sessions/{sid}/identify")
    async def identify(
        sid: str,
        raw: UploadFile = File(...),
        numbered: UploadFile = File(...),
    ) -> dict[str, Any]:
        raw_png = await raw.read()
        numbered_png = await numbered.read()
        try:
            result = service.identify(sid, raw_png, numbered_png)
        except KeyError as exc:
            raise fail(404, exc)
        except (ServiceError, DuplicateShapeId) as exc:
            raise fail(422, exc)
        except IdentificationInvalid as exc:
            raise fail(502, exc)
        except TransportError as exc:
            raise fail(502, exc)
        return result.to_wire()

    @app.post("/sessions/{sid}/analyze")
    async def analyze(sid: str, som: UploadFile = File(...)) -> dict[str, Any]:
        som_png = await som.read()
        try:
            return service.analyze(sid, som_png)
        except KeyError as exc:
            raise fail(404, exc)
        except StageError as exc:
            raise fail(409, exc)
        except (AnalysisUnavailable, TransportError) as exc:
            raise fail(502, exc)

    @app.post("/sessions/{sid}/insights/{iid}/clarify")
    def clarify(sid: str, iid: str, body: ClarifyBody) -> dict[str, Any]:
        try:
            return service.clarify(sid, iid, body.message)
        except UnknownInsight as exc:
            raise fail(404, exc)
        except KeyError as exc:
            raise fail(404, exc)
        except (ClarifyUnavailable, TransportError) as exc:
            raise fail(502, exc)

    @app.post("/sessions/{sid}/insights/{iid}/accept")
    def accept_insight(sid: str, iid: str) -> dict[str, Any]:
        try:
            return service.insight_state(sid, iid, "accept")
        except (UnknownInsight, KeyError) as exc:
            raise fail(404, exc)

    @app.post("/sessions/{sid}/insights/{iid}/dismiss")
    def dismiss_insight(sid: str, iid: str) -> dict[str, Any]:
        try:
            return service.insight_state(sid, iid, "dismiss")
        except (UnknownInsight, KeyError) as exc:
            raise fail(404, exc)

    @app.patch("/sessions/{sid}/policies/{pid}")
    def patch_policy(sid: str, pid: str, body: PatchPolicyBody) -> dict[str, Any]:
        try:
            return service.patch_policy(sid, pid, body.field, body.value).to_wire()
        except KeyError as exc:
            raise fail(404, exc)
        except (NoOpEdit, ServiceError, ValueError) as exc:
            raise fail(422, exc)

    @app.post("/sessions/{sid}/stage")
    def set_stage(sid: str, body: StageBody) -> dict[str, Any]:
        try:
            service.set_stage(sid, body.target)
        except KeyError as exc:
            raise fail(404, exc)
        except IllegalTransition as exc:
            raise fail(409, exc)
        except StaleIdentification as exc:
            raise fail(409, exc)
        except (TestUnavailable, TransportError) as exc:
            raise fail(502, exc)
        return service.session_view(sid)

    @app.post("/sessions/{sid}/test")
    def run_test(sid: str) -> dict[str, Any]:
        try:
            cards = service.run_test(sid)
        except KeyError as exc:
            raise fail(404, exc)
        except StageError as exc:
            raise fail(409, exc)
        except (TestUnavailable, TransportError) as exc:
            raise fail(502, exc)
        return {"vignettes": cards}

    @app.post("/sessions/{sid}/sketch-proposal")
    def sketch_proposal(sid: str, body: AcceptBody) -> dict[str, Any]:
        try:
            return service.sketch_proposal(sid, body.accept)
        except KeyError as exc:
            raise fail(404, exc)

    @app.post("/sessions/{sid}/shadow")
    def shadow(sid: str, body: AcceptBody) -> dict[str, Any]:
        try:
            return service.apply_shadow(sid, body.accept)
        except KeyError as exc:
            raise fail(404, exc)

    @app.get("/sessions/{sid}/export")
    def export_session(sid: str) -> dict[str, Any]:
        try:
            return service.export_session(sid)
        except KeyError as exc:
            raise fail(404, exc)
        except StorageError as exc:
            raise fail(500, exc)

    return app
