from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixtures as fx  # noqa: E402
from sbac.gateway import ScriptedTransport  # noqa: E402
from sbac.service import FileSessionStore, SessionService  # noqa: E402


@pytest.fixture
def store(tmp_path) -> FileSessionStore:
    return FileSessionStore(tmp_path / "sessions")


def make_service(store, script, **kwargs) -> SessionService:
    return SessionService(
        store=store,
        transport=ScriptedTransport(list(script)),
        vignette_k=fx.VIGNETTE_K,
        **kwargs,
    )


def drive_min_path(service: SessionService) -> str:
    state = service.create_session(fx.SCENARIO)
    sid = state.session_id
    service.put_sketch(sid, fx.SHAPES_WIRE)
    service.identify(sid, fx.PNG, fx.PNG)
    service.set_stage(sid, "analyze")
    service.analyze(sid, fx.PNG)
    service.identify(sid, fx.PNG, fx.PNG)
    service.set_stage(sid, "test")
    return sid


def drive_max_path(service: SessionService) -> str:
    state = service.create_session(fx.SCENARIO)
    sid = state.session_id
    service.put_sketch(sid, fx.SHAPES_WIRE)
    service.identify(sid, fx.PNG, fx.PNG)
    service.set_stage(sid, "analyze")
    service.analyze(sid, fx.PNG)
    service.clarify(sid, "ambiguity1", "Business hours are weekdays 9am-5pm.")
    service.patch_policy(sid, "policy1", fx.RENAME_FIELD, fx.RENAME_NEW)
    service.identify(sid, fx.PNG, fx.PNG)
    service.set_stage(sid, "test")
    return sid
