#!/usr/bin/env python3
"""Regenerate frontend/test/service-session.json from the golden session.

Run from the repository root after changing tests/fixtures.py:

    python3 tools/export_frontend_fixture.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import fixtures as fx  # noqa: E402
from conftest import drive_min_path, make_service  # noqa: E402
from sbac.service import FileSessionStore  # noqa: E402

OUT = ROOT / "frontend" / "test" / "service-session.json"


def build_document() -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        service = make_service(FileSessionStore(tmp), fx.min_path_script())
        sid = drive_min_path(service)
        view = service.session_view(sid)
        state = service.get(sid)
        # session ids are random; pin for a stable committed fixture
        view["sessionId"] = "fixture-session"
        return {
            "sessionView": view,
            "sketchShapes": [s.to_wire() for s in state.sketch_snapshot],
        }


def main() -> int:
    OUT.write_text(json.dumps(build_document(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
