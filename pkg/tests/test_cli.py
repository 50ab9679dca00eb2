from __future__ import annotations

import json

from sbac.service import FileSessionStore
from sbac.service.cli import main

import fixtures as fx
from conftest import drive_min_path, make_service


def test_oracle_ripple_verb(tmp_path, capsys):
    payload = {
        "edit": {"policyNumber": "policy1", "field": "resource", "oldValue": "Front Camera", "newValue": "Entrance Camera"},
        "policies": [fx.POLICY1, fx.POLICY2, fx.POLICY3],
    }
    path = tmp_path / "ripple.json"
    path.write_text(json.dumps(payload))
    assert main(["oracle", "ripple", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hasRipple"] is True
    assert out["policies"][0]["resource"] == "Entrance Camera"
    assert out["policies"][2]["description"] == "Visitors cannot view Entrance Camera"


def test_oracle_vignette_verb(tmp_path, capsys):
    payload = {"schemas": fx.DECOMPOSE_RESPONSE["schemas"], "k": 4}
    path = tmp_path / "vig.json"
    path.write_text(json.dumps(payload))
    assert main(["oracle", "vignette", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["candidateCount"] == 21
    assert len(out["selectionOrder"]) == 4


def test_replay_verb_matches(tmp_path, capsys):
    store = FileSessionStore(tmp_path / "record")
    service = make_service(store, fx.min_path_script(), record_fixtures=True)
    sid = drive_min_path(service)
    archive_path = tmp_path / "archive.json"
    archive_path.write_text(json.dumps(service.export_session(sid)))
    out_path = tmp_path / "replayed-state.json"
    code = main(["replay", str(archive_path), "--store-dir", str(tmp_path / "replay-store"), "--out", str(out_path)])
    assert code == 0
    assert "MATCH" in capsys.readouterr().out
    assert json.loads(out_path.read_text())["sessionId"] == sid


def test_replay_verb_detects_tampering(tmp_path, capsys):
    store = FileSessionStore(tmp_path / "record")
    service = make_service(store, fx.min_path_script(), record_fixtures=True)
    sid = drive_min_path(service)
    archive = service.export_session(sid)
    archive["state"]["scenarioContext"] = "tampered"
    archive_path = tmp_path / "archive.json"
    archive_path.write_text(json.dumps(archive))
    code = main(["replay", str(archive_path), "--store-dir", str(tmp_path / "replay-store")])
    assert code == 1
    assert "MISMATCH" in capsys.readouterr().out


def test_fixtures_verify_verb(tmp_path, capsys):
    store = FileSessionStore(tmp_path / "record")
    service = make_service(
        store, fx.min_path_script(), record_fixtures=True, fixture_dir=str(tmp_path / "fixture-dir")
    )
    drive_min_path(service)
    assert main(["fixtures", "verify", "--dir", str(tmp_path / "fixture-dir")]) == 0
    out = capsys.readouterr().out
    assert "prompt templates match manifest" in out
    assert "checked 5 fixtures" in out


def test_parser_covers_all_verbs():
    from sbac.service.cli import _build_parser

    parser = _build_parser()
    serve = parser.parse_args(["serve", "--port", "9000"])
    assert serve.command == "serve" and serve.port == 9000
    replay = parser.parse_args(["replay", "archive.json", "--out", "state.json"])
    assert replay.command == "replay"
    oracle = parser.parse_args(["oracle", "ripple", "in.json"])
    assert oracle.oracle_kind == "ripple"
    fixtures_cmd = parser.parse_args(["fixtures", "record", "--dir", "d"])
    assert fixtures_cmd.fixtures_command == "record"
