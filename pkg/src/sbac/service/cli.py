"""Command-line entry points: serve, replay, oracle, fixtures."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..gateway import Fixture, LiveConfig, LiveTransport, verify_manifest
from ..policy_model import policy_from_wire
from ..ripple import describe_edit, reference_oracle
from ..vignette import enumerate_candidates, schemas_from_wire, select_greedy
from .service import SessionService, verify_replay
from .state import FileSessionStore


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbac", description="Sketch-based access control service")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP session API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--store-dir", default=None)
    serve.add_argument("--record-dir", default=None, help="record LLM fixtures under this directory")

    replay = sub.add_parser("replay", help="replay an exported session archive")
    replay.add_argument("archive", type=Path)
    replay.add_argument("--store-dir", default=None)
    replay.add_argument("--out", type=Path, default=None, help="write the replayed state here")

    oracle = sub.add_parser("oracle", help="run a deterministic oracle standalone")
    oracle_sub = oracle.add_subparsers(dest="oracle_kind", required=True)
    ripple = oracle_sub.add_parser("ripple", help="rename/text-edit propagation oracle")
    ripple.add_argument("input", type=Path, help="JSON: {edit: {...}, policies: [...]}")
    vignette = oracle_sub.add_parser("vignette", help="enumeration + greedy selection oracle")
    vignette.add_argument("input", type=Path, help="JSON: {schemas: [...], k: int}")

    fixtures = sub.add_parser("fixtures", help="fixture utilities")
    fixtures_sub = fixtures.add_subparsers(dest="fixtures_command", required=True)
    record = fixtures_sub.add_parser("record", help="serve with fixture recording enabled")
    record.add_argument("--dir", required=True)
    record.add_argument("--host", default="127.0.0.1")
    record.add_argument("--port", type=int, default=8400)
    record.add_argument("--store-dir", default=None)
    verify = fixtures_sub.add_parser("verify", help="validate a fixture directory and prompt assets")
    verify.add_argument("--dir", default=None)

    return parser


def _serve(host: str, port: int, store_dir: str | None, record_dir: str | None) -> int:
    import uvicorn

    from .http import create_app

    store = FileSessionStore(store_dir) if store_dir else None
    transport = LiveTransport(LiveConfig.from_env())
    service = SessionService(
        store=store,
        transport=transport,
        record_fixtures=record_dir is not None,
        fixture_dir=record_dir,
    )
    uvicorn.run(create_app(service), host=host, port=port)
    return 0


def _replay(archive_path: Path, store_dir: str | None, out: Path | None) -> int:
    archive = json.loads(archive_path.read_text(encoding="utf-8"))
    store = FileSessionStore(store_dir) if store_dir else FileSessionStore(archive_path.parent / "replayed-sessions")
    matched, state = verify_replay(archive, store)
    doc = state.to_wire()
    if out:
        out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"replayed session {state.session_id}: {len(state.call_log)} calls, "
          f"{len(state.policies)} policies, {len(state.vignettes)} vignettes")
    print("state match: " + ("MATCH" if matched else "MISMATCH"))
    return 0 if matched else 1


def _oracle_ripple(input_path: Path) -> int:
    doc = json.loads(input_path.read_text(encoding="utf-8"))
    edit_doc = doc["edit"]
    policies = [policy_from_wire(p, strict=False) for p in doc["policies"]]
    edit = describe_edit(
        edit_doc["policyNumber"], edit_doc["field"], edit_doc["oldValue"], edit_doc["newValue"]
    )
    result = reference_oracle(edit, policies)
    print(json.dumps(
        {
            "hasRipple": result.has_ripple,
            "summary": result.summary,
            "policies": [p.to_wire() for p in result.policies],
        },
        indent=2,
    ))
    return 0


def _oracle_vignette(input_path: Path) -> int:
    doc = json.loads(input_path.read_text(encoding="utf-8"))
    schemas = schemas_from_wire(doc["schemas"])
    k = int(doc.get("k", 6))
    candidates = enumerate_candidates(schemas)
    selected = select_greedy(candidates, k, schemas)
    print(json.dumps(
        {
            "candidateCount": len(candidates),
            "candidates": [c.to_wire() for c in candidates],
            "selectionOrder": [c.case_id for c in selected],
            "selected": [c.to_wire() for c in selected],
        },
        indent=2,
    ))
    return 0


def _fixtures_verify(fixture_dir: str | None) -> int:
    drifted = verify_manifest()
    if drifted:
        print("prompt template drift detected: " + ", ".join(drifted))
        return 1
    print("prompt templates match manifest")
    if fixture_dir:
        problems = []
        paths = sorted(Path(fixture_dir).rglob("*.json"))
        by_session: dict[Path, list[Fixture]] = {}
        for path in paths:
            fixture = Fixture.from_wire(json.loads(path.read_text(encoding="utf-8")))
            by_session.setdefault(path.parent, []).append(fixture)
        for parent, fixtures in by_session.items():
            indices = [f.index for f in sorted(fixtures, key=lambda f: f.index)]
            if indices != list(range(len(indices))):
                problems.append(f"{parent}: non-dense fixture indices {indices}")
        if problems:
            print("\n".join(problems))
            return 1
        print(f"checked {len(paths)} fixtures in {len(by_session)} session directories")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args.host, args.port, args.store_dir, args.record_dir)
    if args.command == "replay":
        return _replay(args.archive, args.store_dir, args.out)
    if args.command == "oracle":
        if args.oracle_kind == "ripple":
            return _oracle_ripple(args.input)
        return _oracle_vignette(args.input)
    if args.command == "fixtures":
        if args.fixtures_command == "record":
            return _serve(args.host, args.port, args.store_dir, args.dir)
        return _fixtures_verify(args.dir)
    return 2


if __name__ == "__main__":
    sys.exit(main())
