"""Stateful shell: session lifecycle, HTTP API, persistence, CLI."""

from .service import (
    IdentificationInvalid,
    ServiceError,
    SessionBusy,
    SessionService,
    StaleIdentification,
    call_budget,
    replay_archive,
    verify_replay,
)
from .state import (
    GUIDANCE_DECK,
    FileSessionStore,
    GuidanceCard,
    IllegalTransition,
    SessionState,
    StorageError,
    canonical_json,
)

__all__ = [
    "IdentificationInvalid",
    "ServiceError",
    "SessionBusy",
    "SessionService",
    "StaleIdentification",
    "call_budget",
    "replay_archive",
    "verify_replay",
    "GUIDANCE_DECK",
    "FileSessionStore",
    "GuidanceCard",
    "IllegalTransition",
    "SessionState",
    "StorageError",
    "canonical_json",
]
