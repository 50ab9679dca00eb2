"""Single choke point for model calls: templates, routing, transports, parsing."""

from .core import (
    CallKind,
    CallLog,
    CallRecord,
    ChatRequest,
    FixtureMismatch,
    GatewayTimeout,
    ImagePart,
    ImagePurpose,
    ModelTier,
    TextPart,
    TIER_BY_KIND,
    TransportError,
    TransportResult,
    invoke,
)
from .parsing import (
    AnalyzeParse,
    ClassifyParse,
    DeepResolutionParse,
    InsightRippleParse,
    NextAction,
    PolicyRippleParse,
    RawIntent,
    RealizeParse,
    SchemaError,
    SketchSyncParse,
    parse_structured,
    strip_code_fence,
)
from .templates import (
    MONOLITHIC_TEST,
    MissingPlaceholder,
    manifest,
    render_prompt,
    template_text,
    verify_manifest,
)
from .transports import (
    ENV_API_KEY,
    ENV_ENDPOINT,
    ENV_MODEL_FAST,
    ENV_MODEL_FRONTIER,
    Fixture,
    LiveConfig,
    LiveTransport,
    RecordingTransport,
    ReplayTransport,
    ScriptedTransport,
)

__all__ = [
    "CallKind",
    "CallLog",
    "CallRecord",
    "ChatRequest",
    "FixtureMismatch",
    "GatewayTimeout",
    "ImagePart",
    "ImagePurpose",
    "ModelTier",
    "TextPart",
    "TIER_BY_KIND",
    "TransportError",
    "TransportResult",
    "invoke",
    "AnalyzeParse",
    "ClassifyParse",
    "DeepResolutionParse",
    "InsightRippleParse",
    "NextAction",
    "PolicyRippleParse",
    "RawIntent",
    "RealizeParse",
    "SchemaError",
    "SketchSyncParse",
    "parse_structured",
    "strip_code_fence",
    "MONOLITHIC_TEST",
    "MissingPlaceholder",
    "manifest",
    "render_prompt",
    "template_text",
    "verify_manifest",
    "ENV_API_KEY",
    "ENV_ENDPOINT",
    "ENV_MODEL_FAST",
    "ENV_MODEL_FRONTIER",
    "Fixture",
    "LiveConfig",
    "LiveTransport",
    "RecordingTransport",
    "ReplayTransport",
    "ScriptedTransport",
]
