"""Prompt template assets: loading, checksum verification, and rendering.

Templates ship as versioned text files next to this package with a
manifest of sha256 checksums so tests catch accidental drift. Rendering
substitutes ``{{NAME}}`` placeholders and resolves two guard syntaxes the
assets use:

* ``[If <label>:] content`` keeps the rest of the line only when the
  card label matches (``risk or other`` is the catch-all).
* ``[For "<intent>" intent:]`` on its own line keeps the following
  paragraph (up to a blank line) only for that intent.
"""

from __future__ import annotations

import hashlib
import json
import re
from importlib import resources

from .core import CallKind

_IF_LINE_RE = re.compile(r"^\[If (?P<label>[^\]]+):\] ?(?P<content>.*)$")
_FOR_BLOCK_RE = re.compile(r"^\[For \"(?P<intent>[a-z]+)\" intent:\]$")
_PLACEHOLDER_RE = re.compile(r"\{\{([A-Z0-9_]+)\}\}")

# The re-identification call reuses the identification prompt.
_TEMPLATE_NAME_BY_KIND: dict[CallKind, str] = {
    kind: kind.value for kind in CallKind
}
_TEMPLATE_NAME_BY_KIND[CallKind.REIDENTIFICATION] = "mark_identification"

# Fallback template that is not tied to a call kind of its own.
MONOLITHIC_TEST = "monolithic_test"

_KNOWN_CARD_LABELS = {"ambiguity", "vignette", "conflict"}


class MissingPlaceholder(KeyError):
    def __init__(self, template: str, names: list[str]) -> None:
        super().__init__(f"{template}: missing context for {', '.join(sorted(names))}")
        self.template = template
        self.names = names


class TemplateDrift(RuntimeError):
    """A template asset no longer matches its manifest checksum."""


def _asset_text(name: str) -> str:
    return resources.files("sbac.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def template_text(template_id: CallKind | str) -> str:
    name = _TEMPLATE_NAME_BY_KIND[template_id] if isinstance(template_id, CallKind) else template_id
    return _asset_text(name)


def manifest() -> dict:
    raw = resources.files("sbac.prompts").joinpath("manifest.json").read_text(encoding="utf-8")
    return json.loads(raw)


def verify_manifest() -> list[str]:
    """Return the names of templates whose content drifted from the manifest."""
    drifted = []
    for name, entry in manifest()["templates"].items():
        digest = hashlib.sha256(_asset_text(name).encode("utf-8")).hexdigest()
        if digest != entry["sha256"]:
            drifted.append(name)
    return drifted


def _resolve_guards(template_name: str, text: str, context: dict[str, str]) -> str:
    lines = text.split("\n")
    out: list[str] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if_match = _IF_LINE_RE.match(line)
        if if_match:
            label = if_match.group("label")
            card_label = context.get("CARD_LABEL")
            if card_label is None:
                raise MissingPlaceholder(template_name, ["CARD_LABEL"])
            keep = (
                card_label == label
                if label in _KNOWN_CARD_LABELS
                else card_label not in _KNOWN_CARD_LABELS  # "risk or other"
            )
            if keep:
                out.append(if_match.group("content"))
            i += 1
            continue
        for_match = _FOR_BLOCK_RE.match(line)
        if for_match:
            intent = context.get("INTENT")
            if intent is None:
                raise MissingPlaceholder(template_name, ["INTENT"])
            keep = intent == for_match.group("intent")
            i += 1
            while i < len(lines) and lines[i].strip():
                if keep:
                    out.append(lines[i])
                i += 1
            if not keep and i < len(lines):
                i += 1  # also swallow the separating blank line
            continue
        out.append(line)
        i += 1
    return "\n".join(out)


def render_prompt(template_id: CallKind | str, context: dict[str, str] | None = None) -> str:
    """Render a template with every placeholder substituted.

    Pure: equal inputs give byte-identical output. Raises
    MissingPlaceholder when the context lacks a referenced name, and never
    leaves an unresolved ``{{...}}`` token in the output.
    """
    context = context or {}
    name = _TEMPLATE_NAME_BY_KIND[template_id] if isinstance(template_id, CallKind) else template_id
    text = _resolve_guards(name, _asset_text(name), context)
    missing = sorted({m.group(1) for m in _PLACEHOLDER_RE.finditer(text)} - set(context))
    if missing:
        raise MissingPlaceholder(name, missing)
    return _PLACEHOLDER_RE.sub(lambda m: context[m.group(1)], text)
