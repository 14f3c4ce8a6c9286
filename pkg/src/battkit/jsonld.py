"""JSON-LD export of protocols.

The emitted document embeds the canonical protocol body under an @context
that maps every term the body uses -- keys, step/termination kinds, and
unit names -- to its IRI from the pinned context map.  Closure is
mechanical: every key that does not start with "@" must appear in
@context (checked by :func:`context_closure_gaps`).
"""

from __future__ import annotations

import json
import re
import urllib.parse
from typing import Any

from .errors import MissingContextTerm
from .protocol import Protocol, protocol_to_dict
from .semantic import ContextMap

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")

__all__ = ["emit_protocol_jsonld", "context_closure_gaps"]

# Parameter names whose ontology grounding differs from their BCL spelling:
# "Capacity" is the cell's rated capacity.
_PARAMETER_ONTOLOGY_TERMS = {"Capacity": "RatedCapacity"}

PROTOCOL_IRI_BASE = "https://example.org/battkit/protocol/"


def _collect_terms(node: Any, used: set[str]) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            if not key.startswith("@"):
                used.add(key)
            if key in ("type", "unit", "@type") and isinstance(value, str):
                used.add(value)
            _collect_terms(value, used)
    elif isinstance(node, list):
        for item in node:
            _collect_terms(item, used)


def emit_protocol_jsonld(p: Protocol, ctx: ContextMap) -> str:
    """Emit a protocol as a JSON-LD document (UTF-8 text, 2-space indent).

    The document @id comes from ``p.id`` when present, otherwise a
    deterministic IRI is generated from the protocol name.  Raises
    :class:`MissingContextTerm` when the body uses a term the context map
    does not define (custom parameter names, unknown top-level keys).
    """
    body = protocol_to_dict(p)
    body.pop("id", None)
    # Parameters gain explicit value/unit objects so the quantities are
    # machine-interpretable.
    params = {}
    for name, param in p.parameters.items():
        entry: dict[str, Any] = {"value": param.value}
        if param.unit is not None:
            entry["unit"] = param.unit
        params[name] = entry
    body["parameters"] = params

    used: set[str] = {"CyclingProtocol"}
    _collect_terms(body, used)
    for name in p.parameters:
        term = _PARAMETER_ONTOLOGY_TERMS.get(name)
        if term is not None:
            used.add(term)

    context = {}
    for term in sorted(used):
        iri = ctx.resolve(term)
        if iri is None:
            raise MissingContextTerm(term)
        context[term] = iri

    doc: dict[str, Any] = {
        "@context": context,
        "@id": p.id or PROTOCOL_IRI_BASE + urllib.parse.quote(p.name, safe=""),
        "@type": "CyclingProtocol",
    }
    doc.update(body)
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def context_closure_gaps(doc: dict) -> list[str]:
    """Return every term used in the document body that neither starts with
    "@", nor is an absolute IRI, nor appears in the document's own @context
    (empty list = closed)."""
    context = doc.get("@context", {})
    used: set[str] = set()
    body = {k: v for k, v in doc.items() if k != "@context"}
    _collect_terms(body, used)
    return sorted(
        term for term in used
        if term not in context
        and not term.startswith("@")
        and not _SCHEME_RE.match(term)
    )
