"""Ontology context handling, cell datasheet records, and triple expansion.

The context map is a pinned, vendored term -> IRI table (no ontology is
fetched at runtime).  Cell records are JSON-LD documents, one cell per
file, whose keys resolve through the context; they expand into RDF-style
triples for the graph store and collapse back losslessly.

Placeholder IRIs live under https://example.org/battkit/; swapping real
ontology IRIs in is a one-file edit to ``data/context.json``.
"""

from __future__ import annotations

import json
import re
import urllib.parse
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

from .errors import (
    AmbiguousSubject,
    BadCapacity,
    BadIri,
    BadVoltageWindow,
    ConflictingField,
    IncompleteContext,
    MissingContextTerm,
    MissingId,
    NTriplesError,
    RecordError,
)

__all__ = [
    "Iri",
    "StringLiteral",
    "NumberLiteral",
    "Term",
    "Triple",
    "ContextMap",
    "CellRecord",
    "RDF_TYPE",
    "load_context",
    "load_default_context",
    "default_context_path",
    "normalize_doi",
    "parse_cell_record",
    "load_cell_record",
    "load_cells_dir",
    "cell_record_to_jsonld",
    "cell_record_to_triples",
    "triples_to_cell_record",
    "triples_to_ntriples",
    "parse_ntriples",
    "term_to_ntriples",
]

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD_DOUBLE = "http://www.w3.org/2001/XMLSchema#double"
EXTENSION_NS = "https://example.org/battkit/ext#"

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")

REQUIRED_TERMS = (
    "RatedCapacity",
    "Manufacturer",
    "PositiveElectrode",
    "NegativeElectrode",
    "LowerCutoffVoltage",
    "UpperCutoffVoltage",
    "CRate",
    "Ampere",
    "Volt",
    "Second",
)

_UNIT_TERMS = ("CRate", "Ampere", "Volt", "Second", "AmpereHour", "Celsius")


# ---------------------------------------------------------------------------
# RDF terms


@dataclass(frozen=True)
class Iri:
    value: str


@dataclass(frozen=True)
class StringLiteral:
    value: str


@dataclass(frozen=True)
class NumberLiteral:
    """Numeric literal; ``unit`` is the IRI of its unit of measure, or None
    for a plain number."""

    value: float
    unit: str | None = None


Term = Union[Iri, StringLiteral, NumberLiteral]


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: Term


# ---------------------------------------------------------------------------
# context map


@dataclass(frozen=True)
class ContextMap:
    """Pinned term -> IRI mapping grounding document keys in the ontology."""

    entries: dict[str, str]
    unit_entries: dict[str, str] = field(default_factory=dict)

    def resolve(self, term: str) -> str | None:
        return self.entries.get(term)

    def require(self, term: str) -> str:
        iri = self.entries.get(term)
        if iri is None:
            raise MissingContextTerm(term)
        return iri


def _check_iri(term: str, iri) -> None:
    if not isinstance(iri, str):
        raise BadIri(f"context entry {term!r} must map to a string")
    # JSON-LD keywords ("@type", "@id") are legal aliasing targets.
    if iri.startswith("@"):
        return
    if not _SCHEME_RE.match(iri):
        raise BadIri(f"context entry {term!r} maps to non-absolute IRI {iri!r}")


def load_context(path) -> ContextMap:
    """Load and verify a context file (a flat JSON object of term -> IRI)."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise BadIri("context file must be a JSON object of term -> IRI")
    for term, iri in raw.items():
        _check_iri(term, iri)
    for term in REQUIRED_TERMS:
        if term not in raw:
            raise IncompleteContext(term)
    units = {t: raw[t] for t in _UNIT_TERMS if t in raw}
    return ContextMap(entries=dict(raw), unit_entries=units)


def default_context_path() -> Path:
    return Path(str(resources.files("battkit").joinpath("data/context.json")))


def load_default_context() -> ContextMap:
    return load_context(default_context_path())


# ---------------------------------------------------------------------------
# cell records


def normalize_doi(doi: str) -> str:
    doi = doi.strip().lower()
    for prefix in ("https://doi.org/", "http://doi.org/", "doi:"):
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
    return doi


@dataclass(frozen=True)
class CellRecord:
    """Structured content of one cell datasheet.

    DOIs are normalized (lower-case, resolver prefix stripped),
    de-duplicated, and sorted on construction.  ``extensions`` holds
    unknown document keys so no datasheet information is dropped.
    """

    id: str
    manufacturer: str
    product_name: str
    rated_capacity_ah: float
    lower_cutoff_v: float
    upper_cutoff_v: float
    temp_min_c: float | None = None
    temp_max_c: float | None = None
    positive_material: str | None = None
    negative_material: str | None = None
    citation: str | None = None
    paper_dois: tuple[str, ...] = ()
    extensions: tuple[tuple[str, Union[str, float]], ...] = ()

    def __post_init__(self):
        if not self.id:
            raise MissingId("cell record needs a non-empty @id")
        if not isinstance(self.rated_capacity_ah, (int, float)) or self.rated_capacity_ah <= 0:
            raise BadCapacity(
                f"rated capacity must be a positive number, got {self.rated_capacity_ah!r}"
            )
        if not self.lower_cutoff_v < self.upper_cutoff_v:
            raise BadVoltageWindow(
                f"lower cutoff {self.lower_cutoff_v} must be below upper"
                f" cutoff {self.upper_cutoff_v}"
            )
        dois = tuple(sorted({normalize_doi(d) for d in self.paper_dois}))
        object.__setattr__(self, "paper_dois", dois)
        object.__setattr__(self, "extensions", tuple(self.extensions))


# field name -> (context term, unit term or None); order fixes triple order.
_NUMERIC_FIELDS = (
    ("rated_capacity_ah", "RatedCapacity", "AmpereHour"),
    ("lower_cutoff_v", "LowerCutoffVoltage", "Volt"),
    ("upper_cutoff_v", "UpperCutoffVoltage", "Volt"),
    ("temp_min_c", "MinimumTemperature", "Celsius"),
    ("temp_max_c", "MaximumTemperature", "Celsius"),
)
_MATERIAL_FIELDS = (
    ("positive_material", "PositiveElectrode"),
    ("negative_material", "NegativeElectrode"),
)

# Accepted unit spellings per canonical unit term.
_UNIT_SPELLINGS = {
    "AmpereHour": {"AmpereHour", "Ah"},
    "Volt": {"Volt", "V"},
    "Celsius": {"Celsius", "degC", "DegreeCelsius"},
}


def _read_quantity(raw, key: str, unit_term: str) -> float:
    if isinstance(raw, bool):
        raise RecordError(f"{key}: expected a number, got a boolean")
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, dict) and "value" in raw:
        value = raw["value"]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise RecordError(f"{key}.value must be a number")
        unit = raw.get("unit")
        if unit is not None and unit not in _UNIT_SPELLINGS[unit_term]:
            raise RecordError(
                f"{key}: expected unit {unit_term!r}, got {unit!r}"
            )
        return value
    raise RecordError(f"{key} must be a number or a {{value, unit}} object")


def parse_cell_record(text: str, ctx: ContextMap) -> CellRecord:
    """Parse one JSON-LD cell document against the pinned context.

    Keys are matched through the context map by IRI, so a document may use
    any term that resolves to the right ontology entry.  Unknown keys are
    kept as extensions rather than dropped.  The document's own embedded
    @context, if any, is ignored; the pinned context is authoritative.
    """
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise RecordError("cell record must be a JSON object")
    if "@id" not in doc or not isinstance(doc["@id"], str) or not doc["@id"]:
        raise MissingId("cell record has no @id")

    field_iri = {}
    for fname, term, _unit in _NUMERIC_FIELDS:
        field_iri[ctx.require(term)] = fname
    for fname, term in _MATERIAL_FIELDS:
        field_iri[ctx.require(term)] = fname
    field_iri[ctx.require("Manufacturer")] = "manufacturer"
    field_iri[ctx.require("ProductName")] = "product_name"
    field_iri[ctx.require("citation")] = "citation"
    field_iri[ctx.require("paperDois")] = "paper_dois"

    values: dict[str, object] = {}
    extensions: list[tuple[str, Union[str, float]]] = []
    for key, raw in doc.items():
        if key.startswith("@"):
            continue
        iri = ctx.resolve(key) or (key if _SCHEME_RE.match(key) else None)
        fname = field_iri.get(iri) if iri else None
        if fname is None:
            if isinstance(raw, str) or (
                isinstance(raw, (int, float)) and not isinstance(raw, bool)
            ):
                extensions.append((key, raw))
            else:
                extensions.append((key, json.dumps(raw, sort_keys=True)))
            continue
        if fname == "paper_dois":
            if not isinstance(raw, list) or not all(isinstance(d, str) for d in raw):
                raise RecordError(f"{key} must be a list of DOI strings")
            values[fname] = tuple(raw)
        elif fname in ("manufacturer", "product_name", "citation",
                       "positive_material", "negative_material"):
            if not isinstance(raw, str):
                raise RecordError(f"{key} must be a string")
            values[fname] = raw
        else:
            unit_term = next(u for f, _t, u in _NUMERIC_FIELDS if f == fname)
            values[fname] = _read_quantity(raw, key, unit_term)

    if "rated_capacity_ah" not in values:
        raise BadCapacity("cell record declares no rated capacity")
    if "lower_cutoff_v" not in values or "upper_cutoff_v" not in values:
        raise BadVoltageWindow("cell record needs both cutoff voltages")
    for required in ("manufacturer", "product_name"):
        if required not in values:
            raise RecordError(f"cell record is missing {required!r}")

    return CellRecord(id=doc["@id"], extensions=tuple(extensions), **values)


def load_cell_record(path, ctx: ContextMap) -> CellRecord:
    with open(path, encoding="utf-8") as fh:
        return parse_cell_record(fh.read(), ctx)


def load_cells_dir(path, ctx: ContextMap) -> list[CellRecord]:
    """Load every ``*.json`` file in a directory, sorted by filename."""
    records = []
    for file in sorted(Path(path).glob("*.json")):
        records.append(load_cell_record(file, ctx))
    return records


def cell_record_to_jsonld(r: CellRecord, ctx: ContextMap) -> str:
    """Emit the record as a self-contained JSON-LD document whose @context
    covers every non-@ key it uses."""
    body: dict[str, object] = {"@id": r.id, "@type": "BatteryCell"}
    used = {"BatteryCell"}
    body["Manufacturer"] = r.manufacturer
    body["ProductName"] = r.product_name
    used.update(("Manufacturer", "ProductName"))
    for fname, term, unit_term in _NUMERIC_FIELDS:
        value = getattr(r, fname)
        if value is None:
            continue
        body[term] = {"value": value, "unit": unit_term}
        used.update((term, unit_term, "value", "unit"))
    for fname, term in _MATERIAL_FIELDS:
        value = getattr(r, fname)
        if value is not None:
            body[term] = value
            used.add(term)
    if r.citation is not None:
        body["citation"] = r.citation
        used.add("citation")
    if r.paper_dois:
        body["paperDois"] = list(r.paper_dois)
        used.add("paperDois")
    for key, value in r.extensions:
        body[key] = value
        if ctx.resolve(key) is None and not _SCHEME_RE.match(key):
            raise MissingContextTerm(key)
        used.add(key)

    context = {}
    for term in sorted(used):
        if _SCHEME_RE.match(term):
            continue  # full-IRI keys need no mapping
        context[term] = ctx.require(term)
    doc = {"@context": context}
    doc.update(body)
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _ext_predicate(key: str, ctx: ContextMap) -> str:
    iri = ctx.resolve(key)
    if iri is not None and not iri.startswith("@"):
        return iri
    if _SCHEME_RE.match(key):
        return key
    return EXTENSION_NS + urllib.parse.quote(key, safe="")


def cell_record_to_triples(r: CellRecord, ctx: ContextMap) -> list[Triple]:
    """Expand a record into its fixed, ordered triple set.

    Mapping: one identity triple, one manufacturer triple, one product-name
    triple, one numeric triple per numeric field present (carrying the unit
    IRI), one triple per electrode material, one per DOI; plus a citation
    triple and extension triples when those exist.  For records without
    citation or extensions the count is
    ``3 + #numeric_fields + #materials + #DOIs``.
    """
    s = r.id
    triples = [Triple(s, RDF_TYPE, Iri(ctx.require("BatteryCell")))]
    triples.append(Triple(s, ctx.require("Manufacturer"), StringLiteral(r.manufacturer)))
    triples.append(Triple(s, ctx.require("ProductName"), StringLiteral(r.product_name)))
    for fname, term, unit_term in _NUMERIC_FIELDS:
        value = getattr(r, fname)
        if value is not None:
            triples.append(
                Triple(s, ctx.require(term), NumberLiteral(value, ctx.require(unit_term)))
            )
    for fname, term in _MATERIAL_FIELDS:
        value = getattr(r, fname)
        if value is not None:
            triples.append(Triple(s, ctx.require(term), StringLiteral(value)))
    if r.citation is not None:
        triples.append(Triple(s, ctx.require("citation"), StringLiteral(r.citation)))
    for doi in r.paper_dois:
        triples.append(Triple(s, ctx.require("paperDois"), StringLiteral(doi)))
    for key, value in sorted(r.extensions):
        obj: Term
        if isinstance(value, str):
            obj = StringLiteral(value)
        else:
            obj = NumberLiteral(value)
        triples.append(Triple(s, _ext_predicate(key, ctx), obj))
    return triples


def _reverse_context(ctx: ContextMap) -> dict[str, str]:
    reverse: dict[str, str] = {}
    for term, iri in ctx.entries.items():
        if not iri.startswith("@") and iri not in reverse:
            reverse[iri] = term
    return reverse


def triples_to_cell_record(triples: Iterable[Triple], ctx: ContextMap) -> CellRecord:
    """Inverse of :func:`cell_record_to_triples`.

    Requires exactly one identity triple; rejects multi-subject sets and
    conflicting values for single-valued fields.
    """
    triples = list(triples)
    cell_class = ctx.require("BatteryCell")
    identities = [
        t for t in triples
        if t.predicate == RDF_TYPE and t.object == Iri(cell_class)
    ]
    if len(identities) != 1:
        raise AmbiguousSubject(
            f"expected exactly one cell identity triple, found {len(identities)}"
        )
    subject = identities[0].subject
    if any(t.subject != subject for t in triples):
        raise AmbiguousSubject("triple set spans multiple subjects")

    by_field: dict[str, str] = {}
    for fname, term, _unit in _NUMERIC_FIELDS:
        by_field[ctx.require(term)] = fname
    for fname, term in _MATERIAL_FIELDS:
        by_field[ctx.require(term)] = fname
    by_field[ctx.require("Manufacturer")] = "manufacturer"
    by_field[ctx.require("ProductName")] = "product_name"
    by_field[ctx.require("citation")] = "citation"
    doi_predicate = ctx.require("paperDois")

    values: dict[str, object] = {}
    dois: list[str] = []
    extensions: list[tuple[str, Union[str, float]]] = []
    reverse = _reverse_context(ctx)
    for t in triples:
        if t is identities[0]:
            continue
        if t.predicate == doi_predicate:
            if not isinstance(t.object, StringLiteral):
                raise RecordError("DOI triples must carry string literals")
            dois.append(t.object.value)
            continue
        fname = by_field.get(t.predicate)
        if fname is None:
            key = reverse.get(t.predicate)
            if key is None:
                if t.predicate.startswith(EXTENSION_NS):
                    key = urllib.parse.unquote(t.predicate[len(EXTENSION_NS):])
                else:
                    key = t.predicate
            extensions.append((key, t.object.value))
            continue
        value = t.object.value
        if fname in values and values[fname] != value:
            raise ConflictingField(
                f"field {fname!r} has conflicting values"
                f" {values[fname]!r} and {value!r}"
            )
        values[fname] = value

    if "rated_capacity_ah" not in values:
        raise BadCapacity("triple set declares no rated capacity")
    if "lower_cutoff_v" not in values or "upper_cutoff_v" not in values:
        raise BadVoltageWindow("triple set needs both cutoff voltages")
    return CellRecord(
        id=subject,
        paper_dois=tuple(dois),
        extensions=tuple(sorted(extensions)),
        **values,  # type: ignore[arg-type]
    )


# ---------------------------------------------------------------------------
# N-Triples I/O


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            pair = text[i:i + 2]
            if pair in _UNESCAPES:
                out.append(_UNESCAPES[pair])
                i += 2
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def _number_repr(value: float) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def term_to_ntriples(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, StringLiteral):
        return f'"{_escape(term.value)}"'
    datatype = term.unit or XSD_DOUBLE
    return f'"{_number_repr(term.value)}"^^<{datatype}>'


def triples_to_ntriples(triples: Iterable[Triple]) -> str:
    """One triple per line, LF endings, in the given order."""
    lines = [
        f"<{t.subject}> <{t.predicate}> {term_to_ntriples(t.object)} ."
        for t in triples
    ]
    return "".join(line + "\n" for line in lines)


_LINE_RE = re.compile(
    r'^<([^<>\s]+)>\s+<([^<>\s]+)>\s+(.+?)\s*\.\s*$'
)
_TYPED_RE = re.compile(r'^"(.*)"\^\^<([^<>\s]+)>$', re.DOTALL)
_PLAIN_RE = re.compile(r'^"(.*)"$', re.DOTALL)
_IRI_RE = re.compile(r'^<([^<>\s]+)>$')


def _parse_object(text: str, lineno: int) -> Term:
    m = _IRI_RE.match(text)
    if m:
        return Iri(m.group(1))
    m = _TYPED_RE.match(text)
    if m:
        raw, datatype = m.groups()
        try:
            value = float(_unescape(raw))
        except ValueError:
            raise NTriplesError(
                f"line {lineno}: non-numeric typed literal {raw!r}"
            ) from None
        return NumberLiteral(value, None if datatype == XSD_DOUBLE else datatype)
    m = _PLAIN_RE.match(text)
    if m:
        return StringLiteral(_unescape(m.group(1)))
    raise NTriplesError(f"line {lineno}: cannot parse object {text!r}")


def parse_ntriples(text: str) -> list[Triple]:
    triples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise NTriplesError(f"line {lineno}: not an N-Triples statement")
        subject, predicate, obj = m.groups()
        triples.append(Triple(subject, predicate, _parse_object(obj, lineno)))
    return triples
