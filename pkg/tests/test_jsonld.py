"""JSON-LD emission: context closure, pinned ontology IRI, @id handling."""

import json

import pytest

from battkit.errors import MissingContextTerm
from battkit.jsonld import context_closure_gaps, emit_protocol_jsonld
from battkit.protocol import Protocol, parse_protocol
from battkit.semantic import cell_record_to_jsonld

RATED_CAPACITY_IRI = (
    "https://w3id.org/emmo/domain/electrochemistry"
    "#electrochemistry_9b3b4668_0795_4a35_9965_2af383497a26"
)


def test_minimal_document_closure(minimal_protocol, ctx):
    doc = json.loads(emit_protocol_jsonld(minimal_protocol, ctx))
    assert context_closure_gaps(doc) == []


def test_rated_capacity_iri_pinned(minimal_protocol, ctx):
    doc = json.loads(emit_protocol_jsonld(minimal_protocol, ctx))
    assert doc["@context"]["RatedCapacity"] == RATED_CAPACITY_IRI
    assert doc["@context"]["Capacity"] == RATED_CAPACITY_IRI


def test_explicit_id_becomes_document_id(cycle_life_protocol, ctx):
    doc = json.loads(emit_protocol_jsonld(cycle_life_protocol, ctx))
    assert doc["@id"] == "https://www.wikidata.org/wiki/Q120766894"
    assert "id" not in doc
    assert context_closure_gaps(doc) == []


def test_generated_id_is_deterministic(minimal_protocol, ctx):
    first = emit_protocol_jsonld(minimal_protocol, ctx)
    second = emit_protocol_jsonld(minimal_protocol, ctx)
    assert first == second
    assert json.loads(first)["@id"] == "https://example.org/battkit/protocol/MinimalExample"


def test_empty_instructions_protocol(ctx):
    doc = json.loads(emit_protocol_jsonld(Protocol(name="Empty"), ctx))
    assert doc["instructions"] == []
    assert context_closure_gaps(doc) == []


def test_step_kinds_and_units_covered(cycle_life_protocol, ctx):
    doc = json.loads(emit_protocol_jsonld(cycle_life_protocol, ctx))
    for term in ("ElectricCurrent", "Voltage", "Rest", "Ampere", "Volt",
                 "Second", "CRate", "CyclingProtocol"):
        assert term in doc["@context"], term


def test_body_preserves_protocol_content(cycle_life_protocol, ctx):
    doc = json.loads(emit_protocol_jsonld(cycle_life_protocol, ctx))
    assert doc["name"] == "Cyclelifecondition"
    assert doc["subjectOf"] == "LG Chem INR18650 MJ1"
    assert doc["parameters"]["Capacity"] == {"value": 3.4, "unit": "AmpereHour"}
    assert doc["instructions"][0]["repeat"] == 400


def test_custom_parameter_missing_from_context(ctx):
    p = parse_protocol(
        '{"name":"x","parameters":{"Taper": {"value": 0.1, "unit": "Ampere"}},'
        '"instructions":[]}'
    )
    with pytest.raises(MissingContextTerm) as err:
        emit_protocol_jsonld(p, ctx)
    assert err.value.term == "Taper"


def test_cell_document_closure(cell_records, ctx):
    for record in cell_records:
        doc = json.loads(cell_record_to_jsonld(record, ctx))
        assert context_closure_gaps(doc) == []
        assert doc["@id"] == record.id


def test_closure_checker_detects_gaps():
    doc = {"@context": {"name": "https://schema.org/name"}, "name": "x", "oops": 1}
    assert context_closure_gaps(doc) == ["oops"]
