"""Parser behaviour: golden fixtures, structural errors, kind totality."""

import json

import pytest
from hypothesis import given, strategies as st

from battkit.errors import (
    DuplicateKeyError,
    InvalidRepeat,
    ParseError,
    ProtocolParseError,
    TypeMismatch,
    UnknownKind,
    UnknownUnit,
)
from battkit.protocol import (
    Parameter,
    StepKind,
    TerminationKind,
    Unit,
    ValueRef,
    parse_protocol,
)


def test_minimal_example_golden(minimal_protocol):
    p = minimal_protocol
    assert p.name == "MinimalExample"
    assert p.parameters == {
        "Capacity": Parameter(2.5, "AmpereHour"),
        "UpperCutoffVoltage": Parameter(4.2, "Volt"),
    }
    assert len(p.instructions) == 1
    (block,) = p.instructions
    assert block.repeat == 1 and block.name is None
    (step,) = block.sequence
    assert step.kind is StepKind.ELECTRIC_CURRENT
    assert step.value == ValueRef(literal=1)
    assert step.unit is Unit.CRATE
    (term,) = step.terminations
    assert term.kind is TerminationKind.VOLTAGE
    assert term.value == ValueRef(parameter="UpperCutoffVoltage")
    assert term.unit is Unit.VOLT


def test_cycle_life_golden(cycle_life_protocol):
    p = cycle_life_protocol
    assert p.name == "Cyclelifecondition"
    assert p.subject_of == "LG Chem INR18650 MJ1"
    assert p.id == "https://www.wikidata.org/wiki/Q120766894"
    assert p.citation == "Specification%20INR18650MJ1%2022.08.2014.pdf"
    assert list(p.parameters) == ["Capacity", "LowerCutoffVoltage", "UpperCutoffVoltage"]
    assert [p.parameters[k].value for k in p.parameters] == [3.4, 2.5, 4.2]
    first, second = p.instructions
    assert first.name == "HighDrainrateChargeDischargecondition"
    assert first.repeat == 400
    assert len(first.sequence) == 5
    assert [s.kind for s in first.sequence] == [
        StepKind.ELECTRIC_CURRENT,
        StepKind.VOLTAGE,
        StepKind.REST,
        StepKind.ELECTRIC_CURRENT,
        StepKind.REST,
    ]
    assert first.sequence[0].value == ValueRef(literal=1.5)
    assert first.sequence[3].value == ValueRef(literal=-4.0)
    assert first.sequence[2].value == ValueRef(literal=600)
    assert second.name == "cycle_401_reference_test"
    assert second.repeat == 1
    assert len(second.sequence) == 3
    assert second.sequence[0].unit is Unit.CRATE
    assert second.sequence[2].value == ValueRef(literal=-0.2)


def test_empty_instructions_document():
    p = parse_protocol('{"name":"Empty","parameters":{},"instructions":[]}')
    assert p.name == "Empty"
    assert p.parameters == {}
    assert p.instructions == ()


def test_malformed_json_reports_position():
    with pytest.raises(ParseError) as err:
        parse_protocol('{"name": "x",\n  "parameters": {,}\n}')
    assert err.value.line == 2
    assert err.value.column is not None


def test_unknown_step_kind():
    doc = {
        "name": "x",
        "instructions": [{"sequence": [{"type": "Hold", "value": 1, "unit": "Volt"}]}],
    }
    with pytest.raises(UnknownKind):
        parse_protocol(json.dumps(doc))


def test_unknown_termination_kind():
    doc = {
        "name": "x",
        "instructions": [{
            "sequence": [{
                "type": "Voltage", "value": 4.2, "unit": "Volt",
                "termination": [{"type": "Capacity", "value": 1, "unit": "Ampere"}],
            }]
        }],
    }
    with pytest.raises(UnknownKind):
        parse_protocol(json.dumps(doc))


def test_unknown_unit():
    doc = {
        "name": "x",
        "instructions": [{"sequence": [{"type": "Rest", "value": 1, "unit": "Minute"}]}],
    }
    with pytest.raises(UnknownUnit):
        parse_protocol(json.dumps(doc))


@pytest.mark.parametrize(
    "doc",
    [
        {"name": 7},
        {"name": "x", "parameters": {"Capacity": "big"}},
        {"name": "x", "parameters": []},
        {"name": "x", "instructions": [{"sequence": [{"type": "Rest", "value": True, "unit": "Second"}]}]},
        {"name": "x", "instructions": [{"sequence": "nope"}]},
        {"name": "x", "instructions": [{"sequence": [], "repeat": 1.5}]},
        {"name": "x", "instructions": [{"sequence": [{"type": "Rest", "value": 0, "unit": "Second", "termination": {}}]}]},
    ],
)
def test_type_mismatches(doc):
    with pytest.raises(TypeMismatch):
        parse_protocol(json.dumps(doc))


def test_missing_name_rejected():
    with pytest.raises(TypeMismatch):
        parse_protocol('{"parameters": {}}')


def test_repeat_below_one():
    doc = {"name": "x", "instructions": [{"sequence": [], "repeat": 0}]}
    with pytest.raises(InvalidRepeat):
        parse_protocol(json.dumps(doc))


def test_duplicate_parameter_names():
    text = '{"name":"x","parameters":{"Capacity": 1, "Capacity": 2}}'
    with pytest.raises(DuplicateKeyError):
        parse_protocol(text)


def test_unknown_top_level_keys_preserved():
    p = parse_protocol('{"name":"x","comment":"hello","instructions":[]}')
    assert p.extras == {"comment": "hello"}


def test_object_form_parameter():
    p = parse_protocol(
        '{"name":"x","parameters":{"PulseCurrent": {"value": 2, "unit": "Ampere"}}}'
    )
    assert p.parameters["PulseCurrent"] == Parameter(2, "Ampere")


def test_reserved_parameter_unit_alias_normalized():
    p = parse_protocol('{"name":"x","parameters":{"Capacity": {"value": 3, "unit": "Ah"}}}')
    assert p.parameters["Capacity"] == Parameter(3, "AmpereHour")


@given(kind=st.text(min_size=1, max_size=20))
def test_kind_totality_fuzz(kind):
    """Any unknown "type" string raises UnknownKind, never crashes."""
    doc = {
        "name": "x",
        "instructions": [{"sequence": [{"type": kind, "value": 1, "unit": "Volt"}]}],
    }
    try:
        p = parse_protocol(json.dumps(doc))
        assert kind in ("ElectricCurrent", "Voltage", "Rest")
        assert p.instructions[0].sequence[0].kind.value == kind
    except UnknownKind:
        assert kind not in ("ElectricCurrent", "Voltage", "Rest")
    except ProtocolParseError:
        pytest.fail("unexpected parse error class for a bad kind")
