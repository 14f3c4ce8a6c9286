"""Battery cycler language (BCL) document model, parser, and serializer.

BCL protocols are JSON documents describing a cycling procedure as a list
of instruction blocks, each holding a sequence of steps with termination
conditions and an optional repeat count::

    {
      "name": "MinimalExample",
      "parameters": {"Capacity": 2.5, "UpperCutoffVoltage": 4.2},
      "instructions": [{
        "sequence": [{
          "type": "ElectricCurrent", "value": 1, "unit": "CRate",
          "termination": [
            {"type": "Voltage", "value": "UpperCutoffVoltage", "unit": "Volt"}
          ]
        }]
      }]
    }

Sign convention, shared by every module: positive current charges the
cell, negative current discharges it.

Parsing is strict about structure (unknown step/block keys are recorded
and flagged by validation; wrong JSON types raise) but tolerant about
unknown *top-level* keys, which are preserved verbatim so annotated
documents round-trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .errors import (
    DuplicateKeyError,
    InvalidRepeat,
    MissingParameter,
    ParseError,
    TypeMismatch,
    UnknownKind,
    UnknownUnit,
)

__all__ = [
    "StepKind",
    "Unit",
    "TerminationKind",
    "ValueRef",
    "Parameter",
    "Termination",
    "Step",
    "InstructionBlock",
    "Protocol",
    "RESERVED_PARAMETER_UNITS",
    "parse_protocol",
    "load_protocol",
    "serialize_protocol",
    "protocol_to_dict",
]


class StepKind(str, Enum):
    ELECTRIC_CURRENT = "ElectricCurrent"
    VOLTAGE = "Voltage"
    REST = "Rest"


class Unit(str, Enum):
    CRATE = "CRate"
    AMPERE = "Ampere"
    VOLT = "Volt"
    SECOND = "Second"


class TerminationKind(str, Enum):
    VOLTAGE = "Voltage"
    ELECTRIC_CURRENT = "ElectricCurrent"
    # Toolkit extension: end a step after a fixed duration in seconds.
    TIME = "Time"


# Reserved parameter names carry fixed units and may be written as bare
# numbers; anything else must use the {"value": n, "unit": u} object form.
RESERVED_PARAMETER_UNITS: dict[str, str] = {
    "Capacity": "AmpereHour",
    "LowerCutoffVoltage": "Volt",
    "UpperCutoffVoltage": "Volt",
}

# Accepted spellings for the reserved units, normalized on input.
_UNIT_ALIASES = {"Ah": "AmpereHour", "V": "Volt", "s": "Second"}

_STEP_KEYS = frozenset({"type", "value", "unit", "termination"})
_TERMINATION_KEYS = frozenset({"type", "value", "unit"})
_BLOCK_KEYS = frozenset({"sequence", "name", "repeat"})
_TOP_KEYS = ("name", "subjectOf", "id", "citation", "parameters", "instructions")


@dataclass(frozen=True)
class ValueRef:
    """A numeric literal or a reference to a named protocol parameter."""

    literal: float | None = None
    parameter: str | None = None

    def __post_init__(self):
        if (self.literal is None) == (self.parameter is None):
            raise ValueError("ValueRef takes exactly one of literal/parameter")

    @property
    def is_reference(self) -> bool:
        return self.parameter is not None

    def resolve(self, parameters: Mapping[str, "Parameter"]) -> float:
        """Return the literal, or look the reference up in ``parameters``."""
        if self.parameter is None:
            return self.literal  # type: ignore[return-value]
        try:
            return parameters[self.parameter].value
        except KeyError:
            raise MissingParameter(
                f"value references undefined parameter {self.parameter!r}"
            ) from None


@dataclass(frozen=True)
class Parameter:
    """A named protocol constant; unit is None only for bare non-reserved
    entries, which validation rejects."""

    value: float
    unit: str | None = None


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    value: ValueRef
    unit: Unit


@dataclass(frozen=True)
class Step:
    kind: StepKind
    value: ValueRef
    unit: Unit
    terminations: tuple[Termination, ...] = ()


@dataclass(frozen=True)
class InstructionBlock:
    sequence: tuple[Step, ...]
    name: str | None = None
    repeat: int = 1


@dataclass(frozen=True)
class Protocol:
    """Parsed BCL document.

    ``extras`` holds unknown top-level keys verbatim (forward
    compatibility); ``unknown_keys`` records unrecognized keys seen inside
    blocks, steps, or terminations as (path, key) pairs for validation to
    flag.  ``unknown_keys`` does not take part in equality.
    """

    name: str
    parameters: dict[str, Parameter] = field(default_factory=dict)
    instructions: tuple[InstructionBlock, ...] = ()
    subject_of: str | None = None
    id: str | None = None
    citation: str | None = None
    extras: dict[str, Any] = field(default_factory=dict)
    unknown_keys: tuple[tuple[str, str], ...] = field(
        default=(), compare=False, repr=False
    )


# ---------------------------------------------------------------------------
# parsing


def _pairs_hook(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise DuplicateKeyError(f"duplicate key {key!r} in the same object")
        seen.add(key)
    return dict(pairs)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise TypeMismatch(f"missing required key {key!r}", path=path)
    return obj[key]


def _require_number(value: Any, path: str) -> float:
    if not _is_number(value):
        raise TypeMismatch(f"expected a number, got {type(value).__name__}", path=path)
    return value


def _require_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise TypeMismatch(f"expected a string, got {type(value).__name__}", path=path)
    return value


def _parse_value_ref(value: Any, path: str) -> ValueRef:
    if _is_number(value):
        return ValueRef(literal=value)
    if isinstance(value, str):
        return ValueRef(parameter=value)
    raise TypeMismatch(
        f"expected a number or parameter name, got {type(value).__name__}", path=path
    )


def _parse_step_kind(value: Any, path: str) -> StepKind:
    name = _require_str(value, path)
    try:
        return StepKind(name)
    except ValueError:
        raise UnknownKind(f"unknown step type {name!r}", path=path) from None


def _parse_termination_kind(value: Any, path: str) -> TerminationKind:
    name = _require_str(value, path)
    try:
        return TerminationKind(name)
    except ValueError:
        raise UnknownKind(f"unknown termination type {name!r}", path=path) from None


def _parse_unit(value: Any, path: str) -> Unit:
    name = _require_str(value, path)
    try:
        return Unit(name)
    except ValueError:
        raise UnknownUnit(f"unknown unit {name!r}", path=path) from None


def _parse_termination(obj: Any, path: str, unknown: list) -> Termination:
    if not isinstance(obj, dict):
        raise TypeMismatch("termination entry must be an object", path=path)
    for key in obj:
        if key not in _TERMINATION_KEYS:
            unknown.append((path, key))
    kind = _parse_termination_kind(_require(obj, "type", path), f"{path}.type")
    value = _parse_value_ref(_require(obj, "value", path), f"{path}.value")
    unit = _parse_unit(_require(obj, "unit", path), f"{path}.unit")
    return Termination(kind=kind, value=value, unit=unit)


def _parse_step(obj: Any, path: str, unknown: list) -> Step:
    if not isinstance(obj, dict):
        raise TypeMismatch("step must be an object", path=path)
    for key in obj:
        if key not in _STEP_KEYS:
            unknown.append((path, key))
    kind = _parse_step_kind(_require(obj, "type", path), f"{path}.type")
    value = _parse_value_ref(_require(obj, "value", path), f"{path}.value")
    unit = _parse_unit(_require(obj, "unit", path), f"{path}.unit")
    terminations: list[Termination] = []
    if "termination" in obj:
        raw = obj["termination"]
        if not isinstance(raw, list):
            raise TypeMismatch("termination must be a list", path=f"{path}.termination")
        for i, item in enumerate(raw):
            terminations.append(
                _parse_termination(item, f"{path}.termination[{i}]", unknown)
            )
    return Step(kind=kind, value=value, unit=unit, terminations=tuple(terminations))


def _parse_block(obj: Any, path: str, unknown: list) -> InstructionBlock:
    if not isinstance(obj, dict):
        raise TypeMismatch("instruction block must be an object", path=path)
    for key in obj:
        if key not in _BLOCK_KEYS:
            unknown.append((path, key))
    raw_seq = _require(obj, "sequence", path)
    if not isinstance(raw_seq, list):
        raise TypeMismatch("sequence must be a list", path=f"{path}.sequence")
    steps = tuple(
        _parse_step(item, f"{path}.sequence[{i}]", unknown)
        for i, item in enumerate(raw_seq)
    )
    name = None
    if "name" in obj:
        name = _require_str(obj["name"], f"{path}.name")
    repeat = 1
    if "repeat" in obj:
        raw = obj["repeat"]
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise TypeMismatch("repeat must be an integer", path=f"{path}.repeat")
        if raw < 1:
            raise InvalidRepeat(f"repeat must be >= 1, got {raw}", path=f"{path}.repeat")
        repeat = raw
    return InstructionBlock(sequence=steps, name=name, repeat=repeat)


def _parse_parameter(name: str, raw: Any, path: str) -> Parameter:
    reserved_unit = RESERVED_PARAMETER_UNITS.get(name)
    if _is_number(raw):
        return Parameter(value=raw, unit=reserved_unit)
    if isinstance(raw, dict):
        value = _require_number(_require(raw, "value", path), f"{path}.value")
        unit = _require_str(_require(raw, "unit", path), f"{path}.unit")
        unit = _UNIT_ALIASES.get(unit, unit)
        return Parameter(value=value, unit=unit)
    raise TypeMismatch(
        "parameter must be a number or a {value, unit} object", path=path
    )


def parse_protocol(text: str) -> Protocol:
    """Parse a UTF-8 JSON protocol document into a :class:`Protocol`.

    Structural problems raise a :class:`~battkit.errors.ProtocolParseError`
    subclass; semantic problems (bad references, unit misuse, ...) are left
    for :func:`battkit.validate.validate_protocol` to report.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_pairs_hook)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise TypeMismatch("protocol document must be a JSON object", path="$")

    name = _require_str(_require(doc, "name", "name"), "name")
    subject_of = _require_str(doc["subjectOf"], "subjectOf") if "subjectOf" in doc else None
    proto_id = _require_str(doc["id"], "id") if "id" in doc else None
    citation = _require_str(doc["citation"], "citation") if "citation" in doc else None

    parameters: dict[str, Parameter] = {}
    if "parameters" in doc:
        raw_params = doc["parameters"]
        if not isinstance(raw_params, dict):
            raise TypeMismatch("parameters must be an object", path="parameters")
        for pname, raw in raw_params.items():
            parameters[pname] = _parse_parameter(pname, raw, f"parameters.{pname}")

    unknown: list[tuple[str, str]] = []
    blocks: list[InstructionBlock] = []
    if "instructions" in doc:
        raw_blocks = doc["instructions"]
        if not isinstance(raw_blocks, list):
            raise TypeMismatch("instructions must be a list", path="instructions")
        for i, item in enumerate(raw_blocks):
            blocks.append(_parse_block(item, f"instructions[{i}]", unknown))

    extras = {k: v for k, v in doc.items() if k not in _TOP_KEYS}
    return Protocol(
        name=name,
        parameters=parameters,
        instructions=tuple(blocks),
        subject_of=subject_of,
        id=proto_id,
        citation=citation,
        extras=extras,
        unknown_keys=tuple(unknown),
    )


def load_protocol(path) -> Protocol:
    """Read and parse a protocol file."""
    with open(path, encoding="utf-8") as fh:
        return parse_protocol(fh.read())


# ---------------------------------------------------------------------------
# serialization


def _value_ref_to_json(ref: ValueRef):
    return ref.parameter if ref.is_reference else ref.literal


def _termination_to_dict(term: Termination) -> dict:
    return {
        "type": term.kind.value,
        "value": _value_ref_to_json(term.value),
        "unit": term.unit.value,
    }


def _step_to_dict(step: Step) -> dict:
    out: dict[str, Any] = {
        "type": step.kind.value,
        "value": _value_ref_to_json(step.value),
        "unit": step.unit.value,
    }
    if step.terminations:
        out["termination"] = [_termination_to_dict(t) for t in step.terminations]
    return out


def _block_to_dict(block: InstructionBlock) -> dict:
    out: dict[str, Any] = {"sequence": [_step_to_dict(s) for s in block.sequence]}
    if block.name is not None:
        out["name"] = block.name
    if block.repeat != 1:
        out["repeat"] = block.repeat
    return out


def _parameter_to_json(name: str, param: Parameter):
    # Reserved parameters print as bare numbers (their unit is implied);
    # everything else keeps the explicit object form.
    if name in RESERVED_PARAMETER_UNITS or param.unit is None:
        return param.value
    return {"value": param.value, "unit": param.unit}


def protocol_to_dict(p: Protocol) -> dict:
    """Canonical JSON-ready form with the fixed document key order."""
    out: dict[str, Any] = {"name": p.name}
    if p.subject_of is not None:
        out["subjectOf"] = p.subject_of
    if p.id is not None:
        out["id"] = p.id
    if p.citation is not None:
        out["citation"] = p.citation
    out["parameters"] = {
        name: _parameter_to_json(name, param) for name, param in p.parameters.items()
    }
    out["instructions"] = [_block_to_dict(b) for b in p.instructions]
    for key, value in p.extras.items():
        out[key] = value
    return out


def serialize_protocol(p: Protocol) -> str:
    """Emit canonical BCL JSON: fixed key order, 2-space indent, LF endings.

    Numbers keep their parsed type, so integers stay integers and floats
    print in shortest round-trip form.  ``parse_protocol`` of the output
    compares equal to ``p``.
    """
    return json.dumps(protocol_to_dict(p), indent=2, ensure_ascii=False) + "\n"
