"""Semantic validation of parsed protocols.

All findings land in a :class:`ValidationReport` rather than raising, so a
single pass reports every problem.  A report with zero errors means the
protocol can be resolved and executed; warnings flag suspicious but legal
constructs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .protocol import (
    RESERVED_PARAMETER_UNITS,
    InstructionBlock,
    Protocol,
    Step,
    StepKind,
    Termination,
    TerminationKind,
    Unit,
    ValueRef,
)

__all__ = ["Finding", "ValidationReport", "validate_protocol"]

# Error codes
EMPTY_NAME = "EMPTY_NAME"
CUTOFF_ORDER = "CUTOFF_ORDER"
NONPOSITIVE_CAPACITY = "NONPOSITIVE_CAPACITY"
UNKNOWN_PARAMETER_UNIT = "UNKNOWN_PARAMETER_UNIT"
RESERVED_UNIT_MISMATCH = "RESERVED_UNIT_MISMATCH"
INVALID_REPEAT = "INVALID_REPEAT"
EMPTY_SEQUENCE = "EMPTY_SEQUENCE"
STEP_UNIT = "STEP_UNIT"
ZERO_CURRENT = "ZERO_CURRENT"
MISSING_TERMINATION = "MISSING_TERMINATION"
REST_HAS_TERMINATION = "REST_HAS_TERMINATION"
REST_VALUE_NOT_LITERAL = "REST_VALUE_NOT_LITERAL"
REST_NEGATIVE_DURATION = "REST_NEGATIVE_DURATION"
TERMINATION_UNIT = "TERMINATION_UNIT"
NEGATIVE_TIME = "NEGATIVE_TIME"
UNRESOLVED_PARAMETER = "UNRESOLVED_PARAMETER"
UNKNOWN_KEY = "UNKNOWN_KEY"

# Warning codes
EMPTY_INSTRUCTIONS = "EMPTY_INSTRUCTIONS"
UNKNOWN_TOP_LEVEL_KEY = "UNKNOWN_TOP_LEVEL_KEY"
TERMINATION_ABOVE_UPPER = "TERMINATION_ABOVE_UPPER"
TERMINATION_BELOW_LOWER = "TERMINATION_BELOW_LOWER"
CRATE_WITHOUT_CAPACITY = "CRATE_WITHOUT_CAPACITY"
NO_TERMINATION_SAFEGUARD = "NO_TERMINATION_SAFEGUARD"

_TERMINATION_UNITS = {
    TerminationKind.VOLTAGE: Unit.VOLT,
    TerminationKind.ELECTRIC_CURRENT: Unit.AMPERE,
    TerminationKind.TIME: Unit.SECOND,
}


@dataclass(frozen=True)
class Finding:
    code: str
    path: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, code: str, path: str, message: str) -> None:
        self.errors.append(Finding(code, path, message))

    def warn(self, code: str, path: str, message: str) -> None:
        self.warnings.append(Finding(code, path, message))

    def codes(self) -> set[str]:
        return {f.code for f in self.errors} | {f.code for f in self.warnings}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [vars(f) for f in self.errors],
            "warnings": [vars(f) for f in self.warnings],
        }


def _try_resolve(ref: ValueRef, p: Protocol) -> float | None:
    if not ref.is_reference:
        return ref.literal
    param = p.parameters.get(ref.parameter)
    return None if param is None else param.value


def _check_reference(ref: ValueRef, path: str, p: Protocol, report: ValidationReport) -> None:
    if ref.is_reference and ref.parameter not in p.parameters:
        report.error(
            UNRESOLVED_PARAMETER,
            path,
            f"references undefined parameter {ref.parameter!r}",
        )


def _check_parameters(p: Protocol, report: ValidationReport) -> None:
    for name, param in p.parameters.items():
        path = f"parameters.{name}"
        reserved = RESERVED_PARAMETER_UNITS.get(name)
        if reserved is None:
            if param.unit is None:
                report.error(
                    UNKNOWN_PARAMETER_UNIT,
                    path,
                    f"parameter {name!r} is not reserved; give it as"
                    ' {"value": n, "unit": u}',
                )
        elif param.unit is not None and param.unit != reserved:
            report.error(
                RESERVED_UNIT_MISMATCH,
                path,
                f"reserved parameter {name!r} is fixed to unit {reserved!r},"
                f" got {param.unit!r}",
            )
    lower = p.parameters.get("LowerCutoffVoltage")
    upper = p.parameters.get("UpperCutoffVoltage")
    if lower is not None and upper is not None and not lower.value < upper.value:
        report.error(
            CUTOFF_ORDER,
            "parameters",
            f"LowerCutoffVoltage ({lower.value}) must be below"
            f" UpperCutoffVoltage ({upper.value})",
        )
    capacity = p.parameters.get("Capacity")
    if capacity is not None and capacity.value <= 0:
        report.error(
            NONPOSITIVE_CAPACITY,
            "parameters.Capacity",
            f"Capacity must be positive, got {capacity.value}",
        )


def _check_termination(
    term: Termination, path: str, p: Protocol, report: ValidationReport
) -> None:
    expected = _TERMINATION_UNITS[term.kind]
    if term.unit is not expected:
        report.error(
            TERMINATION_UNIT,
            path,
            f"{term.kind.value} termination must use unit"
            f" {expected.value!r}, got {term.unit.value!r}",
        )
    _check_reference(term.value, path, p, report)
    value = _try_resolve(term.value, p)
    if value is None:
        return
    if term.kind is TerminationKind.TIME and value < 0:
        report.error(NEGATIVE_TIME, path, f"time termination is negative ({value})")
    if term.kind is TerminationKind.VOLTAGE:
        upper = p.parameters.get("UpperCutoffVoltage")
        lower = p.parameters.get("LowerCutoffVoltage")
        if upper is not None and value > upper.value:
            report.warn(
                TERMINATION_ABOVE_UPPER,
                path,
                f"voltage termination {value} exceeds UpperCutoffVoltage"
                f" {upper.value}",
            )
        if lower is not None and value < lower.value:
            report.warn(
                TERMINATION_BELOW_LOWER,
                path,
                f"voltage termination {value} is below LowerCutoffVoltage"
                f" {lower.value}",
            )


def _check_step(step: Step, path: str, p: Protocol, report: ValidationReport) -> None:
    if step.kind is StepKind.REST:
        if step.unit is not Unit.SECOND:
            report.error(
                STEP_UNIT, path, f"Rest steps use unit 'Second', got {step.unit.value!r}"
            )
        if step.value.is_reference:
            report.error(
                REST_VALUE_NOT_LITERAL,
                path,
                "Rest duration must be a literal number of seconds",
            )
        elif step.value.literal < 0:
            report.error(
                REST_NEGATIVE_DURATION,
                path,
                f"Rest duration must be non-negative, got {step.value.literal}",
            )
        if step.terminations:
            report.error(
                REST_HAS_TERMINATION,
                f"{path}.termination[0]",
                "Rest steps encode their duration in 'value' and take no"
                " termination list",
            )
        return

    if step.kind is StepKind.ELECTRIC_CURRENT:
        if step.unit not in (Unit.CRATE, Unit.AMPERE):
            report.error(
                STEP_UNIT,
                path,
                "ElectricCurrent steps use unit 'CRate' or 'Ampere',"
                f" got {step.unit.value!r}",
            )
        if step.unit is Unit.CRATE and "Capacity" not in p.parameters:
            report.warn(
                CRATE_WITHOUT_CAPACITY,
                path,
                "CRate step needs the Capacity parameter; resolution will fail",
            )
        value = _try_resolve(step.value, p)
        if value is not None:
            capacity = p.parameters.get("Capacity")
            if step.unit is Unit.CRATE and capacity is not None:
                value = value * capacity.value
            if value == 0:
                report.error(
                    ZERO_CURRENT, path, "current resolves to exactly zero amperes"
                )
    elif step.unit is not Unit.VOLT:
        report.error(
            STEP_UNIT, path, f"Voltage steps use unit 'Volt', got {step.unit.value!r}"
        )

    _check_reference(step.value, path, p, report)

    if not step.terminations:
        report.error(
            MISSING_TERMINATION,
            path,
            f"{step.kind.value} steps need at least one termination",
        )
    kinds = {t.kind for t in step.terminations}
    if not kinds & {
        TerminationKind.VOLTAGE,
        TerminationKind.ELECTRIC_CURRENT,
        TerminationKind.TIME,
    }:
        report.warn(
            NO_TERMINATION_SAFEGUARD,
            path,
            "step has no voltage, current, or time termination to end it",
        )
    for i, term in enumerate(step.terminations):
        _check_termination(term, f"{path}.termination[{i}]", p, report)


def _check_block(
    block: InstructionBlock, path: str, p: Protocol, report: ValidationReport
) -> None:
    if block.repeat < 1:
        report.error(INVALID_REPEAT, path, f"repeat must be >= 1, got {block.repeat}")
    if not block.sequence:
        report.error(EMPTY_SEQUENCE, path, "instruction block has an empty sequence")
    for i, step in enumerate(block.sequence):
        _check_step(step, f"{path}.sequence[{i}]", p, report)


def validate_protocol(p: Protocol) -> ValidationReport:
    """Check every model invariant and return the full findings report.

    Never raises; an empty ``errors`` list means
    :func:`battkit.transform.resolve_quantities` will succeed (except for
    the CRate-without-Capacity case, which the report downgrades to a
    warning because the capacity may be supplied out of band).
    """
    report = ValidationReport()
    if not p.name:
        report.error(EMPTY_NAME, "name", "protocol name must be non-empty")
    _check_parameters(p, report)
    if not p.instructions:
        report.warn(EMPTY_INSTRUCTIONS, "instructions", "protocol has no instructions")
    for i, block in enumerate(p.instructions):
        _check_block(block, f"instructions[{i}]", p, report)
    for key in p.extras:
        report.warn(
            UNKNOWN_TOP_LEVEL_KEY, key, f"unknown top-level key {key!r} preserved"
        )
    for path, key in p.unknown_keys:
        report.error(UNKNOWN_KEY, f"{path}.{key}", f"unknown key {key!r}")
    return report
