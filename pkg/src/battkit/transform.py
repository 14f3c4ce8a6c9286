"""Resolution of symbolic protocols into executable physical quantities.

Three consumers hang off the resolved form: the simulator (via
:func:`unroll`), external battery simulation packages (via
:func:`export_experiment_text`), and nothing else -- CRate units and
parameter references never survive past this module.

C-rate convention: 1C equals the rated capacity in ampere-hours expressed
as amperes, so a step of ``x`` CRate on a cell with Capacity ``Q`` Ah
draws ``x * Q`` amperes, sign preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MissingCapacity, ZeroCurrent
from .protocol import Protocol, StepKind, TerminationKind, Unit

__all__ = [
    "ResolvedTermination",
    "ResolvedStep",
    "ResolvedBlock",
    "ResolvedProtocol",
    "FlatStep",
    "resolve_quantities",
    "unroll",
    "export_experiment_text",
    "resolved_to_dict",
]


@dataclass(frozen=True)
class ResolvedTermination:
    kind: TerminationKind
    value: float
    unit: Unit


@dataclass(frozen=True)
class ResolvedStep:
    kind: StepKind
    value: float
    unit: Unit
    terminations: tuple[ResolvedTermination, ...] = ()


@dataclass(frozen=True)
class ResolvedBlock:
    sequence: tuple[ResolvedStep, ...]
    name: str | None = None
    repeat: int = 1


@dataclass(frozen=True)
class ResolvedProtocol:
    """A protocol with every reference substituted and every CRate
    converted to amperes; ``capacity_ah`` carries the Capacity parameter
    (None when the protocol declared none)."""

    name: str
    blocks: tuple[ResolvedBlock, ...]
    capacity_ah: float | None = None
    subject_of: str | None = None
    id: str | None = None
    citation: str | None = None


@dataclass(frozen=True)
class FlatStep:
    """One executable step instance; (block_index, iteration, step_index)
    in lexicographic order is the execution order."""

    block_index: int
    iteration: int
    step_index: int
    step: ResolvedStep


def resolve_quantities(p: Protocol) -> ResolvedProtocol:
    """Substitute parameter references and convert CRate values to amperes.

    Expects a protocol that validated without errors; raises
    :class:`MissingCapacity` when a CRate value exists without the Capacity
    parameter and :class:`ZeroCurrent` when a current step resolves to 0 A.
    """
    capacity = p.parameters.get("Capacity")
    capacity_ah = capacity.value if capacity is not None else None

    def to_amperes(value: float, unit: Unit, where: str) -> float:
        if unit is not Unit.CRATE:
            return value
        if capacity_ah is None:
            raise MissingCapacity(
                f"{where} uses CRate but the protocol has no Capacity parameter"
            )
        return value * capacity_ah

    blocks = []
    for bi, block in enumerate(p.instructions):
        steps = []
        for si, step in enumerate(block.sequence):
            where = f"instructions[{bi}].sequence[{si}]"
            value = step.value.resolve(p.parameters)
            unit = step.unit
            if step.kind is StepKind.ELECTRIC_CURRENT:
                value = to_amperes(value, unit, where)
                unit = Unit.AMPERE
                if value == 0:
                    raise ZeroCurrent(f"{where} resolves to zero amperes")
            terminations = tuple(
                ResolvedTermination(
                    kind=t.kind, value=t.value.resolve(p.parameters), unit=t.unit
                )
                for t in step.terminations
            )
            steps.append(
                ResolvedStep(
                    kind=step.kind, value=value, unit=unit, terminations=terminations
                )
            )
        blocks.append(
            ResolvedBlock(sequence=tuple(steps), name=block.name, repeat=block.repeat)
        )
    return ResolvedProtocol(
        name=p.name,
        blocks=tuple(blocks),
        capacity_ah=capacity_ah,
        subject_of=p.subject_of,
        id=p.id,
        citation=p.citation,
    )


def unroll(rp: ResolvedProtocol) -> list[FlatStep]:
    """Expand block repeats into the flat execution order.

    Output length is the sum over blocks of ``repeat * len(sequence)``.
    """
    flat: list[FlatStep] = []
    for bi, block in enumerate(rp.blocks):
        for iteration in range(block.repeat):
            for si, step in enumerate(block.sequence):
                flat.append(FlatStep(bi, iteration, si, step))
    return flat


def _fmt(x: float) -> str:
    """Shortest readable rendering with at least one decimal place."""
    s = f"{x:g}"
    if "e" not in s and "E" not in s and "." not in s:
        s += ".0"
    return s


_UNIT_SYMBOL = {Unit.AMPERE: "A", Unit.VOLT: "V", Unit.SECOND: "seconds"}


def _pick(step: ResolvedStep, kind: TerminationKind) -> ResolvedTermination | None:
    for term in step.terminations:
        if term.kind is kind:
            return term
    return None


def _step_line(step: ResolvedStep) -> str:
    if step.kind is StepKind.REST:
        return f"Rest for {_fmt(step.value)} seconds"

    if step.kind is StepKind.ELECTRIC_CURRENT:
        head = "Charge" if step.value > 0 else "Discharge"
        head += f" at {_fmt(abs(step.value))} A"
        primary = _pick(step, TerminationKind.VOLTAGE)
    else:
        head = f"Hold at {_fmt(step.value)} V"
        primary = _pick(step, TerminationKind.ELECTRIC_CURRENT)

    if primary is not None:
        return f"{head} until {_fmt(primary.value)} {_UNIT_SYMBOL[primary.unit]}"
    timed = _pick(step, TerminationKind.TIME)
    if timed is not None:
        return f"{head} for {_fmt(timed.value)} seconds"
    # Fall back to whatever termination exists (e.g. a current threshold
    # on a current step); validation warns about such constructs.
    if step.terminations:
        term = step.terminations[0]
        return f"{head} until {_fmt(term.value)} {_UNIT_SYMBOL[term.unit]}"
    return head


def export_experiment_text(rp: ResolvedProtocol) -> list[str]:
    """Render the protocol as one instruction string per step.

    Blocks with ``repeat > 1`` contribute a ``"Repeat N:"`` annotation line
    before their steps rather than being physically duplicated; use
    :func:`unroll` for the flat form.  Output is deterministic and suitable
    for feeding battery simulation packages that consume experiment text.
    """
    lines: list[str] = []
    for block in rp.blocks:
        if block.repeat > 1:
            lines.append(f"Repeat {block.repeat}:")
        for step in block.sequence:
            lines.append(_step_line(step))
    return lines


def resolved_to_dict(rp: ResolvedProtocol) -> dict:
    """JSON-ready form of a resolved protocol (used by the CLI)."""
    out: dict = {"name": rp.name}
    if rp.subject_of is not None:
        out["subjectOf"] = rp.subject_of
    if rp.id is not None:
        out["id"] = rp.id
    if rp.citation is not None:
        out["citation"] = rp.citation
    if rp.capacity_ah is not None:
        out["capacityAh"] = rp.capacity_ah
    out["instructions"] = [
        {
            "sequence": [
                {
                    "type": s.kind.value,
                    "value": s.value,
                    "unit": s.unit.value,
                    **(
                        {
                            "termination": [
                                {"type": t.kind.value, "value": t.value, "unit": t.unit.value}
                                for t in s.terminations
                            ]
                        }
                        if s.terminations
                        else {}
                    ),
                }
                for s in b.sequence
            ],
            **({"name": b.name} if b.name is not None else {}),
            **({"repeat": b.repeat} if b.repeat != 1 else {}),
        }
        for b in rp.blocks
    ]
    return out
