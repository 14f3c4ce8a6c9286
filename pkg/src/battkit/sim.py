"""Deterministic protocol execution against a reference cell model.

The model is a zeroth-order equivalent circuit: an open-circuit voltage
curve over state of charge plus a series resistance.  Step semantics:

* ElectricCurrent (CC): current fixed, terminal voltage is
  ``ocv(soc) + i * r0``; SOC moves linearly.  A Voltage termination fires
  at the first crossing in the direction the current implies (rising for
  charge, falling for discharge).
* Voltage (CV): terminal voltage pinned at the setpoint, current follows
  ``(v_set - ocv(soc)) / r0``; needs ``r0 > 0``.  An ElectricCurrent
  termination fires once ``|i| <= |threshold|``.  SOC advances by an
  implicit trapezoid update, so the sampled currents integrate exactly to
  the SOC change.
* Rest: zero current for the step's duration.

Terminations on one step combine with OR; the first to fire ends the
step.  Event times are located by bisection between the last two samples
to within ``event_tol_s``, and the trace keeps a row on each side of the
threshold.  A step that would push SOC past 0 or 1 ends with a SOC_BOUND
event; one that outlives ``max_step_duration_s`` ends with StepTimeout.
Capacity fades linearly per completed block-iteration.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .errors import (
    CapacityDepleted,
    InvalidConfig,
    InvalidModel,
    NoDischarge,
    SingularHold,
    UnknownBlock,
)
from .protocol import StepKind, TerminationKind
from .transform import ResolvedProtocol, ResolvedStep

__all__ = [
    "CellModel",
    "SimConfig",
    "SimTrace",
    "TraceRow",
    "SimEvent",
    "CycleSummary",
    "build_reference_model",
    "simulate",
    "cycle_summary",
    "capacity_check",
    "trace_to_csv",
    "events_to_csv",
    "EVENT_VOLTAGE",
    "EVENT_CURRENT",
    "EVENT_TIME",
    "EVENT_SOC_BOUND",
    "EVENT_STEP_TIMEOUT",
]

EVENT_VOLTAGE = "Voltage"
EVENT_CURRENT = "ElectricCurrent"
EVENT_TIME = "Time"
EVENT_SOC_BOUND = "SOC_BOUND"
EVENT_STEP_TIMEOUT = "StepTimeout"


@dataclass(frozen=True)
class CellModel:
    """Equivalent-circuit cell: OCV(SOC) table plus series resistance.

    ``ocv_table`` is a piecewise-linear map of (soc, volts) breakpoints,
    SOC strictly increasing, voltage non-decreasing.  Effective capacity
    after ``k`` completed block-iterations is
    ``capacity_ah * (1 - fade_per_cycle * k)``, floored at zero.
    """

    capacity_ah: float
    ocv_table: tuple[tuple[float, float], ...]
    r0_ohm: float = 0.0
    fade_per_cycle: float = 0.0
    _socs: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _segments: tuple[tuple[float, float, float, float], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if not self.capacity_ah > 0:
            raise InvalidModel(f"capacity must be positive, got {self.capacity_ah}")
        if self.r0_ohm < 0:
            raise InvalidModel(f"series resistance must be >= 0, got {self.r0_ohm}")
        if self.fade_per_cycle < 0:
            raise InvalidModel(f"fade must be >= 0, got {self.fade_per_cycle}")
        table = tuple((float(s), float(v)) for s, v in self.ocv_table)
        if len(table) < 2:
            raise InvalidModel("OCV table needs at least 2 breakpoints")
        for (s0, v0), (s1, v1) in zip(table, table[1:]):
            if not s1 > s0:
                raise InvalidModel("OCV breakpoint SOCs must be strictly increasing")
            if v1 < v0:
                raise InvalidModel("OCV must be non-decreasing in SOC")
        # (lo, hi, intercept, slope) per segment; edge segments extend
        # linearly so bisection probes just past the table stay defined.
        segments = []
        for (s0, v0), (s1, v1) in zip(table, table[1:]):
            slope = (v1 - v0) / (s1 - s0)
            segments.append((s0, s1, v0 - slope * s0, slope))
        object.__setattr__(self, "ocv_table", table)
        object.__setattr__(self, "_socs", tuple(s for s, _ in table[1:-1]))
        object.__setattr__(self, "_segments", tuple(segments))

    def ocv(self, soc: float) -> float:
        _lo, _hi, a, b = self._segments[bisect_right(self._socs, soc)]
        return a + b * soc

    def effective_capacity(self, completed_cycles: int) -> float:
        return max(self.capacity_ah * (1.0 - self.fade_per_cycle * completed_cycles), 0.0)


def build_reference_model(
    capacity_ah: float,
    v_min: float,
    v_max: float,
    r0_ohm: float = 0.0,
    fade_per_cycle: float = 0.0,
) -> CellModel:
    """Two-breakpoint model with OCV linear from v_min at SOC 0 to v_max
    at SOC 1."""
    if not v_min < v_max:
        raise InvalidModel(f"need v_min < v_max, got {v_min} >= {v_max}")
    return CellModel(
        capacity_ah=capacity_ah,
        ocv_table=((0.0, v_min), (1.0, v_max)),
        r0_ohm=r0_ohm,
        fade_per_cycle=fade_per_cycle,
    )


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 1.0
    event_tol_s: float = 1e-3
    max_step_duration_s: float = 86400.0
    initial_soc: float = 0.0

    def __post_init__(self):
        if not self.dt_s > 0:
            raise InvalidConfig(f"dt_s must be positive, got {self.dt_s}")
        if not self.event_tol_s > 0:
            raise InvalidConfig(f"event_tol_s must be positive, got {self.event_tol_s}")
        if not self.event_tol_s < self.dt_s:
            raise InvalidConfig("event_tol_s must be smaller than dt_s")
        if not self.max_step_duration_s > 0:
            raise InvalidConfig("max_step_duration_s must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise InvalidConfig(f"initial_soc must be in [0, 1], got {self.initial_soc}")


class TraceRow(NamedTuple):
    t_s: float
    current_a: float
    voltage_v: float
    soc: float
    block: int
    iteration: int
    step: int


class SimEvent(NamedTuple):
    t_s: float
    block: int
    iteration: int
    step: int
    kind: str


class CycleSummary(NamedTuple):
    block: int
    iteration: int
    charge_ah_in: float
    discharge_ah_out: float


@dataclass
class SimTrace:
    rows: list[TraceRow] = field(default_factory=list)
    events: list[SimEvent] = field(default_factory=list)
    per_cycle: list[CycleSummary] = field(default_factory=list)
    block_names: tuple[str | None, ...] = ()


# ---------------------------------------------------------------------------
# step execution

# A probe advances the state from the last accepted sample by delta seconds
# and reports (soc, current, voltage); fired() maps that state to the event
# kind it triggers, or None.
_State = tuple[float, float, float]


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def _bound_event(soc: float, current: float) -> str | None:
    if current > 0 and soc >= 1.0:
        return EVENT_SOC_BOUND
    if current < 0 and soc <= 0.0:
        return EVENT_SOC_BOUND
    return None


def _earliest_time_termination(step: ResolvedStep) -> float | None:
    times = [t.value for t in step.terminations if t.kind is TerminationKind.TIME]
    return min(times) if times else None


def _march(
    trace: SimTrace,
    t0: float,
    cfg: SimConfig,
    ident: tuple[int, int, int],
    probe: Callable[[float, float], _State],
    fired: Callable[[_State], str | None],
    soc0: float,
    time_end: float | None,
) -> tuple[float, float]:
    """Drive one step from t0/soc0 to its end; returns (t_end, soc_end)."""
    state0 = probe(soc0, 0.0)
    if not trace.rows and t0 == 0.0:
        trace.rows.append(TraceRow(t0, state0[1], state0[2], state0[0], *ident))

    kind0 = fired(state0)
    if kind0 is not None:
        trace.events.append(SimEvent(t0, *ident, kind0))
        return t0, soc0

    if time_end is not None and time_end <= cfg.max_step_duration_s:
        stop_elapsed, stop_kind = time_end, EVENT_TIME
    else:
        stop_elapsed, stop_kind = cfg.max_step_duration_s, EVENT_STEP_TIMEOUT
    if stop_elapsed <= 0.0:
        trace.events.append(SimEvent(t0, *ident, stop_kind))
        return t0, soc0

    elapsed = 0.0
    soc = soc0
    while True:
        remaining = stop_elapsed - elapsed
        last = remaining <= cfg.dt_s
        h = remaining if last else cfg.dt_s
        candidate = probe(soc, h)
        kind = fired(candidate)
        if kind is not None:
            lo, hi, hi_state = _locate(probe, fired, soc, h, cfg.event_tol_s)
            if lo > 0.0:
                lo_state = probe(soc, lo)
                trace.rows.append(
                    TraceRow(t0 + elapsed + lo, lo_state[1], lo_state[2],
                             _clamp01(lo_state[0]), *ident)
                )
            end_soc = _clamp01(hi_state[0])
            t_end = t0 + elapsed + hi
            trace.rows.append(TraceRow(t_end, hi_state[1], hi_state[2], end_soc, *ident))
            trace.events.append(SimEvent(t_end, *ident, fired(hi_state)))
            return t_end, end_soc
        t_next = t0 + stop_elapsed if last else t0 + elapsed + h
        trace.rows.append(
            TraceRow(t_next, candidate[1], candidate[2], _clamp01(candidate[0]), *ident)
        )
        if last:
            trace.events.append(SimEvent(t_next, *ident, stop_kind))
            return t_next, _clamp01(candidate[0])
        elapsed += h
        soc = candidate[0]


def _locate(probe, fired, soc, h, tol):
    """Bisect the earliest firing time within (0, h] from the last sample."""
    lo, hi = 0.0, h
    hi_state = probe(soc, hi)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # float resolution exhausted
        mid_state = probe(soc, mid)
        if fired(mid_state) is not None:
            hi, hi_state = mid, mid_state
        else:
            lo = mid
    return lo, hi, hi_state


def _run_current_step(trace, step, t0, soc0, q, model, cfg, ident):
    i = step.value
    r0 = model.r0_ohm
    rate = i / (3600.0 * q)

    def probe(soc_from: float, delta: float) -> _State:
        soc = soc_from + rate * delta
        return soc, i, model.ocv(soc) + i * r0

    rising = i > 0

    def fired(state: _State) -> str | None:
        soc, cur, v = state
        for term in step.terminations:
            if term.kind is TerminationKind.VOLTAGE:
                if (rising and v >= term.value) or (not rising and v <= term.value):
                    return EVENT_VOLTAGE
            elif term.kind is TerminationKind.ELECTRIC_CURRENT:
                if abs(cur) <= abs(term.value):
                    return EVENT_CURRENT
        return _bound_event(soc, cur)

    return _march(trace, t0, cfg, ident, probe, fired, soc0,
                  _earliest_time_termination(step))


def _run_voltage_step(trace, step, t0, soc0, q, model, cfg, ident):
    if model.r0_ohm <= 0.0:
        raise SingularHold(
            "constant-voltage hold needs a positive series resistance"
        )
    v_set = step.value
    r0 = model.r0_ohm
    segments = model._segments

    def advance(soc_from: float, h: float) -> float:
        # Implicit trapezoid on dSOC/dt = (v_set - ocv(soc)) / (r0 * 3600 * q);
        # ocv is piecewise linear, so solve segment by segment.  The map is
        # strictly increasing in soc, so exactly one segment is consistent.
        c = h / (2.0 * 3600.0 * q)
        base = soc_from + c * (v_set - model.ocv(soc_from)) / r0
        last = len(segments) - 1
        for idx, (lo, hi, a, b) in enumerate(segments):
            s = (base + c * (v_set - a) / r0) / (1.0 + c * b / r0)
            if (idx == 0 or s >= lo) and (idx == last or s <= hi):
                return s
        return s  # unreachable for a well-formed table

    def probe(soc_from: float, delta: float) -> _State:
        soc = advance(soc_from, delta)
        return soc, (v_set - model.ocv(soc)) / r0, v_set

    def fired(state: _State) -> str | None:
        soc, cur, _v = state
        for term in step.terminations:
            if term.kind is TerminationKind.ELECTRIC_CURRENT:
                if abs(cur) <= abs(term.value):
                    return EVENT_CURRENT
        return _bound_event(soc, cur)

    return _march(trace, t0, cfg, ident, probe, fired, soc0,
                  _earliest_time_termination(step))


def _run_rest_step(trace, step, t0, soc0, q, model, cfg, ident):
    def probe(soc_from: float, delta: float) -> _State:
        return soc_from, 0.0, model.ocv(soc_from)

    duration = step.value
    if duration > cfg.max_step_duration_s:
        return _march(trace, t0, cfg, ident, probe, lambda s: None, soc0, None)
    return _march(trace, t0, cfg, ident, probe, lambda s: None, soc0, duration)


_RUNNERS = {
    StepKind.ELECTRIC_CURRENT: _run_current_step,
    StepKind.VOLTAGE: _run_voltage_step,
    StepKind.REST: _run_rest_step,
}


def simulate(rp: ResolvedProtocol, model: CellModel, cfg: SimConfig | None = None) -> SimTrace:
    """Execute every flat step of ``rp`` in order and return the full trace.

    Pure function of its inputs: identical (protocol, model, config) give
    bit-identical traces.  Voltage terminations on Voltage (hold) steps
    never fire, since the held voltage cannot cross a threshold.
    """
    cfg = cfg or SimConfig()
    trace = SimTrace(block_names=tuple(b.name for b in rp.blocks))
    t = 0.0
    soc = cfg.initial_soc
    completed = 0
    for bi, block in enumerate(rp.blocks):
        for iteration in range(block.repeat):
            q = model.effective_capacity(completed)
            if q <= 0.0:
                raise CapacityDepleted(
                    f"effective capacity reached zero after {completed} cycles"
                )
            for si, step in enumerate(block.sequence):
                runner = _RUNNERS[step.kind]
                t, soc = runner(trace, step, t, soc, q, model, cfg, (bi, iteration, si))
            completed += 1
    trace.per_cycle = cycle_summary(trace)
    return trace


# ---------------------------------------------------------------------------
# bookkeeping over traces


def cycle_summary(trace: SimTrace) -> list[CycleSummary]:
    """Charge in / discharge out per (block, iteration), in ampere-hours.

    Trapezoidal integration of the positive and negative parts of the
    current over each group's own rows.
    """
    out: list[CycleSummary] = []
    key: tuple[int, int] | None = None
    prev: TraceRow | None = None
    charge = discharge = 0.0
    for row in trace.rows:
        row_key = (row.block, row.iteration)
        if row_key != key:
            if key is not None:
                out.append(CycleSummary(key[0], key[1], charge / 3600.0, discharge / 3600.0))
            key, prev, charge, discharge = row_key, row, 0.0, 0.0
            continue
        dt = row.t_s - prev.t_s
        charge += 0.5 * (max(prev.current_a, 0.0) + max(row.current_a, 0.0)) * dt
        discharge += 0.5 * (max(-prev.current_a, 0.0) + max(-row.current_a, 0.0)) * dt
        prev = row
    if key is not None:
        out.append(CycleSummary(key[0], key[1], charge / 3600.0, discharge / 3600.0))
    return out


def capacity_check(trace: SimTrace, reference_block_name: str, rated_capacity_ah: float) -> float:
    """Discharge capacity measured in the named block over the rated value.

    The datasheet-style end-of-life criterion compares this ratio against
    0.8; the caller applies the threshold.
    """
    if not rated_capacity_ah > 0:
        raise ValueError(f"rated capacity must be positive, got {rated_capacity_ah}")
    blocks = {
        i for i, name in enumerate(trace.block_names) if name == reference_block_name
    }
    if not blocks:
        raise UnknownBlock(f"no block named {reference_block_name!r} in the trace")
    if not any(r.block in blocks and r.current_a < 0 for r in trace.rows):
        raise NoDischarge(f"block {reference_block_name!r} discharged no current")
    per_cycle = trace.per_cycle or cycle_summary(trace)
    discharged = sum(pc.discharge_ah_out for pc in per_cycle if pc.block in blocks)
    return discharged / rated_capacity_ah


def trace_to_csv(trace: SimTrace) -> str:
    """Round-trippable CSV: full float precision, LF line endings."""
    lines = ["t_s,current_a,voltage_v,soc,block,iter,step"]
    for r in trace.rows:
        lines.append(
            f"{r.t_s!r},{r.current_a!r},{r.voltage_v!r},{r.soc!r},"
            f"{r.block},{r.iteration},{r.step}"
        )
    return "\n".join(lines) + "\n"


def events_to_csv(trace: SimTrace) -> str:
    lines = ["t_s,block,iter,step,kind"]
    for e in trace.events:
        lines.append(f"{e.t_s!r},{e.block},{e.iteration},{e.step},{e.kind}")
    return "\n".join(lines) + "\n"
