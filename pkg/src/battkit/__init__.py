"""Toolkit for battery cycling protocols and cell datasheet linked data.

Built around a vendor-agnostic JSON format for cycling procedures (the
battery cycler language): strict parsing, validation, canonical
serialization, resolution to physical quantities, JSON-LD export, and
deterministic execution against a reference equivalent-circuit cell.
Alongside it: cell datasheet records that expand into an in-memory triple
store queryable with a SPARQL subset, and a corpus indexer that links
papers to the cells they mention.
"""

from .errors import BattKitError
from .jsonld import context_closure_gaps, emit_protocol_jsonld
from .protocol import (
    InstructionBlock,
    Parameter,
    Protocol,
    Step,
    StepKind,
    Termination,
    TerminationKind,
    Unit,
    ValueRef,
    load_protocol,
    parse_protocol,
    serialize_protocol,
)
from .semantic import (
    CellRecord,
    ContextMap,
    Iri,
    NumberLiteral,
    StringLiteral,
    Triple,
    cell_record_to_jsonld,
    cell_record_to_triples,
    load_cell_record,
    load_cells_dir,
    load_context,
    load_default_context,
    parse_cell_record,
    parse_ntriples,
    triples_to_cell_record,
    triples_to_ntriples,
)
from .graph import TripleStore, insert_triples
from .query import Query, ResultTable, execute_query, parse_query
from .sim import (
    CellModel,
    SimConfig,
    SimTrace,
    build_reference_model,
    capacity_check,
    cycle_summary,
    simulate,
)
from .transform import (
    FlatStep,
    ResolvedProtocol,
    export_experiment_text,
    resolve_quantities,
    unroll,
)
from .validate import ValidationReport, validate_protocol

__version__ = "0.1.0"

__all__ = [
    "BattKitError",
    "CellModel",
    "CellRecord",
    "ContextMap",
    "FlatStep",
    "InstructionBlock",
    "Iri",
    "NumberLiteral",
    "Parameter",
    "Protocol",
    "Query",
    "ResolvedProtocol",
    "ResultTable",
    "SimConfig",
    "SimTrace",
    "Step",
    "StepKind",
    "StringLiteral",
    "Termination",
    "TerminationKind",
    "Triple",
    "TripleStore",
    "Unit",
    "ValidationReport",
    "ValueRef",
    "build_reference_model",
    "capacity_check",
    "cell_record_to_jsonld",
    "cell_record_to_triples",
    "context_closure_gaps",
    "cycle_summary",
    "emit_protocol_jsonld",
    "execute_query",
    "export_experiment_text",
    "insert_triples",
    "load_cell_record",
    "load_cells_dir",
    "load_context",
    "load_default_context",
    "load_protocol",
    "parse_cell_record",
    "parse_ntriples",
    "parse_protocol",
    "parse_query",
    "resolve_quantities",
    "serialize_protocol",
    "simulate",
    "triples_to_cell_record",
    "triples_to_ntriples",
    "unroll",
    "validate_protocol",
]
