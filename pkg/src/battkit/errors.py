"""Exception hierarchy shared across the toolkit.

Exceptions are grouped into families so callers (notably the CLI) can map
a failure to an exit code without inspecting messages.
"""

from __future__ import annotations


class BattKitError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# protocol parsing (structurally broken documents)


class ProtocolParseError(BattKitError):
    """A protocol document could not be turned into a Protocol."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path:
            where = f" at {path}"
        elif line is not None:
            where = f" at line {line}, column {column}"
        super().__init__(message + where)


class ParseError(ProtocolParseError):
    """Malformed JSON; carries the decoder's line/column position."""


class UnknownKind(ProtocolParseError):
    """A step or termination "type" string is not a known kind."""


class UnknownUnit(ProtocolParseError):
    """A "unit" string is not one of the supported unit names."""


class TypeMismatch(ProtocolParseError):
    """A field holds the wrong JSON type (e.g. string where number required)."""


class InvalidRepeat(ProtocolParseError):
    """A block "repeat" count is below 1."""


class DuplicateKeyError(ProtocolParseError):
    """The same JSON object key appears twice in one object."""


# ---------------------------------------------------------------------------
# quantity resolution


class ResolutionError(BattKitError):
    """A validated protocol could not be resolved to physical quantities."""


class MissingCapacity(ResolutionError):
    """A CRate value needs the Capacity parameter, which is absent."""


class ZeroCurrent(ResolutionError):
    """An ElectricCurrent step resolved to exactly zero amperes."""


class MissingParameter(ResolutionError):
    """A value references a parameter that does not exist."""


# ---------------------------------------------------------------------------
# semantic layer (context maps, cell records, triples)


class ContextError(BattKitError):
    """Problem with an ontology context map."""


class IncompleteContext(ContextError):
    """The context map lacks one of the required terms."""

    def __init__(self, term: str):
        self.term = term
        super().__init__(f"context map is missing required term {term!r}")


class BadIri(ContextError):
    """A context entry is not an absolute IRI."""


class MissingContextTerm(ContextError):
    """A document uses a term the context map does not define."""

    def __init__(self, term: str):
        self.term = term
        super().__init__(f"term {term!r} is not defined in the context map")


class RecordError(BattKitError):
    """A cell record document or triple set is malformed."""


class MissingId(RecordError):
    """A cell record document has no @id."""


class BadCapacity(RecordError):
    """Rated capacity is absent, non-numeric, or not positive."""


class BadVoltageWindow(RecordError):
    """Cutoff voltages are absent or not ordered lower < upper."""


class AmbiguousSubject(RecordError):
    """A triple set does not contain exactly one cell identity triple."""


class ConflictingField(RecordError):
    """Two triples assign different values to a single-valued field."""


class NTriplesError(RecordError):
    """A line in an N-Triples file could not be parsed."""


# ---------------------------------------------------------------------------
# simulation


class SimulationError(BattKitError):
    """Protocol execution against a cell model failed."""


class InvalidModel(SimulationError):
    """Cell model parameters violate their preconditions."""


class InvalidConfig(SimulationError):
    """Simulation configuration violates its preconditions."""


class SingularHold(SimulationError):
    """A constant-voltage step needs a positive series resistance."""


class CapacityDepleted(SimulationError):
    """Fade drove the effective capacity to zero mid-run."""


class UnknownBlock(SimulationError):
    """A named instruction block does not exist in the trace."""


class NoDischarge(SimulationError):
    """The named block contains no discharge current."""


# ---------------------------------------------------------------------------
# graph queries


class QueryError(BattKitError):
    """A query string could not be parsed."""


class QuerySyntaxError(QueryError):
    """Grammar violation; carries the 1-based line/column of the offence."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownPrefix(QueryError):
    """A prefixed name uses a prefix with no PREFIX declaration."""


class UnboundFilter(QueryError):
    """A FILTER constrains a variable that appears in no pattern."""


# ---------------------------------------------------------------------------
# corpus indexing and linking


class CorpusError(BattKitError):
    """Problem while indexing or linking a document corpus."""


class DuplicateDocument(CorpusError):
    """A document id was indexed twice."""


class AliasCollision(CorpusError):
    """Two aliases of different cells normalize to the same phrase."""


class UnknownCell(CorpusError):
    """A mention refers to a cell IRI with no record in the store."""

    def __init__(self, iri: str):
        self.iri = iri
        super().__init__(f"no cell record for {iri!r}")
