"""Single command-line entry point; every operation is a subcommand.

stdout carries only machine-readable payload; diagnostics go to stderr so
pipelines stay clean.  Exit codes: 0 success, 1 validation errors found,
2 I/O or parse failure, 3 simulation error, 4 query syntax error.  Output
paths accept "-" for stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import graph as graph_mod
from .errors import (
    BattKitError,
    ContextError,
    ProtocolParseError,
    QueryError,
    RecordError,
    ResolutionError,
    SimulationError,
)
from .jsonld import emit_protocol_jsonld
from .protocol import load_protocol, serialize_protocol
from .query import execute_query, parse_query
from .semantic import (
    cell_record_to_jsonld,
    cell_record_to_triples,
    default_context_path,
    load_cells_dir,
    load_context,
    triples_to_ntriples,
)
from .sim import SimConfig, build_reference_model, events_to_csv, simulate, trace_to_csv
from .transform import export_experiment_text, resolve_quantities, resolved_to_dict, unroll
from .validate import validate_protocol

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_SIMULATION = 3
EXIT_QUERY = 4


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def _load_validated(path: str):
    protocol = load_protocol(path)
    report = validate_protocol(protocol)
    if not report.ok:
        _diag(json.dumps(report.to_dict(), indent=2))
        return protocol, report, False
    return protocol, report, True


def _cmd_validate(args) -> int:
    protocol = load_protocol(args.protocol)
    report = validate_protocol(protocol)
    if args.format == "tsv":
        lines = ["severity\tcode\tpath\tmessage"]
        for f in report.errors:
            lines.append(f"error\t{f.code}\t{f.path}\t{f.message}")
        for f in report.warnings:
            lines.append(f"warning\t{f.code}\t{f.path}\t{f.message}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_resolve(args) -> int:
    protocol, _report, ok = _load_validated(args.protocol)
    if not ok:
        return EXIT_VALIDATION
    resolved = resolve_quantities(protocol)
    _emit(json.dumps(resolved_to_dict(resolved), indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_unroll(args) -> int:
    protocol, _report, ok = _load_validated(args.protocol)
    if not ok:
        return EXIT_VALIDATION
    flat = unroll(resolve_quantities(protocol))
    if args.format == "json":
        payload = [
            {
                "block": fs.block_index,
                "iteration": fs.iteration,
                "step": fs.step_index,
                "type": fs.step.kind.value,
                "value": fs.step.value,
                "unit": fs.step.unit.value,
            }
            for fs in flat
        ]
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        lines = [
            f"{fs.block_index}\t{fs.iteration}\t{fs.step_index}\t"
            f"{fs.step.kind.value}\t{fs.step.value!r}\t{fs.step.unit.value}"
            for fs in flat
        ]
        _emit("\n".join(lines) + "\n", args.out)
    _diag(f"{len(flat)} flat steps")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    protocol, _report, ok = _load_validated(args.protocol)
    if not ok:
        return EXIT_VALIDATION
    resolved = resolve_quantities(protocol)
    model = build_reference_model(
        args.capacity, args.vmin, args.vmax, args.r0, args.fade
    )
    cfg = SimConfig(
        dt_s=args.dt,
        event_tol_s=args.event_tol,
        max_step_duration_s=args.max_step,
        initial_soc=args.soc0,
    )
    trace = simulate(resolved, model, cfg)
    _emit(trace_to_csv(trace), args.out)
    if args.events:
        _emit(events_to_csv(trace), args.events)
    if args.per_cycle:
        lines = ["block,iter,charge_ah_in,discharge_ah_out"]
        for pc in trace.per_cycle:
            lines.append(
                f"{pc.block},{pc.iteration},{pc.charge_ah_in!r},{pc.discharge_ah_out!r}"
            )
        _emit("\n".join(lines) + "\n", args.per_cycle)
    _diag(f"{len(trace.rows)} rows, {len(trace.events)} events")
    return EXIT_OK


def _cmd_export_experiment(args) -> int:
    protocol, _report, ok = _load_validated(args.protocol)
    if not ok:
        return EXIT_VALIDATION
    lines = export_experiment_text(resolve_quantities(protocol))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _cmd_jsonld(args) -> int:
    protocol, _report, ok = _load_validated(args.protocol)
    if not ok:
        return EXIT_VALIDATION
    ctx = load_context(args.context)
    _emit(emit_protocol_jsonld(protocol, ctx), args.out)
    return EXIT_OK


def _cmd_ingest_cells(args) -> int:
    ctx = load_context(args.context)
    records = load_cells_dir(args.directory, ctx)
    triples = []
    for record in records:
        triples.extend(cell_record_to_triples(record, ctx))
    _emit(triples_to_ntriples(triples), args.out)
    _diag(f"{len(records)} records, {len(triples)} triples")
    return EXIT_OK


def _load_store(path: str, ctx):
    p = Path(path)
    if p.is_dir():
        return graph_mod.store_from_cells_dir(p, ctx)
    return graph_mod.store_from_ntriples(p.read_text(encoding="utf-8"))


def _cmd_query(args) -> int:
    ctx = load_context(args.context)
    store = _load_store(args.store, ctx)
    query = parse_query(Path(args.query).read_text(encoding="utf-8"))
    table = execute_query(store, query)
    if args.format == "json":
        payload = {
            "columns": list(table.columns),
            "rows": [
                [getattr(term, "value", term) for term in row] for row in table.rows
            ],
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit(table.to_tsv(), args.out)
    _diag(f"{len(table.rows)} rows")
    return EXIT_OK


def _cmd_index_corpus(args) -> int:
    documents = corpus_mod.load_manifest(args.manifest)
    index = corpus_mod.build_index(documents)
    _emit(index.to_json(), args.out)
    _diag(f"{index.document_count} documents indexed")
    return EXIT_OK


def _cmd_link(args) -> int:
    ctx = load_context(args.context)
    records = {r.id: r for r in load_cells_dir(args.cells, ctx)}
    index = corpus_mod.CorpusIndex.from_json(
        Path(args.index).read_text(encoding="utf-8")
    )
    if args.aliases:
        aliases = corpus_mod.AliasSet.from_json(
            Path(args.aliases).read_text(encoding="utf-8")
        )
    else:
        aliases = corpus_mod.AliasSet.from_records(records.values())
    mentions = corpus_mod.find_cell_mentions(index, aliases)
    updated, problems = corpus_mod.link_papers(records, mentions)
    _emit(corpus_mod.mentions_report_json(mentions), args.out)
    for problem in problems:
        _diag(f"warning: {problem}")
    if args.apply:
        by_id = {r.id: path for path, r in _cells_with_paths(args.cells, ctx)}
        for iri, record in updated.items():
            if records[iri] != record:
                Path(by_id[iri]).write_text(
                    cell_record_to_jsonld(record, ctx), encoding="utf-8"
                )
                _diag(f"updated {by_id[iri]}")
    return EXIT_OK


def _cells_with_paths(directory, ctx):
    from .semantic import load_cell_record

    for path in sorted(Path(directory).glob("*.json")):
        yield path, load_cell_record(path, ctx)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="battkit",
        description="Battery cycling protocol and cell knowledge graph toolkit",
    )
    parser.add_argument(
        "--context",
        default=str(default_context_path()),
        help="ontology context map (default: vendored pinned context)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        return p

    p = add("validate", _cmd_validate, "parse and validate a protocol file")
    p.add_argument("protocol")
    p.add_argument("--format", choices=("json", "tsv"), default="json")

    p = add("resolve", _cmd_resolve, "resolve parameters and C-rates to literals")
    p.add_argument("protocol")

    p = add("unroll", _cmd_unroll, "print the flat execution order, one step per line")
    p.add_argument("protocol")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p = add("simulate", _cmd_simulate, "execute a protocol against a reference cell")
    p.add_argument("protocol")
    p.add_argument("--capacity", type=float, required=True, help="rated capacity [Ah]")
    p.add_argument("--vmin", type=float, required=True, help="OCV at SOC 0 [V]")
    p.add_argument("--vmax", type=float, required=True, help="OCV at SOC 1 [V]")
    p.add_argument("--r0", type=float, default=0.0, help="series resistance [ohm]")
    p.add_argument("--fade", type=float, default=0.0,
                   help="fractional capacity loss per completed block-iteration")
    p.add_argument("--soc0", type=float, default=0.0, help="initial SOC")
    p.add_argument("--dt", type=float, default=1.0, help="sample step [s]")
    p.add_argument("--event-tol", type=float, default=1e-3,
                   help="event bisection tolerance [s]")
    p.add_argument("--max-step", type=float, default=86400.0,
                   help="per-step duration cap [s]")
    p.add_argument("--events", default=None, help="also write the events CSV here")
    p.add_argument("--per-cycle", default=None, help="also write the per-cycle CSV here")

    p = add("export-experiment", _cmd_export_experiment,
            "render instructions as experiment text for external simulators")
    p.add_argument("protocol")

    p = add("jsonld", _cmd_jsonld, "emit the protocol as JSON-LD")
    p.add_argument("protocol")

    p = add("ingest-cells", _cmd_ingest_cells,
            "expand a directory of cell records into N-Triples")
    p.add_argument("directory")

    p = add("query", _cmd_query, "run a query against a store (.nt file or cells dir)")
    p.add_argument("store")
    p.add_argument("query")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p = add("index-corpus", _cmd_index_corpus,
            "build a corpus index from a doc_id,doi,path manifest")
    p.add_argument("manifest")

    p = add("link", _cmd_link, "find cell mentions in an indexed corpus and link DOIs")
    p.add_argument("cells", help="directory of cell record files")
    p.add_argument("index", help="corpus index JSON (from index-corpus)")
    p.add_argument("--aliases", default=None,
                   help="alias file (cell IRI -> alias list); default derives"
                        " aliases from the records")
    p.add_argument("--apply", action="store_true",
                   help="rewrite cell record files with the linked DOIs")

    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResolutionError as exc:
        _diag(f"error: {exc}")
        return EXIT_VALIDATION
    except (ProtocolParseError, RecordError, ContextError) as exc:
        _diag(f"error: {exc}")
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        _diag(f"error: {exc}")
        return EXIT_IO
    except SimulationError as exc:
        _diag(f"simulation error: {exc}")
        return EXIT_SIMULATION
    except QueryError as exc:
        _diag(f"query error: {exc}")
        return EXIT_QUERY
    except BattKitError as exc:
        _diag(f"error: {exc}")
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
