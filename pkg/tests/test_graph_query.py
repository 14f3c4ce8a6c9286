"""Triple store, query parser, executor, and the nested-loop oracle.

The oracle evaluates a query by plain nested loops over the full triple
set with no indexes or join planning, mirroring the documented semantics:
written numeric constants match by value, variable joins by exact term.
"""

import itertools
import random
import threading

import pytest

from battkit.errors import QuerySyntaxError, UnboundFilter, UnknownPrefix
from battkit.graph import TripleStore, insert_triples, store_from_cells_dir, store_from_ntriples
from battkit.query import (
    Filter,
    Pattern,
    Query,
    Var,
    execute_query,
    parse_query,
)
from battkit.semantic import (
    Iri,
    NumberLiteral,
    StringLiteral,
    Triple,
    cell_record_to_triples,
    term_to_ntriples,
    triples_to_ntriples,
)

from .conftest import CELLS_DIR, M50_IRI, MJ1_IRI, QUERIES_DIR

RATED_CAPACITY_IRI = (
    "https://w3id.org/emmo/domain/electrochemistry"
    "#electrochemistry_9b3b4668_0795_4a35_9965_2af383497a26"
)


# ---------------------------------------------------------------------------
# independent oracle


def _oracle_match(term, value, binding):
    if isinstance(term, Var):
        if term.name in binding:
            return binding[term.name] == value
        return True
    if isinstance(term, NumberLiteral):
        return isinstance(value, NumberLiteral) and value.value == term.value
    return term == value


def _oracle_bind(pattern, triple, binding):
    slots = (
        (pattern.subject, Iri(triple.subject)),
        (pattern.predicate, Iri(triple.predicate)),
        (pattern.object, triple.object),
    )
    new = dict(binding)
    for term, value in slots:
        if not _oracle_match(term, value, new):
            return None
        if isinstance(term, Var):
            if term.name in new and new[term.name] != value:
                return None
            new[term.name] = value
    return new


def _oracle_filter(binding, f):
    term = binding.get(f.var)
    if not isinstance(term, NumberLiteral):
        return False
    ops = {
        "<": term.value < f.value,
        "<=": term.value <= f.value,
        "=": term.value == f.value,
        ">=": term.value >= f.value,
        ">": term.value > f.value,
    }
    return ops[f.op]


def brute_force(triples, query):
    """Row set via exhaustive nested loops over all triples per pattern."""
    rows = set()
    for combo in itertools.product(triples, repeat=len(query.patterns)):
        binding = {}
        for pattern, triple in zip(query.patterns, combo):
            binding = _oracle_bind(pattern, triple, binding)
            if binding is None:
                break
        if binding is None:
            continue
        if all(_oracle_filter(binding, f) for f in query.filters):
            rows.add(tuple(binding[v] for v in query.select_vars))
    return rows


def _assert_matches_oracle(store, query):
    got = execute_query(store, query)
    expected = brute_force(list(store), query)
    if query.limit is None:
        assert set(got.rows) == expected
        assert len(got.rows) == len(expected)
    else:
        assert set(got.rows) <= expected
        assert len(got.rows) == min(query.limit, len(expected))


# ---------------------------------------------------------------------------
# store basics


def _simple_triples(n=6):
    return [
        Triple(f"https://example.org/s{i}", "https://example.org/p",
               NumberLiteral(float(i)))
        for i in range(n)
    ]


def test_insert_idempotent():
    store = TripleStore()
    triples = _simple_triples()
    assert insert_triples(store, triples) == 6
    assert insert_triples(store, triples) == 0
    assert len(store) == 6


def test_insert_empty():
    store = TripleStore()
    assert insert_triples(store, []) == 0


def test_insert_counts_match_record_sums(ctx, cell_records):
    store = TripleStore()
    total = 0
    for record in cell_records:
        batch = cell_record_to_triples(record, ctx)
        assert 6 <= len(batch) <= 13
        total += store.insert(batch)
    assert total == len(store)


def test_match_uses_all_positions():
    store = TripleStore()
    store.insert(_simple_triples())
    assert len(list(store.match(subject="https://example.org/s1"))) == 1
    assert len(list(store.match(predicate="https://example.org/p"))) == 6
    assert len(list(store.match(object=NumberLiteral(2.0)))) == 1
    assert len(list(store.match())) == 6


# ---------------------------------------------------------------------------
# parser


def test_parse_capacity_query():
    q = parse_query(
        (QUERIES_DIR / "mj1_capacity.rq").read_text(encoding="utf-8")
    )
    assert q.select_vars == ("cap",)
    assert len(q.patterns) == 1
    assert q.patterns[0].subject == Iri(MJ1_IRI)
    assert q.patterns[0].predicate == Iri(RATED_CAPACITY_IRI)
    assert q.patterns[0].object == Var("cap")


def test_parse_range_query():
    q = parse_query(
        (QUERIES_DIR / "cells_capacity_3_to_4.rq").read_text(encoding="utf-8")
    )
    assert q.select_vars == ("cell", "cap")
    assert q.filters == (Filter("cap", ">=", 3.0), Filter("cap", "<=", 4.0))


def test_parse_limit_and_string_literal():
    q = parse_query(
        'SELECT ?s WHERE { ?s <https://example.org/p> "LG Chem" . } LIMIT 2'
    )
    assert q.limit == 2
    assert q.patterns[0].object == StringLiteral("LG Chem")


def test_empty_where_is_syntax_error():
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT ?x WHERE { }")


def test_syntax_error_carries_position():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("SELECT ?x\nWHERE [ ]")
    assert err.value.line == 2


def test_unknown_prefix():
    with pytest.raises(UnknownPrefix):
        parse_query("SELECT ?x WHERE { ?x bat:capacity 3 . }")


def test_unbound_filter():
    with pytest.raises(UnboundFilter):
        parse_query(
            "SELECT ?x WHERE { ?x <https://example.org/p> 3 . FILTER(?y > 1) }"
        )


def test_unbound_select_variable():
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT ?y WHERE { ?x <https://example.org/p> 3 . }")


def test_empty_query():
    with pytest.raises(QuerySyntaxError):
        parse_query("   \n ")


def test_keywords_case_insensitive():
    q = parse_query("select ?x where { ?x <https://example.org/p> 3 } limit 1")
    assert q.limit == 1


# ---------------------------------------------------------------------------
# executor on the cell fixtures


@pytest.fixture(scope="module")
def cell_store(ctx):
    return store_from_cells_dir(CELLS_DIR, ctx)


def test_mj1_capacity_query(cell_store):
    q = parse_query((QUERIES_DIR / "mj1_capacity.rq").read_text(encoding="utf-8"))
    table = execute_query(cell_store, q)
    assert len(table.rows) == 1
    assert table.rows[0][0].value == 3.4


def test_range_query_matches_brute_force(cell_store, ctx, cell_records):
    q = parse_query(
        (QUERIES_DIR / "cells_capacity_3_to_4.rq").read_text(encoding="utf-8")
    )
    table = execute_query(cell_store, q)
    _assert_matches_oracle(cell_store, q)
    cells = {row[0].value for row in table.rows}
    expected = {r.id for r in cell_records if 3.0 <= r.rated_capacity_ah <= 4.0}
    assert cells == expected


def test_three_cell_range_fixture(ctx):
    store = TripleStore()
    for i, cap in enumerate((2.5, 3.4, 4.9)):
        store.insert([Triple(f"https://example.org/c{i}", RATED_CAPACITY_IRI,
                             NumberLiteral(cap, ctx.entries["AmpereHour"]))])
    q = parse_query(
        "PREFIX echem: <https://w3id.org/emmo/domain/electrochemistry#>\n"
        "SELECT ?cell WHERE { ?cell "
        "echem:electrochemistry_9b3b4668_0795_4a35_9965_2af383497a26 ?cap . "
        "FILTER(?cap >= 3) FILTER(?cap <= 4) }"
    )
    table = execute_query(store, q)
    assert [row[0].value for row in table.rows] == ["https://example.org/c1"]


def test_m50_papers_query(cell_store, cell_records):
    q = parse_query((QUERIES_DIR / "m50_papers.rq").read_text(encoding="utf-8"))
    table = execute_query(cell_store, q)
    m50 = next(r for r in cell_records if r.id == M50_IRI)
    assert tuple(row[0].value for row in table.rows) == m50.paper_dois


def test_query_on_empty_store():
    q = parse_query("SELECT ?x WHERE { ?x <https://example.org/p> ?y . }")
    table = execute_query(TripleStore(), q)
    assert table.columns == ("x",)
    assert table.rows == []


def test_absent_iri_yields_zero_rows(cell_store):
    q = parse_query(
        "SELECT ?v WHERE { <https://example.org/nope> <https://example.org/p> ?v . }"
    )
    assert execute_query(cell_store, q).rows == []


def test_filter_on_non_numeric_binding_excludes_row(cell_store):
    q = parse_query(
        "SELECT ?m WHERE { ?c <https://schema.org/manufacturer> ?m . FILTER(?m > 0) }"
    )
    assert execute_query(cell_store, q).rows == []


def test_tsv_output(cell_store):
    q = parse_query((QUERIES_DIR / "mj1_capacity.rq").read_text(encoding="utf-8"))
    tsv = execute_query(cell_store, q).to_tsv()
    assert tsv == "cap\n3.4\n"


def test_join_two_patterns(cell_store):
    q = parse_query(
        "PREFIX echem: <https://w3id.org/emmo/domain/electrochemistry#>\n"
        "SELECT ?m WHERE { "
        "?c echem:electrochemistry_9b3b4668_0795_4a35_9965_2af383497a26 ?cap . "
        "?c <https://schema.org/manufacturer> ?m . FILTER(?cap >= 4.5) }"
    )
    table = execute_query(cell_store, q)
    manufacturers = {row[0].value for row in table.rows}
    assert manufacturers == {"LG Chem", "Samsung SDI", "EVE Energy", "CATL"}
    _assert_matches_oracle(cell_store, q)


def test_reads_do_not_mutate(cell_store):
    before = set(cell_store)
    q = parse_query((QUERIES_DIR / "cells_capacity_3_to_4.rq").read_text(encoding="utf-8"))
    execute_query(cell_store, q)
    assert set(cell_store) == before


def test_concurrent_readers_agree(cell_store):
    q = parse_query((QUERIES_DIR / "cells_capacity_3_to_4.rq").read_text(encoding="utf-8"))
    results = []
    lock = threading.Lock()

    def worker():
        table = execute_query(cell_store, q)
        with lock:
            results.append(tuple(table.rows))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1


# ---------------------------------------------------------------------------
# randomized oracle equivalence


def _random_store(rng, size):
    subjects = [f"https://example.org/s{i}" for i in range(rng.randint(2, 5))]
    predicates = [f"https://example.org/p{i}" for i in range(rng.randint(1, 3))]
    objects = (
        [NumberLiteral(float(v)) for v in range(4)]
        + [StringLiteral(s) for s in ("a", "b")]
        + [Iri(s) for s in subjects]
    )
    store = TripleStore()
    triples = [
        Triple(rng.choice(subjects), rng.choice(predicates), rng.choice(objects))
        for _ in range(size)
    ]
    store.insert(triples)
    return store, subjects, predicates


def _random_query(rng, subjects, predicates):
    variables = ["x", "y", "z"]

    def term(position):
        roll = rng.random()
        if roll < 0.5:
            return Var(rng.choice(variables))
        if position == 0:
            return Iri(rng.choice(subjects))
        if position == 1:
            return Iri(rng.choice(predicates))
        return rng.choice(
            [NumberLiteral(float(rng.randint(0, 3))), StringLiteral("a"),
             Iri(rng.choice(subjects))]
        )

    patterns = []
    for _ in range(rng.randint(1, 3)):
        patterns.append(Pattern(term(0), term(1), term(2)))
    bound = {
        t.name
        for p in patterns
        for t in (p.subject, p.predicate, p.object)
        if isinstance(t, Var)
    }
    if not bound:
        patterns.append(Pattern(Var("x"), term(1), term(2)))
        bound.add("x")
    select = tuple(sorted(rng.sample(sorted(bound), rng.randint(1, len(bound)))))
    filters = []
    if rng.random() < 0.4:
        filters.append(Filter(rng.choice(sorted(bound)),
                              rng.choice(["<", "<=", "=", ">=", ">"]),
                              float(rng.randint(0, 3))))
    limit = rng.randint(1, 4) if rng.random() < 0.3 else None
    return Query(prefixes={}, select_vars=select, patterns=tuple(patterns),
                 filters=tuple(filters), limit=limit)


def test_oracle_equivalence_randomized():
    rng = random.Random(20240817)
    for _ in range(100):
        store, subjects, predicates = _random_store(rng, rng.randint(5, 60))
        query = _random_query(rng, subjects, predicates)
        _assert_matches_oracle(store, query)


def test_join_order_independence():
    rng = random.Random(7)
    for _ in range(40):
        store, subjects, predicates = _random_store(rng, 40)
        query = _random_query(rng, subjects, predicates)
        if query.limit is not None or len(query.patterns) < 2:
            continue
        baseline = set(execute_query(store, query).rows)
        for perm in itertools.permutations(query.patterns):
            permuted = Query(query.prefixes, query.select_vars, tuple(perm),
                             query.filters, None)
            assert set(execute_query(store, permuted).rows) == baseline


def test_limit_is_prefix_of_deterministic_order():
    rng = random.Random(99)
    store, subjects, predicates = _random_store(rng, 50)
    query = _random_query(rng, subjects, predicates)
    full = Query(query.prefixes, query.select_vars, query.patterns, query.filters, None)
    all_rows = execute_query(store, full).rows
    for n in range(1, len(all_rows) + 1):
        limited = Query(query.prefixes, query.select_vars, query.patterns,
                        query.filters, n)
        assert execute_query(store, limited).rows == all_rows[:n]


def test_store_round_trip_through_ntriples(cell_store):
    text = triples_to_ntriples(sorted(cell_store, key=lambda t: term_to_ntriples(t.object)))
    again = store_from_ntriples(text)
    assert set(again) == set(cell_store)
