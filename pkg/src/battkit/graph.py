"""In-memory triple store with subject/predicate/object indexes.

Set semantics: inserting a triple twice is a no-op.  Writes take an
internal lock and are batched per call, so a batch (e.g. one cell record)
becomes visible atomically; run queries after loading completes, any
number of readers at a time.
"""

from __future__ import annotations

import threading
from typing import Iterable, Iterator

from .semantic import ContextMap, Term, Triple, cell_record_to_triples, load_cells_dir, parse_ntriples

__all__ = ["TripleStore", "insert_triples", "store_from_ntriples", "store_from_cells_dir"]


class TripleStore:
    def __init__(self) -> None:
        self._triples: set[Triple] = set()
        self._by_subject: dict[str, set[Triple]] = {}
        self._by_predicate: dict[str, set[Triple]] = {}
        self._by_object: dict[Term, set[Triple]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def insert(self, triples: Iterable[Triple]) -> int:
        """Insert a batch; returns how many were actually new."""
        added = 0
        with self._lock:
            for t in triples:
                if t in self._triples:
                    continue
                self._triples.add(t)
                self._by_subject.setdefault(t.subject, set()).add(t)
                self._by_predicate.setdefault(t.predicate, set()).add(t)
                self._by_object.setdefault(t.object, set()).add(t)
                added += 1
        return added

    def match(
        self,
        subject: str | None = None,
        predicate: str | None = None,
        object: Term | None = None,
    ) -> Iterator[Triple]:
        """All triples matching the bound positions (None = wildcard),
        served from the most selective available index."""
        candidate_sets = []
        if subject is not None:
            candidate_sets.append(self._by_subject.get(subject, set()))
        if predicate is not None:
            candidate_sets.append(self._by_predicate.get(predicate, set()))
        if object is not None:
            candidate_sets.append(self._by_object.get(object, set()))
        if not candidate_sets:
            yield from self._triples
            return
        base = min(candidate_sets, key=len)
        for t in base:
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if object is not None and t.object != object:
                continue
            yield t


def insert_triples(store: TripleStore, triples: Iterable[Triple]) -> int:
    return store.insert(triples)


def store_from_ntriples(text: str) -> TripleStore:
    store = TripleStore()
    store.insert(parse_ntriples(text))
    return store


def store_from_cells_dir(path, ctx: ContextMap) -> TripleStore:
    """Ingest every cell record file in a directory; one batch per record."""
    store = TripleStore()
    for record in load_cells_dir(path, ctx):
        store.insert(cell_record_to_triples(record, ctx))
    return store
