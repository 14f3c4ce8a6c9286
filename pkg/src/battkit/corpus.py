"""Local document corpus: inverted index, phrase search, cell-mention
linking.

Normalization (applied identically to documents and search phrases, so
spelling variants of one cell designation all match): case-fold; hyphen,
underscore, and whitespace runs collapse to single spaces; remaining
punctuation is stripped -- except inside DOI-shaped tokens, which survive
whole.  Matching is exact over normalized token sequences; there is no
fuzzy matching, since false positives are worse than misses when linking
papers to records automatically.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .errors import AliasCollision, DuplicateDocument, UnknownCell
from .semantic import CellRecord, normalize_doi

__all__ = [
    "Document",
    "CorpusIndex",
    "AliasSet",
    "CellMentions",
    "normalize_tokens",
    "normalize_text",
    "index_document",
    "search_phrase",
    "find_cell_mentions",
    "link_papers",
    "load_manifest",
    "build_index",
    "mentions_report_json",
]

_DOI_RE = re.compile(r"10\.\d{4,9}/[^\s\"'<>]+")
_SEPARATORS_RE = re.compile(r"[-_\s]+")
_PUNCT_RE = re.compile(r"[^a-z0-9 ]")


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    doi: str | None = None


def normalize_tokens(text: str) -> list[str]:
    """Normalize text to its token stream (see module docstring)."""
    text = text.lower()
    tokens: list[str] = []
    pos = 0
    for m in _DOI_RE.finditer(text):
        tokens.extend(_plain_tokens(text[pos:m.start()]))
        tokens.append(m.group(0).rstrip(".,;:)]"))
        pos = m.end()
    tokens.extend(_plain_tokens(text[pos:]))
    return tokens


def _plain_tokens(chunk: str) -> list[str]:
    chunk = _SEPARATORS_RE.sub(" ", chunk)
    chunk = _PUNCT_RE.sub("", chunk)
    return chunk.split()


def normalize_text(text: str) -> str:
    """Normalized text form; idempotent."""
    return " ".join(normalize_tokens(text))


class CorpusIndex:
    """Inverted index over normalized tokens with positional postings."""

    def __init__(self) -> None:
        # token -> doc_id -> sorted positions in the doc's token stream
        self._postings: dict[str, dict[str, list[int]]] = {}
        self.doc_dois: dict[str, str | None] = {}

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_dois

    @property
    def document_count(self) -> int:
        return len(self.doc_dois)

    def add(self, doc: Document) -> int:
        """Index one document; returns its token count."""
        if doc.doc_id in self.doc_dois:
            raise DuplicateDocument(f"document {doc.doc_id!r} is already indexed")
        tokens = normalize_tokens(doc.text)
        self.doc_dois[doc.doc_id] = normalize_doi(doc.doi) if doc.doi else None
        for position, token in enumerate(tokens):
            self._postings.setdefault(token, {}).setdefault(doc.doc_id, []).append(position)
        return len(tokens)

    def phrase_hits(self, phrase: str) -> list[tuple[str, int]]:
        """(doc_id, position) for every consecutive occurrence of the
        normalized phrase, sorted."""
        tokens = normalize_tokens(phrase)
        if not tokens:
            return []
        first = self._postings.get(tokens[0])
        if first is None:
            return []
        hits: list[tuple[str, int]] = []
        for doc_id in sorted(first):
            rest = [self._postings.get(tok, {}).get(doc_id) for tok in tokens[1:]]
            if any(p is None for p in rest):
                continue
            position_sets = [set(p) for p in rest]
            for start in first[doc_id]:
                if all(start + k + 1 in position_sets[k] for k in range(len(rest))):
                    hits.append((doc_id, start))
        return hits

    def to_json(self) -> str:
        """Deterministic JSON dump (tokens and documents sorted)."""
        payload = {
            "documents": {d: self.doc_dois[d] for d in sorted(self.doc_dois)},
            "postings": {
                token: {d: positions[d] for d in sorted(positions)}
                for token, positions in sorted(self._postings.items())
            },
        }
        return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CorpusIndex":
        payload = json.loads(text)
        index = cls()
        index.doc_dois = dict(payload["documents"])
        index._postings = {
            token: {d: list(p) for d, p in docs.items()}
            for token, docs in payload["postings"].items()
        }
        return index


def index_document(index: CorpusIndex, doc: Document) -> int:
    return index.add(doc)


def search_phrase(index: CorpusIndex, phrase: str) -> list[tuple[str, int]]:
    return index.phrase_hits(phrase)


@dataclass(frozen=True)
class AliasSet:
    """Canonical cell IRI -> alias strings.

    Construction fails if two aliases of *different* cells normalize to
    the same phrase, since a hit could then not be attributed.
    """

    aliases: dict[str, tuple[str, ...]]

    def __post_init__(self):
        normalized: dict[str, str] = {}
        clean: dict[str, tuple[str, ...]] = {}
        for iri, names in self.aliases.items():
            kept = tuple(dict.fromkeys(names))
            if not kept:
                raise AliasCollision(f"cell {iri!r} has an empty alias list")
            for name in kept:
                key = normalize_text(name)
                owner = normalized.get(key)
                if owner is not None and owner != iri:
                    raise AliasCollision(
                        f"aliases {name!r} ({iri}) and ({owner}) normalize identically"
                    )
                normalized[key] = iri
            clean[iri] = kept
        object.__setattr__(self, "aliases", clean)

    @classmethod
    def from_json(cls, text: str) -> "AliasSet":
        raw = json.loads(text)
        return cls({iri: tuple(names) for iri, names in raw.items()})

    @classmethod
    def from_records(cls, records: Iterable[CellRecord]) -> "AliasSet":
        """Default aliases: "<manufacturer> <product>" and the bare product
        name."""
        return cls({
            r.id: (f"{r.manufacturer} {r.product_name}", r.product_name)
            for r in records
        })


@dataclass(frozen=True)
class CellMentions:
    dois: tuple[str, ...] = ()
    unlinked_doc_ids: tuple[str, ...] = ()


def find_cell_mentions(index: CorpusIndex, aliases: AliasSet) -> dict[str, CellMentions]:
    """Cells with at least one alias hit, mapped to the sorted DOIs of the
    matching documents; documents without a DOI are listed separately."""
    out: dict[str, CellMentions] = {}
    for iri, names in aliases.aliases.items():
        doc_ids: set[str] = set()
        for name in names:
            doc_ids.update(doc_id for doc_id, _pos in index.phrase_hits(name))
        if not doc_ids:
            continue
        dois = {index.doc_dois[d] for d in doc_ids if index.doc_dois.get(d)}
        unlinked = {d for d in doc_ids if not index.doc_dois.get(d)}
        out[iri] = CellMentions(
            dois=tuple(sorted(dois)), unlinked_doc_ids=tuple(sorted(unlinked))
        )
    return out


def link_papers(
    records: Mapping[str, CellRecord],
    mentions: Mapping[str, CellMentions | Iterable[str]],
) -> tuple[dict[str, CellRecord], list[UnknownCell]]:
    """Union each mentioned cell's DOI list with its record.

    Returns the updated record map plus an :class:`UnknownCell` per mention
    whose IRI has no record; known cells are still processed.  Idempotent:
    a second application with the same mentions changes nothing.
    """
    updated = dict(records)
    problems: list[UnknownCell] = []
    for iri, mention in mentions.items():
        record = updated.get(iri)
        if record is None:
            problems.append(UnknownCell(iri))
            continue
        new_dois = mention.dois if isinstance(mention, CellMentions) else tuple(mention)
        merged = tuple(sorted({*record.paper_dois, *(normalize_doi(d) for d in new_dois)}))
        if merged != record.paper_dois:
            record = replace(record, paper_dois=merged)
        updated[iri] = record
    return updated, problems


# ---------------------------------------------------------------------------
# manifest-driven corpus loading


def load_manifest(manifest_path) -> list[Document]:
    """Read a ``doc_id,doi,path`` manifest (CSV with header); paths resolve
    relative to the manifest file.  Empty doi fields mean no DOI."""
    manifest_path = Path(manifest_path)
    documents: list[Document] = []
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            text = (manifest_path.parent / row["path"]).read_text(encoding="utf-8")
            doi = row.get("doi") or None
            documents.append(Document(doc_id=row["doc_id"], text=text, doi=doi))
    return documents


def build_index(documents: Iterable[Document]) -> CorpusIndex:
    index = CorpusIndex()
    for doc in documents:
        index.add(doc)
    return index


def mentions_report_json(mentions: Mapping[str, CellMentions]) -> str:
    """External report format: cell IRI -> {dois, unlinked_doc_ids}."""
    payload = {
        iri: {"dois": list(m.dois), "unlinked_doc_ids": list(m.unlinked_doc_ids)}
        for iri, m in sorted(mentions.items())
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
