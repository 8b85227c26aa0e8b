"""Corpus ingestion, tokenization and OR-query phrase search.

Documents arrive pre-split into labelable text elements (one CSV row per
element). Datasets are write-once: after ingest they are immutable, so the
inverted index can be built eagerly and shared across readers without
coordination.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DecodeError,
    DuplicateDataset,
    EmptyDataset,
    EmptyQuery,
    InvalidName,
    MissingColumn,
    UnknownDataset,
)

# Alphanumeric runs, Unicode-aware. Underscore counts as a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any run of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class TextElement:
    """One labelable sentence. element_id is "<doc_id>-<position>"."""

    element_id: str
    doc_id: str
    position: int
    text: str


@dataclass(frozen=True)
class Document:
    doc_id: str
    elements: tuple[TextElement, ...]


@dataclass(frozen=True)
class Query:
    """Disjunction of phrases: an element matches if any phrase matches."""

    terms: tuple[str, ...]


def parse_query(raw: str) -> Query:
    """Split a raw query on '|' into trimmed phrases, dropping empty ones."""
    terms = tuple(t for t in (part.strip() for part in raw.split("|")) if t)
    if not terms:
        raise EmptyQuery(f"query has no non-empty terms: {raw!r}")
    return Query(terms)


class Dataset:
    """Immutable, indexed collection of documents.

    Holds per-element token lists and an inverted index (token -> element
    ordinals) so phrase search does not rescan raw text.
    """

    def __init__(self, name: str, documents: Sequence[Document], skipped_rows: int = 0):
        if not name:
            raise InvalidName("dataset name must be non-empty")
        self.name = name
        self.documents = tuple(documents)
        self.skipped_rows = skipped_rows
        self.elements: tuple[TextElement, ...] = tuple(
            e for d in self.documents for e in d.elements
        )
        self.elements_by_id = {e.element_id: e for e in self.elements}
        self.documents_by_id = {d.doc_id: d for d in self.documents}
        self._tokens: list[list[str]] = [tokenize(e.text) for e in self.elements]
        self._postings: dict[str, set[int]] = {}
        for i, toks in enumerate(self._tokens):
            for tok in set(toks):
                self._postings.setdefault(tok, set()).add(i)

    def __len__(self) -> int:
        return len(self.elements)

    def tokens_of(self, ordinal: int) -> list[str]:
        return self._tokens[ordinal]

    def candidates(self, phrase_tokens: Sequence[str]) -> set[int]:
        """Element ordinals containing every token of the phrase."""
        sets = [self._postings.get(tok) for tok in phrase_tokens]
        if any(s is None for s in sets):
            return set()
        sets.sort(key=len)
        result = set(sets[0])
        for s in sets[1:]:
            result &= s
        return result


def _contains_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    n, m = len(tokens), len(phrase)
    if m == 0 or m > n:
        return False
    first = phrase[0]
    for i in range(n - m + 1):
        if tokens[i] == first and list(tokens[i : i + m]) == list(phrase):
            return True
    return False


def search(dataset: Dataset, query: Query, limit: int | None = None) -> list[TextElement]:
    """Elements matched by any query phrase (contiguous token subsequence).

    Ordered by number of matching phrases (descending), then doc_id, then
    position. At most `limit` results when given.
    """
    scores: dict[int, int] = {}
    for phrase in query.terms:
        ptoks = tokenize(phrase)
        if not ptoks:
            continue
        for i in dataset.candidates(ptoks):
            if _contains_phrase(dataset.tokens_of(i), ptoks):
                scores[i] = scores.get(i, 0) + 1
    ordered = sorted(
        scores,
        key=lambda i: (-scores[i], dataset.elements[i].doc_id, dataset.elements[i].position),
    )
    if limit is not None:
        ordered = ordered[:limit]
    return [dataset.elements[i] for i in ordered]


def build_dataset(
    name: str, rows: Iterable[tuple[str, str | None]], *, skipped_rows: int = 0
) -> Dataset:
    """Assemble a Dataset from (text, doc_id) rows, preserving row order.

    Rows with a blank doc_id (or doc_id None) fall into a single document
    named "<name>-all". Blank texts must already have been filtered out.
    """
    grouped: dict[str, list[str]] = {}
    order: list[str] = []
    for text, doc_id in rows:
        did = (doc_id or "").strip() or f"{name}-all"
        if did not in grouped:
            grouped[did] = []
            order.append(did)
        grouped[did].append(text)
    documents = []
    for did in order:
        elements = tuple(
            TextElement(element_id=f"{did}-{pos}", doc_id=did, position=pos, text=text)
            for pos, text in enumerate(grouped[did])
        )
        documents.append(Document(doc_id=did, elements=elements))
    return Dataset(name, documents, skipped_rows=skipped_rows)


def ingest_csv(raw_bytes: bytes, dataset_name: str) -> Dataset:
    """Parse a UTF-8 CSV with a `text` column (and optional `document_id`).

    One element per row in file order; rows with empty text are skipped and
    counted on the resulting dataset rather than raised.
    """
    if not _NAME_RE.match(dataset_name or ""):
        raise InvalidName(f"dataset name {dataset_name!r} must match {_NAME_RE.pattern}")
    try:
        decoded = raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"dataset {dataset_name!r} is not valid UTF-8: {exc}") from exc
    reader = csv.DictReader(io.StringIO(decoded))
    if reader.fieldnames is None or "text" not in reader.fieldnames:
        raise MissingColumn("CSV header must contain a `text` column")
    has_doc = "document_id" in reader.fieldnames
    rows: list[tuple[str, str | None]] = []
    skipped = 0
    for row in reader:
        text = (row.get("text") or "").strip()
        if not text:
            skipped += 1
            continue
        rows.append((text, row.get("document_id") if has_doc else None))
    if not rows:
        raise EmptyDataset(f"no rows with non-empty text in {dataset_name!r}")
    return build_dataset(dataset_name, rows, skipped_rows=skipped)


class CorpusStore:
    """Datasets on local disk (one directory each) plus in-memory indexes.

    Layout under `root`: <dataset>/elements.csv and <dataset>/meta.json.
    Everything is reloaded and re-indexed at startup.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, Dataset] = {}
        for meta_path in sorted(self.root.glob("*/meta.json")):
            meta = json.loads(meta_path.read_text("utf-8"))
            self._datasets[meta["name"]] = self._load(meta["name"], meta)

    def _load(self, name: str, meta: dict) -> Dataset:
        rows = []
        with open(self.root / name / "elements.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append((row["text"], row["doc_id"]))
        return build_dataset(name, rows, skipped_rows=int(meta.get("skipped_rows", 0)))

    def names(self) -> list[str]:
        return sorted(self._datasets)

    def get(self, name: str) -> Dataset:
        try:
            return self._datasets[name]
        except KeyError:
            raise UnknownDataset(f"no dataset named {name!r}") from None

    def ingest_csv(self, raw_bytes: bytes, dataset_name: str) -> Dataset:
        if dataset_name in self._datasets:
            raise DuplicateDataset(f"dataset {dataset_name!r} already exists")
        dataset = ingest_csv(raw_bytes, dataset_name)
        self._persist(dataset)
        self._datasets[dataset_name] = dataset
        return dataset

    def _persist(self, dataset: Dataset) -> None:
        ddir = self.root / dataset.name
        ddir.mkdir(parents=True, exist_ok=True)
        with open(ddir / "elements.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["doc_id", "position", "text"])
            for e in dataset.elements:
                writer.writerow([e.doc_id, e.position, e.text])
        meta = {
            "name": dataset.name,
            "skipped_rows": dataset.skipped_rows,
            "num_documents": len(dataset.documents),
            "num_elements": len(dataset.elements),
        }
        (ddir / "meta.json").write_text(json.dumps(meta, indent=2), "utf-8")

    def search(self, dataset_name: str, query: Query, limit: int | None = None) -> list[TextElement]:
        return search(self.get(dataset_name), query, limit)
