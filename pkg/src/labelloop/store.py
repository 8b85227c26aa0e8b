"""Workspaces, categories and the append-only label log.

Every labeling event is appended to a per-workspace line-delimited log and
folded into in-memory state; replaying the log after a restart reproduces
that state exactly. Nothing ever rewrites or deletes past records: a
retraction is a tombstone record with value "none".
"""

from __future__ import annotations

import csv
import io
import json
import re
import threading
import time
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusStore, Dataset
from .errors import (
    DuplicateCategory,
    DuplicateWorkspace,
    InvalidName,
    MissingColumn,
    UnknownCategory,
    UnknownElement,
    UnknownWorkspace,
)

VALUES = ("positive", "negative", "none")
SOURCES = ("user", "weak_negative", "evaluation")
# Sources that represent a human judgement (weak negatives are machine guesses).
HUMAN_SOURCES = ("user", "evaluation")

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass(frozen=True)
class Category:
    category_id: str
    name: str
    description: str = ""


@dataclass(frozen=True)
class LabelRecord:
    seq: int
    element_id: str
    category_id: str
    value: str  # positive | negative | none (tombstone)
    source: str  # user | weak_negative | evaluation
    timestamp: float


@dataclass(frozen=True)
class CurrentLabel:
    value: str  # positive | negative
    source: str
    seq: int


@dataclass(frozen=True)
class LabelCounts:
    """Snapshot of labeling progress for one category.

    positives/negatives count current user-source labels only. The
    user_labels_total field additionally counts evaluation-source labels
    (all human judgements). labels_since_last_train counts human label
    events, including relabels and retractions, since the training marker.
    """

    positives: int
    negatives: int
    user_labels_total: int
    labels_since_last_train: int


@dataclass
class RowError:
    line: int
    reason: str


@dataclass
class ImportResult:
    applied: int
    errors: list[RowError]
    counts: LabelCounts  # aggregated over all categories touched by the workspace


class Workspace:
    """One workspace: a dataset reference, categories, and its label log."""

    def __init__(self, workspace_id: str, dataset: Dataset, root: Path):
        self.workspace_id = workspace_id
        self.dataset = dataset
        self.root = root
        self.lock = threading.RLock()
        self._categories: dict[str, Category] = {}
        self._records: list[LabelRecord] = []
        self._seq = 0
        # Materialized fold of the log, two lanes per (category, element):
        # the latest user record, and the latest weak/evaluation record.
        self._user: dict[str, dict[str, tuple[str, int]]] = {}
        self._weak: dict[str, dict[str, tuple[str, str, int]]] = {}
        # Sorted seqs of user/evaluation events, for labels_since_last_train.
        self._user_seqs: dict[str, list[int]] = {}
        self._eval_seqs: dict[str, list[int]] = {}
        # Log position of the last completed training, per category. Not
        # persisted here; the service restores it from model metadata.
        self._train_markers: dict[str, int] = {}

    # -- setup / persistence ------------------------------------------------

    @property
    def _meta_path(self) -> Path:
        return self.root / "workspace.json"

    @property
    def _log_path(self) -> Path:
        return self.root / "labels.jsonl"

    def _write_meta(self) -> None:
        meta = {
            "workspace_id": self.workspace_id,
            "dataset_name": self.dataset.name,
            "categories": [
                {"category_id": c.category_id, "name": c.name, "description": c.description}
                for c in self.categories()
            ],
        }
        tmp = self._meta_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(meta, indent=2), "utf-8")
        tmp.replace(self._meta_path)

    @classmethod
    def create(cls, workspace_id: str, dataset: Dataset, root: Path) -> "Workspace":
        ws = cls(workspace_id, dataset, root)
        root.mkdir(parents=True, exist_ok=True)
        ws._write_meta()
        ws._log_path.touch()
        return ws

    @classmethod
    def open(cls, workspace_id: str, dataset: Dataset, root: Path) -> "Workspace":
        ws = cls(workspace_id, dataset, root)
        meta = json.loads(ws._meta_path.read_text("utf-8"))
        for c in meta.get("categories", []):
            cat = Category(c["category_id"], c["name"], c.get("description", ""))
            ws._categories[cat.category_id] = cat
        if ws._log_path.exists():
            with open(ws._log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    d = json.loads(line)
                    rec = LabelRecord(
                        seq=d["seq"],
                        element_id=d["element_id"],
                        category_id=d["category_id"],
                        value=d["value"],
                        source=d["source"],
                        timestamp=d["timestamp"],
                    )
                    ws._fold(rec)
        return ws

    # -- categories ----------------------------------------------------------

    def add_category(self, name: str, description: str = "") -> Category:
        with self.lock:
            if not name.strip():
                raise InvalidName("category name must be non-empty")
            if any(c.name == name for c in self._categories.values()):
                raise DuplicateCategory(f"category {name!r} already exists")
            cat = Category(f"c{len(self._categories) + 1}", name, description)
            self._categories[cat.category_id] = cat
            self._write_meta()
            return cat

    def categories(self) -> list[Category]:
        return sorted(self._categories.values(), key=lambda c: c.category_id)

    def category(self, category_id: str) -> Category:
        try:
            return self._categories[category_id]
        except KeyError:
            raise UnknownCategory(f"no category {category_id!r}") from None

    def category_by_name(self, name: str) -> Category | None:
        for c in self._categories.values():
            if c.name == name:
                return c
        return None

    # -- the log -------------------------------------------------------------

    def _fold(self, rec: LabelRecord) -> None:
        self._records.append(rec)
        self._seq = rec.seq
        if rec.source == "user":
            self._user.setdefault(rec.category_id, {})[rec.element_id] = (rec.value, rec.seq)
        else:
            self._weak.setdefault(rec.category_id, {})[rec.element_id] = (
                rec.value,
                rec.source,
                rec.seq,
            )
        if rec.source == "user":
            self._user_seqs.setdefault(rec.category_id, []).append(rec.seq)
        elif rec.source == "evaluation":
            self._eval_seqs.setdefault(rec.category_id, []).append(rec.seq)

    def _append(self, items: list[tuple[str, str, str, str]]) -> list[LabelRecord]:
        """Append (element_id, category_id, value, source) items atomically."""
        now = time.time()
        records = []
        with self.lock, open(self._log_path, "a", encoding="utf-8") as fh:
            for element_id, category_id, value, source in items:
                rec = LabelRecord(
                    seq=self._seq + 1,
                    element_id=element_id,
                    category_id=category_id,
                    value=value,
                    source=source,
                    timestamp=now,
                )
                fh.write(
                    json.dumps(
                        {
                            "seq": rec.seq,
                            "element_id": rec.element_id,
                            "category_id": rec.category_id,
                            "value": rec.value,
                            "source": rec.source,
                            "timestamp": rec.timestamp,
                        }
                    )
                    + "\n"
                )
                self._fold(rec)
                records.append(rec)
            fh.flush()
        return records

    def set_label(
        self, category_id: str, element_id: str, value: str, source: str = "user"
    ) -> LabelCounts:
        """Append one labeling event. value "none" retracts the current label."""
        self.category(category_id)
        if element_id not in self.dataset.elements_by_id:
            raise UnknownElement(f"no element {element_id!r} in dataset {self.dataset.name!r}")
        if value not in VALUES:
            raise ValueError(f"value must be one of {VALUES}, got {value!r}")
        if source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {source!r}")
        self._append([(element_id, category_id, value, source)])
        return self.label_counts(category_id)

    def append_labels(self, items: list[tuple[str, str, str, str]]) -> list[LabelRecord]:
        """Batch append of (element_id, category_id, value, source) events."""
        for element_id, category_id, value, source in items:
            self.category(category_id)
            if element_id not in self.dataset.elements_by_id:
                raise UnknownElement(f"no element {element_id!r}")
            if value not in VALUES or source not in SOURCES:
                raise ValueError(f"bad label item ({value!r}, {source!r})")
        return self._append(items)

    @property
    def last_seq(self) -> int:
        return self._seq

    @property
    def records(self) -> list[LabelRecord]:
        return list(self._records)

    # -- reads ---------------------------------------------------------------

    def current_labels(self, category_id: str) -> dict[str, CurrentLabel]:
        """Effective label per element: latest user record wins, then the
        latest weak/evaluation record; tombstones remove the entry (a weak
        record appended after a user tombstone becomes visible again)."""
        self.category(category_id)
        with self.lock:
            out: dict[str, CurrentLabel] = {}
            user = self._user.get(category_id, {})
            weak = self._weak.get(category_id, {})
            for element_id in user.keys() | weak.keys():
                u = user.get(element_id)
                w = weak.get(element_id)
                if u is not None and u[0] != "none":
                    out[element_id] = CurrentLabel(u[0], "user", u[1])
                elif u is not None:  # user tombstone
                    if w is not None and w[2] > u[1] and w[0] != "none":
                        out[element_id] = CurrentLabel(w[0], w[1], w[2])
                elif w is not None and w[0] != "none":
                    out[element_id] = CurrentLabel(w[0], w[1], w[2])
            return out

    def labeled_element_ids(self, category_id: str) -> set[str]:
        return set(self.current_labels(category_id))

    def unlabeled_elements(self, category_id: str) -> list[str]:
        """Element ids with no current label of any source, in corpus order."""
        labeled = self.labeled_element_ids(category_id)
        return [e.element_id for e in self.dataset.elements if e.element_id not in labeled]

    def mark_trained(self, category_id: str, seq: int) -> None:
        self._train_markers[category_id] = seq

    def train_marker(self, category_id: str) -> int:
        return self._train_markers.get(category_id, 0)

    def label_counts(self, category_id: str, *, count_evaluation: bool = True) -> LabelCounts:
        current = self.current_labels(category_id)
        positives = sum(1 for c in current.values() if c.source == "user" and c.value == "positive")
        negatives = sum(1 for c in current.values() if c.source == "user" and c.value == "negative")
        human_total = sum(1 for c in current.values() if c.source in HUMAN_SOURCES)
        marker = self.train_marker(category_id)
        user_seqs = self._user_seqs.get(category_id, [])
        since = len(user_seqs) - bisect_right(user_seqs, marker)
        if count_evaluation:
            eval_seqs = self._eval_seqs.get(category_id, [])
            since += len(eval_seqs) - bisect_right(eval_seqs, marker)
        return LabelCounts(
            positives=positives,
            negatives=negatives,
            user_labels_total=human_total,
            labels_since_last_train=since,
        )

    def clear_weak_labels(self, category_id: str) -> int:
        """Tombstone every current weak-negative label (used before each
        training iteration so weak picks are re-drawn fresh)."""
        current = self.current_labels(category_id)
        stale = sorted(e for e, c in current.items() if c.source == "weak_negative")
        if stale:
            self._append([(e, category_id, "none", "weak_negative") for e in stale])
        return len(stale)

    # -- import / export ------------------------------------------------------

    def export_csv(self) -> bytes:
        """Current user-source labels as CSV; round-trips through import_csv."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["workspace_id", "category_name", "doc_id", "element_id", "text", "label", "source"]
        )
        for cat in self.categories():
            current = self.current_labels(cat.category_id)
            for element_id in sorted(current):
                cur = current[element_id]
                if cur.source != "user":
                    continue
                element = self.dataset.elements_by_id[element_id]
                writer.writerow(
                    [
                        self.workspace_id,
                        cat.name,
                        element.doc_id,
                        element_id,
                        element.text,
                        "true" if cur.value == "positive" else "false",
                        cur.source,
                    ]
                )
        return buf.getvalue().encode("utf-8")

    def import_csv(self, raw_bytes: bytes) -> ImportResult:
        """Apply labels from a CSV with columns category_name, label and
        element_id (or doc_id+position). Bad rows are reported, not fatal;
        unknown categories are created on the fly."""
        try:
            decoded = raw_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MissingColumn(f"label CSV is not valid UTF-8: {exc}") from exc
        reader = csv.DictReader(io.StringIO(decoded))
        fields = reader.fieldnames or []
        if "category_name" not in fields or "label" not in fields:
            raise MissingColumn("label CSV needs `category_name` and `label` columns")
        if "element_id" not in fields and not ("doc_id" in fields and "position" in fields):
            raise MissingColumn("label CSV needs `element_id` or `doc_id`+`position` columns")
        applied = 0
        errors: list[RowError] = []
        items: list[tuple[str, str, str, str]] = []
        for line_no, row in enumerate(reader, start=2):
            element_id = (row.get("element_id") or "").strip()
            if not element_id:
                doc_id = (row.get("doc_id") or "").strip()
                position = (row.get("position") or "").strip()
                if not doc_id or not position.isdigit():
                    errors.append(RowError(line_no, "missing element_id and doc_id/position"))
                    continue
                element_id = f"{doc_id}-{int(position)}"
            if element_id not in self.dataset.elements_by_id:
                errors.append(RowError(line_no, f"unknown element {element_id!r}"))
                continue
            raw_label = (row.get("label") or "").strip().lower()
            if raw_label not in ("true", "false"):
                errors.append(RowError(line_no, f"label must be true/false, got {raw_label!r}"))
                continue
            name = (row.get("category_name") or "").strip()
            if not name:
                errors.append(RowError(line_no, "empty category_name"))
                continue
            cat = self.category_by_name(name) or self.add_category(name)
            value = "positive" if raw_label == "true" else "negative"
            items.append((element_id, cat.category_id, value, "user"))
            applied += 1
        if items:
            self._append(items)
        totals = [self.label_counts(c.category_id) for c in self.categories()]
        counts = LabelCounts(
            positives=sum(t.positives for t in totals),
            negatives=sum(t.negatives for t in totals),
            user_labels_total=sum(t.user_labels_total for t in totals),
            labels_since_last_train=sum(t.labels_since_last_train for t in totals),
        )
        return ImportResult(applied=applied, errors=errors, counts=counts)


class WorkspaceStore:
    """All workspaces under a data root; reopens existing ones at startup."""

    def __init__(self, root: Path | str, corpus: CorpusStore):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.corpus = corpus
        self._workspaces: dict[str, Workspace] = {}
        for meta_path in sorted(self.root.glob("*/workspace.json")):
            meta = json.loads(meta_path.read_text("utf-8"))
            wid = meta["workspace_id"]
            dataset = corpus.get(meta["dataset_name"])
            self._workspaces[wid] = Workspace.open(wid, dataset, meta_path.parent)

    def create(self, dataset_name: str, workspace_id: str) -> Workspace:
        if not _ID_RE.match(workspace_id or ""):
            raise InvalidName(f"workspace id {workspace_id!r} must match {_ID_RE.pattern}")
        if workspace_id in self._workspaces:
            raise DuplicateWorkspace(f"workspace {workspace_id!r} already exists")
        dataset = self.corpus.get(dataset_name)
        ws = Workspace.create(workspace_id, dataset, self.root / workspace_id)
        self._workspaces[workspace_id] = ws
        return ws

    def get(self, workspace_id: str) -> Workspace:
        try:
            return self._workspaces[workspace_id]
        except KeyError:
            raise UnknownWorkspace(f"no workspace {workspace_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._workspaces)
