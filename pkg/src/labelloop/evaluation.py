"""Model evaluation: live precision estimation and the headless simulation
harness used to benchmark labeling policies against a gold-labeled corpus.

Live workspaces can only measure precision (label a sample of the model's
positive predictions); recall needs gold labels and is therefore reported by
the simulator alone.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Dataset, Query, build_dataset, search
from .errors import (
    IncompleteLabels,
    MissingColumn,
    NoModel,
    NoPositivePredictions,
    SeedQueryTooSparse,
    UnknownElement,
    UnknownSession,
)
from .learning.ensemble import LabeledExample, train_flavor
from .learning.features import EmbeddingTable
from .learning.registry import ActiveModel
from .policy import PolicyConfig, model_flavor_for, rank_for_labeling, select_training_set
from .store import HUMAN_SOURCES, CurrentLabel, Workspace


@dataclass(frozen=True)
class EvalReport:
    """Precision/recall/F1 with the counts they came from.

    recall and f1 are None when only precision was measured (live
    evaluation has no gold negatives, so fn is unknowable).
    """

    precision: float
    recall: float | None
    f1: float | None
    tp: int
    fp: int
    fn: int


def compute_report(predicted: Mapping[str, bool], gold: Mapping[str, bool]) -> EvalReport:
    """Standard confusion-matrix metrics over a gold-labeled id set."""
    missing = gold.keys() - predicted.keys()
    if missing:
        raise ValueError(f"predictions missing for {len(missing)} gold elements")
    tp = fp = fn = 0
    for eid, is_positive in gold.items():
        if predicted[eid]:
            if is_positive:
                tp += 1
            else:
                fp += 1
        elif is_positive:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


# ---------------------------------------------------------------------------
# Live precision evaluation
# ---------------------------------------------------------------------------


@dataclass
class PrecisionEvalSession:
    session_id: str
    category_id: str
    model_iteration: int
    element_ids: list[str]
    status: str  # open | complete
    short_sample: bool
    created_at: float
    precision: float | None = None


class EvaluationSessions:
    """Precision-evaluation sessions for one workspace, persisted append-only."""

    def __init__(self, workspace: Workspace, get_active: Callable[[str], ActiveModel | None]):
        self.workspace = workspace
        self.get_active = get_active
        self._sessions: dict[str, PrecisionEvalSession] = {}
        self._counter = 0
        self._log = workspace.root / "sessions.jsonl"
        if self._log.exists():
            with open(self._log, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._replay(json.loads(line))

    def _replay(self, event: dict) -> None:
        if event["event"] == "start":
            session = PrecisionEvalSession(
                session_id=event["session_id"],
                category_id=event["category_id"],
                model_iteration=event["model_iteration"],
                element_ids=event["element_ids"],
                status="open",
                short_sample=event["short_sample"],
                created_at=event["created_at"],
            )
            self._sessions[session.session_id] = session
            self._counter = max(self._counter, int(session.session_id.split("-")[-1]))
        else:
            session = self._sessions[event["session_id"]]
            session.status = "complete"
            session.precision = event["precision"]

    def _persist(self, event: dict) -> None:
        with open(self._log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def get(self, session_id: str) -> PrecisionEvalSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no evaluation session {session_id!r}") from None

    def sessions(self, category_id: str | None = None) -> list[PrecisionEvalSession]:
        out = [
            s
            for s in self._sessions.values()
            if category_id is None or s.category_id == category_id
        ]
        out.sort(key=lambda s: s.session_id)
        return out

    def start(self, category_id: str, cfg: PolicyConfig) -> PrecisionEvalSession:
        """Sample up to cfg.precision_sample_size positive-predicted elements
        that carry no human label yet; flag the session when fewer exist."""
        active = self.get_active(category_id)
        if active is None:
            raise NoModel(f"no active model for category {category_id!r}")
        current = self.workspace.current_labels(category_id)
        human = {eid for eid, cur in current.items() if cur.source in HUMAN_SOURCES}
        candidates = sorted(
            eid
            for eid, pred in active.predictions.items()
            if pred.predicted_positive and eid not in human
        )
        if not candidates:
            raise NoPositivePredictions("no unlabeled positive-predicted elements to sample")
        self._counter += 1
        n = cfg.precision_sample_size
        rng = np.random.default_rng([cfg.seed, active.record.iteration, self._counter])
        picks = rng.permutation(len(candidates))[: min(n, len(candidates))]
        sampled = sorted(candidates[i] for i in picks)
        session = PrecisionEvalSession(
            session_id=f"eval-{self._counter}",
            category_id=category_id,
            model_iteration=active.record.iteration,
            element_ids=sampled,
            status="open",
            short_sample=len(sampled) < n,
            created_at=time.time(),
        )
        self._sessions[session.session_id] = session
        self._persist(
            {
                "event": "start",
                "session_id": session.session_id,
                "category_id": category_id,
                "model_iteration": session.model_iteration,
                "element_ids": sampled,
                "short_sample": session.short_sample,
                "created_at": session.created_at,
            }
        )
        return session

    def submit(self, session_id: str, labels: Mapping[str, str]) -> EvalReport:
        """Record the human verdicts for every sampled element; the labels go
        into the store with source=evaluation so later training can use them."""
        session = self.get(session_id)
        if session.status == "complete":
            raise IncompleteLabels(f"session {session_id!r} is already complete")
        sampled = set(session.element_ids)
        extra = labels.keys() - sampled
        if extra:
            raise UnknownElement(f"labels for elements outside the session: {sorted(extra)[:3]}")
        missing = sampled - labels.keys()
        if missing:
            raise IncompleteLabels(
                f"{len(missing)} of {len(sampled)} sampled elements still unlabeled"
            )
        for value in labels.values():
            if value not in ("positive", "negative"):
                raise ValueError(f"evaluation labels must be positive/negative, got {value!r}")
        self.workspace.append_labels(
            [
                (eid, session.category_id, labels[eid], "evaluation")
                for eid in session.element_ids
            ]
        )
        n_pos = sum(1 for v in labels.values() if v == "positive")
        session.precision = n_pos / len(session.element_ids)
        session.status = "complete"
        self._persist(
            {"event": "complete", "session_id": session_id, "precision": session.precision}
        )
        return EvalReport(
            precision=session.precision,
            recall=None,
            f1=None,
            tp=n_pos,
            fp=len(session.element_ids) - n_pos,
            fn=0,
        )


# ---------------------------------------------------------------------------
# Simulation harness
# ---------------------------------------------------------------------------


@dataclass
class GoldCorpus:
    dataset: Dataset
    gold: dict[str, bool]

    @classmethod
    def from_csv(
        cls,
        raw_bytes: bytes,
        gold_column: str,
        *,
        name: str = "sim",
        text_column: str = "text",
        document_column: str = "document_id",
    ) -> "GoldCorpus":
        reader = csv.DictReader(io.StringIO(raw_bytes.decode("utf-8")))
        fields = reader.fieldnames or []
        if text_column not in fields or gold_column not in fields:
            raise MissingColumn(f"corpus CSV needs `{text_column}` and `{gold_column}` columns")
        rows: list[tuple[str, str | None]] = []
        raw_gold: list[bool] = []
        for row in reader:
            text = (row.get(text_column) or "").strip()
            if not text:
                continue
            value = (row.get(gold_column) or "").strip().lower()
            rows.append((text, row.get(document_column)))
            raw_gold.append(value in ("true", "1", "yes", "positive"))
        dataset = build_dataset(name, rows)
        gold = {e.element_id: raw_gold[i] for i, e in enumerate(dataset.elements)}
        return cls(dataset=dataset, gold=gold)


@dataclass
class SimulationConfig:
    corpus: GoldCorpus
    query: Query
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    seed_positive_target: int = 30
    batch_size: int = 30
    iterations: int = 6
    test_fraction: float = 0.3
    embeddings: EmbeddingTable | None = None

    def __post_init__(self):
        if self.seed_positive_target < 1 or self.batch_size < 1:
            raise ValueError("seed_positive_target and batch_size must be >= 1")


@dataclass(frozen=True)
class SimulationRow:
    seed: int
    iteration: int
    report: EvalReport
    train_size: int  # training-set entries, weak negatives included
    labeled_count: int  # gold-labeled elements accumulated so far


@dataclass
class SimulationResult:
    rows: list[SimulationRow]

    def final_iteration(self) -> int:
        return max(r.iteration for r in self.rows)

    def f1_by_iteration(self) -> dict[int, list[float]]:
        grouped: dict[int, list[float]] = {}
        for row in sorted(self.rows, key=lambda r: (r.iteration, r.seed)):
            grouped.setdefault(row.iteration, []).append(row.report.f1 or 0.0)
        return grouped

    def mean_f1_by_iteration(self) -> dict[int, float]:
        return {it: float(np.mean(v)) for it, v in self.f1_by_iteration().items()}

    def final_f1_by_seed(self) -> dict[int, float]:
        final = self.final_iteration()
        return {r.seed: (r.report.f1 or 0.0) for r in self.rows if r.iteration == final}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["seed", "iteration", "precision", "recall", "f1", "train_size"])
        for row in sorted(self.rows, key=lambda r: (r.seed, r.iteration)):
            writer.writerow(
                [
                    row.seed,
                    row.iteration,
                    f"{row.report.precision:.6f}",
                    f"{row.report.recall:.6f}",
                    f"{row.report.f1:.6f}",
                    row.train_size,
                ]
            )
        return buf.getvalue()

    def summary_csv(self) -> str:
        """Per-iteration mean and std F1 across seeds, ready for plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["iteration", "mean_f1", "std_f1", "seeds"])
        for it, values in self.f1_by_iteration().items():
            writer.writerow(
                [it, f"{np.mean(values):.6f}", f"{np.std(values):.6f}", len(values)]
            )
        return buf.getvalue()


def _stratified_split(gold: Mapping[str, bool], fraction: float, seed: int) -> set[str]:
    """Seeded test split holding roughly `fraction` of each class."""
    rng = np.random.default_rng([seed, 101])
    test: set[str] = set()
    for label in (True, False):
        ids = sorted(eid for eid, g in gold.items() if g == label)
        k = int(round(fraction * len(ids)))
        order = rng.permutation(len(ids))
        test.update(ids[i] for i in order[:k])
    return test


def _run_seed(cfg: SimulationConfig, seed: int) -> list[SimulationRow]:
    dataset = cfg.corpus.dataset
    gold = cfg.corpus.gold
    test_ids = _stratified_split(gold, cfg.test_fraction, seed)
    train_ids = [e.element_id for e in dataset.elements if e.element_id not in test_ids]
    train_id_set = set(train_ids)

    # Seed phase: walk shuffled query hits, labeling each with its gold
    # label, until enough positives are in hand.
    hits = [e.element_id for e in search(dataset, cfg.query) if e.element_id in train_id_set]
    shuffle_rng = np.random.default_rng([seed, 202])
    hits = [hits[i] for i in shuffle_rng.permutation(len(hits))]
    labeled: dict[str, int] = {}
    positives = 0
    for eid in hits:
        labeled[eid] = 1 if gold[eid] else -1
        if gold[eid]:
            positives += 1
            if positives >= cfg.seed_positive_target:
                break
    if positives < cfg.seed_positive_target:
        raise SeedQueryTooSparse(
            f"seed {seed}: query matched only {positives} positives in the train split, "
            f"need {cfg.seed_positive_target}"
        )

    gold_test = {eid: gold[eid] for eid in test_ids}
    rows = []
    model = None
    for iteration in range(cfg.iterations + 1):
        if iteration > 0:
            assert model is not None
            pool = [eid for eid in train_ids if eid not in labeled]
            predictions = {
                eid: model.predict_proba(dataset.elements_by_id[eid].text) for eid in pool
            }
            batch = rank_for_labeling(
                predictions,
                set(labeled),
                cfg.policy.al_strategy,
                cfg.batch_size,
                seed=int(np.random.default_rng([seed, 303, iteration]).integers(2**31)),
            )
            for eid in batch:
                labeled[eid] = 1 if gold[eid] else -1

        labels_map = {
            eid: CurrentLabel("positive" if lab == 1 else "negative", "user", 0)
            for eid, lab in labeled.items()
        }
        pool = [eid for eid in train_ids if eid not in labeled]
        training_set = select_training_set(
            labels_map,
            pool,
            cfg.policy,
            seed=int(np.random.default_rng([seed, 404, iteration]).integers(2**31)),
        )
        train_element_ids = {entry.element_id for entry in training_set.entries}
        if train_element_ids & test_ids:
            raise RuntimeError("test elements leaked into a training set")
        examples = [
            LabeledExample(entry.element_id, dataset.elements_by_id[entry.element_id].text, entry.label)
            for entry in training_set.entries
        ]
        flavor = model_flavor_for(iteration, cfg.policy)
        model = train_flavor(
            flavor,
            examples,
            table=cfg.embeddings,
            max_features=cfg.policy.max_features,
            lam=cfg.policy.svm_lambda,
            epochs=cfg.policy.svm_epochs,
            seed=int(np.random.default_rng([seed, 505, iteration]).integers(2**31)),
        )
        predicted = {
            eid: model.predict(dataset.elements_by_id[eid].text).predicted_positive
            for eid in test_ids
        }
        rows.append(
            SimulationRow(
                seed=seed,
                iteration=iteration,
                report=compute_report(predicted, gold_test),
                train_size=len(training_set.entries),
                labeled_count=len(labeled),
            )
        )
    return rows


def run_simulation(cfg: SimulationConfig) -> SimulationResult:
    """Replay the guided-labeling loop against gold labels, per seed:
    seed-query phase, then `iterations` rounds of (select batch by the
    active-learning strategy, label with gold, retrain per schedule), each
    scored on the frozen held-out test split."""
    rows: list[SimulationRow] = []
    for seed in cfg.seeds:
        rows.extend(_run_seed(cfg, seed))
    return SimulationResult(rows)
