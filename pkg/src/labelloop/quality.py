"""Surfacing likely labeling errors.

Two detectors: cross-validation disagreement (train on most of the labeled
data, flag held-out elements the model contradicts) and contradicting pairs
(opposite-labeled elements whose averaged embeddings sit close together).
Both are read-only over a labels snapshot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientData
from .learning.ensemble import EnsembleModel, LabeledExample, train_flavor
from .learning.features import EmbeddingTable, embed_average

logger = logging.getLogger(__name__)

TrainerFn = Callable[[Sequence[LabeledExample], int], EnsembleModel]


@dataclass(frozen=True)
class SuspectLabel:
    element_id: str
    user_label: int  # +1 or -1
    model_prediction: int  # the opposite sign, by construction
    confidence: float  # 2 * |p - 0.5|, in [0, 1]


@dataclass(frozen=True)
class ContradictingPair:
    element_a: str
    element_b: str
    label_a: int
    label_b: int
    distance: float


def _default_trainer(examples: Sequence[LabeledExample], seed: int) -> EnsembleModel:
    return train_flavor("light", examples, seed=seed)


def stratified_folds(
    examples: Sequence[LabeledExample], folds: int, seed: int
) -> list[list[LabeledExample]]:
    """Seeded round-robin split keeping the class mix similar across folds."""
    rng = np.random.default_rng(seed)
    buckets: list[list[LabeledExample]] = [[] for _ in range(folds)]
    for label in (1, -1):
        group = sorted((e for e in examples if e.label == label), key=lambda e: e.element_id)
        order = rng.permutation(len(group))
        for slot, i in enumerate(order):
            buckets[slot % folds].append(group[i])
    return buckets


def cross_validation_disagreements(
    examples: Sequence[LabeledExample],
    *,
    folds: int = 4,
    trainer: TrainerFn | None = None,
    seed: int = 0,
) -> list[SuspectLabel]:
    """Elements whose held-out prediction contradicts their label, most
    confident disagreement first. Folds whose training split collapses to a
    single class are skipped with a warning."""
    n_pos = sum(1 for e in examples if e.label == 1)
    n_neg = sum(1 for e in examples if e.label == -1)
    if n_pos < 2 or n_neg < 2 or len(examples) < folds:
        raise InsufficientData(
            f"need >= 2 examples per class and >= {folds} total, "
            f"got {n_pos} positive / {n_neg} negative"
        )
    train = trainer or _default_trainer
    buckets = stratified_folds(examples, folds, seed)
    suspects = []
    for f, held_out in enumerate(buckets):
        train_examples = [e for g, bucket in enumerate(buckets) if g != f for e in bucket]
        if len({e.label for e in train_examples}) < 2:
            logger.warning("fold %d skipped: training split has a single class", f)
            continue
        model = train(train_examples, seed + f)
        for example in held_out:
            p = model.predict_proba(example.text)
            predicted = 1 if p >= 0.5 else -1
            if predicted != example.label:
                suspects.append(
                    SuspectLabel(
                        element_id=example.element_id,
                        user_label=example.label,
                        model_prediction=predicted,
                        confidence=2.0 * abs(p - 0.5),
                    )
                )
    suspects.sort(key=lambda s: (-s.confidence, s.element_id))
    return suspects


def contradicting_pairs(
    examples: Sequence[LabeledExample],
    table: EmbeddingTable,
    top_n: int = 10,
) -> list[ContradictingPair]:
    """Opposite-labeled pairs ranked by ascending embedding distance.

    Elements whose text has no in-table token embed to the zero vector and
    are excluded: zero distance between two such texts says nothing about
    similarity.
    """
    embedded = []
    for e in sorted(examples, key=lambda e: e.element_id):
        vec = embed_average(e.text, table)
        if np.any(vec != 0.0):
            embedded.append((e, vec))
    positives = [(e, v) for e, v in embedded if e.label == 1]
    negatives = [(e, v) for e, v in embedded if e.label == -1]
    pairs = []
    for pos, pos_vec in positives:
        for neg, neg_vec in negatives:
            first, second = sorted([pos, neg], key=lambda e: e.element_id)
            pairs.append(
                ContradictingPair(
                    element_a=first.element_id,
                    element_b=second.element_id,
                    label_a=first.label,
                    label_b=second.label,
                    distance=float(np.linalg.norm(pos_vec - neg_vec)),
                )
            )
    pairs.sort(key=lambda p: (p.distance, p.element_a, p.element_b))
    return pairs[:top_n]
