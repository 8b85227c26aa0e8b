"""Text classifiers built from calibrated linear SVM members.

Two flavors ship by default. "light" is a single bag-of-words member and is
cheap enough to retrain constantly. "heavy" adds an averaged-word-embedding
member and combines members by the mean of their calibrated probabilities;
it stands in for any slower, stronger model a deployment may plug in via
register_flavor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import EmptyCorpus
from .features import EmbeddingTable, Vocabulary, embed_average, vectorize_bow
from .svm import LinearModel, calibrate, train_linear_svm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledExample:
    element_id: str
    text: str
    label: int  # +1 or -1


@dataclass(frozen=True)
class Prediction:
    probability: float
    predicted_positive: bool

    @classmethod
    def from_probability(cls, p: float) -> "Prediction":
        if not (0.0 <= p <= 1.0) or not np.isfinite(p):
            raise ValueError(f"probability out of range: {p}")
        return cls(probability=p, predicted_positive=p >= 0.5)


@dataclass
class SvmTextModel:
    """One ensemble member: a featurizer plus a trained linear model."""

    kind: str  # "bow" | "embedding"
    linear: LinearModel
    vocab: Vocabulary | None = None
    table: EmbeddingTable | None = None

    def margin(self, text: str) -> float:
        if self.kind == "bow":
            assert self.vocab is not None
            return self.linear.margin(vectorize_bow(text, self.vocab))
        assert self.table is not None
        return self.linear.margin(embed_average(text, self.table))

    def proba(self, text: str) -> float:
        return calibrate(self.margin(text))


@dataclass
class EnsembleModel:
    members: list[SvmTextModel] = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    def predict_proba(self, text: str) -> float:
        return float(np.mean([m.proba(text) for m in self.members]))

    def predict(self, text: str) -> Prediction:
        return Prediction.from_probability(self.predict_proba(text))

    def predict_many(self, texts: Sequence[str]) -> list[Prediction]:
        return [self.predict(t) for t in texts]


def train_bow_model(
    examples: Sequence[LabeledExample],
    *,
    max_features: int = 10000,
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
) -> SvmTextModel:
    vocab = Vocabulary.fit([e.text for e in examples], max_features)
    data = [(vectorize_bow(e.text, vocab), e.label) for e in examples]
    linear = train_linear_svm(
        data, len(vocab), lam=lam, epochs=epochs, seed=seed, feature_kind="bow"
    )
    return SvmTextModel(kind="bow", linear=linear, vocab=vocab)


def train_embedding_model(
    examples: Sequence[LabeledExample],
    table: EmbeddingTable,
    *,
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
) -> SvmTextModel:
    data = [(embed_average(e.text, table), e.label) for e in examples]
    linear = train_linear_svm(
        data, table.dim, lam=lam, epochs=epochs, seed=seed, feature_kind="embedding"
    )
    return SvmTextModel(kind="embedding", linear=linear, table=table)


def _train_light(examples, table, **hyper) -> EnsembleModel:
    return EnsembleModel([train_bow_model(examples, **hyper)])


def _train_heavy(examples, table, **hyper) -> EnsembleModel:
    members = [train_bow_model(examples, **hyper)]
    if table is None:
        logger.warning("no embedding table configured; heavy model degrades to bag-of-words only")
    else:
        emb_hyper = {k: v for k, v in hyper.items() if k != "max_features"}
        emb_hyper["seed"] = hyper.get("seed", 0) + 1
        members.append(train_embedding_model(examples, table, **emb_hyper))
    return EnsembleModel(members)


TrainerFn = Callable[..., EnsembleModel]

_FLAVORS: dict[str, TrainerFn] = {"light": _train_light, "heavy": _train_heavy}


def register_flavor(name: str, trainer: TrainerFn) -> None:
    """Plug in an alternative model flavor usable in schedules."""
    _FLAVORS[name] = trainer


def available_flavors() -> list[str]:
    return sorted(_FLAVORS)


def train_flavor(
    flavor: str,
    examples: Sequence[LabeledExample],
    *,
    table: EmbeddingTable | None = None,
    max_features: int = 10000,
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
) -> EnsembleModel:
    if not examples:
        raise EmptyCorpus("cannot train on zero examples")
    try:
        trainer = _FLAVORS[flavor]
    except KeyError:
        raise ValueError(f"unknown model flavor {flavor!r}; have {available_flavors()}") from None
    return trainer(examples, table, max_features=max_features, lam=lam, epochs=epochs, seed=seed)
