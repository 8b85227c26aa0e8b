"""Build-loop decisions: when to train, what goes into the training set,
which model flavor each iteration uses, and what to suggest labeling next.

Everything here is a pure function over snapshots; callers serialize
decisions per (workspace, category) and own any side effects such as
recording weak-negative picks in the label log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import AbstractSet, Mapping, Sequence

import numpy as np

from .errors import NoPositives
from .store import HUMAN_SOURCES, CurrentLabel, LabelCounts

STRATEGIES = ("uncertainty", "random")


@dataclass(frozen=True)
class ScheduleRule:
    """Inclusive iteration range mapped to a model flavor; end None = open."""

    start: int
    end: int | None
    flavor: str


def parse_schedule(spec: str) -> tuple[ScheduleRule, ...]:
    """Parse "light:0-4,heavy:5-6" (a bare number means a single iteration)."""
    rules = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        flavor, _, span = part.partition(":")
        if not span:
            raise ValueError(f"schedule entry {part!r} needs flavor:range")
        if "-" in span:
            lo, hi = span.split("-", 1)
            rules.append(ScheduleRule(int(lo), None if hi in ("", "*") else int(hi), flavor))
        else:
            rules.append(ScheduleRule(int(span), int(span), flavor))
    return tuple(rules)


def format_schedule(rules: Sequence[ScheduleRule]) -> str:
    parts = []
    for r in rules:
        hi = "*" if r.end is None else str(r.end)
        parts.append(f"{r.flavor}:{r.start}-{hi}")
    return ",".join(parts)


@dataclass(frozen=True)
class PolicyConfig:
    """All tunable constants of the build loop."""

    first_model_positive_threshold: int = 20
    retrain_label_delta: int = 20
    negative_ratio: float = 2.0  # negatives : positives
    precision_sample_size: int = 50
    al_strategy: str = "uncertainty"
    model_schedule: tuple[ScheduleRule, ...] = ()  # empty = light everywhere
    label_next_size: int = 30
    seed: int = 0
    # Whether precision-evaluation labels advance the retrain counter.
    count_evaluation_toward_retrain: bool = True
    # Trainer hyperparameters.
    svm_lambda: float = 1e-4
    svm_epochs: int = 10
    max_features: int = 10000

    def __post_init__(self):
        if self.first_model_positive_threshold < 1 or self.retrain_label_delta < 1:
            raise ValueError("training thresholds must be >= 1")
        if self.negative_ratio <= 0:
            raise ValueError("negative_ratio must be positive")
        if self.precision_sample_size < 1:
            raise ValueError("precision_sample_size must be >= 1")
        if self.al_strategy not in STRATEGIES:
            raise ValueError(f"al_strategy must be one of {STRATEGIES}")

    def to_mapping(self) -> dict:
        d = {
            "first_model_positive_threshold": self.first_model_positive_threshold,
            "retrain_label_delta": self.retrain_label_delta,
            "negative_ratio": self.negative_ratio,
            "precision_sample_size": self.precision_sample_size,
            "al_strategy": self.al_strategy,
            "model_schedule": format_schedule(self.model_schedule),
            "label_next_size": self.label_next_size,
            "seed": self.seed,
            "count_evaluation_toward_retrain": self.count_evaluation_toward_retrain,
            "svm_lambda": self.svm_lambda,
            "svm_epochs": self.svm_epochs,
            "max_features": self.max_features,
        }
        return d

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PolicyConfig":
        base = cls()
        return base.updated(data)

    def updated(self, overrides: Mapping) -> "PolicyConfig":
        kwargs = {}
        for key, value in overrides.items():
            if key == "model_schedule" and isinstance(value, str):
                value = parse_schedule(value)
            if not hasattr(self, key):
                raise ValueError(f"unknown policy field {key!r}")
            current = getattr(self, key)
            if isinstance(current, bool):
                value = value if isinstance(value, bool) else str(value).lower() == "true"
            elif isinstance(current, int) and not isinstance(current, bool):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            kwargs[key] = value
        return replace(self, **kwargs)


@dataclass(frozen=True)
class TrainingEntry:
    element_id: str
    label: int  # +1 or -1
    provenance: str  # user | weak_negative | evaluation


@dataclass
class TrainingSet:
    entries: list[TrainingEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.element_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("training set has duplicate element ids")
        labels = {e.label for e in self.entries}
        if labels != {-1, 1}:
            raise ValueError("training set must contain both classes")

    @property
    def positives(self) -> int:
        return sum(1 for e in self.entries if e.label == 1)

    @property
    def negatives(self) -> int:
        return sum(1 for e in self.entries if e.label == -1)

    def weak_ids(self) -> list[str]:
        return [e.element_id for e in self.entries if e.provenance == "weak_negative"]


def should_train(counts: LabelCounts, has_model: bool, cfg: PolicyConfig) -> bool:
    """First model once enough positives exist; afterwards, every time the
    new-label delta is reached."""
    if not has_model:
        return counts.positives >= cfg.first_model_positive_threshold
    return counts.labels_since_last_train >= cfg.retrain_label_delta


def select_training_set(
    labels: Mapping[str, CurrentLabel],
    pool: Sequence[str],
    cfg: PolicyConfig,
    seed: int,
) -> TrainingSet:
    """All human labels, padded with uniformly drawn weak negatives until the
    negatives reach ceil(negative_ratio * positives) or the pool runs out.

    `pool` should hold unlabeled element ids; anything already labeled is
    filtered out defensively so weak picks can never displace a judgement.
    """
    entries = []
    human_pos = human_neg = 0
    for element_id, cur in labels.items():
        if cur.source not in HUMAN_SOURCES:
            continue
        label = 1 if cur.value == "positive" else -1
        entries.append(TrainingEntry(element_id, label, cur.source))
        if label == 1:
            human_pos += 1
        else:
            human_neg += 1
    if human_pos == 0:
        raise NoPositives("cannot assemble a training set without positive labels")
    target_negatives = math.ceil(cfg.negative_ratio * human_pos)
    deficit = target_negatives - human_neg
    if deficit > 0:
        candidates = sorted(set(pool) - set(labels))
        take = min(deficit, len(candidates))
        if take:
            rng = np.random.default_rng(seed)
            picks = rng.permutation(len(candidates))[:take]
            for i in sorted(picks):
                entries.append(TrainingEntry(candidates[i], -1, "weak_negative"))
    entries.sort(key=lambda e: e.element_id)
    return TrainingSet(entries)


def model_flavor_for(iteration: int, cfg: PolicyConfig) -> str:
    """First matching schedule rule wins; the fallback flavor is light."""
    for rule in cfg.model_schedule:
        if rule.start <= iteration and (rule.end is None or iteration <= rule.end):
            return rule.flavor
    return "light"


def rank_for_labeling(
    predictions: Mapping[str, float],
    already_labeled: AbstractSet[str],
    strategy: str,
    k: int,
    seed: int = 0,
) -> list[str]:
    """Pick up to k unlabeled elements to suggest next.

    uncertainty: ascending |p - 0.5| with element_id tie-break;
    random: a seeded uniform shuffle.
    """
    eligible = sorted(eid for eid in predictions if eid not in already_labeled)
    if strategy == "uncertainty":
        eligible.sort(key=lambda eid: (abs(predictions[eid] - 0.5), eid))
    elif strategy == "random":
        rng = np.random.default_rng(seed)
        eligible = [eligible[i] for i in rng.permutation(len(eligible))]
    else:
        raise ValueError(f"unknown strategy {strategy!r}; have {STRATEGIES}")
    return eligible[:k]
