"""Online linear SVM trained by stochastic subgradient descent.

Minimizes  lam/2 * ||w||^2  +  (1/n) * sum_i max(0, 1 - y_i (w.x_i + b))
one example at a time with step size 1/(lam * t) over shuffled epochs,
followed by the canonical projection onto the ball of radius 1/sqrt(lam).

The bias is an unregularized extra coordinate: it only moves on hinge
violations and carries no shrinkage term. Because nothing ever decays it,
its updates are scaled by a small constant (the same reasoning as
scikit-learn's intercept decay); otherwise the 1/(lam*t) schedule makes the
first bias steps enormous at small lam and they can only heal at O(1/t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import SingleClass, TooFewExamples
from .features import SparseVector

FeatureVector = SparseVector | np.ndarray
Example = tuple[FeatureVector, int]


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    lam: float
    feature_kind: str = "bow"
    # Full-batch objective averaged over each epoch, when tracking was on.
    objective_history: list[float] = field(default_factory=list)

    def margin(self, x: FeatureVector) -> float:
        if isinstance(x, SparseVector):
            if not x.indices:
                return self.bias
            idx = np.fromiter(x.indices, dtype=np.intp)
            vals = np.fromiter(x.values, dtype=np.float64)
            return float(np.dot(self.weights[idx], vals) + self.bias)
        return float(np.dot(self.weights, x) + self.bias)

    def predict_proba(self, x: FeatureVector) -> float:
        return calibrate(self.margin(x))


def calibrate(margin: float) -> float:
    """Map a decision margin to a probability via the logistic link."""
    if margin >= 0:
        return 1.0 / (1.0 + math.exp(-margin))
    e = math.exp(margin)
    return e / (1.0 + e)


def _as_index_value(x: FeatureVector, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, SparseVector):
        idx = np.fromiter(x.indices, dtype=np.intp)
        vals = np.fromiter(x.values, dtype=np.float64)
    else:
        x = np.asarray(x, dtype=np.float64)
        idx = np.arange(len(x), dtype=np.intp)
        vals = x
    if len(idx) and idx[-1] >= dim:
        raise ValueError(f"feature index {idx[-1]} out of range for dim {dim}")
    return idx, vals


def _validate(examples: Sequence[Example]) -> None:
    if len(examples) < 2:
        raise TooFewExamples(f"need at least 2 examples, got {len(examples)}")
    labels = {y for _, y in examples}
    if not labels <= {-1, 1}:
        raise ValueError(f"labels must be in {{-1, +1}}, got {labels}")
    if len(labels) < 2:
        raise SingleClass("training data contains a single class")


def train_linear_svm(
    examples: Sequence[Example],
    dim: int,
    *,
    lam: float = 1e-4,
    epochs: int = 10,
    seed: int = 0,
    feature_kind: str = "bow",
    bias_decay: float = 0.01,
    project: bool = True,
    track_objective: bool = False,
) -> LinearModel:
    """Fit a LinearModel; deterministic for a fixed (data, hyper, seed).

    With track_objective=True the full objective is evaluated after every
    update and its per-epoch mean recorded, which costs O(n) per step and
    is only meant for diagnostics and tests.
    """
    _validate(examples)
    if lam <= 0:
        raise ValueError("lam must be positive")
    rows = [(_as_index_value(x, dim), y) for x, y in examples]
    n = len(rows)
    dense_x = dense_y = None
    if track_objective:
        # Densified copy so the per-step objective is one matvec.
        dense_x = np.zeros((n, dim), dtype=np.float64)
        for i, ((idx, vals), _) in enumerate(rows):
            dense_x[i, idx] = vals
        dense_y = np.array([y for _, y in rows], dtype=np.float64)
    rng = np.random.default_rng(seed)
    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    radius = 1.0 / math.sqrt(lam)
    history: list[float] = []
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_values = np.empty(n) if track_objective else None
        for step, i in enumerate(order):
            (idx, vals), y = rows[i]
            t += 1
            eta = 1.0 / (lam * t)
            margin = y * (float(np.dot(w[idx], vals)) + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w[idx] += (eta * y) * vals
                b += bias_decay * eta * y
            if project:
                norm = float(np.linalg.norm(w))
                if norm > radius:
                    w *= radius / norm
            if track_objective:
                hinge = np.maximum(0.0, 1.0 - dense_y * (dense_x @ w + b))
                epoch_values[step] = 0.5 * lam * float(np.dot(w, w)) + float(hinge.mean())
        if track_objective:
            history.append(float(epoch_values.mean()))
    model = LinearModel(weights=w, bias=b, lam=lam, feature_kind=feature_kind)
    model.objective_history = history
    return model


def _objective_rows(rows, w: np.ndarray, b: float, lam: float) -> float:
    hinge = 0.0
    for (idx, vals), y in rows:
        margin = y * (float(np.dot(w[idx], vals)) + b)
        hinge += max(0.0, 1.0 - margin)
    return 0.5 * lam * float(np.dot(w, w)) + hinge / len(rows)


def svm_objective(examples: Sequence[Example], w: np.ndarray, b: float, lam: float) -> float:
    """The regularized hinge objective at (w, b)."""
    rows = [(_as_index_value(x, len(w)), y) for x, y in examples]
    return _objective_rows(rows, w, b, lam)


def svm_objective_gradient(
    examples: Sequence[Example], w: np.ndarray, b: float, lam: float
) -> tuple[np.ndarray, float]:
    """Analytic (sub)gradient of the objective at (w, b).

    Exact wherever no example sits on the hinge kink y(w.x+b) = 1.
    """
    grad_w = lam * w.copy()
    grad_b = 0.0
    n = len(examples)
    for x, y in examples:
        idx, vals = _as_index_value(x, len(w))
        margin = y * (float(np.dot(w[idx], vals)) + b)
        if margin < 1.0:
            grad_w[idx] -= (y / n) * vals
            grad_b -= y / n
    return grad_w, grad_b
