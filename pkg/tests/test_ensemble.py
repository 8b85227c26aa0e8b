"""Ensemble combination, the full-pipeline oracle recomputation, and the
model registry lifecycle."""

import math
import re

import numpy as np
import pytest

from labelloop.errors import ModelNotReady, TrainingInProgress
from labelloop.learning import (
    EmbeddingTable,
    EnsembleModel,
    LabeledExample,
    LinearModel,
    ModelRegistry,
    Prediction,
    SvmTextModel,
    Vocabulary,
    train_flavor,
)

POS_TEXTS = [
    "wolf den deep forest",
    "bear cave in forest",
    "fox burrow forest floor",
    "wolf roams the forest",
    "den hidden under forest",
    "bear den near river forest",
    "fox den in the woods forest",
    "wolf pack forest night",
    "burrow dug in forest soil",
    "cave shelter in forest",
]
NEG_TEXTS = [
    "stock market rises fast",
    "market prices fall again",
    "stock trading closed early",
    "bank reports market gains",
    "market opens with stock news",
    "trading floor stock rally",
    "bank market shares climb",
    "stock index market record",
    "market crash fears bank",
    "bank stock trading volume",
]
TOY = [LabeledExample(f"p-{i}", t, 1) for i, t in enumerate(POS_TEXTS)] + [
    LabeledExample(f"n-{i}", t, -1) for i, t in enumerate(NEG_TEXTS)
]

TOY_VOCAB_WORDS = sorted({w for t in POS_TEXTS + NEG_TEXTS for w in t.split()})
TOY_TABLE = EmbeddingTable(
    {
        w: np.array([math.sin(3 * i + 1), math.cos(2 * i), ((i * 7) % 5 - 2) / 2.0])
        for i, w in enumerate(TOY_VOCAB_WORDS)
    },
    3,
)

HYPER = dict(max_features=50, lam=1e-2, epochs=10, seed=5)


class TestPrediction:
    def test_mean_of_members(self):
        a = SvmTextModel(kind="bow", linear=LinearModel(np.zeros(1), 0.0, 1.0), vocab=Vocabulary(["x"]))
        # Force the member probabilities via bias: sigma(b).
        a.linear.bias = math.log(0.4 / 0.6)  # p = 0.4
        b = SvmTextModel(kind="bow", linear=LinearModel(np.zeros(1), math.log(0.8 / 0.2), 1.0), vocab=Vocabulary(["x"]))
        model = EnsembleModel([a, b])
        pred = model.predict("anything")
        assert pred.probability == pytest.approx(0.6)
        assert pred.predicted_positive

    def test_identical_members_preserve_p(self):
        member = SvmTextModel(
            kind="bow", linear=LinearModel(np.zeros(1), 0.3, 1.0), vocab=Vocabulary(["x"])
        )
        model = EnsembleModel([member, member])
        assert model.predict_proba("y") == pytest.approx(member.proba("y"))

    def test_threshold_convention(self):
        assert Prediction.from_probability(0.5).predicted_positive
        assert not Prediction.from_probability(0.49999).predicted_positive


# -- full pipeline oracle: scalar-by-scalar re-implementation --------------------


def oracle_tokenize(text):
    return re.findall(r"[a-z0-9]+", text.lower())


def oracle_vocab(texts, max_features):
    df = {}
    for t in texts:
        for tok in set(oracle_tokenize(t)):
            df[tok] = df.get(tok, 0) + 1
    ranked = sorted(df, key=lambda tok: (-df[tok], tok))
    return ranked[:max_features]


def oracle_bow(text, tokens):
    index = {tok: i for i, tok in enumerate(tokens)}
    counts = {}
    for tok in oracle_tokenize(text):
        if tok in index:
            counts[index[tok]] = counts.get(index[tok], 0) + 1
    idx = sorted(counts)
    return idx, [float(counts[i]) for i in idx]


def oracle_pegasos(rows, dim, lam, epochs, seed, bias_decay=0.01):
    """Pure-python trainer: plain floats, numpy only for the seeded shuffle."""
    rng = np.random.default_rng(seed)
    w = [0.0] * dim
    b = 0.0
    radius = 1.0 / math.sqrt(lam)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(rows)):
            idx, vals, y = rows[i]
            t += 1
            eta = 1.0 / (lam * t)
            margin = y * (sum(w[j] * v for j, v in zip(idx, vals)) + b)
            factor = 1.0 - eta * lam
            w = [wi * factor for wi in w]
            if margin < 1.0:
                for j, v in zip(idx, vals):
                    w[j] += eta * y * v
                b += bias_decay * eta * y
            norm = math.sqrt(sum(wi * wi for wi in w))
            if norm > radius:
                w = [wi * radius / norm for wi in w]
    return w, b


def oracle_sigmoid(m):
    return 1.0 / (1.0 + math.exp(-m))


def oracle_heavy_probability(examples, table, named_text, hyper):
    texts = [e.text for e in examples]
    tokens = oracle_vocab(texts, hyper["max_features"])
    bow_rows = []
    for e in examples:
        idx, vals = oracle_bow(e.text, tokens)
        bow_rows.append((idx, vals, e.label))
    w, b = oracle_pegasos(bow_rows, len(tokens), hyper["lam"], hyper["epochs"], hyper["seed"])
    idx, vals = oracle_bow(named_text, tokens)
    p_bow = oracle_sigmoid(sum(w[j] * v for j, v in zip(idx, vals)) + b)

    dim = table.dim

    def avg(text):
        vecs = [table.vectors[tok] for tok in oracle_tokenize(text) if tok in table.vectors]
        if not vecs:
            return [0.0] * dim
        out = [0.0] * dim
        for v in vecs:
            for j in range(dim):
                out[j] += float(v[j])
        return [x / len(vecs) for x in out]

    emb_rows = [(list(range(dim)), avg(e.text), e.label) for e in examples]
    w2, b2 = oracle_pegasos(emb_rows, dim, hyper["lam"], hyper["epochs"], hyper["seed"] + 1)
    named = avg(named_text)
    p_emb = oracle_sigmoid(sum(w2[j] * named[j] for j in range(dim)) + b2)
    return (p_bow + p_emb) / 2.0


class TestPipelineOracle:
    def test_heavy_probability_matches_oracle(self):
        model = train_flavor("heavy", TOY, table=TOY_TABLE, **HYPER)
        named = TOY[0]  # "wolf den deep forest"
        p = model.predict_proba(named.text)
        expected = oracle_heavy_probability(TOY, TOY_TABLE, named.text, HYPER)
        assert p == pytest.approx(expected, abs=1e-9)
        # Frozen from the oracle run; guards against silent pipeline drift.
        assert p == pytest.approx(0.7672840412187039, abs=1e-9)

    def test_light_flavor_single_member(self):
        model = train_flavor("light", TOY, **HYPER)
        assert len(model.members) == 1
        assert model.members[0].kind == "bow"

    def test_heavy_without_table_degrades(self, caplog):
        model = train_flavor("heavy", TOY, table=None, **HYPER)
        assert len(model.members) == 1

    def test_heavy_separates_toy_set(self):
        model = train_flavor("heavy", TOY, table=TOY_TABLE, **HYPER)
        for e in TOY:
            assert model.predict(e.text).predicted_positive == (e.label == 1)


class TestRegistry:
    def _trained(self, registry, ws="w1", cat="c1"):
        record = registry.begin_training(ws, cat, "heavy", train_set_size=len(TOY), trained_at_seq=7)
        model = train_flavor("heavy", TOY, table=TOY_TABLE, **HYPER)
        registry.complete(record, model)
        return record, model

    def test_save_load_bit_identical(self, tmp_path):
        registry = ModelRegistry(tmp_path, table=TOY_TABLE)
        record, model = self._trained(registry)
        loaded = registry.load_model("w1", "c1", record.model_id)
        assert len(loaded.members) == len(model.members)
        for a, b in zip(model.members, loaded.members):
            np.testing.assert_array_equal(a.linear.weights, b.linear.weights)
            assert a.linear.bias == b.linear.bias
            if a.vocab is not None:
                assert a.vocab.tokens == b.vocab.tokens

    def test_activate_requires_ready(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        record = registry.begin_training("w1", "c1", "light", 4, 0)
        with pytest.raises(ModelNotReady):
            registry.activate(record, {})

    def test_single_training_per_pair(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.begin_training("w1", "c1", "light", 4, 0)
        with pytest.raises(TrainingInProgress):
            registry.begin_training("w1", "c1", "light", 4, 0)
        # A different category is fine.
        registry.begin_training("w1", "c2", "light", 4, 0)

    def test_iterations_increase(self, tmp_path):
        registry = ModelRegistry(tmp_path, table=TOY_TABLE)
        elements = {e.element_id: e.text for e in TOY}
        r1, _ = self._trained(registry)
        a1 = registry.activate(r1, elements)
        r2, _ = self._trained(registry)
        a2 = registry.activate(r2, elements)
        assert (a1.record.iteration, a2.record.iteration) == (1, 2)

    def test_prediction_cache_matches_fresh_forward(self, tmp_path):
        registry = ModelRegistry(tmp_path, table=TOY_TABLE)
        record, _ = self._trained(registry)
        elements = {e.element_id: e.text for e in TOY}
        active = registry.activate(record, elements)
        fresh = registry.load_model("w1", "c1", record.model_id)
        for eid, text in elements.items():
            assert active.predictions[eid].probability == fresh.predict_proba(text)

    def test_recover_marks_training_failed(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.begin_training("w1", "c1", "light", 4, 0)
        repaired = ModelRegistry(tmp_path).recover()
        assert len(repaired) == 1
        assert repaired[0].status == "failed"

    def test_restore_active_after_restart(self, tmp_path):
        registry = ModelRegistry(tmp_path, table=TOY_TABLE)
        record, _ = self._trained(registry)
        elements = {e.element_id: e.text for e in TOY}
        before = registry.activate(record, elements)

        fresh = ModelRegistry(tmp_path, table=TOY_TABLE)
        restored = fresh.restore_active("w1", "c1", elements)
        assert restored is not None
        assert restored.record.model_id == before.record.model_id
        assert {e: p.probability for e, p in restored.predictions.items()} == {
            e: p.probability for e, p in before.predictions.items()
        }
