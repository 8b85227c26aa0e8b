"""Synthetic low-prior corpora with gold labels, for simulator benchmarks.

Generates sentences over invented (pronounceable) vocabularies: one topic
for the positive class, several confusable negative topics, and a shared
filler pool. A matching embedding table places each word near its topic
center, so both bag-of-words and averaged-embedding models have signal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .corpus import Query, build_dataset, parse_query
from .evaluation import GoldCorpus
from .learning.features import EmbeddingTable

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _word_factory(rng: np.random.Generator):
    seen: set[str] = set()

    def make() -> str:
        while True:
            n_syll = int(rng.integers(2, 4))
            word = "".join(
                _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                for _ in range(n_syll)
            )
            if word not in seen:
                seen.add(word)
                return word

    return make


@dataclass
class SynthConfig:
    n_elements: int = 3000
    positive_prior: float = 0.1
    seed: int = 0
    elements_per_document: int = 10
    topic_vocab_size: int = 30
    filler_vocab_size: int = 150
    n_negative_topics: int = 3
    # Probability that a negative sentence borrows positive-topic words.
    contamination: float = 0.35
    # Anchor inclusion probabilities (positives / negatives).
    anchor_rate: float = 0.45
    anchor_noise: float = 0.02
    embedding_dim: int = 24
    embedding_sigma: float = 0.6


@dataclass
class SynthCorpus:
    corpus: GoldCorpus
    query: Query
    embeddings: EmbeddingTable
    config: SynthConfig = field(repr=False, default_factory=SynthConfig)

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["text", "document_id", "gold"])
        for element in self.corpus.dataset.elements:
            writer.writerow(
                [
                    element.text,
                    element.doc_id,
                    "true" if self.corpus.gold[element.element_id] else "false",
                ]
            )
        return buf.getvalue().encode("utf-8")


def generate(cfg: SynthConfig | None = None) -> SynthCorpus:
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    make_word = _word_factory(rng)

    anchors = [make_word(), make_word()]
    positive_vocab = [make_word() for _ in range(cfg.topic_vocab_size)]
    negative_vocabs = [
        [make_word() for _ in range(cfg.topic_vocab_size)] for _ in range(cfg.n_negative_topics)
    ]
    fillers = [make_word() for _ in range(cfg.filler_vocab_size)]

    def draw(words: list[str], k: int) -> list[str]:
        return [words[i] for i in rng.integers(len(words), size=k)]

    def positive_sentence() -> str:
        toks: list[str] = []
        if rng.random() < cfg.anchor_rate:
            toks.append(anchors[0])
        if rng.random() < cfg.anchor_rate * 0.6:
            toks.append(anchors[1])
        toks += draw(positive_vocab, 2 + int(rng.poisson(1.5)))
        toks += draw(fillers, max(0, int(rng.integers(8, 15)) - len(toks)))
        rng.shuffle(toks)
        return " ".join(toks)

    def negative_sentence() -> str:
        topic = negative_vocabs[int(rng.integers(cfg.n_negative_topics))]
        toks: list[str] = []
        if rng.random() < cfg.anchor_noise:
            toks.append(anchors[int(rng.integers(2))])
        if rng.random() < cfg.contamination:
            toks += draw(positive_vocab, 1 + int(rng.integers(2)))
        toks += draw(topic, 2 + int(rng.poisson(1.5)))
        toks += draw(fillers, max(0, int(rng.integers(8, 15)) - len(toks)))
        rng.shuffle(toks)
        return " ".join(toks)

    n_pos = int(round(cfg.positive_prior * cfg.n_elements))
    labels = np.zeros(cfg.n_elements, dtype=bool)
    labels[rng.permutation(cfg.n_elements)[:n_pos]] = True

    rows: list[tuple[str, str]] = []
    gold_by_row: list[bool] = []
    for i in range(cfg.n_elements):
        doc_id = f"d{i // cfg.elements_per_document:04d}"
        text = positive_sentence() if labels[i] else negative_sentence()
        rows.append((text, doc_id))
        gold_by_row.append(bool(labels[i]))

    dataset = build_dataset("synthetic", rows)
    gold = {e.element_id: gold_by_row[i] for i, e in enumerate(dataset.elements)}

    # Embeddings: each topic sits at its own center; fillers hover near zero.
    centers = {
        "pos": rng.normal(size=cfg.embedding_dim),
        "fill": np.zeros(cfg.embedding_dim),
    }
    for t in range(cfg.n_negative_topics):
        centers[f"neg{t}"] = rng.normal(size=cfg.embedding_dim)
    vectors: dict[str, np.ndarray] = {}
    for word in anchors + positive_vocab:
        vectors[word] = centers["pos"] + cfg.embedding_sigma * rng.normal(size=cfg.embedding_dim)
    for t, vocab in enumerate(negative_vocabs):
        for word in vocab:
            vectors[word] = centers[f"neg{t}"] + cfg.embedding_sigma * rng.normal(
                size=cfg.embedding_dim
            )
    for word in fillers:
        vectors[word] = centers["fill"] + cfg.embedding_sigma * rng.normal(size=cfg.embedding_dim)

    return SynthCorpus(
        corpus=GoldCorpus(dataset=dataset, gold=gold),
        query=parse_query(f"{anchors[0]} | {anchors[1]}"),
        embeddings=EmbeddingTable(vectors, cfg.embedding_dim),
        config=cfg,
    )
