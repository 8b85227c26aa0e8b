"""Text features: bag-of-words over a capped vocabulary, and averaged
pretrained word embeddings."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..corpus import tokenize
from ..errors import EmptyCorpus


class Vocabulary:
    """Token -> dense index map, built from document frequency.

    The top `max_features` tokens by document frequency are kept; ties break
    lexicographically. Index order follows that same ranking, so a saved
    token list rebuilds the identical mapping.
    """

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @classmethod
    def fit(cls, texts: Sequence[str], max_features: int) -> "Vocabulary":
        if not texts:
            raise EmptyCorpus("cannot fit a vocabulary on zero texts")
        df: Counter[str] = Counter()
        for text in texts:
            df.update(set(tokenize(text)))
        if not df:
            raise EmptyCorpus("no tokens found in any text")
        ranked = sorted(df, key=lambda tok: (-df[tok], tok))
        return cls(ranked[:max_features])


@dataclass(frozen=True)
class SparseVector:
    """Index-sorted sparse feature vector."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("indices must be unique and ascending")

    @property
    def nnz(self) -> int:
        return len(self.indices)


def vectorize_bow(text: str, vocab: Vocabulary) -> SparseVector:
    """Raw token counts over the vocabulary; out-of-vocabulary tokens ignored."""
    counts: Counter[int] = Counter()
    for tok in tokenize(text):
        idx = vocab.index.get(tok)
        if idx is not None:
            counts[idx] += 1
    indices = tuple(sorted(counts))
    return SparseVector(indices, tuple(float(counts[i]) for i in indices))


class EmbeddingTable:
    """Pretrained word vectors: token -> dense vector of fixed dimension."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim
        for tok, vec in vectors.items():
            if vec.shape != (dim,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, want ({dim},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"vector for {tok!r} has non-finite entries")

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    @classmethod
    def load(cls, path: Path | str) -> "EmbeddingTable":
        """Parse a text file with one `token v1 v2 ... vd` entry per line."""
        vectors: dict[str, np.ndarray] = {}
        dim: int | None = None
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                tok, vals = parts[0], parts[1:]
                vec = np.array([float(v) for v in vals], dtype=np.float64)
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise ValueError(f"line {line_no}: dimension {len(vec)} != {dim}")
                vectors.setdefault(tok, vec)
        if dim is None:
            raise ValueError(f"no embeddings found in {path}")
        return cls(vectors, dim)

    def save(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in sorted(self.vectors):
                vals = " ".join(repr(float(v)) for v in self.vectors[tok])
                fh.write(f"{tok} {vals}\n")


def embed_average(text: str, table: EmbeddingTable) -> np.ndarray:
    """Arithmetic mean of the vectors of in-table tokens; zero vector if none."""
    vecs = [table.vectors[tok] for tok in tokenize(text) if tok in table.vectors]
    if not vecs:
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(vecs, axis=0)


def bow_matrix(texts: Iterable[str], vocab: Vocabulary) -> list[SparseVector]:
    return [vectorize_bow(t, vocab) for t in texts]
