import numpy as np
import pytest

from labelloop.errors import EmptyCorpus
from labelloop.learning import EmbeddingTable, Vocabulary, embed_average, vectorize_bow


class TestVocabulary:
    def test_fit_all_tokens(self):
        vocab = Vocabulary.fit(["a b", "b c"], max_features=10)
        assert set(vocab.tokens) == {"a", "b", "c"}

    def test_max_features_with_lexicographic_tie_break(self):
        # b has df 2; a and c tie at df 1, a wins lexicographically.
        vocab = Vocabulary.fit(["a b", "b c"], max_features=2)
        assert vocab.tokens == ["b", "a"]

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            Vocabulary.fit([], max_features=10)

    def test_no_tokens(self):
        with pytest.raises(EmptyCorpus):
            Vocabulary.fit(["...", "!!"], max_features=10)

    def test_document_frequency_not_term_frequency(self):
        # "a" appears 3 times in one text, "b" once in each of two texts.
        vocab = Vocabulary.fit(["a a a", "b", "b x"], max_features=1)
        assert vocab.tokens == ["b"]


class TestVectorizeBow:
    def test_counts(self):
        vocab = Vocabulary(["a", "b", "c"])
        vec = vectorize_bow("b b c", vocab)
        assert vec.indices == (1, 2)
        assert vec.values == (2.0, 1.0)

    def test_oov_ignored(self):
        vocab = Vocabulary(["a"])
        assert vectorize_bow("x y z", vocab).nnz == 0

    def test_empty_text(self):
        vocab = Vocabulary(["a"])
        assert vectorize_bow("", vocab).nnz == 0


class TestEmbeddings:
    def _table(self):
        return EmbeddingTable({"x": np.array([1.0, 0.0]), "y": np.array([0.0, 1.0])}, 2)

    def test_average(self):
        np.testing.assert_allclose(embed_average("x y", self._table()), [0.5, 0.5])

    def test_repeated_token(self):
        np.testing.assert_allclose(embed_average("x x", self._table()), [1.0, 0.0])

    def test_all_oov_is_zero_vector(self):
        np.testing.assert_allclose(embed_average("q w e", self._table()), [0.0, 0.0])

    def test_load_save_round_trip(self, tmp_path):
        path = tmp_path / "vectors.txt"
        table = self._table()
        table.save(path)
        loaded = EmbeddingTable.load(path)
        assert loaded.dim == 2
        assert set(loaded.vectors) == {"x", "y"}
        np.testing.assert_array_equal(loaded.vectors["x"], table.vectors["x"])

    def test_load_rejects_ragged_dimensions(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("x 1.0 2.0\ny 1.0\n")
        with pytest.raises(ValueError):
            EmbeddingTable.load(path)
