"""Label log semantics: supersession, tombstones, counts, replay and
import/export round-trips."""

import pytest

from labelloop import corpus as cp
from labelloop.errors import (
    DuplicateCategory,
    DuplicateWorkspace,
    UnknownCategory,
    UnknownDataset,
    UnknownElement,
    MissingColumn,
)
from labelloop.store import WorkspaceStore

from conftest import make_csv


@pytest.fixture
def stores(tmp_path):
    corpus = cp.CorpusStore(tmp_path / "datasets")
    rows = [(f"sentence number {i} about topic {i % 3}", f"d{i // 4}") for i in range(20)]
    corpus.ingest_csv(make_csv(rows), "wiki")
    return corpus, WorkspaceStore(tmp_path / "workspaces", corpus)


@pytest.fixture
def ws(stores):
    _, workspaces = stores
    workspace = workspaces.create("wiki", "w1")
    workspace.add_category("Habitat")
    return workspace


class TestWorkspaceLifecycle:
    def test_create(self, stores):
        _, workspaces = stores
        ws = workspaces.create("wiki", "w1")
        assert ws.categories() == []

    def test_unknown_dataset(self, stores):
        _, workspaces = stores
        with pytest.raises(UnknownDataset):
            workspaces.create("missing", "w1")

    def test_duplicate_workspace(self, stores):
        _, workspaces = stores
        workspaces.create("wiki", "w1")
        with pytest.raises(DuplicateWorkspace):
            workspaces.create("wiki", "w1")

    def test_duplicate_category(self, ws):
        with pytest.raises(DuplicateCategory):
            ws.add_category("Habitat")


class TestSetLabel:
    def test_first_positive(self, ws):
        counts = ws.set_label("c1", "d0-0", "positive")
        assert (counts.positives, counts.negatives) == (1, 0)

    def test_relabel_supersedes(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        counts = ws.set_label("c1", "d0-0", "negative")
        assert (counts.positives, counts.negatives) == (0, 1)

    def test_retract(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        counts = ws.set_label("c1", "d0-0", "none")
        assert (counts.positives, counts.negatives) == (0, 0)
        assert ws.current_labels("c1") == {}

    def test_unknown_element(self, ws):
        with pytest.raises(UnknownElement):
            ws.set_label("c1", "nope-0", "positive")

    def test_unknown_category(self, ws):
        with pytest.raises(UnknownCategory):
            ws.set_label("c9", "d0-0", "positive")


class TestCurrentLabels:
    def test_user_supersession(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-0", "negative")
        current = ws.current_labels("c1")
        assert current["d0-0"].value == "negative"
        assert current["d0-0"].source == "user"

    def test_user_beats_weak(self, ws):
        ws.set_label("c1", "d0-0", "negative", source="weak_negative")
        ws.set_label("c1", "d0-0", "positive", source="user")
        assert ws.current_labels("c1")["d0-0"].value == "positive"

    def test_user_beats_later_weak(self, ws):
        ws.set_label("c1", "d0-0", "positive", source="user")
        ws.set_label("c1", "d0-0", "negative", source="weak_negative")
        current = ws.current_labels("c1")["d0-0"]
        assert (current.value, current.source) == ("positive", "user")

    def test_weak_after_user_tombstone_visible(self, ws):
        ws.set_label("c1", "d0-0", "positive", source="user")
        ws.set_label("c1", "d0-0", "none", source="user")
        ws.set_label("c1", "d0-0", "negative", source="weak_negative")
        current = ws.current_labels("c1")["d0-0"]
        assert (current.value, current.source) == ("negative", "weak_negative")

    def test_empty(self, ws):
        assert ws.current_labels("c1") == {}

    def test_weak_excluded_from_counts(self, ws):
        ws.set_label("c1", "d0-0", "negative", source="weak_negative")
        counts = ws.label_counts("c1")
        assert (counts.positives, counts.negatives) == (0, 0)

    def test_evaluation_counts_as_human_total(self, ws):
        ws.set_label("c1", "d0-0", "positive", source="user")
        ws.set_label("c1", "d0-1", "positive", source="evaluation")
        counts = ws.label_counts("c1")
        assert counts.positives == 1  # user-source only
        assert counts.user_labels_total == 2


class TestRetrainCounter:
    def test_counts_human_events_since_marker(self, ws):
        for i in range(5):
            ws.set_label("c1", f"d0-{i % 4}", "positive")
        assert ws.label_counts("c1").labels_since_last_train == 5
        ws.mark_trained("c1", ws.last_seq)
        assert ws.label_counts("c1").labels_since_last_train == 0
        ws.set_label("c1", "d1-0", "negative")
        ws.set_label("c1", "d1-0", "none")  # retraction also counts
        assert ws.label_counts("c1").labels_since_last_train == 2

    def test_weak_labels_do_not_advance_counter(self, ws):
        ws.mark_trained("c1", ws.last_seq)
        ws.set_label("c1", "d0-0", "negative", source="weak_negative")
        assert ws.label_counts("c1").labels_since_last_train == 0

    def test_evaluation_configurable(self, ws):
        ws.mark_trained("c1", ws.last_seq)
        ws.set_label("c1", "d0-0", "positive", source="evaluation")
        assert ws.label_counts("c1").labels_since_last_train == 1
        assert ws.label_counts("c1", count_evaluation=False).labels_since_last_train == 0


class TestAppendOnlyReplay:
    def test_log_is_append_only(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        size_1 = ws._log_path.stat().st_size
        ws.set_label("c1", "d0-0", "none")
        size_2 = ws._log_path.stat().st_size
        assert size_2 > size_1
        assert ws._log_path.read_text().count("\n") == 2

    def test_replay_reproduces_state(self, stores):
        corpus, workspaces = stores
        ws = workspaces.create("wiki", "w1")
        ws.add_category("Habitat")
        ws.add_category("Diet")
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-1", "negative")
        ws.set_label("c1", "d0-0", "none")
        ws.set_label("c2", "d1-0", "positive", source="evaluation")
        ws.set_label("c1", "d0-2", "negative", source="weak_negative")

        reopened = WorkspaceStore(workspaces.root, corpus).get("w1")
        for cat in ("c1", "c2"):
            assert reopened.current_labels(cat) == ws.current_labels(cat)
            assert reopened.label_counts(cat) == ws.label_counts(cat)
        assert reopened.last_seq == ws.last_seq

    def test_counts_match_recomputation(self, ws):
        ops = [
            ("d0-0", "positive", "user"),
            ("d0-1", "negative", "user"),
            ("d0-0", "negative", "user"),
            ("d0-2", "negative", "weak_negative"),
            ("d0-1", "none", "user"),
            ("d1-0", "positive", "evaluation"),
        ]
        for eid, value, source in ops:
            ws.set_label("c1", eid, value, source=source)
        counts = ws.label_counts("c1")
        current = ws.current_labels("c1")
        assert counts.positives == sum(
            1 for c in current.values() if c.source == "user" and c.value == "positive"
        )
        assert counts.negatives == sum(
            1 for c in current.values() if c.source == "user" and c.value == "negative"
        )


class TestClearWeak:
    def test_tombstones_weak_only(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-1", "negative", source="weak_negative")
        ws.set_label("c1", "d0-2", "negative", source="weak_negative")
        cleared = ws.clear_weak_labels("c1")
        assert cleared == 2
        current = ws.current_labels("c1")
        assert set(current) == {"d0-0"}


class TestImportExport:
    def test_export_rows(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-1", "negative")
        lines = ws.export_csv().decode().strip().splitlines()
        assert len(lines) == 3  # header + 2

    def test_weak_excluded_from_export(self, ws):
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-1", "negative", source="weak_negative")
        body = ws.export_csv().decode()
        assert "d0-1" not in body

    def test_round_trip(self, stores, ws):
        _, workspaces = stores
        ws.set_label("c1", "d0-0", "positive")
        ws.set_label("c1", "d0-1", "negative")
        ws.set_label("c1", "d1-2", "positive")
        exported = ws.export_csv()

        fresh = workspaces.create("wiki", "w2")
        result = fresh.import_csv(exported)
        assert result.applied == 3
        assert result.errors == []
        cat = fresh.category_by_name("Habitat")
        original = {e: (c.value, c.source) for e, c in ws.current_labels("c1").items()}
        restored = {
            e: (c.value, c.source) for e, c in fresh.current_labels(cat.category_id).items()
        }
        assert restored == original

    def test_import_bad_rows_reported_not_fatal(self, ws):
        raw = make_csv(
            [
                ("d0-0", "Habitat", "true"),
                ("nope-7", "Habitat", "true"),
                ("d0-1", "Habitat", "maybe"),
                ("d0-2", "Habitat", "false"),
            ],
            header=("element_id", "category_name", "label"),
        )
        result = ws.import_csv(raw)
        assert result.applied == 2
        assert len(result.errors) == 2

    def test_import_autocreates_category(self, ws):
        raw = make_csv(
            [("d0-0", "Diet", "true")], header=("element_id", "category_name", "label")
        )
        result = ws.import_csv(raw)
        assert result.applied == 1
        assert ws.category_by_name("Diet") is not None

    def test_import_doc_id_position(self, ws):
        raw = make_csv(
            [("d0", "0", "Habitat", "true")],
            header=("doc_id", "position", "category_name", "label"),
        )
        assert ws.import_csv(raw).applied == 1
        assert ws.current_labels("c1")["d0-0"].value == "positive"

    def test_empty_file_missing_column(self, ws):
        with pytest.raises(MissingColumn):
            ws.import_csv(b"")
