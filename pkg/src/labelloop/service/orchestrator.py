"""Background training orchestration.

After every committed label the policy is evaluated on a snapshot; at most
one training task runs per (workspace, category) at a time, and a trigger
that fires while training is in flight is re-checked the moment the task
finishes, so no trigger is ever lost. Training failures leave the previous
model active.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from ..learning.ensemble import LabeledExample, train_flavor
from ..learning.features import EmbeddingTable
from ..learning.registry import ModelRegistry
from ..policy import PolicyConfig, model_flavor_for, rank_for_labeling, select_training_set, should_train
from ..store import HUMAN_SOURCES, WorkspaceStore
from .events import EventBus

logger = logging.getLogger(__name__)


def derived_seed(*parts) -> int:
    """Stable 31-bit seed from arbitrary identifiers."""
    digest = hashlib.blake2s(":".join(str(p) for p in parts).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "big") % (2**31)


class Orchestrator:
    def __init__(
        self,
        workspaces: WorkspaceStore,
        registry: ModelRegistry,
        events: EventBus,
        policy_for: Callable[[str], PolicyConfig],
        table: EmbeddingTable | None = None,
        max_workers: int = 1,
    ):
        self.workspaces = workspaces
        self.registry = registry
        self.events = events
        self.policy_for = policy_for
        self.table = table
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._lock = threading.Lock()
        self._inflight: set[tuple[str, str]] = set()
        self._label_next: dict[tuple[str, str], dict] = {}

    # -- queries ---------------------------------------------------------------

    def training_inflight(self, workspace_id: str, category_id: str) -> bool:
        with self._lock:
            return (workspace_id, category_id) in self._inflight

    def pending(self, workspace_id: str) -> list[str]:
        with self._lock:
            return sorted(cat for wid, cat in self._inflight if wid == workspace_id)

    def label_next(self, workspace_id: str, category_id: str) -> dict:
        return self._label_next.get((workspace_id, category_id), {"model_iteration": None, "element_ids": []})

    # -- scheduling --------------------------------------------------------------

    def maybe_train(self, workspace_id: str, category_id: str) -> bool:
        """Schedule a training task if the policy says so and none is running."""
        ws = self.workspaces.get(workspace_id)
        cfg = self.policy_for(workspace_id)
        key = (workspace_id, category_id)
        with self._lock:
            if key in self._inflight:
                return False
            counts = ws.label_counts(
                category_id, count_evaluation=cfg.count_evaluation_toward_retrain
            )
            has_model = self.registry.active(workspace_id, category_id) is not None
            if not should_train(counts, has_model, cfg):
                return False
            self._inflight.add(key)
        self._executor.submit(self._run, workspace_id, category_id)
        return True

    def shutdown(self, wait: bool = True) -> None:
        self._executor.shutdown(wait=wait)

    # -- the training task ----------------------------------------------------------

    def _run(self, workspace_id: str, category_id: str) -> None:
        try:
            self._train(workspace_id, category_id)
        except Exception:
            logger.exception("training task for %s/%s failed", workspace_id, category_id)
        finally:
            with self._lock:
                self._inflight.discard((workspace_id, category_id))
            # A trigger may have fired while we were busy; never lose it.
            try:
                self.maybe_train(workspace_id, category_id)
            except Exception:
                logger.exception("post-training re-check failed")

    def _train(self, workspace_id: str, category_id: str) -> None:
        ws = self.workspaces.get(workspace_id)
        cfg = self.policy_for(workspace_id)
        with ws.lock:
            ws.clear_weak_labels(category_id)
            labels = ws.current_labels(category_id)
            pool = ws.unlabeled_elements(category_id)
            snapshot_seq = ws.last_seq
        iteration = max((r.iteration for r in self.registry.records(workspace_id, category_id)), default=0) + 1
        flavor = model_flavor_for(iteration, cfg)
        record = None
        try:
            training_set = select_training_set(
                labels, pool, cfg, seed=derived_seed(cfg.seed, workspace_id, category_id, iteration)
            )
            weak_ids = training_set.weak_ids()
            if weak_ids:
                ws.append_labels(
                    [(eid, category_id, "negative", "weak_negative") for eid in weak_ids]
                )
            record = self.registry.begin_training(
                workspace_id,
                category_id,
                flavor,
                train_set_size=len(training_set.entries),
                trained_at_seq=snapshot_seq,
            )
            self.events.emit("model_training_started", workspace_id, category_id, record.iteration)
            examples = [
                LabeledExample(e.element_id, ws.dataset.elements_by_id[e.element_id].text, e.label)
                for e in training_set.entries
            ]
            model = train_flavor(
                flavor,
                examples,
                table=self.table,
                max_features=cfg.max_features,
                lam=cfg.svm_lambda,
                epochs=cfg.svm_epochs,
                seed=derived_seed(cfg.seed, workspace_id, category_id, record.iteration, "svm"),
            )
            self.registry.complete(record, model)
            elements = {e.element_id: e.text for e in ws.dataset.elements}
            active = self.registry.activate(record, elements)
            ws.mark_trained(category_id, snapshot_seq)
            self._refresh_label_next(workspace_id, category_id, active, cfg)
            self.events.emit("model_ready", workspace_id, category_id, record.iteration)
        except Exception as exc:
            if record is not None:
                self.registry.fail(record, str(exc))
            self.events.emit(
                "model_failed", workspace_id, category_id, iteration, detail=str(exc)
            )
            raise

    # -- the frozen Label Next list ----------------------------------------------------

    def _label_next_path(self, workspace_id: str, category_id: str):
        return self.workspaces.get(workspace_id).root / f"labelnext-{category_id}.json"

    def _refresh_label_next(self, workspace_id, category_id, active, cfg: PolicyConfig) -> None:
        """Recomputed only at activation; the list stays frozen in between."""
        ws = self.workspaces.get(workspace_id)
        current = ws.current_labels(category_id)
        human = {eid for eid, cur in current.items() if cur.source in HUMAN_SOURCES}
        probabilities = {eid: p.probability for eid, p in active.predictions.items()}
        ids = rank_for_labeling(
            probabilities,
            human,
            cfg.al_strategy,
            cfg.label_next_size,
            seed=derived_seed(cfg.seed, workspace_id, category_id, active.record.iteration, "next"),
        )
        payload = {"model_iteration": active.record.iteration, "element_ids": ids}
        self._label_next[(workspace_id, category_id)] = payload
        path = self._label_next_path(workspace_id, category_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload), "utf-8")
        tmp.replace(path)

    def restore_label_next(self, workspace_id: str, category_id: str) -> None:
        path = self._label_next_path(workspace_id, category_id)
        if path.exists():
            self._label_next[(workspace_id, category_id)] = json.loads(path.read_text("utf-8"))
