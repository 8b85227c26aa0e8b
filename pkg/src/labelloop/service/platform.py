"""Wires the stores, registry, orchestrator and event bus together and
replays persisted state at startup."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from ..corpus import CorpusStore
from ..evaluation import EvaluationSessions
from ..learning.features import EmbeddingTable
from ..learning.registry import ModelRegistry
from ..policy import PolicyConfig
from ..store import WorkspaceStore
from .config import ServiceConfig
from .events import EventBus
from .orchestrator import Orchestrator

logger = logging.getLogger(__name__)


class Platform:
    def __init__(self, config: ServiceConfig):
        self.config = config
        root = Path(config.data_root)
        root.mkdir(parents=True, exist_ok=True)
        self.embeddings: EmbeddingTable | None = None
        if config.embedding_path is not None:
            self.embeddings = EmbeddingTable.load(config.embedding_path)
            logger.info("loaded %d embeddings (dim %d)", len(self.embeddings), self.embeddings.dim)
        self.corpus = CorpusStore(root / "datasets")
        self.workspaces = WorkspaceStore(root / "workspaces", self.corpus)
        self.registry = ModelRegistry(root / "models", table=self.embeddings)
        self.events = EventBus()
        self._policies: dict[str, PolicyConfig] = {}
        self.orchestrator = Orchestrator(
            self.workspaces,
            self.registry,
            self.events,
            self.policy_for,
            table=self.embeddings,
            max_workers=config.max_training_workers,
        )
        self._sessions: dict[str, EvaluationSessions] = {}
        self._recover()

    # -- per-workspace policy -----------------------------------------------------

    def _policy_path(self, workspace_id: str) -> Path:
        return self.workspaces.get(workspace_id).root / "policy.json"

    def policy_for(self, workspace_id: str) -> PolicyConfig:
        if workspace_id not in self._policies:
            path = self._policy_path(workspace_id)
            overrides = json.loads(path.read_text("utf-8")) if path.exists() else {}
            self._policies[workspace_id] = self.config.policy.updated(overrides)
        return self._policies[workspace_id]

    def update_policy(self, workspace_id: str, overrides: dict) -> PolicyConfig:
        path = self._policy_path(workspace_id)
        existing = json.loads(path.read_text("utf-8")) if path.exists() else {}
        existing.update(overrides)
        updated = self.config.policy.updated(existing)  # validates
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(existing, indent=2), "utf-8")
        tmp.replace(path)
        self._policies[workspace_id] = updated
        return updated

    # -- evaluation sessions ---------------------------------------------------------

    def sessions_for(self, workspace_id: str) -> EvaluationSessions:
        if workspace_id not in self._sessions:
            ws = self.workspaces.get(workspace_id)
            self._sessions[workspace_id] = EvaluationSessions(
                ws, lambda cat: self.registry.active(workspace_id, cat)
            )
        return self._sessions[workspace_id]

    # -- startup recovery ---------------------------------------------------------------

    def _recover(self) -> None:
        """Replay logs, repair interrupted trainings, reload active models
        and rebuild their prediction caches."""
        repaired = self.registry.recover()
        for record in repaired:
            logger.warning("model %s was mid-training at shutdown; marked failed", record.model_id)
        for workspace_id in self.workspaces.ids():
            ws = self.workspaces.get(workspace_id)
            elements = {e.element_id: e.text for e in ws.dataset.elements}
            for category in ws.categories():
                active = self.registry.restore_active(workspace_id, category.category_id, elements)
                if active is not None:
                    ws.mark_trained(category.category_id, active.record.trained_at_seq)
                    self.orchestrator.restore_label_next(workspace_id, category.category_id)

    def shutdown(self) -> None:
        self.orchestrator.shutdown()
