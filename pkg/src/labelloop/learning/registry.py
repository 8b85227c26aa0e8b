"""Versioned model storage: one directory per trained model, an atomic
"current" pointer per (workspace, category), and a prediction cache computed
once at activation."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import ModelNotReady, TrainingInProgress
from .ensemble import EnsembleModel, Prediction, SvmTextModel
from .features import EmbeddingTable, Vocabulary
from .svm import LinearModel

logger = logging.getLogger(__name__)

STATUS_TRAINING = "training"
STATUS_READY = "ready"
STATUS_FAILED = "failed"


@dataclass
class ModelRecord:
    model_id: str
    workspace_id: str
    category_id: str
    iteration: int
    flavor: str
    status: str
    train_set_size: int
    trained_at_seq: int
    created_at: float
    error: str | None = None


@dataclass
class ActiveModel:
    record: ModelRecord
    model: EnsembleModel
    predictions: dict[str, Prediction]

    def positive_elements(self) -> list[str]:
        """Predicted-positive element ids, most confident first."""
        positive = [(eid, p) for eid, p in self.predictions.items() if p.predicted_positive]
        positive.sort(key=lambda item: (-item[1].probability, item[0]))
        return [eid for eid, _ in positive]


class ModelRegistry:
    def __init__(self, root: Path | str, table: EmbeddingTable | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.table = table
        self._lock = threading.Lock()
        self._active: dict[tuple[str, str], ActiveModel] = {}

    # -- paths ---------------------------------------------------------------

    def _pair_dir(self, workspace_id: str, category_id: str) -> Path:
        return self.root / workspace_id / category_id

    def _model_dir(self, record: ModelRecord) -> Path:
        return self._pair_dir(record.workspace_id, record.category_id) / record.model_id

    # -- lifecycle -----------------------------------------------------------

    def records(self, workspace_id: str, category_id: str) -> list[ModelRecord]:
        pair = self._pair_dir(workspace_id, category_id)
        out = []
        for meta in sorted(pair.glob("*/meta.json")):
            out.append(self._read_record(meta))
        out.sort(key=lambda r: r.iteration)
        return out

    def _read_record(self, meta_path: Path) -> ModelRecord:
        d = json.loads(meta_path.read_text("utf-8"))
        fields = {k: d[k] for k in (
            "model_id", "workspace_id", "category_id", "iteration", "flavor",
            "status", "train_set_size", "trained_at_seq", "created_at",
        )}
        return ModelRecord(error=d.get("error"), **fields)

    def _write_record(self, record: ModelRecord) -> None:
        mdir = self._model_dir(record)
        mdir.mkdir(parents=True, exist_ok=True)
        payload = asdict(record)
        tmp = mdir / "meta.json.tmp"
        tmp.write_text(json.dumps(payload, indent=2), "utf-8")
        tmp.replace(mdir / "meta.json")

    def begin_training(
        self,
        workspace_id: str,
        category_id: str,
        flavor: str,
        train_set_size: int,
        trained_at_seq: int,
    ) -> ModelRecord:
        """Register a new model version in status=training.

        At most one training record may be open per (workspace, category);
        iteration numbers increase strictly, starting at 1.
        """
        with self._lock:
            existing = self.records(workspace_id, category_id)
            if any(r.status == STATUS_TRAINING for r in existing):
                raise TrainingInProgress(
                    f"a model is already training for {workspace_id}/{category_id}"
                )
            iteration = max((r.iteration for r in existing), default=0) + 1
            record = ModelRecord(
                model_id=f"{category_id}-it{iteration:04d}",
                workspace_id=workspace_id,
                category_id=category_id,
                iteration=iteration,
                flavor=flavor,
                status=STATUS_TRAINING,
                train_set_size=train_set_size,
                trained_at_seq=trained_at_seq,
                created_at=time.time(),
            )
            self._write_record(record)
            return record

    def complete(self, record: ModelRecord, model: EnsembleModel) -> None:
        self._save_model(record, model)
        record.status = STATUS_READY
        self._write_record(record)

    def fail(self, record: ModelRecord, error: str) -> None:
        record.status = STATUS_FAILED
        record.error = error
        self._write_record(record)

    # -- serialization ---------------------------------------------------------

    def _save_model(self, record: ModelRecord, model: EnsembleModel) -> None:
        mdir = self._model_dir(record)
        mdir.mkdir(parents=True, exist_ok=True)
        descriptors = []
        for i, member in enumerate(model.members):
            np.savez(
                mdir / f"member{i}.npz",
                weights=member.linear.weights,
                bias=np.array([member.linear.bias]),
                lam=np.array([member.linear.lam]),
            )
            desc: dict = {"kind": member.kind}
            if member.vocab is not None:
                (mdir / f"member{i}.vocab.json").write_text(
                    json.dumps(member.vocab.tokens), "utf-8"
                )
                desc["vocab_file"] = f"member{i}.vocab.json"
            descriptors.append(desc)
        (mdir / "members.json").write_text(json.dumps(descriptors, indent=2), "utf-8")

    def load_model(self, workspace_id: str, category_id: str, model_id: str) -> EnsembleModel:
        mdir = self._pair_dir(workspace_id, category_id) / model_id
        descriptors = json.loads((mdir / "members.json").read_text("utf-8"))
        members = []
        for i, desc in enumerate(descriptors):
            with np.load(mdir / f"member{i}.npz") as data:
                linear = LinearModel(
                    weights=data["weights"].copy(),
                    bias=float(data["bias"][0]),
                    lam=float(data["lam"][0]),
                    feature_kind=desc["kind"],
                )
            if desc["kind"] == "bow":
                tokens = json.loads((mdir / desc["vocab_file"]).read_text("utf-8"))
                members.append(SvmTextModel(kind="bow", linear=linear, vocab=Vocabulary(tokens)))
            elif desc["kind"] == "embedding":
                if self.table is None:
                    logger.warning(
                        "model %s has an embedding member but no table is configured; dropped",
                        model_id,
                    )
                    continue
                members.append(SvmTextModel(kind="embedding", linear=linear, table=self.table))
            else:
                raise ValueError(f"unknown member kind {desc['kind']!r}")
        return EnsembleModel(members)

    # -- activation -------------------------------------------------------------

    def activate(self, record: ModelRecord, elements: Mapping[str, str]) -> ActiveModel:
        """Make `record` the current model and cache predictions for every
        element. The pointer swap is an atomic file replace plus an atomic
        in-memory dict assignment."""
        if record.status != STATUS_READY:
            raise ModelNotReady(f"model {record.model_id} is {record.status}, not ready")
        model = self.load_model(record.workspace_id, record.category_id, record.model_id)
        predictions = {eid: model.predict(text) for eid, text in elements.items()}
        active = ActiveModel(record=record, model=model, predictions=predictions)
        pair = self._pair_dir(record.workspace_id, record.category_id)
        pair.mkdir(parents=True, exist_ok=True)
        tmp = pair / "current.json.tmp"
        tmp.write_text(json.dumps({"model_id": record.model_id}), "utf-8")
        tmp.replace(pair / "current.json")
        self._active[(record.workspace_id, record.category_id)] = active
        return active

    def active(self, workspace_id: str, category_id: str) -> ActiveModel | None:
        return self._active.get((workspace_id, category_id))

    # -- startup ------------------------------------------------------------------

    def recover(self) -> list[ModelRecord]:
        """Mark any model left in status=training as failed (a crash
        interrupted it) and return the repaired records."""
        repaired = []
        for meta in sorted(self.root.glob("*/*/*/meta.json")):
            record = self._read_record(meta)
            if record.status == STATUS_TRAINING:
                self.fail(record, "interrupted by restart")
                repaired.append(record)
        return repaired

    def restore_active(
        self, workspace_id: str, category_id: str, elements: Mapping[str, str]
    ) -> ActiveModel | None:
        """Reload the current pointer from disk and rebuild the prediction
        cache (predictions are deterministic, so recomputing reproduces the
        pre-restart cache)."""
        pointer = self._pair_dir(workspace_id, category_id) / "current.json"
        if not pointer.exists():
            return None
        model_id = json.loads(pointer.read_text("utf-8"))["model_id"]
        meta = self._pair_dir(workspace_id, category_id) / model_id / "meta.json"
        record = self._read_record(meta)
        if record.status != STATUS_READY:
            return None
        return self.activate(record, elements)
