"""HTTP endpoints. Each handler is a thin wrapper over one module operation;
responses carry the workspace's label-log seq so clients can detect staleness
of anything they cached."""

from __future__ import annotations

import queue
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .. import errors
from ..corpus import parse_query
from ..learning.ensemble import LabeledExample
from ..policy import PolicyConfig
from ..quality import contradicting_pairs, cross_validation_disagreements
from ..store import HUMAN_SOURCES, LabelCounts, Workspace
from .config import ServiceConfig
from .platform import Platform

_STATUS_CODES: dict[type, int] = {
    errors.UnknownDataset: 404,
    errors.UnknownWorkspace: 404,
    errors.UnknownCategory: 404,
    errors.UnknownElement: 404,
    errors.UnknownSession: 404,
    errors.DuplicateDataset: 409,
    errors.DuplicateWorkspace: 409,
    errors.DuplicateCategory: 409,
    errors.NoModel: 409,
    errors.NoPositivePredictions: 409,
    errors.ModelNotReady: 409,
    errors.TrainingInProgress: 409,
}


class CreateWorkspace(BaseModel):
    workspace_id: str
    dataset_name: str


class CreateCategory(BaseModel):
    name: str
    description: str = ""


class SetLabel(BaseModel):
    category_id: str
    value: str  # positive | negative | none
    source: str = "user"


class StartEvaluation(BaseModel):
    category_id: str


class SubmitEvaluation(BaseModel):
    labels: dict[str, str]


def _counts_view(counts: LabelCounts) -> dict:
    return {
        "positives": counts.positives,
        "negatives": counts.negatives,
        "user_labels_total": counts.user_labels_total,
        "labels_since_last_train": counts.labels_since_last_train,
    }


def _element_views(ws: Workspace, element_ids, category_id, active) -> list[dict]:
    current = ws.current_labels(category_id) if category_id else {}
    views = []
    for eid in element_ids:
        element = ws.dataset.elements_by_id[eid]
        cur = current.get(eid)
        pred = active.predictions.get(eid) if active else None
        views.append(
            {
                "element_id": element.element_id,
                "doc_id": element.doc_id,
                "position": element.position,
                "text": element.text,
                "label": cur.value if cur else None,
                "label_source": cur.source if cur else None,
                "probability": pred.probability if pred else None,
                "predicted_positive": pred.predicted_positive if pred else None,
            }
        )
    return views


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    platform = Platform(config or ServiceConfig())
    app = FastAPI(title="labelloop", version="0.1.0")
    app.state.platform = platform
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(errors.LabelLoopError)
    async def domain_error(request: Request, exc: errors.LabelLoopError):
        code = _STATUS_CODES.get(type(exc), 400)
        return JSONResponse(
            status_code=code, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    @app.exception_handler(ValueError)
    async def value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": "ValueError", "detail": str(exc)})

    @app.on_event("shutdown")
    def shutdown():
        platform.shutdown()

    # -- datasets -----------------------------------------------------------

    @app.post("/datasets", status_code=201)
    async def upload_dataset(request: Request, name: str):
        raw = await request.body()
        dataset = platform.corpus.ingest_csv(raw, name)
        return {
            "name": dataset.name,
            "num_documents": len(dataset.documents),
            "num_elements": len(dataset.elements),
            "skipped_rows": dataset.skipped_rows,
        }

    @app.get("/datasets")
    def list_datasets():
        out = []
        for name in platform.corpus.names():
            ds = platform.corpus.get(name)
            out.append(
                {
                    "name": name,
                    "num_documents": len(ds.documents),
                    "num_elements": len(ds.elements),
                }
            )
        return {"datasets": out}

    # -- workspaces -----------------------------------------------------------

    def _workspace_view(ws: Workspace) -> dict:
        return {
            "workspace_id": ws.workspace_id,
            "dataset_name": ws.dataset.name,
            "categories": [
                {"category_id": c.category_id, "name": c.name, "description": c.description}
                for c in ws.categories()
            ],
            "seq": ws.last_seq,
        }

    @app.post("/workspaces", status_code=201)
    def create_workspace(body: CreateWorkspace):
        ws = platform.workspaces.create(body.dataset_name, body.workspace_id)
        return _workspace_view(ws)

    @app.get("/workspaces")
    def list_workspaces():
        return {"workspaces": [_workspace_view(platform.workspaces.get(w)) for w in platform.workspaces.ids()]}

    @app.get("/workspaces/{workspace_id}")
    def get_workspace(workspace_id: str):
        return _workspace_view(platform.workspaces.get(workspace_id))

    @app.post("/workspaces/{workspace_id}/categories", status_code=201)
    def create_category(workspace_id: str, body: CreateCategory):
        ws = platform.workspaces.get(workspace_id)
        cat = ws.add_category(body.name, body.description)
        return {"category_id": cat.category_id, "name": cat.name, "description": cat.description}

    # -- labeling -----------------------------------------------------------

    @app.put("/workspaces/{workspace_id}/elements/{element_id}/label")
    def set_label(workspace_id: str, element_id: str, body: SetLabel):
        ws = platform.workspaces.get(workspace_id)
        if body.source not in HUMAN_SOURCES:
            raise ValueError("label source must be user or evaluation")
        counts = ws.set_label(body.category_id, element_id, body.value, body.source)
        scheduled = platform.orchestrator.maybe_train(workspace_id, body.category_id)
        cfg = platform.policy_for(workspace_id)
        counts = ws.label_counts(
            body.category_id, count_evaluation=cfg.count_evaluation_toward_retrain
        )
        return {
            "counts": _counts_view(counts),
            "seq": ws.last_seq,
            "training_pending": scheduled
            or platform.orchestrator.training_inflight(workspace_id, body.category_id),
        }

    @app.get("/workspaces/{workspace_id}/status")
    def status(workspace_id: str, category_id: str, events_since: int = 0):
        ws = platform.workspaces.get(workspace_id)
        ws.category(category_id)
        cfg = platform.policy_for(workspace_id)
        counts = ws.label_counts(
            category_id, count_evaluation=cfg.count_evaluation_toward_retrain
        )
        active = platform.registry.active(workspace_id, category_id)
        if active is None:
            progress = min(1.0, counts.positives / cfg.first_model_positive_threshold)
            model = None
        else:
            progress = min(1.0, counts.labels_since_last_train / cfg.retrain_label_delta)
            model = {
                "iteration": active.record.iteration,
                "status": active.record.status,
                "flavor": active.record.flavor,
                "train_set_size": active.record.train_set_size,
            }
        return {
            "seq": ws.last_seq,
            "counts": _counts_view(counts),
            "progress": progress,
            "model": model,
            "pending": platform.orchestrator.pending(workspace_id),
            "events": [e.__dict__ for e in platform.events.history(workspace_id, events_since)],
        }

    # -- reading the corpus ------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/documents")
    def list_documents(workspace_id: str):
        ws = platform.workspaces.get(workspace_id)
        return {
            "documents": [
                {"doc_id": d.doc_id, "num_elements": len(d.elements)} for d in ws.dataset.documents
            ]
        }

    @app.get("/workspaces/{workspace_id}/documents/{doc_id}")
    def get_document(workspace_id: str, doc_id: str, category_id: str = ""):
        ws = platform.workspaces.get(workspace_id)
        doc = ws.dataset.documents_by_id.get(doc_id)
        if doc is None:
            raise errors.UnknownElement(f"no document {doc_id!r}")
        active = platform.registry.active(workspace_id, category_id) if category_id else None
        return {
            "doc_id": doc_id,
            "elements": _element_views(ws, [e.element_id for e in doc.elements], category_id, active),
            "seq": ws.last_seq,
            "model_iteration": active.record.iteration if active else None,
        }

    @app.get("/workspaces/{workspace_id}/search")
    def search_workspace(workspace_id: str, q: str, category_id: str = "", limit: int = 50):
        ws = platform.workspaces.get(workspace_id)
        query = parse_query(q)
        hits = platform.corpus.search(ws.dataset.name, query, limit)
        active = platform.registry.active(workspace_id, category_id) if category_id else None
        return {
            "query_terms": list(query.terms),
            "results": _element_views(ws, [e.element_id for e in hits], category_id, active),
            "seq": ws.last_seq,
        }

    # -- model-guided lists ---------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/label-next")
    def label_next(workspace_id: str, category_id: str):
        ws = platform.workspaces.get(workspace_id)
        ws.category(category_id)
        payload = platform.orchestrator.label_next(workspace_id, category_id)
        active = platform.registry.active(workspace_id, category_id)
        return {
            "model_iteration": payload["model_iteration"],
            "items": _element_views(ws, payload["element_ids"], category_id, active),
            "seq": ws.last_seq,
        }

    @app.get("/workspaces/{workspace_id}/positive-predictions")
    def positive_predictions(workspace_id: str, category_id: str, limit: int = 100, offset: int = 0):
        ws = platform.workspaces.get(workspace_id)
        ws.category(category_id)
        active = platform.registry.active(workspace_id, category_id)
        if active is None:
            raise errors.NoModel(f"no model trained yet for category {category_id!r}")
        ids = active.positive_elements()
        page = ids[offset : offset + limit]
        return {
            "total": len(ids),
            "model_iteration": active.record.iteration,
            "items": _element_views(ws, page, category_id, active),
            "seq": ws.last_seq,
        }

    # -- precision evaluation ----------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/evaluation", status_code=201)
    def start_evaluation(workspace_id: str, body: StartEvaluation):
        ws = platform.workspaces.get(workspace_id)
        ws.category(body.category_id)
        cfg = platform.policy_for(workspace_id)
        session = platform.sessions_for(workspace_id).start(body.category_id, cfg)
        active = platform.registry.active(workspace_id, body.category_id)
        return {
            "session_id": session.session_id,
            "category_id": session.category_id,
            "model_iteration": session.model_iteration,
            "short_sample": session.short_sample,
            "sample_size": len(session.element_ids),
            "items": _element_views(ws, session.element_ids, body.category_id, active),
            "seq": ws.last_seq,
        }

    @app.put("/workspaces/{workspace_id}/evaluation/{session_id}")
    def submit_evaluation(workspace_id: str, session_id: str, body: SubmitEvaluation):
        ws = platform.workspaces.get(workspace_id)
        sessions = platform.sessions_for(workspace_id)
        report = sessions.submit(session_id, body.labels)
        session = sessions.get(session_id)
        platform.events.emit(
            "evaluation_ready", workspace_id, session.category_id, session.model_iteration
        )
        platform.orchestrator.maybe_train(workspace_id, session.category_id)
        return {
            "session_id": session_id,
            "precision": report.precision,
            "sample_size": len(session.element_ids),
            "positives": report.tp,
            "seq": ws.last_seq,
        }

    # -- label quality -------------------------------------------------------------------

    def _labeled_examples(ws: Workspace, category_id: str) -> list[LabeledExample]:
        current = ws.current_labels(category_id)
        return [
            LabeledExample(
                eid, ws.dataset.elements_by_id[eid].text, 1 if cur.value == "positive" else -1
            )
            for eid, cur in sorted(current.items())
            if cur.source in HUMAN_SOURCES
        ]

    @app.get("/workspaces/{workspace_id}/quality/disagreements")
    def quality_disagreements(workspace_id: str, category_id: str, folds: int = 4, top_n: int = 20):
        ws = platform.workspaces.get(workspace_id)
        ws.category(category_id)
        seq = ws.last_seq
        suspects = cross_validation_disagreements(
            _labeled_examples(ws, category_id),
            folds=folds,
            seed=platform.policy_for(workspace_id).seed,
        )
        return {
            "seq": seq,
            "suspects": [
                {
                    "element_id": s.element_id,
                    "text": ws.dataset.elements_by_id[s.element_id].text,
                    "user_label": "positive" if s.user_label == 1 else "negative",
                    "model_prediction": "positive" if s.model_prediction == 1 else "negative",
                    "confidence": s.confidence,
                }
                for s in suspects[:top_n]
            ],
        }

    @app.get("/workspaces/{workspace_id}/quality/contradictions")
    def quality_contradictions(workspace_id: str, category_id: str, top_n: int = 10):
        ws = platform.workspaces.get(workspace_id)
        ws.category(category_id)
        if platform.embeddings is None:
            raise errors.LabelLoopError(
                "contradicting-pair analysis needs an embedding file (set LABELLOOP_EMBEDDINGS)"
            )
        seq = ws.last_seq
        pairs = contradicting_pairs(
            _labeled_examples(ws, category_id), platform.embeddings, top_n=top_n
        )
        return {
            "seq": seq,
            "pairs": [
                {
                    "element_a": p.element_a,
                    "element_b": p.element_b,
                    "text_a": ws.dataset.elements_by_id[p.element_a].text,
                    "text_b": ws.dataset.elements_by_id[p.element_b].text,
                    "label_a": "positive" if p.label_a == 1 else "negative",
                    "label_b": "positive" if p.label_b == 1 else "negative",
                    "distance": p.distance,
                }
                for p in pairs
            ],
        }

    # -- import / export --------------------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/labels/export")
    def export_labels(workspace_id: str):
        ws = platform.workspaces.get(workspace_id)
        return Response(
            content=ws.export_csv(),
            media_type="text/csv",
            headers={"Content-Disposition": f"attachment; filename={workspace_id}-labels.csv"},
        )

    @app.post("/workspaces/{workspace_id}/labels/import")
    async def import_labels(workspace_id: str, request: Request):
        ws = platform.workspaces.get(workspace_id)
        result = ws.import_csv(await request.body())
        for category in ws.categories():
            platform.orchestrator.maybe_train(workspace_id, category.category_id)
        return {
            "applied": result.applied,
            "errors": [{"line": e.line, "reason": e.reason} for e in result.errors],
            "counts": _counts_view(result.counts),
            "seq": ws.last_seq,
        }

    # -- policy config ------------------------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/config")
    def get_config(workspace_id: str):
        platform.workspaces.get(workspace_id)
        return platform.policy_for(workspace_id).to_mapping()

    @app.put("/workspaces/{workspace_id}/config")
    def update_config(workspace_id: str, overrides: dict):
        platform.workspaces.get(workspace_id)
        return platform.update_policy(workspace_id, overrides).to_mapping()

    # -- events ----------------------------------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/events")
    def events_stream(
        workspace_id: str, history: int = 0, since: int = 0, timeout: float = 0.0, max_events: int = 0
    ):
        platform.workspaces.get(workspace_id)
        if history:
            return JSONResponse(
                content=[e.__dict__ for e in platform.events.history(workspace_id, since)]
            )

        def stream():
            q = platform.events.subscribe(workspace_id)
            sent = 0
            try:
                yield ": connected\n\n"
                while True:
                    try:
                        event = q.get(timeout=timeout if timeout > 0 else 1.0)
                    except queue.Empty:
                        if timeout > 0:
                            return
                        yield ": keepalive\n\n"
                        continue
                    yield event.to_sse()
                    sent += 1
                    if max_events and sent >= max_events:
                        return
            finally:
                platform.events.unsubscribe(workspace_id, q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- optional static UI -------------------------------------------------------------------------

    ui_dir = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    import os

    ui_override = os.environ.get("LABELLOOP_UI_DIR")
    if ui_override:
        ui_dir = Path(ui_override)
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
