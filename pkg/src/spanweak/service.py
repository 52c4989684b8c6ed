"""HTTP API over a single annotation session.

Every response is an ApiEnvelope: {"status": "ok", "payload": ...} or
{"status": "error", "error": {"code": ..., "message": ...}}. Mutations are
serialized through one lock; retraining runs off the request path and
publishes its snapshot atomically, so reads always see a complete snapshot.
Selection changes trigger a debounced refit (coalescing rapid toggles).
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .labelmodel import ModelError
from .rules import RuleError, SpanAnnotation
from .sampler import SessionComplete
from .session import Project, SessionError

RETRAIN_DEBOUNCE_SECONDS = 0.3


def ok(payload=None) -> JSONResponse:
    return JSONResponse({"status": "ok", "payload": payload})


def err(code: str, message: str, http_status: int = 400) -> JSONResponse:
    return JSONResponse(
        {"status": "error", "error": {"code": code, "message": message}},
        status_code=http_status)


class SessionOwner:
    """Single-writer wrapper: mutations lock, fits run on a worker thread."""

    def __init__(self, project: Project, project_path=None):
        self.project = project
        self.project_path = project_path
        self.lock = threading.RLock()
        self.fitting = False
        self.fit_error: str | None = None
        self._timer: threading.Timer | None = None

    def model_status(self) -> str:
        if self.fitting:
            return "fitting"
        return self.project.status()

    def schedule_retrain(self, delay: float = RETRAIN_DEBOUNCE_SECONDS):
        with self.lock:
            if self._timer is not None:
                self._timer.cancel()
            self._timer = threading.Timer(delay, self._fit)
            self._timer.daemon = True
            self._timer.start()

    def _fit(self):
        with self.lock:
            if not self.project.selected:
                return
            self.fitting = True
            self.fit_error = None
        try:
            # retrain reads immutable corpus + a selection copy; the snapshot
            # is published by a single attribute assignment
            self.project.retrain()
        except Exception as exc:  # surface diagnostics, keep old snapshot
            self.fit_error = str(exc)
        finally:
            self.fitting = False

    def retrain_now(self):
        self.schedule_retrain(delay=0.0)


def _lf_payload(project: Project, lf, stats=None) -> dict:
    return {
        "id": lf.id,
        "name": lf.name,
        "target": lf.target,
        "polarity": lf.polarity,
        "vote": lf.vote,
        "provenance": lf.provenance,
        "selected": lf.id in project.selected,
        "stats": stats if stats is not None else project.preview_stats(lf),
    }


def create_app(project: Project, project_path=None) -> FastAPI:
    owner = SessionOwner(project, project_path)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        if owner.project_path is not None:
            with owner.lock:
                project.save(owner.project_path)

    app = FastAPI(title="spanweak", docs_url=None, redoc_url=None,
                  lifespan=lifespan)
    # the browser client is served from its own origin during development
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.owner = owner

    @app.get("/health")
    def health():
        return ok({"service": "spanweak"})

    @app.get("/project")
    def project_info():
        c = project.corpus
        return ok({
            "classes": list(c.label_set.classes),
            "model": project.model,
            "tau_default": project.tau_default,
            "docs": {s: len(c.split_docs(s)) for s in ("train", "dev", "test")},
            "annotations": len(project.annotations),
            "suggested": len(project.suggested),
            "selected": list(project.selected),
        })

    @app.get("/next_doc")
    def next_doc():
        with owner.lock:
            try:
                doc_id, strategy = project.next_document()
            except SessionComplete:
                return err("EXHAUSTED", "all train documents have been served")
        doc = project.corpus.doc(doc_id)
        return ok({
            "doc_id": doc_id,
            "strategy": strategy,
            "split": doc.split,
            "tokens": [{"text": t.text, "pos": t.pos, "dep": t.dep,
                        "ner": t.ner} for t in doc.tokens],
        })

    @app.post("/annotations")
    async def submit_annotations(request: Request):
        body = await request.json()
        for field in ("doc_id", "start", "end", "label"):
            if field not in body:
                return err("BAD_REQUEST", f"missing field {field!r}")
        if body.get("polarity", "positive") not in ("positive", "negative"):
            return err("BAD_REQUEST", "polarity must be positive or negative")
        if not isinstance(body["start"], int) or not isinstance(body["end"], int) \
                or body["end"] <= body["start"] or body["start"] < 0:
            return err("INVALID_SPAN",
                       f"invalid span [{body['start']}, {body['end']})")
        if body["label"] not in project.corpus.label_set.classes:
            return err("UNKNOWN_LABEL", f"unknown label {body['label']!r}")
        try:
            project.corpus.doc(body["doc_id"])
        except KeyError:
            return err("UNKNOWN_DOC", f"unknown doc {body['doc_id']!r}")
        ann = SpanAnnotation(doc_id=body["doc_id"], start=body["start"],
                             end=body["end"], label=body["label"],
                             polarity=body.get("polarity", "positive"))
        with owner.lock:
            try:
                suggestions = project.submit_annotation(ann)
            except RuleError as exc:
                code = "SPAN_TOO_LONG" if "limit" in str(exc) else "INVALID_SPAN"
                return err(code, str(exc))
        return ok({"suggestions": [
            _lf_payload(project, lf, stats) for lf, stats in suggestions]})

    @app.get("/lfs")
    def list_lfs():
        with owner.lock:
            snap = project.snapshot
            fitted_stats = {}
            if snap is not None and not project.stale:
                fitted_stats = {lf.id: st.to_json()
                                for lf, st in zip(snap.lfs, snap.stats)}
            suggested = [
                _lf_payload(project, lf, fitted_stats.get(lf.id))
                for lf in project.suggested.values()
                if lf.id not in project.selected]
            selected = [
                _lf_payload(project, project.suggested[i], fitted_stats.get(i))
                for i in project.selected]
        return ok({"suggested": suggested, "selected": selected})

    def _toggle(lf_id: str, value: bool):
        with owner.lock:
            try:
                selected = project.set_selected(lf_id, value)
            except SessionError as exc:
                return err("UNKNOWN_LF", str(exc), http_status=404)
            if selected:
                owner.schedule_retrain()
        return ok({"selected": selected, "model_status": owner.model_status()})

    @app.post("/lfs/{lf_id}/select")
    def select_lf(lf_id: str):
        return _toggle(lf_id, True)

    @app.post("/lfs/{lf_id}/deselect")
    def deselect_lf(lf_id: str):
        return _toggle(lf_id, False)

    @app.get("/lfs/{lf_id}/feedback")
    def lf_feedback(lf_id: str):
        with owner.lock:
            try:
                report = project.fp_feedback(lf_id)
            except SessionError as exc:
                return err("UNKNOWN_LF", str(exc), http_status=404)
        return ok(report.to_json())

    @app.post("/retrain")
    def retrain():
        with owner.lock:
            if not project.selected:
                return err("EMPTY_SELECTION", "no labeling functions selected")
            owner.retrain_now()
        return ok({"scheduled": True, "model_status": owner.model_status()})

    @app.get("/model")
    def model():
        snap = project.snapshot
        payload = {
            "status": owner.model_status(),
            "model": project.model,
            "fit_error": owner.fit_error,
            "metrics": None,
            "lf_stats": None,
            "fit_seconds": None,
            "selected_hash": None,
        }
        if snap is not None:
            payload.update({
                "metrics": snap.dev_metrics.to_json() if snap.dev_metrics else None,
                "lf_stats": {lf.id: st.to_json()
                             for lf, st in zip(snap.lfs, snap.stats)},
                "fit_seconds": snap.fit_seconds,
                "selected_hash": snap.selected_hash,
            })
        return ok(payload)

    @app.get("/export")
    def export(split: str = "train", force: bool = False):
        with owner.lock:
            try:
                rows = list(project.export(split, force=force))
            except (SessionError, ModelError) as exc:
                return err("STALE_SNAPSHOT" if "stale" in str(exc) else "NO_SNAPSHOT",
                           str(exc), http_status=409)
        return ok({"split": split, "rows": rows})

    @app.post("/save")
    def save():
        if owner.project_path is None:
            return err("NO_PATH", "service was started without a project path")
        with owner.lock:
            project.save(owner.project_path)
        return ok({"path": str(owner.project_path)})

    return app
