"""HTTP/JSON API over the search runtime."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .perturb import METHODS, PerturbationResult
from .runtime import SearchRuntime
from .sketch import Sketch


class SearchBody(BaseModel):
    points: list[list[float]]
    k: int | None = None
    m: int | None = None


class PerturbBody(BaseModel):
    weights: list[float]
    method: str = "backprop"


class QueryBody(BaseModel):
    points: list[list[float]]


def _parse_sketch(points: list[list[float]]) -> Sketch:
    try:
        return Sketch(points)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"invalid sketch: {exc}")


def _sketch_points(sketch: Sketch) -> list[list[float]]:
    return [[float(p[0]), float(p[1]), int(p[2])] for p in sketch.points.tolist()]


def _perturb_json(result: PerturbationResult) -> dict:
    return {
        "method": result.method,
        "suggestion_points": _sketch_points(result.suggestion),
        "loss_trace": result.loss_trace,
        "distances_before": result.distances_before,
        "distances_after": result.distances_after,
        "fallback_used": result.fallback_used,
        "aborted": result.aborted,
    }


def create_app(runtime: SearchRuntime) -> FastAPI:
    app = FastAPI(title="livesketch", docs_url=None, redoc_url=None)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "indexed": len(runtime.bundle)}

    @app.post("/api/session")
    def new_session():
        session = runtime.sessions.create()
        return {"session_id": session.session_id}

    @app.post("/api/session/{session_id}/search")
    def search(session_id: str, body: SearchBody):
        sketch = _parse_sketch(body.points)
        session = runtime.sessions.get_or_create(session_id)
        with session.lock:
            try:
                results, clusters = runtime.search(session, sketch, k=body.k, m=body.m)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return {
                "session_id": session.session_id,
                "iteration": session.iteration,
                "results": [
                    {"id": int(i), "distance": float(d), "thumb_url": f"/api/thumb/{int(i)}.png"}
                    for i, d in results
                ],
                "clusters": [
                    {
                        "member_ids": c.member_ids,
                        "representative_id": c.representative_id,
                        "target_points": _sketch_points(c.target_sketch),
                        "thumb_urls": [f"/api/thumb/{i}.png" for i in c.member_ids],
                    }
                    for c in clusters.clusters
                ],
            }

    @app.post("/api/session/{session_id}/perturb")
    def perturb(session_id: str, body: PerturbBody):
        if body.method not in METHODS:
            raise HTTPException(status_code=400, detail=f"unknown method {body.method!r}")
        session = runtime.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        with session.lock:
            try:
                result, frames = runtime.perturb(session, body.weights, body.method)
            except ValueError as exc:
                status = 409 if "no prior search" in str(exc) else 400
                raise HTTPException(status_code=status, detail=str(exc))
            payload = _perturb_json(result)
            payload["morph_frames"] = [_sketch_points(f) for f in frames]
            payload["iteration"] = session.iteration
            return payload

    @app.post("/api/session/{session_id}/accept")
    def accept(session_id: str):
        session = runtime.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        with session.lock:
            try:
                query = runtime.accept_suggestion(session)
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {"query_points": _sketch_points(query)}

    @app.post("/api/session/{session_id}/query")
    def replace(session_id: str, body: QueryBody):
        sketch = _parse_sketch(body.points)
        session = runtime.sessions.get_or_create(session_id)
        with session.lock:
            runtime.replace_query(session, sketch)
            return JSONResponse({"ok": True})

    @app.get("/api/thumb/{item_id}.png")
    def thumb(item_id: int):
        record = runtime.bundle.records.get(item_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown item")
        path = runtime.bundle.thumbs_dir / record.thumb_name
        if not path.exists():
            raise HTTPException(status_code=404, detail="thumbnail missing")
        return FileResponse(path, media_type="image/png")

    return app
