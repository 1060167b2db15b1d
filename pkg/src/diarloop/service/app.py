"""FastAPI session service.

REST endpoints create sessions, push segments/feedback and read
snapshots; a WebSocket per session streams public events (one JSON
frame each) and accepts ``{"type": "correction"|"segment", ...}``
client frames. Event frames carry a protocol version ``v`` and a
monotone logical index ``i``; reconnecting clients pass ``?from=N``
to resume without gaps or duplicates.
"""

from __future__ import annotations

import asyncio

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from ..errors import DiarloopError
from ..gateway import make_gateway
from ..engine import Toggles
from ..model import Segment, SessionConfig, Word
from ..session import Session, open_session
from .schemas import (
    EventOut,
    EventsResponse,
    FeedbackIn,
    OpenSessionRequest,
    OpenSessionResponse,
    SegmentIn,
    SnapshotResponse,
)

WS_POLL_INTERVAL_S = 0.02

app = FastAPI(title="diarloop session service", version="1")

_sessions: dict[str, Session] = {}


def _get_session(session_id: str) -> Session:
    session = _sessions.get(session_id)
    if session is None:
        raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
    return session


def _segment_from_model(body: SegmentIn) -> Segment:
    return Segment(
        id=body.id,
        t_start=body.start,
        t_end=body.end,
        words=[Word(text=w.w, start=w.s, end=w.e) for w in body.words],
        embedding=np.asarray(body.embedding, dtype=np.float64)
        if body.embedding is not None
        else None,
        label=body.label,
    )


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "sessions": len(_sessions)}


@app.post("/sessions", response_model=OpenSessionResponse)
def create_session(body: OpenSessionRequest) -> OpenSessionResponse:
    try:
        cfg = SessionConfig(**body.config.model_dump())
        gateway = make_gateway(
            body.gateway.kind,
            endpoint=body.gateway.endpoint,
            scripted=body.gateway.scripted,
        )
        seeds: dict[str, list[np.ndarray]] = {}
        for seed in body.seeds:
            seeds.setdefault(seed.speaker, []).append(
                np.asarray(seed.embedding, dtype=np.float64)
            )
        session = open_session(
            cfg,
            seeds,
            gateway,
            toggles=Toggles(
                swm=body.toggles.swm,
                oe=body.toggles.oe,
                corrections=body.toggles.corrections,
            ),
        )
    except DiarloopError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    _sessions[session.session_id] = session
    return OpenSessionResponse(
        session_id=session.session_id, speakers=session.snapshot()["speakers"]
    )


@app.post("/sessions/{session_id}/segments", response_model=EventsResponse)
def push_segment(session_id: str, body: SegmentIn) -> EventsResponse:
    session = _get_session(session_id)
    try:
        segment = _segment_from_model(body)
    except DiarloopError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    events = session.push_segment(segment)
    return EventsResponse(
        session_id=session_id, events=[EventOut(**ev) for ev in events]
    )


@app.post("/sessions/{session_id}/feedback", response_model=EventsResponse)
def push_feedback(session_id: str, body: FeedbackIn) -> EventsResponse:
    session = _get_session(session_id)
    events = session.push_feedback(body.text)
    return EventsResponse(
        session_id=session_id, events=[EventOut(**ev) for ev in events]
    )


@app.get("/sessions/{session_id}/snapshot", response_model=SnapshotResponse)
def snapshot(session_id: str) -> SnapshotResponse:
    return SnapshotResponse(**_get_session(session_id).snapshot())


async def _handle_client_frame(session: Session, frame: dict) -> None:
    loop = asyncio.get_event_loop()
    kind = frame.get("type")
    if kind == "correction":
        await loop.run_in_executor(None, session.push_feedback, str(frame.get("text", "")))
    elif kind == "segment":
        body = SegmentIn(**frame.get("segment", {}))
        await loop.run_in_executor(None, session.push_segment, _segment_from_model(body))
    # unknown frame types are ignored; errors surface as event frames


@app.websocket("/sessions/{session_id}/events")
async def events_ws(ws: WebSocket, session_id: str, from_index: int = 0):
    session = _sessions.get(session_id)
    if session is None:
        await ws.close(code=4404)
        return
    await ws.accept()
    cursor = from_index
    receiver = asyncio.ensure_future(ws.receive_json())
    try:
        while True:
            for ev in session.events_since(cursor):
                await ws.send_json(ev)
                cursor = ev["i"] + 1
            done, _ = await asyncio.wait({receiver}, timeout=WS_POLL_INTERVAL_S)
            if receiver in done:
                frame = receiver.result()
                await _handle_client_frame(session, frame)
                receiver = asyncio.ensure_future(ws.receive_json())
    except (WebSocketDisconnect, RuntimeError):
        pass
    finally:
        receiver.cancel()
