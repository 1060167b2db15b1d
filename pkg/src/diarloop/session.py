"""Live correction sessions: the engine behind a single-writer lock.

One session per meeting. Concurrent producers may push segments and
feedback; the session serializes them, keeps the ordered public event
history, and serves consistent snapshots to late joiners.
"""

from __future__ import annotations

import threading
import uuid
from typing import Callable

from .engine import Engine, Toggles
from .enrollment import EnrollmentPool
from .errors import NoEnrollmentsError, ValidationError
from .gateway import TextGateway
from .model import Embedding, Segment, SessionConfig, SpeakerId
from .swm import VoteProvider


class Session:
    def __init__(
        self,
        cfg: SessionConfig,
        seeds: dict[SpeakerId, list[Embedding]],
        gateway: TextGateway,
        toggles: Toggles | None = None,
        vote_provider: VoteProvider | None = None,
        embedding_lookup: Callable[[float, float], Embedding] | None = None,
        session_id: str | None = None,
    ):
        if not seeds:
            raise NoEnrollmentsError("a session needs seeded speakers")
        toggles = toggles or Toggles(swm=False, oe=True, corrections=True)
        cap = cfg.resolved_oe_cap(toggles.swm) if toggles.oe else 0
        pool = EnrollmentPool.from_seeds(seeds, online_cap=cap)
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self._lock = threading.Lock()
        self._engine = Engine(
            cfg=cfg,
            pool=pool,
            gateway=gateway,
            toggles=toggles,
            vote_provider=vote_provider,
            embedding_lookup=embedding_lookup,
            feedback_source="user",
        )
        self._history: list[dict] = []

    def push_segment(self, segment: Segment) -> list[dict]:
        with self._lock:
            events = self._engine.push_segment(segment)
            self._history.extend(events)
            return events

    def push_feedback(self, raw_text: str) -> list[dict]:
        with self._lock:
            events = self._engine.push_feedback(raw_text)
            self._history.extend(events)
            return events

    def events_since(self, index: int) -> list[dict]:
        """Public events with logical index >= ``index``, in order."""
        with self._lock:
            return [ev for ev in self._history if ev["i"] >= index]

    def snapshot(self) -> dict:
        with self._lock:
            snap = self._engine.snapshot()
            snap["session_id"] = self.session_id
            return snap

    def audit_log(self) -> list[dict]:
        with self._lock:
            return list(self._engine.audit)


def open_session(
    cfg: SessionConfig,
    seeds: dict[SpeakerId, list[Embedding]],
    gateway: TextGateway,
    **kwargs,
) -> Session:
    """Create a session with an empty transcript and zeroed loop state."""
    if not seeds or any(not vecs for vecs in seeds.values()):
        raise NoEnrollmentsError("every speaker needs at least one seed")
    if cfg is None:
        raise ValidationError("session config is required")
    return Session(cfg=cfg, seeds=seeds, gateway=gateway, **kwargs)
