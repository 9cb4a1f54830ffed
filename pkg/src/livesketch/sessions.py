"""In-memory search sessions with idle expiry and per-session serialization."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .intents import IntentClusterSet
from .pq import ResultList
from .sketch import Sketch

DEFAULT_TTL_SECONDS = 1800.0


@dataclass
class SearchSession:
    session_id: str
    query: Sketch | None = None
    query_latent: np.ndarray | None = None
    iteration: int = 0
    last_results: ResultList | None = None
    last_clusters: IntentClusterSet | None = None
    suggestion: Sketch | None = None
    suggestion_latent: np.ndarray | None = None
    touched_at: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """Thread-safe id -> session map; ids come from a seeded generator."""

    def __init__(self, ttl_seconds: float = DEFAULT_TTL_SECONDS, seed: int = 0):
        self._ttl = ttl_seconds
        self._rng = np.random.default_rng(seed)
        self._sessions: dict[str, SearchSession] = {}
        self._guard = threading.Lock()

    def _new_id(self) -> str:
        return "".join(f"{b:02x}" for b in self._rng.integers(0, 256, size=16, dtype=np.uint8))

    def create(self) -> SearchSession:
        with self._guard:
            self._purge_locked()
            sid = self._new_id()
            while sid in self._sessions:
                sid = self._new_id()
            session = SearchSession(session_id=sid)
            self._sessions[sid] = session
            return session

    def get_or_create(self, session_id: str) -> SearchSession:
        with self._guard:
            self._purge_locked()
            session = self._sessions.get(session_id)
            if session is None:
                session = SearchSession(session_id=session_id)
                self._sessions[session_id] = session
            session.touched_at = time.monotonic()
            return session

    def get(self, session_id: str) -> SearchSession | None:
        with self._guard:
            session = self._sessions.get(session_id)
            if session is not None:
                session.touched_at = time.monotonic()
            return session

    def _purge_locked(self) -> None:
        now = time.monotonic()
        dead = [sid for sid, s in self._sessions.items() if now - s.touched_at > self._ttl]
        for sid in dead:
            del self._sessions[sid]

    def __len__(self) -> int:
        with self._guard:
            return len(self._sessions)
