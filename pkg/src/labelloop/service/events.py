"""In-process event bus: per-workspace history plus live subscriber queues
feeding the server-sent event stream."""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Event:
    kind: str  # model_training_started | model_ready | model_failed | evaluation_ready
    workspace_id: str
    category_id: str
    iteration: int
    timestamp: float
    detail: str = ""

    def to_sse(self) -> str:
        return f"event: {self.kind}\ndata: {json.dumps(asdict(self))}\n\n"


class EventBus:
    def __init__(self):
        self._lock = threading.Lock()
        self._history: dict[str, list[Event]] = {}
        self._subscribers: dict[str, list[queue.Queue]] = {}

    def emit(
        self, kind: str, workspace_id: str, category_id: str, iteration: int, detail: str = ""
    ) -> Event:
        event = Event(
            kind=kind,
            workspace_id=workspace_id,
            category_id=category_id,
            iteration=iteration,
            timestamp=time.time(),
            detail=detail,
        )
        with self._lock:
            self._history.setdefault(workspace_id, []).append(event)
            listeners = list(self._subscribers.get(workspace_id, []))
        for q in listeners:
            q.put(event)
        return event

    def history(self, workspace_id: str, since: int = 0) -> list[Event]:
        with self._lock:
            return list(self._history.get(workspace_id, [])[since:])

    def subscribe(self, workspace_id: str) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.setdefault(workspace_id, []).append(q)
        return q

    def unsubscribe(self, workspace_id: str, q: queue.Queue) -> None:
        with self._lock:
            subs = self._subscribers.get(workspace_id, [])
            if q in subs:
                subs.remove(q)
