"""
Structured metrics as JSON lines.

Each record is {"type", "timestamp", "data"}. An emitter without a sink is a no-op, so
solvers can emit unconditionally.
"""

import json
import threading
import time
from pathlib import Path
from typing import Optional


class MetricsEmitter:
    """Appends one JSON object per event to a sink file. Thread-safe."""

    def __init__(self, sink: Optional[Path] = None, clock=time.time):
        self.sink = Path(sink) if sink is not None else None
        self._clock = clock
        self._lock = threading.Lock()
        self.count = 0

    @classmethod
    def disabled(cls) -> "MetricsEmitter":
        return cls(None)

    @property
    def enabled(self) -> bool:
        return self.sink is not None

    def emit(self, event_type: str, data: dict):
        """
        Write an event line.

        Args:
            event_type: e.g. "recurrent_iteration", "study_point", "lm_step"
            data: JSON-serializable payload
        """
        if not self.enabled:
            return
        message = json.dumps({"type": event_type, "timestamp": self._clock(), "data": data})
        with self._lock:
            self.sink.parent.mkdir(parents=True, exist_ok=True)
            with self.sink.open("a", encoding="utf-8") as fh:
                fh.write(message + "\n")
            self.count += 1


def read_events(path: Path, event_type: Optional[str] = None) -> list[dict]:
    """Parse a JSON-lines metrics file, optionally keeping one event type."""
    path = Path(path)
    if not path.exists():
        return []
    events = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if event_type is None or record.get("type") == event_type:
            events.append(record)
    return events


# Shared no-op emitter for callers that do not pass one.
NULL_EMITTER = MetricsEmitter.disabled()
