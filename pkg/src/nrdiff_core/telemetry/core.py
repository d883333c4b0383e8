"""
Stage telemetry for pipeline runs

Tracks how long each named stage of a run takes (tx, channel, rx, metrics, ...)
and whether it failed. Timings are informational only; nothing in the numerical
path depends on them.

Usage:
    from nrdiff_core.telemetry import StageTracker, track_stage

    tracker = StageTracker("end_to_end")
    with track_stage(tracker, "tx"):
        artifacts = tx(...)
    tracker.timings_ms  # {"tx": 12.3}
"""

import logging
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

from nrdiff_core.storage import ResultSink

logger = logging.getLogger(__name__)


class StageTracker:
    """Collects per-stage wall-clock durations for one operation"""

    def __init__(self, operation: str):
        self.operation = operation
        self.timings_ms: Dict[str, float] = {}
        self.failures: Dict[str, str] = {}
        self.metadata: Dict[str, Any] = {}
        self._open: Dict[str, float] = {}

    @property
    def success(self) -> bool:
        return not self.failures

    def start(self, stage: str) -> None:
        self._open[stage] = time.perf_counter()

    def stop(self, stage: str) -> float:
        started = self._open.pop(stage, None)
        if started is None:
            logger.warning(f"Stage '{stage}' was never started - cannot calculate duration")
            return 0.0
        elapsed = (time.perf_counter() - started) * 1000.0
        self.timings_ms[stage] = self.timings_ms.get(stage, 0.0) + elapsed
        logger.debug(f"{self.operation}: stage {stage} took {elapsed:.1f} ms")
        return elapsed

    def record_error(self, stage: str, error: str) -> None:
        self.failures[stage] = error

    def update_metadata(self, metadata: Dict[str, Any]) -> None:
        self.metadata.update(metadata)

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "operation": self.operation,
            "success": self.success,
            "timings_ms": dict(self.timings_ms),
        }
        if self.failures:
            record["failures"] = dict(self.failures)
        if self.metadata:
            record["metadata"] = dict(self.metadata)
        return record

    def persist(self, sink: Optional[ResultSink]) -> None:
        if sink is None:
            return
        try:
            sink.record(self.to_record())
        except OSError as exc:  # pragma: no cover - run records are best effort
            logger.warning(f"Failed to persist run record: {exc}")


@contextmanager
def track_stage(tracker: StageTracker, stage: str) -> Iterator[StageTracker]:
    """Time one stage; a raised exception is recorded against the stage and re-raised"""

    tracker.start(stage)
    try:
        yield tracker
    except Exception as exc:
        tracker.record_error(stage, str(exc))
        raise
    finally:
        tracker.stop(stage)
