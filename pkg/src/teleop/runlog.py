"""Structured, replayable run logging for both sides of the link.

One newline-delimited JSON record per event, one file per side per run,
plus a manifest capturing configs and seeds so a run can be reproduced.
Producers never block: records go through a bounded queue to a single
writer thread and are dropped (counted) under backpressure, because
control-loop timing outranks log completeness.
"""

from __future__ import annotations

import csv
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class LogRecord:
    stamp: int  # ns
    side: str  # "operator" | "vehicle" | "harness"
    module: str
    severity: str  # "debug" | "info" | "warn" | "error"
    event: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "stamp": self.stamp,
                "side": self.side,
                "module": self.module,
                "severity": self.severity,
                "event": self.event,
                "payload": self.payload,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "LogRecord":
        data = json.loads(line)
        return cls(
            stamp=int(data["stamp"]),
            side=data["side"],
            module=data["module"],
            severity=data["severity"],
            event=data["event"],
            payload=data.get("payload", {}),
        )


_SENTINEL = object()


class RunLogger:
    """Queue-backed NDJSON sink; ``log`` never stalls the caller."""

    def __init__(self, path: str | Path, side: str, *, queue_size: int = 4096, clock_ns=time.time_ns):
        self.path = Path(path)
        self.side = side
        self._clock_ns = clock_ns
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self.dropped_count = 0
        self._closed = False
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = self.path.open("a", encoding="utf-8")
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def log(self, record: LogRecord) -> None:
        if self._closed:
            return
        try:
            self._queue.put_nowait(record)
        except queue.Full:
            self.dropped_count += 1

    def emit(self, module: str, event: str, payload: dict | None = None, severity: str = "info") -> None:
        self.log(
            LogRecord(
                stamp=self._clock_ns(),
                side=self.side,
                module=module,
                severity=severity,
                event=event,
                payload=payload or {},
            )
        )

    def flush(self, timeout_s: float = 5.0) -> None:
        deadline = time.monotonic() + timeout_s
        while not self._queue.empty() and time.monotonic() < deadline:
            time.sleep(0.005)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._queue.put(_SENTINEL)
        self._thread.join(timeout=5.0)
        self._file.close()

    def __enter__(self) -> "RunLogger":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is _SENTINEL:
                return
            try:
                self._file.write(item.to_json() + "\n")
                if self._queue.empty():
                    self._file.flush()
            except (OSError, ValueError):
                self.dropped_count += 1


class NullLogger:
    """Drop-in no-op for components run without a sink configured."""

    dropped_count = 0

    def log(self, record: LogRecord) -> None:
        pass

    def emit(self, module: str, event: str, payload: dict | None = None, severity: str = "info") -> None:
        pass

    def flush(self, timeout_s: float = 0.0) -> None:
        pass

    def close(self) -> None:
        pass


def read_records(log_file: str | Path) -> list[LogRecord]:
    records = []
    with Path(log_file).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(LogRecord.from_json(line))
    return records


def export_timeseries(log_file: str | Path, event: str, fields: list[str]) -> list[list]:
    """Extract a stamped table of payload fields for one event type.

    Raises KeyError naming the available fields when a requested one is
    missing from any matching record.
    """
    rows: list[list] = [["stamp", *fields]]
    for record in read_records(log_file):
        if record.event != event:
            continue
        row = [record.stamp]
        for f in fields:
            if f not in record.payload:
                available = ", ".join(sorted(record.payload)) or "(none)"
                raise KeyError(f"field {f!r} not in event {event!r}; available: {available}")
            row.append(record.payload[f])
        rows.append(row)
    return rows


def write_csv(rows: list[list], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    return path


def create_run_dir(root: str | Path, run_id: str | None = None, manifest: dict | None = None) -> Path:
    """Create ``<root>/<run_id>/`` with a manifest for reproducibility."""
    if run_id is None:
        run_id = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(root) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest or {}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return run_dir
