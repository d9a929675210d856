"""JSON-lines simulation history.

Line 1 is a header (``"type": "header"``) with the seed, config digests,
reservation time and the initial station inventory. Every following line
is one dispatched event:

    t, seq, kind, user            always
    station, state                station-bound events; state is
                                  [availableBikes, reservedBikes,
                                   availableSlots, reservedSlots] after the event
    reservation, expiry           reservation events
    success                       rent/return/reserve attempts
    context, decision             decision events
    user_type, position           UserAppears
"""

from __future__ import annotations

import json
from pathlib import Path


class HistoryError(RuntimeError):
    pass


def dumps(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


class _OrderedSink:
    def __init__(self):
        self.header: dict | None = None
        self._last: tuple[float, int] | None = None

    def _check(self, record: dict) -> None:
        key = (record["t"], record["seq"])
        if self._last is not None and key <= self._last:
            raise HistoryError(f"out-of-order history record {key} after {self._last}")
        self._last = key


class MemoryHistory(_OrderedSink):
    def __init__(self):
        super().__init__()
        self.records: list[dict] = []

    def write_header(self, header: dict) -> None:
        self.header = header

    def append(self, record: dict) -> None:
        self._check(record)
        self.records.append(record)

    def close(self) -> None:
        pass


class HistoryWriter(_OrderedSink):
    """Appends records to a file; optionally keeps them in memory too."""

    def __init__(self, path, keep: bool = False):
        super().__init__()
        self.path = Path(path)
        self.records: list[dict] | None = [] if keep else None
        self._fh = None

    def write_header(self, header: dict) -> None:
        self.header = header
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fh = self.path.open("w", encoding="utf-8")
        except OSError as exc:
            raise HistoryError(f"cannot write history {self.path}: {exc.strerror}") from exc
        self._fh.write(dumps(header) + "\n")

    def append(self, record: dict) -> None:
        self._check(record)
        self._fh.write(dumps(record) + "\n")
        if self.records is not None:
            self.records.append(record)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_history(path) -> tuple[dict, list[dict]]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise HistoryError(f"{path}: missing history header")
    return lines[0], lines[1:]
