"""Append-only event ledger backing campaign persistence.

One JSON object per line, canonical key order, so identical runs produce
byte-identical ledgers. A torn final line (crash mid-write) is ignored on
replay; a corrupt line in the middle of the file is an error.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterator, List

from .errors import ParseError


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        obj = json.loads(line)
        return cls(seq=obj["seq"], ts=obj["ts"], kind=obj["kind"], payload=obj["payload"])


class EventLog:
    """Appender for one campaign's ledger file."""

    def __init__(self, path, fsync: bool = False):
        self.path = str(path)
        self.fsync = fsync
        self._fh = open(self.path, "ab")

    def append(self, record: EventRecord) -> None:
        self._fh.write(record.to_json().encode("utf-8") + b"\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_events(path) -> List[EventRecord]:
    """Load a ledger, tolerating a torn trailing line."""
    records: List[EventRecord] = []
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    torn_tail = lines[-1] != b""  # file did not end in a newline
    body = lines[:-1]
    for i, line in enumerate(body):
        if not line.strip():
            continue
        try:
            records.append(EventRecord.from_json(line.decode("utf-8")))
        except (ValueError, KeyError) as exc:
            if i == len(body) - 1 and not torn_tail:
                break  # torn final record, drop it
            raise ParseError(f"{path}: corrupt event at line {i + 1}: {exc}") from exc
    if torn_tail and lines[-1].strip():
        try:
            records.append(EventRecord.from_json(lines[-1].decode("utf-8")))
        except (ValueError, KeyError):
            pass  # interrupted write, recovered at the previous record
    expected = range(1, len(records) + 1)
    if [r.seq for r in records] != list(expected):
        raise ParseError(f"{path}: event sequence numbers are not gapless from 1")
    return records


def iter_prefixes(records: List[EventRecord]) -> Iterator[List[EventRecord]]:
    for k in range(1, len(records) + 1):
        yield records[:k]
