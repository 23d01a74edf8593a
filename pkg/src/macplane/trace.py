"""Append-only event trace and its JSON-lines serialization.

Every record serializes with exactly the keys
``{t, node, event, frame, ftype, plane, ch, outcome, extra}`` in that order,
one record per line, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import IncompleteTraceError


class Outcome:
    DELIVERED = "Delivered"
    COLLIDED = "Collided"
    NOT_HEARD = "NotHeard"
    SENT = "Sent"


class Ev:
    """Trace event names."""

    ARRIVAL = "arrival"
    TX_START = "tx_start"
    TX_END = "tx_end"
    RX = "rx"
    NAV = "nav"
    BACKOFF = "backoff"
    DROP = "drop"
    RESERVATION = "reservation"
    RELEASE = "release"


@dataclass(slots=True)
class TraceRecord:
    t: int
    node: str
    event: str
    frame: Optional[int] = None
    ftype: Optional[str] = None
    plane: Optional[str] = None
    ch: Optional[tuple[int, ...]] = None
    outcome: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "node": self.node,
            "event": self.event,
            "frame": self.frame,
            "ftype": self.ftype,
            "plane": self.plane,
            "ch": list(self.ch) if self.ch is not None else None,
            "outcome": self.outcome,
            "extra": self.extra,
        }


class Trace:
    """Trace records in processing order (nondecreasing time)."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def add(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def check_complete(self) -> None:
        """Every tx_start must have a matching tx_end."""
        open_frames: set[int] = set()
        for r in self.records:
            if r.event == Ev.TX_START:
                open_frames.add(r.frame)
            elif r.event == Ev.TX_END:
                open_frames.discard(r.frame)
        if open_frames:
            raise IncompleteTraceError(
                f"frames without tx_end: {sorted(open_frames)}"
            )

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(r.as_dict(), separators=(",", ":")) for r in self.records
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def parse_jsonl(text: str) -> list[TraceRecord]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            TraceRecord(
                t=d["t"],
                node=d["node"],
                event=d["event"],
                frame=d.get("frame"),
                ftype=d.get("ftype"),
                plane=d.get("plane"),
                ch=tuple(d["ch"]) if d.get("ch") is not None else None,
                outcome=d.get("outcome"),
                extra=d.get("extra") or {},
            )
        )
    return out
