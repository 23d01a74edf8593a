"""Deterministic discrete-event core: virtual clock, event queue, seeded RNG streams.

Time is integer microseconds throughout; there is no floating-point clock.
Events that share a timestamp are processed in insertion order (ascending
sequence number), never randomly, so co-scheduled events resolve identically
on every run.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .errors import BadRangeError, PastEventError


class EventKind(Enum):
    TX_START = "tx_start"
    TX_END = "tx_end"
    TIMER = "timer"
    ARRIVAL = "arrival"
    SLOT = "slot"


@dataclass
class Event:
    """One timestamped occurrence.

    ``payload`` is opaque to the engine; by convention it is a zero-argument
    callable invoked when the event fires.
    """

    time: int
    kind: EventKind
    payload: Any
    seq: int = -1
    cancelled: bool = field(default=False, compare=False)


class RngStream:
    """Reproducible pseudo-random stream, one per node.

    The underlying generator is seeded from ``(seed, stream_id)`` only, so the
    same pair yields the same draw sequence on every run and adding a stream
    never perturbs existing ones.
    """

    def __init__(self, seed: int, stream_id: int):
        self.seed = seed
        self.stream_id = stream_id
        mixed = ((seed & 0xFFFFFFFFFFFFFFFF) << 32) ^ (stream_id & 0xFFFFFFFF)
        self._rng = random.Random(mixed)

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if lo > hi:
            raise BadRangeError(f"uniform_int: lo={lo} > hi={hi}")
        return self._rng.randint(lo, hi)

    def expovariate(self, rate_per_us: float) -> float:
        return self._rng.expovariate(rate_per_us)


def uniform_int(stream: RngStream, lo: int, hi: int) -> int:
    return stream.uniform_int(lo, hi)


class Simulator:
    """Single-threaded event loop with a (time, seq) priority queue.

    Instances are fully self-contained; multiple simulations may run
    concurrently with no shared mutable state.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now: int = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._events: dict[int, Event] = {}
        self._streams: dict[int, RngStream] = {}
        self.processed_count = 0

    def stream(self, stream_id: int) -> RngStream:
        st = self._streams.get(stream_id)
        if st is None:
            st = RngStream(self.seed, stream_id)
            self._streams[stream_id] = st
        return st

    def schedule(self, event: Event) -> int:
        """Enqueue ``event``; returns an id usable with :meth:`cancel`."""
        if event.time < self.now:
            raise PastEventError(
                f"event at t={event.time} scheduled while clock={self.now}"
            )
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (event.time, event.seq, event))
        self._events[event.seq] = event
        return event.seq

    def call_at(self, time: int, kind: EventKind, fn: Callable[[], None]) -> int:
        return self.schedule(Event(time=time, kind=kind, payload=fn))

    def cancel(self, event_id: int) -> None:
        """Mark an event cancelled; it will be skipped when dequeued."""
        ev = self._events.get(event_id)
        if ev is not None:
            ev.cancelled = True

    def peek_time(self) -> Optional[int]:
        while self._heap and self._heap[0][2].cancelled:
            _, seq, _ = heapq.heappop(self._heap)
            self._events.pop(seq, None)
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int) -> None:
        """Process every pending event with time <= t_end, in (time, seq) order."""
        while True:
            t = self.peek_time()
            if t is None or t > t_end:
                break
            _, seq, ev = heapq.heappop(self._heap)
            self._events.pop(seq, None)
            if ev.cancelled:
                continue
            self.now = ev.time
            self.processed_count += 1
            ev.payload()
        # Clock lands on the horizon even when the queue drains early.
        self.now = max(self.now, t_end)
