"""Topology, per-channel carrier sense and receiver-centric collision resolution.

Hearing is a binary adjacency relation (no SINR, no capture): any overlap of
two heard transmissions on a shared channel destroys both frames at that
receiver. Carrier sense and propagation are instantaneous. Collisions are
evaluated per receiver at frame end, so one frame can be delivered at one
node and collided at another.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .engine import Event, EventKind, Simulator
from .errors import (
    AlreadyTransmittingError,
    UnknownChannelError,
    UnknownNodeError,
)
from .frames import Frame
from .trace import Ev, Outcome, Trace, TraceRecord


class Topology:
    """Node set plus a symmetric, irreflexive hears(a, b) relation."""

    def __init__(self, nodes: list[str], edges: list[tuple[str, str]]):
        self.nodes = list(nodes)
        self._index = {n: i for i, n in enumerate(self.nodes)}
        if len(self._index) != len(self.nodes):
            raise UnknownNodeError("duplicate node ids")
        self._adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in edges:
            if a not in self._index or b not in self._index:
                raise UnknownNodeError(f"edge ({a},{b}) references unknown node")
            if a == b:
                raise UnknownNodeError(f"self edge on {a}")
            self._adj[a].add(b)
            self._adj[b].add(a)
        # Sorted neighbour lists keep dispatch order deterministic.
        self.neighbors = {n: sorted(self._adj[n]) for n in self.nodes}

    def hears(self, a: str, b: str) -> bool:
        if a not in self._index:
            raise UnknownNodeError(a)
        if b not in self._index:
            raise UnknownNodeError(b)
        return b in self._adj[a]

    def index(self, node: str) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    @classmethod
    def chain(cls, nodes: list[str]) -> "Topology":
        return cls(nodes, [(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)])

    @classmethod
    def full_mesh(cls, nodes: list[str]) -> "Topology":
        edges = [
            (nodes[i], nodes[j])
            for i in range(len(nodes))
            for j in range(i + 1, len(nodes))
        ]
        return cls(nodes, edges)


class ChannelSet:
    """Ordered 20 MHz channels with one primary; bondable blocks nest."""

    def __init__(self, count: int, primary: int = 0):
        if count < 1:
            raise UnknownChannelError("need at least one channel")
        if not 0 <= primary < count:
            raise UnknownChannelError(f"primary {primary} outside 0..{count - 1}")
        self.channels = list(range(count))
        self.primary = primary

    def __contains__(self, ch: int) -> bool:
        return 0 <= ch < len(self.channels)

    def check(self, ch: int) -> None:
        if ch not in self:
            raise UnknownChannelError(f"channel {ch}")

    def block(self, width_mhz: int) -> Optional[tuple[int, ...]]:
        """Standard-aligned block of ``width_mhz`` containing the primary,
        or None if the channel set is too small for that width."""
        k = width_mhz // 20
        start = (self.primary // k) * k
        if start + k > len(self.channels):
            return None
        return tuple(range(start, start + k))

    def secondaries(self, width_mhz: int) -> tuple[int, ...]:
        blk = self.block(width_mhz)
        if blk is None:
            return ()
        return tuple(c for c in blk if c != self.primary)


@dataclass
class InFlight:
    frame: Frame
    sender: str
    channels: tuple[int, ...]
    t_start: int
    t_end: int


class _SenseState:
    """Per (node, channel) carrier-sense bookkeeping."""

    __slots__ = ("count", "burst_start", "last_idle_start")

    def __init__(self):
        self.count = 0
        self.burst_start = 0
        self.last_idle_start = 0


class Medium:
    """Holds in-flight transmissions and resolves receptions at frame end.

    MAC layers hook in through three callbacks:
      * ``reception_handler(receiver, inflight, outcome, t)`` for every node
        that hears the sender, at frame end;
      * ``tx_end_handler(inflight, t)`` for the sender;
      * per-node watchers, invoked when the sensed busy/idle state of a
        (node, channel) pair flips.
    """

    def __init__(self, sim: Simulator, topology: Topology, channels: ChannelSet,
                 trace: Trace):
        self.sim = sim
        self.topology = topology
        self.channels = channels
        self.trace = trace
        self.reception_handler: Optional[Callable] = None
        self.tx_end_handler: Optional[Callable] = None
        self._watchers: dict[str, Callable[[int, bool, int], None]] = {}
        self._active: list[InFlight] = []
        self._history: list[InFlight] = []  # ended, ascending t_end
        self._current_tx: dict[str, InFlight] = {}
        self._sense: dict[tuple[str, int], _SenseState] = {}
        self._frame_seq = 0
        for n in topology.nodes:
            for c in channels.channels:
                self._sense[(n, c)] = _SenseState()

    def register_watcher(self, node: str, fn: Callable[[int, bool, int], None]) -> None:
        self._watchers[node] = fn

    # -- carrier sense ----------------------------------------------------

    def _hearers(self, sender: str) -> list[str]:
        """Nodes whose carrier sense a transmission affects (sender included:
        a node senses busy on channels it is itself transmitting on)."""
        return sorted(set(self.topology.neighbors[sender]) | {sender})

    def sense(self, node: str, channel: int, t: int) -> bool:
        """True iff busy: some heard in-flight occupies the channel at t."""
        self.topology.index(node)
        self.channels.check(channel)
        return self._sense[(node, channel)].count > 0

    def idle_map(self, node: str, t: int) -> dict[int, bool]:
        """Per-channel idle flags as seen by ``node`` (True = idle)."""
        return {c: not self.sense(node, c, t) for c in self.channels.channels}

    def was_interval_idle(self, node: str, channel: int, a: int, b: int) -> bool:
        """True iff no heard transmission intersected [a, b) on the channel."""
        st = self._sense[(node, channel)]
        if st.last_idle_start > a:
            return False
        if st.count > 0 and st.burst_start < b:
            return False
        return True

    # -- transmissions ----------------------------------------------------

    def transmitting(self, node: str) -> bool:
        return node in self._current_tx

    def begin_transmission(self, sender: str, frame: Frame,
                           channels: tuple[int, ...], t: int) -> InFlight:
        self.topology.index(sender)
        for c in channels:
            self.channels.check(c)
        if sender in self._current_tx:
            raise AlreadyTransmittingError(
                f"{sender} already transmitting at t={t}"
            )
        if frame.id is None:
            self._frame_seq += 1
            frame.id = self._frame_seq
        fl = InFlight(
            frame=frame,
            sender=sender,
            channels=tuple(sorted(channels)),
            t_start=t,
            t_end=t + frame.airtime_us,
        )
        self._active.append(fl)
        self._current_tx[sender] = fl
        self.trace.add(TraceRecord(
            t=t, node=sender, event=Ev.TX_START, frame=frame.id,
            ftype=frame.ftype.value, plane=frame.plane.value, ch=fl.channels,
            outcome=Outcome.SENT,
            extra=self._frame_extra(frame),
        ))
        for node in self._hearers(sender):
            for c in fl.channels:
                st = self._sense[(node, c)]
                st.count += 1
                if st.count == 1:
                    st.burst_start = t
                    w = self._watchers.get(node)
                    if w is not None:
                        w(c, True, t)
        self.sim.schedule(Event(fl.t_end, EventKind.TX_END,
                                lambda: self._on_tx_end(fl)))
        return fl

    @staticmethod
    def _frame_extra(frame: Frame) -> dict:
        extra = {"src": frame.src, "dst": frame.dst, "dur": frame.duration_field_us}
        if frame.msdu is not None:
            extra["msdu"] = frame.msdu
        if frame.grant is not None:
            extra["grant"] = frame.grant
        return extra

    def _on_tx_end(self, fl: InFlight) -> None:
        t = fl.t_end
        self._active.remove(fl)
        del self._current_tx[fl.sender]
        self.trace.add(TraceRecord(
            t=t, node=fl.sender, event=Ev.TX_END, frame=fl.frame.id,
            ftype=fl.frame.ftype.value, plane=fl.frame.plane.value,
            ch=fl.channels, outcome=Outcome.SENT,
            extra={"src": fl.frame.src, "dst": fl.frame.dst},
        ))
        # Receptions first, so NAV updates land before contention resumes.
        for node in self._hearers(fl.sender):
            if node == fl.sender:
                continue
            outcome = self.resolve_reception(node, fl)
            self.trace.add(TraceRecord(
                t=t, node=node, event=Ev.RX, frame=fl.frame.id,
                ftype=fl.frame.ftype.value, plane=fl.frame.plane.value,
                ch=fl.channels, outcome=outcome,
                extra=self._frame_extra(fl.frame),
            ))
            if self.reception_handler is not None:
                self.reception_handler(node, fl, outcome, t)
        if self.tx_end_handler is not None:
            self.tx_end_handler(fl, t)
        # Now flip carrier sense and wake contenders.
        for node in self._hearers(fl.sender):
            for c in fl.channels:
                st = self._sense[(node, c)]
                st.count -= 1
                if st.count == 0:
                    st.last_idle_start = t
                    w = self._watchers.get(node)
                    if w is not None:
                        w(c, False, t)
        self._history.append(fl)
        self._prune_history()

    def _prune_history(self) -> None:
        if len(self._history) < 256:
            return
        floor = min((a.t_start for a in self._active), default=self.sim.now)
        keep = 0
        for i, h in enumerate(self._history):
            if h.t_end > floor:
                keep = i
                break
        else:
            keep = len(self._history)
        if keep:
            del self._history[:keep]

    # -- reception --------------------------------------------------------

    @staticmethod
    def _overlaps(a: InFlight, b: InFlight) -> bool:
        return (a.t_start < b.t_end and b.t_start < a.t_end
                and bool(set(a.channels) & set(b.channels)))

    def _overlapping(self, fl: InFlight) -> list[InFlight]:
        """All other transmissions intersecting fl in time (any channel)."""
        out = []
        for o in self._active:
            if o is not fl and o.t_start < fl.t_end and fl.t_start < o.t_end:
                out.append(o)
        for o in reversed(self._history):
            if o.t_end <= fl.t_start:
                break
            if o is not fl and o.t_start < fl.t_end:
                out.append(o)
        return out

    def resolve_reception(self, receiver: str, fl: InFlight) -> str:
        """Outcome of ``fl`` at ``receiver``, evaluated at fl.t_end.

        NotHeard if the sender is out of range, or if the receiver spent part
        of the frame transmitting on disjoint channels (radio busy).
        Collided if any heard transmission, or the receiver's own, overlapped
        the frame on a shared channel. No capture: overlap destroys the frame.
        """
        if not self.topology.hears(fl.sender, receiver):
            return Outcome.NOT_HEARD
        radio_busy = False
        for o in self._overlapping(fl):
            shared = bool(set(o.channels) & set(fl.channels))
            if o.sender == receiver:
                if shared:
                    return Outcome.COLLIDED
                radio_busy = True
            elif shared and self.topology.hears(o.sender, receiver):
                return Outcome.COLLIDED
        if radio_busy:
            return Outcome.NOT_HEARD
        return Outcome.DELIVERED
