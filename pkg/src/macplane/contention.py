"""DCF/EDCA contention core shared by both MAC variants.

Each entity is one backoff instance (one access category of one node, or one
flow's control-plane requester). The countdown is event-batched: instead of
per-slot events, a single timer fires at the projected zero-crossing and a
freeze consumes the number of fully elapsed idle slots. Semantics are the
classic ones: AIFS after every busy period, counter frozen while busy,
decrement only across fully idle slots, transmission at the boundary where
the counter reaches zero (so two entities reaching zero at the same boundary
collide).

A frame that arrives to a quiescent entity on an idle medium transmits right
after AIFS without a draw; every subsequent access of a busy entity draws a
backoff first (post-backoff), which is what saturated sources exercise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .engine import EventKind, Simulator
from .errors import IllegalTransitionError
from .mac_common import EdcaParams, GateDecision, backoff_draw, contention_window
from .medium import Medium
from .trace import Ev, TraceRecord


class EntityState(Enum):
    IDLE = "idle"        # nothing queued
    WAIT = "wait"        # queued, blocked (busy medium / NAV / gate / node lock)
    AIFS = "aifs"        # waiting out AIFS on an idle medium
    COUNT = "count"      # backoff countdown running
    READY = "ready"      # counter hit zero, queued for same-instant arbitration
    ACTIVE = "active"    # won access; exchange in progress


@dataclass
class NodeCtl:
    """Per-node state shared by that node's entities."""

    id: str
    index: int
    cap_mhz: int
    nav: dict[int, int] = field(default_factory=dict)
    exchange_busy: bool = False
    pending_ready: list = field(default_factory=list)
    launch_pending: bool = False

    def nav_until(self, channel: int) -> int:
        return self.nav.get(channel, 0)


class Entity:
    """One contention instance."""

    def __init__(self, node: NodeCtl, key: str, params: EdcaParams, rank: int,
                 channel: int):
        self.node = node
        self.key = key
        self.params = params
        self.rank = rank
        self.channel = channel
        self.queue: deque = deque()
        self.retry = 0
        self.backoff: Optional[int] = None
        self.fresh = False
        self.state = EntityState.IDLE
        self.anchor = 0
        self._aifs_ev: Optional[int] = None
        self._zero_ev: Optional[int] = None
        self._wake_ev: Optional[int] = None

    @property
    def cw(self) -> int:
        return contention_window(self.retry, self.params.cwmin, self.params.cwmax)

    def __repr__(self):  # debugging aid
        return f"<Entity {self.node.id}/{self.key} {self.state.value} bo={self.backoff}>"


class DcfCore:
    """Drives entities through defer/backoff and arbitrates same-instant wins.

    The owning MAC supplies:
      * ``gate_fn(node_id, t)`` -> GateDecision, for time-based exclusions
        (service periods, control-plane windows);
      * ``win_fn(entity, t)``, called when an entity wins channel access.
    """

    def __init__(self, sim: Simulator, medium: Medium, timing,
                 gate_fn: Callable[[str, int], GateDecision],
                 win_fn: Callable[[Entity, int], None]):
        self.sim = sim
        self.medium = medium
        self.timing = timing
        self.gate_fn = gate_fn
        self.win_fn = win_fn
        self.entities: list[Entity] = []
        self._by_node: dict[str, list[Entity]] = {}

    def add_entity(self, e: Entity) -> None:
        self.entities.append(e)
        self._by_node.setdefault(e.node.id, []).append(e)

    def node_entities(self, node_id: str) -> list[Entity]:
        return self._by_node.get(node_id, [])

    # -- timer helpers ------------------------------------------------------

    def _cancel(self, ev_id: Optional[int]) -> None:
        if ev_id is not None:
            self.sim.cancel(ev_id)

    # -- arrivals and wake-ups ----------------------------------------------

    def notify_arrival(self, e: Entity, t: int) -> None:
        """Queue content changed; start access if the entity was quiescent."""
        if e.state is EntityState.IDLE:
            e.fresh = e.backoff is None and e.retry == 0
            self.wake(e, t)

    def wake(self, e: Entity, t: int) -> None:
        """(Re)start the defer sequence if unblocked; park in WAIT otherwise."""
        if e.state not in (EntityState.IDLE, EntityState.WAIT):
            return
        if not e.queue:
            e.state = EntityState.IDLE
            return
        if e.node.exchange_busy:
            e.state = EntityState.WAIT
            e.fresh = False
            return
        gate = self.gate_fn(e.node.id, t)
        if gate.blocked_until is not None:
            self._park(e, gate.blocked_until, t)
            return
        if self.medium.sense(e.node.id, e.channel, t):
            e.state = EntityState.WAIT
            e.fresh = False
            return
        nav = e.node.nav_until(e.channel)
        if nav > t:
            self._park(e, nav, t)
            return
        e.state = EntityState.AIFS
        aifs = self.timing.aifs_us(e.params.aifs_slots)
        e._aifs_ev = self.sim.call_at(t + aifs, EventKind.TIMER,
                                      lambda: self._aifs_done(e))

    def _park(self, e: Entity, until: int, t: int) -> None:
        e.state = EntityState.WAIT
        e.fresh = False
        self._cancel(e._wake_ev)
        e._wake_ev = self.sim.call_at(max(until, t), EventKind.TIMER,
                                      lambda: self.wake(e, self.sim.now))

    def sleep_until(self, e: Entity, until: int) -> None:
        """Controller-requested defer (e.g. gap too small for any exchange)."""
        e.state = EntityState.WAIT
        e.fresh = False
        self._cancel(e._wake_ev)
        e._wake_ev = self.sim.call_at(until, EventKind.TIMER,
                                      lambda: self.wake(e, self.sim.now))

    def park_forever(self, e: Entity) -> None:
        e.state = EntityState.WAIT
        e.fresh = False

    # -- AIFS and countdown ---------------------------------------------------

    def _aifs_done(self, e: Entity) -> None:
        t = self.sim.now
        if e.state is not EntityState.AIFS:
            return
        # Re-validate: a frame delivered at the busy->idle edge may have set
        # NAV after this timer was scheduled, and a transmission may have
        # started at this very instant.
        if (e.node.exchange_busy
                or self.medium.sense(e.node.id, e.channel, t)
                or self.gate_fn(e.node.id, t).blocked_until is not None
                or e.node.nav_until(e.channel) > t):
            e.state = EntityState.WAIT
            e.fresh = False
            self.wake(e, t)
            return
        if e.backoff is None:
            if e.fresh and e.retry == 0:
                e.backoff = 0
            else:
                e.backoff = backoff_draw(e.retry, e.params.cwmin,
                                         e.params.cwmax,
                                         self.sim.stream(e.node.index))
                self.medium.trace.add(TraceRecord(
                    t=t, node=e.node.id, event=Ev.BACKOFF,
                    extra={"key": e.key, "ac": e.params.ac,
                           "draw": e.backoff, "cw": e.cw, "retry": e.retry},
                ))
        e.anchor = t
        if e.backoff == 0:
            self._ready(e, t)
        else:
            e.state = EntityState.COUNT
            e._zero_ev = self.sim.call_at(t + e.backoff * self.timing.slot_us,
                                          EventKind.SLOT,
                                          lambda: self._zero_fire(e))

    def _zero_fire(self, e: Entity) -> None:
        if e.state is not EntityState.COUNT:
            return
        e.backoff = 0
        self._ready(e, self.sim.now)

    def _ready(self, e: Entity, t: int) -> None:
        if e.backoff != 0:
            raise IllegalTransitionError(
                f"{e!r} ready with nonzero counter at t={t}")
        e.state = EntityState.READY
        node = e.node
        node.pending_ready.append(e)
        if not node.launch_pending:
            node.launch_pending = True
            self.sim.call_at(t, EventKind.TIMER, lambda: self._launch(node))

    def _launch(self, node: NodeCtl) -> None:
        t = self.sim.now
        node.launch_pending = False
        ready = [e for e in node.pending_ready if e.state is EntityState.READY]
        node.pending_ready.clear()
        if not ready:
            return
        ready.sort(key=lambda e: e.rank)
        winner: Optional[Entity] = ready[0]
        if node.exchange_busy or self.medium.transmitting(node.id):
            winner = None
        losers = [e for e in ready if e is not winner]
        for e in losers:
            # Internal collision: strict priority wins, the loser redraws.
            e.backoff = None
            e.state = EntityState.WAIT
            e.fresh = False
            self.wake(e, t)
        if winner is not None:
            winner.state = EntityState.ACTIVE
            winner.backoff = None
            self.win_fn(winner, t)

    # -- exchange completion --------------------------------------------------

    def finish(self, e: Entity, t: int) -> None:
        """Exchange over (any outcome): mandatory post-backoff before the next
        access, then re-enter contention if traffic remains."""
        e.state = EntityState.IDLE
        e.backoff = None
        e.fresh = False
        if e.queue:
            self.wake(e, t)

    def node_unlocked(self, node: NodeCtl, t: int) -> None:
        for e in self._by_node.get(node.id, []):
            if e.state is EntityState.WAIT and e.queue:
                self.wake(e, t)

    # -- medium transitions ---------------------------------------------------

    def on_channel_busy(self, node_id: str, channel: int, t: int) -> None:
        for e in self._by_node.get(node_id, []):
            if e.channel != channel:
                continue
            if e.state is EntityState.AIFS:
                if e._aifs_ev is not None:
                    # A timer firing exactly now still runs; it re-validates.
                    self._cancel(e._aifs_ev)
                    e._aifs_ev = None
                e.state = EntityState.WAIT
                e.fresh = False
            elif e.state is EntityState.COUNT:
                zero_at = e.anchor + e.backoff * self.timing.slot_us
                if zero_at == t:
                    # Counter reaches zero at this same boundary: the entity
                    # transmits into the collision, as real DCF would.
                    continue
                consumed = (t - e.anchor) // self.timing.slot_us
                e.backoff -= consumed
                self._cancel(e._zero_ev)
                e._zero_ev = None
                e.state = EntityState.WAIT

    def on_channel_idle(self, node_id: str, channel: int, t: int) -> None:
        for e in self._by_node.get(node_id, []):
            if e.channel != channel:
                continue
            if e.state is EntityState.WAIT and e.queue and not e.node.exchange_busy:
                self.wake(e, t)

    # -- gate-driven freezes (service periods, plane windows) ----------------

    def gate_freeze(self, node_id: str, t: int) -> None:
        """A time-based exclusion began: freeze countdowns like a busy medium."""
        for e in self._by_node.get(node_id, []):
            if e.state is EntityState.AIFS:
                self._cancel(e._aifs_ev)
                e._aifs_ev = None
                e.state = EntityState.WAIT
                e.fresh = False
            elif e.state is EntityState.COUNT:
                zero_at = e.anchor + e.backoff * self.timing.slot_us
                if zero_at == t:
                    continue
                consumed = (t - e.anchor) // self.timing.slot_us
                e.backoff -= consumed
                self._cancel(e._zero_ev)
                e._zero_ev = None
                e.state = EntityState.WAIT

    def gate_open(self, node_id: str, t: int) -> None:
        for e in self._by_node.get(node_id, []):
            if e.state is EntityState.WAIT and e.queue and not e.node.exchange_busy:
                self.wake(e, t)
