"""The inseparate hybrid MAC: EDCA contention with an RTS/CTS threshold,
NAV discipline, binary exponential backoff, per-TXOP static channel bonding
and service-period gating.

Control and data frames share the primary channel: every exchange is won by
contention there, control frames ride the basic rate at 20 MHz, and the data
frame follows one SIFS after its clear-to-send (or starts the exchange when
below the handshake threshold).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .contention import DcfCore, Entity, NodeCtl
from .engine import EventKind, Simulator
from .errors import IllegalTransitionError
from .frames import (
    BROADCAST,
    CONTROL_BYTES,
    Frame,
    FrameType,
    Mcs,
    airtime_us,
    control_frame,
    nav_duration_us,
)
from .mac_common import (
    AC,
    BEACON_KEY,
    INF,
    EdcaParams,
    GateDecision,
    Handshake,
    MacTiming,
    Msdu,
    SpOccurrence,
    SpPolicy,
    bond_width,
    rtwt_gate,
    select_handshake,
)
from .medium import InFlight, Medium
from .trace import Ev, Outcome, TraceRecord


@dataclass
class Exchange:
    """One TXOP: a first (possibly RTS-protected) exchange plus SIFS bursts."""

    entity: Entity
    msdu: Msdu
    handshake: Handshake
    width_mhz: int
    data_channels: tuple[int, ...]
    txop_start: int
    budget_end: int
    phase: str = "start"
    timeout_ev: Optional[int] = None


class BaselineMac:
    """Event-driven controller for every node in a baseline-variant run."""

    def __init__(self, sim: Simulator, medium: Medium, *, timing: MacTiming,
                 edca: dict[AC, EdcaParams], caps: dict[str, int],
                 rts_threshold_bytes: int, retry_limit: int,
                 sp_occurrences: list[SpOccurrence], sp_policy: SpPolicy,
                 stop_at: int):
        self.sim = sim
        self.medium = medium
        self.trace = medium.trace
        self.timing = timing
        self.edca = edca
        self.caps = caps
        self.rts_threshold = rts_threshold_bytes
        self.retry_limit = retry_limit
        self.sp_occurrences = sp_occurrences
        self.sp_policy = sp_policy
        self.stop_at = stop_at
        self.primary = medium.channels.primary

        self.nodes: dict[str, NodeCtl] = {}
        self.exchanges: dict[str, Exchange] = {}
        self.core = DcfCore(sim, medium, timing,
                            gate_fn=self._gate, win_fn=self._win)
        for i, nid in enumerate(medium.topology.nodes):
            node = NodeCtl(id=nid, index=i, cap_mhz=caps.get(nid, 20))
            self.nodes[nid] = node
            medium.register_watcher(nid, self._make_watcher(nid))
        medium.reception_handler = self._on_reception
        medium.tx_end_handler = self._on_tx_end

        self.cts_airtime = airtime_us(CONTROL_BYTES[FrameType.CTS], Mcs.BASIC)
        self.ack_airtime = airtime_us(CONTROL_BYTES[FrameType.ACK], Mcs.BASIC)
        self.rts_airtime = airtime_us(CONTROL_BYTES[FrameType.RTS], Mcs.BASIC)
        self._schedule_sp_edges()

    # -- wiring ---------------------------------------------------------------

    def _make_watcher(self, node_id: str):
        def watcher(channel: int, busy: bool, t: int):
            if busy:
                self.core.on_channel_busy(node_id, channel, t)
            else:
                self.core.on_channel_idle(node_id, channel, t)
        return watcher

    def add_entity(self, node_id: str, key: str, params: EdcaParams, rank: int) -> Entity:
        e = Entity(self.nodes[node_id], key, params, rank, self.primary)
        self.core.add_entity(e)
        return e

    def entity_for(self, node_id: str, ac_key: str) -> Entity:
        for e in self.core.node_entities(node_id):
            if e.key == ac_key:
                return e
        if ac_key == BEACON_KEY:
            return self.add_entity(node_id, BEACON_KEY, self.edca[AC.VO], rank=0)
        ac = AC(ac_key)
        return self.add_entity(node_id, ac_key, self.edca[ac], rank=ac.rank)

    def enqueue(self, msdu: Msdu, t: int) -> None:
        self.trace.add(TraceRecord(
            t=t, node=msdu.src, event=Ev.ARRIVAL,
            extra={"msdu": msdu.uid, "ac": msdu.ac, "bytes": msdu.size_bytes,
                   "dst": msdu.dst},
        ))
        e = self.entity_for(msdu.src, msdu.ac)
        e.queue.append(msdu)
        self.core.notify_arrival(e, t)

    def _schedule_sp_edges(self) -> None:
        for occ in self.sp_occurrences:
            self.sim.call_at(occ.start, EventKind.TIMER,
                             lambda o=occ: self._sp_start(o))
            self.sim.call_at(occ.end, EventKind.TIMER,
                             lambda o=occ: self._sp_end(o))

    def _sp_start(self, occ: SpOccurrence) -> None:
        t = self.sim.now
        for nid in self.medium.topology.nodes:
            if nid not in (occ.owner_src, occ.owner_dst):
                self.core.gate_freeze(nid, t)

    def _sp_end(self, occ: SpOccurrence) -> None:
        t = self.sim.now
        for nid in self.medium.topology.nodes:
            self.core.gate_open(nid, t)

    def _gate(self, node_id: str, t: int) -> GateDecision:
        return rtwt_gate(t, self.sp_occurrences, node_id)

    # -- winning access ---------------------------------------------------------

    def _win(self, entity: Entity, t: int) -> None:
        node = entity.node
        if node.exchange_busy:
            raise IllegalTransitionError(
                f"{node.id} won access mid-exchange at t={t}")
        if t >= self.stop_at or not entity.queue:
            self.core.park_forever(entity)
            return
        msdu = entity.queue[0]
        is_bcast = msdu.dst == BROADCAST
        handshake = (Handshake.DIRECT if is_bcast
                     else select_handshake(msdu.size_bytes, self.rts_threshold))
        if is_bcast:
            width = 20
        else:
            width = bond_width(self.medium.channels,
                               self._bond_idle_map(node.id, t),
                               self.caps.get(msdu.src, 20),
                               self.caps.get(msdu.dst, 20))
        data_at = airtime_us(msdu.size_bytes, msdu.mcs, width, msdu.nss)
        first_needed = self._exchange_airtime(handshake, data_at, is_bcast)
        txop_limit = entity.params.txop_limit_us
        nominal_end = t + max(txop_limit, first_needed)

        gate = self._gate(node.id, t)
        budget_end = nominal_end
        if gate.blocked_until is not None:
            # Period started at this exact instant; come back when it ends.
            self.core.sleep_until(entity, gate.blocked_until)
            return
        if gate.gap_end < INF and nominal_end > gate.gap_end:
            if t + first_needed > gate.gap_end:
                self._release(node.id, t, gate.gap_end - t, "gate_defer")
                self.core.sleep_until(entity, gate.gap_end)
                return
            if self.sp_policy is SpPolicy.DEFER:
                self._release(node.id, t, gate.gap_end - t, "gate_defer")
                self.core.sleep_until(entity, gate.gap_end)
                return
            self._release(node.id, t, nominal_end - gate.gap_end, "gate_clip")
            budget_end = gate.gap_end

        node.exchange_busy = True
        ex = Exchange(entity=entity, msdu=msdu, handshake=handshake,
                      width_mhz=width, data_channels=self.medium.channels.block(width),
                      txop_start=t, budget_end=budget_end)
        self.exchanges[node.id] = ex
        if handshake is Handshake.RTS_CTS:
            dur = nav_duration_us(
                [self.cts_airtime, data_at, self.ack_airtime], self.timing.sifs_us)
            rts = control_frame(FrameType.RTS, msdu.src, msdu.dst, dur, msdu=msdu.uid)
            ex.phase = "await_cts"
            self._transmit(node.id, rts, (self.primary,), t, access=True)
        else:
            self._send_data(node.id, ex, t, access=True)

    def _bond_idle_map(self, node_id: str, t: int) -> dict[int, bool]:
        idle = self.medium.idle_map(node_id, t)
        node = self.nodes[node_id]
        for c in list(idle):
            if node.nav_until(c) > t:
                idle[c] = False
        return idle

    def _exchange_airtime(self, handshake: Handshake, data_at: int,
                          is_bcast: bool) -> int:
        s = self.timing.sifs_us
        if is_bcast:
            return data_at
        if handshake is Handshake.RTS_CTS:
            return (self.rts_airtime + s + self.cts_airtime + s
                    + data_at + s + self.ack_airtime)
        return data_at + s + self.ack_airtime

    # -- frame plumbing -----------------------------------------------------------

    def _transmit(self, node_id: str, frame: Frame, channels: tuple[int, ...],
                  t: int, access: bool = False) -> Optional[InFlight]:
        if self.medium.transmitting(node_id):
            return None
        fl = self.medium.begin_transmission(node_id, frame, channels, t)
        if access:
            self.trace.records[-1].extra["acc"] = 1
        return fl

    def _send_data(self, node_id: str, ex: Exchange, t: int,
                   access: bool = False) -> None:
        msdu = ex.msdu
        is_bcast = msdu.dst == BROADCAST
        ftype = FrameType.BEACON if msdu.ac == BEACON_KEY else FrameType.DATA
        dur = 0 if is_bcast else nav_duration_us([self.ack_airtime], self.timing.sifs_us)
        mcs = Mcs.BASIC if ftype is FrameType.BEACON else msdu.mcs
        width = 20 if ftype is FrameType.BEACON else ex.width_mhz
        channels = (self.primary,) if ftype is FrameType.BEACON else ex.data_channels
        frame = Frame(ftype=ftype, size_bytes=msdu.size_bytes, src=msdu.src,
                      dst=msdu.dst, mcs=mcs, bandwidth_mhz=width, nss=msdu.nss,
                      duration_field_us=dur, msdu=msdu.uid)
        ex.phase = "bcast" if is_bcast else "await_ack"
        if self._transmit(node_id, frame, channels, t, access=access) is None:
            self._exchange_fail(node_id, t)

    def _on_tx_end(self, fl: InFlight, t: int) -> None:
        ex = self.exchanges.get(fl.sender)
        if ex is None:
            return
        f = fl.frame
        if ex.phase == "await_cts" and f.ftype is FrameType.RTS:
            ex.timeout_ev = self.sim.call_at(
                t + self.timing.response_timeout_us(self.cts_airtime),
                EventKind.TIMER, lambda: self._response_timeout(fl.sender, "cts"))
        elif ex.phase == "await_ack" and f.ftype is FrameType.DATA:
            ex.timeout_ev = self.sim.call_at(
                t + self.timing.response_timeout_us(self.ack_airtime),
                EventKind.TIMER, lambda: self._response_timeout(fl.sender, "ack"))
        elif ex.phase == "bcast" and f.ftype in (FrameType.BEACON, FrameType.DATA):
            self._exchange_success(fl.sender, t)

    def _response_timeout(self, node_id: str, which: str) -> None:
        ex = self.exchanges.get(node_id)
        if ex is None:
            return
        ex.timeout_ev = None
        self._exchange_fail(node_id, self.sim.now)

    # -- reception ---------------------------------------------------------------

    def _on_reception(self, receiver: str, fl: InFlight, outcome: str, t: int) -> None:
        if outcome != Outcome.DELIVERED:
            return
        f = fl.frame
        node = self.nodes[receiver]
        if f.dst != receiver:
            self._update_nav(node, fl, t)
            return
        if f.ftype is FrameType.RTS:
            if node.exchange_busy or node.nav_until(self.primary) > t:
                return
            dur = max(f.duration_field_us - self.timing.sifs_us - self.cts_airtime, 0)
            cts = control_frame(FrameType.CTS, receiver, f.src, dur)
            self.sim.call_at(t + self.timing.sifs_us, EventKind.TIMER,
                             lambda: self._transmit(receiver, cts, (self.primary,),
                                                    self.sim.now))
        elif f.ftype is FrameType.DATA:
            ack = control_frame(FrameType.ACK, receiver, f.src, 0, msdu=f.msdu)
            self.sim.call_at(t + self.timing.sifs_us, EventKind.TIMER,
                             lambda: self._transmit(receiver, ack, (self.primary,),
                                                    self.sim.now))
        elif f.ftype is FrameType.CTS:
            ex = self.exchanges.get(receiver)
            if ex is not None and ex.phase == "await_cts" and f.src == ex.msdu.dst:
                if ex.timeout_ev is not None:
                    self.sim.cancel(ex.timeout_ev)
                    ex.timeout_ev = None
                self.sim.call_at(t + self.timing.sifs_us, EventKind.TIMER,
                                 lambda: self._send_data(receiver,
                                                         self.exchanges[receiver],
                                                         self.sim.now)
                                 if receiver in self.exchanges else None)
        elif f.ftype is FrameType.ACK:
            ex = self.exchanges.get(receiver)
            if ex is not None and ex.phase == "await_ack" and f.src == ex.msdu.dst:
                if ex.timeout_ev is not None:
                    self.sim.cancel(ex.timeout_ev)
                    ex.timeout_ev = None
                self._exchange_success(receiver, t)

    def _update_nav(self, node: NodeCtl, fl: InFlight, t: int) -> None:
        if fl.frame.duration_field_us <= 0:
            return
        until = t + fl.frame.duration_field_us
        changed = False
        for c in fl.channels:
            if until > node.nav_until(c):
                node.nav[c] = until
                changed = True
        if changed:
            self.trace.add(TraceRecord(
                t=t, node=node.id, event=Ev.NAV, frame=fl.frame.id,
                extra={"nav_until": until, "ch": list(fl.channels)},
            ))

    # -- exchange outcomes ----------------------------------------------------------

    def _exchange_success(self, node_id: str, t: int) -> None:
        ex = self.exchanges.get(node_id)
        if ex is None:
            return
        entity = ex.entity
        if entity.queue and entity.queue[0] is ex.msdu:
            entity.queue.popleft()
        entity.retry = 0
        self._refill(entity, t)
        nxt = entity.queue[0] if entity.queue else None
        if nxt is not None and nxt.dst != BROADCAST and t < self.stop_at:
            data_at = airtime_us(nxt.size_bytes, nxt.mcs, ex.width_mhz, nxt.nss)
            s = self.timing.sifs_us
            need = s + data_at + s + self.ack_airtime
            if t + need <= ex.budget_end:
                ex.msdu = nxt
                self.sim.call_at(t + s, EventKind.TIMER,
                                 lambda: self._send_data(node_id,
                                                         self.exchanges[node_id],
                                                         self.sim.now)
                                 if node_id in self.exchanges else None)
                return
        self._end_exchange(node_id, t)

    def _exchange_fail(self, node_id: str, t: int) -> None:
        ex = self.exchanges.get(node_id)
        if ex is None:
            return
        entity = ex.entity
        entity.retry += 1
        if entity.retry > self.retry_limit:
            msdu = ex.msdu
            if entity.queue and entity.queue[0] is msdu:
                entity.queue.popleft()
            self.trace.add(TraceRecord(
                t=t, node=node_id, event=Ev.DROP,
                extra={"msdu": msdu.uid, "ac": msdu.ac, "retries": entity.retry},
            ))
            entity.retry = 0
            self._refill(entity, t)
        self._end_exchange(node_id, t)

    def _end_exchange(self, node_id: str, t: int) -> None:
        ex = self.exchanges.pop(node_id, None)
        if ex is None:
            return
        node = self.nodes[node_id]
        node.exchange_busy = False
        if ex.timeout_ev is not None:
            self.sim.cancel(ex.timeout_ev)
        self.core.finish(ex.entity, t)
        self.core.node_unlocked(node, t)

    def _release(self, node_id: str, t: int, amount: int, reason: str) -> None:
        if amount <= 0:
            return
        self.trace.add(TraceRecord(
            t=t, node=node_id, event=Ev.RELEASE,
            extra={"us": amount, "reason": reason},
        ))

    # -- saturated refill hook (set by the runner) -----------------------------------

    refill_hook = None

    def _refill(self, entity: Entity, t: int) -> None:
        if self.refill_hook is not None:
            self.refill_hook(entity, t)
