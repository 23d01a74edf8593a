"""Plane-separated MAC: contention-based control plane obtaining reservations,
schedule-based data plane transmitting collision-free inside granted slots.

The control plane keeps DCF contention but carries only reservation requests
and grants, confined to its own region (a dedicated control channel, or the
control window of each epoch). Data transmissions never carrier-sense or back
off: they run exactly inside reservations handed out first-fit from a single
conflict-free table. Acknowledgements protected by a reservation travel with
the data plane on the granted channels.

Requests are granted by the flow's receiver; all granters share one
reservation table (single logical scheduler), which is what makes the table
conflict-free across links that cannot hear each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .contention import DcfCore, Entity, NodeCtl
from .engine import EventKind, Simulator
from .frames import (
    BROADCAST,
    CONTROL_BYTES,
    Frame,
    FrameType,
    Mcs,
    Plane,
    airtime_us,
    control_frame,
)
from .mac_common import (
    AC,
    BEACON_KEY,
    INF,
    EdcaParams,
    GateDecision,
    MacTiming,
    Msdu,
)
from .medium import InFlight, Medium
from .trace import Ev, Outcome, TraceRecord


@dataclass(frozen=True)
class BoundaryMode:
    """Where the control plane lives: its own channel, or a window per epoch."""

    mode: str  # "channel_split" | "time_split"
    control_channel: int = 0
    epoch_us: int = 0
    cp_window_us: int = 0


def plane_region(t: int, channel: int, boundary: BoundaryMode) -> Plane:
    """Region ownership of an instant on a channel under the given boundary."""
    if boundary.mode == "channel_split":
        return Plane.CP if channel == boundary.control_channel else Plane.DP
    return Plane.CP if (t % boundary.epoch_us) < boundary.cp_window_us else Plane.DP


@dataclass
class Reservation:
    grant_id: int
    src: str
    dst: str
    channels: tuple[int, ...]
    t_start: int
    t_end: int
    consumed: bool = False

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start


class ReservationTable:
    """Single conflict-free schedule of data-plane slots."""

    def __init__(self, boundary: BoundaryMode, data_channels: list[int],
                 horizon_us: int):
        self.boundary = boundary
        self.data_channels = data_channels
        self.horizon_us = horizon_us
        self.reservations: list[Reservation] = []
        self._next_id = 0

    def blocks(self, width_mhz: int) -> list[tuple[int, ...]]:
        """Aligned contiguous runs of data channels for the given width."""
        k = width_mhz // 20
        out = []
        for i in range(0, len(self.data_channels) - k + 1, k):
            blk = tuple(self.data_channels[i:i + k])
            if all(blk[j + 1] == blk[j] + 1 for j in range(k - 1)):
                out.append(blk)
        return out

    def widest_admissible(self, cap_a_mhz: int, cap_b_mhz: int) -> int:
        cap = min(cap_a_mhz, cap_b_mhz)
        best = 20
        for w in (20, 40, 80, 160):
            if w <= cap and self.blocks(w):
                best = w
        return best

    def _align(self, t: int, duration: int) -> Optional[int]:
        """Earliest start >= t such that [start, start+duration) sits inside a
        data-plane window (time-split) or anywhere (channel-split)."""
        b = self.boundary
        if b.mode != "time_split":
            return t
        if duration > b.epoch_us - b.cp_window_us:
            return None
        while True:
            k = t // b.epoch_us
            dp_start = k * b.epoch_us + b.cp_window_us
            dp_end = (k + 1) * b.epoch_us
            if t < dp_start:
                t = dp_start
            if t + duration <= dp_end:
                return t
            t = (k + 1) * b.epoch_us + b.cp_window_us

    def first_fit(self, duration: int, width_mhz: int, not_before: int
                  ) -> Optional[tuple[tuple[int, ...], int]]:
        """Earliest conflict-free interval on any block of the given width."""
        best: Optional[tuple[tuple[int, ...], int]] = None
        horizon = not_before + self.horizon_us
        for blk in self.blocks(width_mhz):
            t = self._align(not_before, duration)
            while t is not None and t + duration <= horizon:
                clash = [r for r in self.reservations
                         if set(r.channels) & set(blk)
                         and r.t_start < t + duration and t < r.t_end]
                if not clash:
                    break
                t = self._align(max(r.t_end for r in clash), duration)
            if t is None or t + duration > horizon:
                continue
            if best is None or t < best[1]:
                best = (blk, t)
        return best

    def grant(self, src: str, dst: str, duration: int, width_mhz: int,
              not_before: int) -> Optional[Reservation]:
        fit = self.first_fit(duration, width_mhz, not_before)
        if fit is None:
            return None
        blk, t0 = fit
        self._next_id += 1
        res = Reservation(grant_id=self._next_id, src=src, dst=dst,
                          channels=blk, t_start=t0, t_end=t0 + duration)
        self.reservations.append(res)
        return res

    def prune(self, now: int) -> None:
        self.reservations = [r for r in self.reservations if r.t_end > now]


@dataclass
class FlowCtl:
    idx: int
    src: str
    dst: str
    ac: str
    mcs: Mcs
    nss: int
    entity: Entity
    width_mhz: int
    outstanding: Optional[Reservation] = None
    req_timeout_ev: Optional[int] = None
    ack_timeout_ev: Optional[int] = None


class SeparatedMac:
    """Controller for the plane-separated variant."""

    def __init__(self, sim: Simulator, medium: Medium, *, timing: MacTiming,
                 edca: dict[AC, EdcaParams], caps: dict[str, int],
                 boundary: BoundaryMode, retry_limit: int,
                 scheduler_horizon_us: int, stop_at: int):
        self.sim = sim
        self.medium = medium
        self.trace = medium.trace
        self.timing = timing
        self.edca = edca
        self.caps = caps
        self.boundary = boundary
        self.retry_limit = retry_limit
        self.stop_at = stop_at

        chans = medium.channels.channels
        if boundary.mode == "channel_split":
            self.cp_channel = boundary.control_channel
            data_channels = [c for c in chans if c != boundary.control_channel]
        else:
            self.cp_channel = medium.channels.primary
            data_channels = list(chans)
        self.table = ReservationTable(boundary, data_channels, scheduler_horizon_us)

        self.nodes: dict[str, NodeCtl] = {}
        self.flows: list[FlowCtl] = []
        self._flow_by_entity: dict[int, FlowCtl] = {}
        self._res_by_id: dict[int, Reservation] = {}
        self.core = DcfCore(sim, medium, timing,
                            gate_fn=self._gate, win_fn=self._win)
        for i, nid in enumerate(medium.topology.nodes):
            node = NodeCtl(id=nid, index=i, cap_mhz=caps.get(nid, 20))
            self.nodes[nid] = node
            medium.register_watcher(nid, self._make_watcher(nid))
        medium.reception_handler = self._on_reception
        medium.tx_end_handler = self._on_tx_end

        self.ack_airtime = airtime_us(CONTROL_BYTES[FrameType.ACK], Mcs.BASIC)
        self.req_airtime = airtime_us(CONTROL_BYTES[FrameType.RESV_REQ], Mcs.BASIC)
        self.grant_airtime = airtime_us(CONTROL_BYTES[FrameType.RESV_GRANT], Mcs.BASIC)
        if boundary.mode == "time_split":
            self._schedule_epoch_edges()

    # -- wiring ------------------------------------------------------------

    def _make_watcher(self, node_id: str):
        def watcher(channel: int, busy: bool, t: int):
            if busy:
                self.core.on_channel_busy(node_id, channel, t)
            else:
                self.core.on_channel_idle(node_id, channel, t)
        return watcher

    def add_flow(self, idx: int, src: str, dst: str, ac: str, mcs: Mcs,
                 nss: int) -> FlowCtl:
        params = self.edca[AC(ac)]
        entity = Entity(self.nodes[src], f"flow{idx}", params, AC(ac).rank,
                        self.cp_channel)
        self.core.add_entity(entity)
        width = self.table.widest_admissible(self.caps.get(src, 20),
                                             self.caps.get(dst, 20))
        flow = FlowCtl(idx=idx, src=src, dst=dst, ac=ac, mcs=mcs, nss=nss,
                       entity=entity, width_mhz=width)
        self.flows.append(flow)
        self._flow_by_entity[id(entity)] = flow
        return flow

    def enqueue(self, msdu: Msdu, t: int) -> None:
        flow = self.flows[msdu.flow]
        self.trace.add(TraceRecord(
            t=t, node=msdu.src, event=Ev.ARRIVAL,
            extra={"msdu": msdu.uid, "ac": msdu.ac, "bytes": msdu.size_bytes,
                   "dst": msdu.dst},
        ))
        flow.entity.queue.append(msdu)
        self.core.notify_arrival(flow.entity, t)

    def _schedule_epoch_edges(self) -> None:
        b = self.boundary
        k = 0
        while k * b.epoch_us < self.stop_at:
            start = k * b.epoch_us
            self.sim.call_at(start, EventKind.TIMER,
                             lambda: self._cp_window_open())
            self.sim.call_at(start + b.cp_window_us, EventKind.TIMER,
                             lambda: self._cp_window_close())
            k += 1

    def _cp_window_open(self) -> None:
        t = self.sim.now
        for nid in self.medium.topology.nodes:
            self.core.gate_open(nid, t)

    def _cp_window_close(self) -> None:
        t = self.sim.now
        for nid in self.medium.topology.nodes:
            self.core.gate_freeze(nid, t)

    def _gate(self, node_id: str, t: int) -> GateDecision:
        b = self.boundary
        if b.mode != "time_split":
            return GateDecision(blocked_until=None, gap_end=INF)
        k = t // b.epoch_us
        cp_end = k * b.epoch_us + b.cp_window_us
        if t < cp_end:
            return GateDecision(blocked_until=None, gap_end=cp_end)
        return GateDecision(blocked_until=(k + 1) * b.epoch_us, gap_end=cp_end)

    # -- control plane: request/grant ----------------------------------------

    def _win(self, entity: Entity, t: int) -> None:
        flow = self._flow_by_entity[id(entity)]
        node = entity.node
        if t >= self.stop_at or not entity.queue or flow.outstanding is not None:
            self.core.park_forever(entity)
            return
        msdu = entity.queue[0]
        s = self.timing.sifs_us
        gate = self._gate(node.id, t)
        if gate.blocked_until is not None:
            self.core.sleep_until(entity, gate.blocked_until)
            return
        handshake_needed = self.req_airtime + s + self.grant_airtime
        if gate.gap_end < INF and t + handshake_needed > gate.gap_end:
            # Request plus grant must finish inside the control window.
            self.core.sleep_until(entity, gate.gap_end)
            return
        duration = (airtime_us(msdu.size_bytes, msdu.mcs, flow.width_mhz, msdu.nss)
                    + s + self.ack_airtime)
        if self.medium.transmitting(node.id):
            self.core.finish(entity, t)
            return
        node.exchange_busy = True
        req = control_frame(FrameType.RESV_REQ, msdu.src, msdu.dst,
                            duration_us=s + self.grant_airtime, msdu=msdu.uid,
                            info={"duration": duration, "width": flow.width_mhz,
                                  "flow": flow.idx})
        self.medium.begin_transmission(node.id, req, (self.cp_channel,), t)
        self.trace.records[-1].extra["acc"] = 1

    def _on_tx_end(self, fl: InFlight, t: int) -> None:
        f = fl.frame
        if f.ftype is FrameType.RESV_REQ:
            flow = self.flows[f.info["flow"]]
            flow.req_timeout_ev = self.sim.call_at(
                t + self.timing.response_timeout_us(self.grant_airtime),
                EventKind.TIMER, lambda: self._req_timeout(flow))
        elif f.ftype is FrameType.DATA and f.grant is not None:
            flow = self._flow_for_grant(f.grant)
            if flow is not None:
                flow.ack_timeout_ev = self.sim.call_at(
                    t + self.timing.response_timeout_us(self.ack_airtime),
                    EventKind.TIMER, lambda: self._ack_timeout(flow))

    def _flow_for_grant(self, grant_id: int) -> Optional[FlowCtl]:
        for flow in self.flows:
            if flow.outstanding is not None and flow.outstanding.grant_id == grant_id:
                return flow
        return None

    def _req_timeout(self, flow: FlowCtl) -> None:
        t = self.sim.now
        flow.req_timeout_ev = None
        entity = flow.entity
        entity.retry += 1
        if entity.retry > self.retry_limit:
            msdu = entity.queue.popleft()
            self.trace.add(TraceRecord(
                t=t, node=flow.src, event=Ev.DROP,
                extra={"msdu": msdu.uid, "ac": msdu.ac, "retries": entity.retry},
            ))
            entity.retry = 0
            self._refill(entity, t)
        self._finish_flow(flow, t)

    def _on_reception(self, receiver: str, fl: InFlight, outcome: str, t: int) -> None:
        if outcome != Outcome.DELIVERED:
            return
        f = fl.frame
        node = self.nodes[receiver]
        if f.dst != receiver:
            self._update_nav(node, fl, t)
            return
        if f.ftype is FrameType.RESV_REQ:
            self.sim.call_at(t + self.timing.sifs_us, EventKind.TIMER,
                             lambda: self._send_grant(receiver, f))
        elif f.ftype is FrameType.RESV_GRANT:
            self._grant_received(receiver, f, t)
        elif f.ftype is FrameType.DATA and f.grant is not None:
            res = self._res_by_id.get(f.grant)
            ack_ch = (fl.channels[0],)
            ack = control_frame(FrameType.ACK, receiver, f.src, 0,
                                msdu=f.msdu, grant=f.grant, plane=Plane.DP)
            self.sim.call_at(t + self.timing.sifs_us, EventKind.TIMER,
                             lambda: self._send_on(receiver, ack, ack_ch))
        elif f.ftype is FrameType.ACK and f.grant is not None:
            self._data_acked(receiver, f, t)

    def _send_on(self, node_id: str, frame: Frame, channels: tuple[int, ...]) -> None:
        if not self.medium.transmitting(node_id):
            self.medium.begin_transmission(node_id, frame, channels, self.sim.now)

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

    # -- granting ------------------------------------------------------------

    def _send_grant(self, granter: str, req: Frame) -> None:
        t = self.sim.now
        if self.medium.transmitting(granter):
            return
        info = req.info
        not_before = t + self.grant_airtime + self.timing.sifs_us
        res = self.table.grant(req.src, req.dst, info["duration"],
                               info["width"], not_before)
        if res is None:
            return
        self._res_by_id[res.grant_id] = res
        self.trace.add(TraceRecord(
            t=t, node=granter, event=Ev.RESERVATION, ch=res.channels,
            extra={"grant": res.grant_id, "src": res.src, "dst": res.dst,
                   "start": res.t_start, "end": res.t_end},
        ))
        grant = control_frame(FrameType.RESV_GRANT, granter, req.src, 0,
                              grant=res.grant_id, msdu=req.msdu,
                              info={"flow": info["flow"], "res": res})
        self.medium.begin_transmission(granter, grant, (self.cp_channel,), t)
        self.sim.call_at(res.t_end, EventKind.TIMER,
                         lambda: self._expire(res))

    def _grant_received(self, receiver: str, f: Frame, t: int) -> None:
        flow = self.flows[f.info["flow"]]
        if flow.src != receiver or flow.outstanding is not None:
            return
        res: Reservation = f.info["res"]
        if flow.req_timeout_ev is not None:
            self.sim.cancel(flow.req_timeout_ev)
            flow.req_timeout_ev = None
        flow.entity.retry = 0
        flow.outstanding = res
        self.sim.call_at(res.t_start, EventKind.TIMER,
                         lambda: self._dp_start(flow, res))

    def _expire(self, res: Reservation) -> None:
        self.table.prune(self.sim.now)
        if res.consumed:
            return
        res.consumed = True
        self._release(res.dst, self.sim.now, res.duration, "expired", res.grant_id)

    # -- data plane ------------------------------------------------------------

    def _dp_start(self, flow: FlowCtl, res: Reservation) -> None:
        t = self.sim.now
        entity = flow.entity
        msdu = entity.queue[0] if entity.queue else None
        if (msdu is None or self.medium.transmitting(flow.src)
                or flow.outstanding is not res):
            res.consumed = True
            self._release(flow.src, t, res.duration, "missed", res.grant_id)
            self._finish_flow(flow, t)
            return
        data = Frame(ftype=FrameType.DATA, size_bytes=msdu.size_bytes,
                     src=flow.src, dst=flow.dst, mcs=msdu.mcs,
                     bandwidth_mhz=flow.width_mhz, nss=msdu.nss,
                     duration_field_us=self.timing.sifs_us + self.ack_airtime,
                     msdu=msdu.uid, grant=res.grant_id)
        self.medium.begin_transmission(flow.src, data, res.channels, t)

    def _data_acked(self, receiver: str, f: Frame, t: int) -> None:
        flow = self._flow_for_grant(f.grant)
        if flow is None or flow.src != receiver:
            return
        if flow.ack_timeout_ev is not None:
            self.sim.cancel(flow.ack_timeout_ev)
            flow.ack_timeout_ev = None
        res = flow.outstanding
        res.consumed = True
        if res.t_end > t:
            self._release(receiver, t, res.t_end - t, "unused_tail", res.grant_id)
        entity = flow.entity
        if entity.queue and entity.queue[0].uid == f.msdu:
            entity.queue.popleft()
        self._refill(entity, t)
        self._finish_flow(flow, t)

    def _ack_timeout(self, flow: FlowCtl) -> None:
        t = self.sim.now
        flow.ack_timeout_ev = None
        res = flow.outstanding
        if res is not None:
            res.consumed = True
        self._finish_flow(flow, t)

    def _finish_flow(self, flow: FlowCtl, t: int) -> None:
        flow.outstanding = None
        node = self.nodes[flow.src]
        node.exchange_busy = False
        self.core.finish(flow.entity, t)
        self.core.node_unlocked(node, t)

    def _release(self, node_id: str, t: int, amount: int, reason: str,
                 grant_id: Optional[int] = None) -> None:
        if amount <= 0:
            return
        extra = {"us": amount, "reason": reason}
        if grant_id is not None:
            extra["grant"] = grant_id
        self.trace.add(TraceRecord(t=t, node=node_id, event=Ev.RELEASE, extra=extra))

    # -- standing beacon reservations ---------------------------------------------

    def schedule_beacons(self, node_id: str, period_us: int, offset_us: int,
                         msdu_factory) -> None:
        """Beacons become periodic standing reservations decided at start-up."""
        beacon_at = airtime_us(100, Mcs.BASIC)
        g = offset_us
        while g < self.stop_at:
            res = self.table.grant(node_id, BROADCAST, beacon_at, 20, g)
            if res is None:
                g += period_us
                continue
            self._res_by_id[res.grant_id] = res
            msdu = msdu_factory(g)
            self.sim.call_at(g, EventKind.ARRIVAL,
                             lambda r=res, m=msdu: self._beacon_arrival(node_id, r, m))
            self.sim.call_at(res.t_start, EventKind.TIMER,
                             lambda r=res, m=msdu: self._beacon_tx(node_id, r, m))
            g += period_us

    def _beacon_arrival(self, node_id: str, res: Reservation, msdu: Msdu) -> None:
        t = self.sim.now
        self.trace.add(TraceRecord(
            t=t, node=node_id, event=Ev.ARRIVAL,
            extra={"msdu": msdu.uid, "ac": BEACON_KEY, "bytes": msdu.size_bytes,
                   "dst": BROADCAST},
        ))
        self.trace.add(TraceRecord(
            t=t, node=node_id, event=Ev.RESERVATION, ch=res.channels,
            extra={"grant": res.grant_id, "src": res.src, "dst": res.dst,
                   "start": res.t_start, "end": res.t_end},
        ))

    def _beacon_tx(self, node_id: str, res: Reservation, msdu: Msdu) -> None:
        t = self.sim.now
        res.consumed = True
        if self.medium.transmitting(node_id):
            self._release(node_id, t, res.duration, "missed", res.grant_id)
            return
        frame = Frame(ftype=FrameType.BEACON, size_bytes=msdu.size_bytes,
                      src=node_id, dst=BROADCAST, mcs=Mcs.BASIC,
                      bandwidth_mhz=20, duration_field_us=0,
                      msdu=msdu.uid, grant=res.grant_id)
        self.medium.begin_transmission(node_id, frame, res.channels, t)

    # -- saturated refill hook ------------------------------------------------------

    refill_hook = None

    def _refill(self, entity: Entity, t: int) -> None:
        if self.refill_hook is not None:
            self.refill_hook(entity, t)
