"""Build a simulation from a scenario config, run it, aggregate, sweep."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

from .config import NodeCfg, ScenarioConfig
from .contention import Entity
from .engine import EventKind, Simulator
from .errors import UnknownAxisError
from .frames import BROADCAST, Frame, FrameType, Mcs
from .mac_baseline import BaselineMac
from .mac_common import (
    AC,
    BEACON_KEY,
    EdcaParams,
    MacTiming,
    Msdu,
    ServicePeriod,
    SpPolicy,
    expand_service_periods,
)
from .mac_separated import BoundaryMode, SeparatedMac
from .medium import ChannelSet, Medium, Topology
from .metrics import Summary, summarize
from .trace import Trace

SATURATED_QUEUE_DEPTH = 2
ARRIVAL_STREAM_BASE = 1_000_000


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    trace: Trace
    summary: Summary

    @property
    def name(self) -> str:
        return self.config.name


def _build_topology(cfg: ScenarioConfig) -> Topology:
    t = cfg.topology
    if t.mesh:
        return Topology.full_mesh(t.nodes)
    return Topology(t.nodes, [tuple(l) for l in t.links])


def _edca_table(cfg: ScenarioConfig) -> dict[AC, EdcaParams]:
    out = {}
    for ac in AC:
        e = cfg.params.edca[ac.value]
        out[ac] = EdcaParams(ac.value, e.aifs_slots, e.cwmin, e.cwmax,
                             e.txop_limit_us)
    return out


class _MsduFactory:
    def __init__(self):
        self._next = 0

    def make(self, flow_idx, flow_cfg, t) -> Msdu:
        self._next += 1
        return Msdu(uid=self._next, src=flow_cfg.src, dst=flow_cfg.dst,
                    ac=flow_cfg.ac, size_bytes=flow_cfg.payload_bytes,
                    mcs=Mcs(flow_cfg.mcs), nss=flow_cfg.nss, arrival_us=t,
                    flow=flow_idx)

    def beacon(self, node, t) -> Msdu:
        self._next += 1
        return Msdu(uid=self._next, src=node, dst=BROADCAST, ac=BEACON_KEY,
                    size_bytes=100, mcs=Mcs.BASIC, nss=1, arrival_us=t)


def build_and_run(cfg: ScenarioConfig, seed_override: Optional[int] = None) -> RunResult:
    """Run one simulation to completion; deterministic in (config, seed)."""
    seed = cfg.sim.seed if seed_override is None else seed_override
    duration = cfg.sim.duration_us
    sim = Simulator(seed=seed)
    trace = Trace()
    topology = _build_topology(cfg)
    channels = ChannelSet(cfg.channels.count, cfg.channels.primary)
    medium = Medium(sim, topology, channels, trace)
    timing = MacTiming(slot_us=cfg.params.slot_us, sifs_us=cfg.params.sifs_us)
    edca = _edca_table(cfg)
    caps = {n: (cfg.nodes[n].cap_mhz if n in cfg.nodes else 20)
            for n in cfg.topology.nodes}
    msdus = _MsduFactory()

    variant = cfg.mac.variant
    if variant == "baseline":
        occurrences = expand_service_periods(
            [ServicePeriod(sp.owner_src, sp.owner_dst, sp.start_us,
                           sp.duration_us, sp.period_us) for sp in cfg.sp_table],
            duration,
        )
        mac = BaselineMac(
            sim, medium, timing=timing, edca=edca, caps=caps,
            rts_threshold_bytes=cfg.params.rts_threshold_bytes,
            retry_limit=cfg.params.retry_limit,
            sp_occurrences=occurrences,
            sp_policy=SpPolicy(cfg.params.sp_policy),
            stop_at=duration,
        )
    else:
        b = cfg.mac.boundary
        boundary = BoundaryMode(mode=b.mode, control_channel=b.control_channel,
                                epoch_us=b.epoch_us, cp_window_us=b.cp_window_us)
        horizon = cfg.params.scheduler_horizon_us
        if horizon is None:
            horizon = 4 * b.epoch_us if b.mode == "time_split" else 50_000
        mac = SeparatedMac(
            sim, medium, timing=timing, edca=edca, caps=caps,
            boundary=boundary, retry_limit=cfg.params.retry_limit,
            scheduler_horizon_us=horizon, stop_at=duration,
        )
        for i, f in enumerate(cfg.flows):
            mac.add_flow(i, f.src, f.dst, f.ac, Mcs(f.mcs), f.nss)

    _install_arrivals(cfg, sim, mac, msdus, duration)
    if cfg.beacons is not None:
        _install_beacons(cfg, sim, mac, msdus, duration, variant)
    for itf in cfg.interferers:
        _install_interferer(sim, medium, itf, duration)

    sim.run_until(duration)
    # Drain transmissions that straddle the horizon so the trace is complete;
    # contention controllers stop launching new exchanges past stop_at.
    guard = 0
    while medium._active and guard < 100_000:
        nxt = sim.peek_time()
        if nxt is None:
            break
        sim.run_until(nxt)
        guard += 1
    trace.check_complete()
    summary = summarize(trace, duration_us=duration,
                        n_channels=cfg.channels.count,
                        primary=cfg.channels.primary)
    return RunResult(config=cfg, seed=seed, trace=trace, summary=summary)


def _install_arrivals(cfg, sim, mac, msdus, duration) -> None:
    saturated: list[tuple[int, object]] = []
    for i, f in enumerate(cfg.flows):
        kind = f.arrival.kind
        if kind == "saturated":
            saturated.append((i, f))
        elif kind == "at":
            for t in sorted(f.arrival.times_us):
                if t < duration:
                    sim.call_at(t, EventKind.ARRIVAL,
                                lambda i=i, f=f, t=t: mac.enqueue(
                                    msdus.make(i, f, t), t))
        elif kind == "poisson":
            # Materialized up-front from a per-flow stream, so arrival times
            # do not depend on how the MAC interleaves its own draws.
            node_idx = cfg.topology.nodes.index(f.src)
            stream = sim.stream(ARRIVAL_STREAM_BASE + node_idx * 64 + i)
            t = 0.0
            rate_per_us = f.arrival.rate_per_s / 1e6
            while True:
                t += stream.expovariate(rate_per_us)
                ti = int(t)
                if ti >= duration:
                    break
                sim.call_at(ti, EventKind.ARRIVAL,
                            lambda i=i, f=f, ti=ti: mac.enqueue(
                                msdus.make(i, f, ti), ti))

    if saturated:
        def refill(entity: Entity, t: int, _sat=saturated):
            for i, f in _sat:
                if f.src != entity.node.id:
                    continue
                if _entity_matches(entity, i, f):
                    have = sum(1 for m in entity.queue if m.flow == i)
                    for _ in range(SATURATED_QUEUE_DEPTH - have):
                        mac.enqueue(msdus.make(i, f, t), t)

        mac.refill_hook = refill
        for i, f in saturated:
            for _ in range(SATURATED_QUEUE_DEPTH):
                sim.call_at(0, EventKind.ARRIVAL,
                            lambda i=i, f=f: mac.enqueue(msdus.make(i, f, 0), 0))


def _entity_matches(entity: Entity, flow_idx: int, flow_cfg) -> bool:
    if entity.key == f"flow{flow_idx}":
        return True
    return entity.key == flow_cfg.ac


def _install_beacons(cfg, sim, mac, msdus, duration, variant) -> None:
    b = cfg.beacons
    if variant == "separated":
        mac.schedule_beacons(b.node, b.period_us, b.offset_us,
                             lambda g: msdus.beacon(b.node, g))
        return
    t = b.offset_us
    while t < duration:
        sim.call_at(t, EventKind.ARRIVAL,
                    lambda t=t: mac.enqueue(msdus.beacon(b.node, t), t))
        t += b.period_us


def _install_interferer(sim, medium, itf, duration) -> None:
    """Fixed-schedule occupant of one channel, outside any MAC."""
    payload = max((itf.busy_us - 20) * 6 // 8, 1)

    def burst(t: int):
        if t >= duration or medium.transmitting(itf.node):
            return
        frame = Frame(ftype=FrameType.DATA, size_bytes=payload, src=itf.node,
                      dst=BROADCAST, mcs=Mcs.BASIC, bandwidth_mhz=20)
        medium.begin_transmission(itf.node, frame, (itf.channel,), t)
        sim.call_at(t + itf.period_us, EventKind.TIMER,
                    lambda: burst(sim.now))

    sim.call_at(0, EventKind.TIMER, lambda: burst(0))


# -- sweeps ---------------------------------------------------------------

SWEEP_AXES = ("mcs", "bandwidth", "sp_duty", "n_stations", "rts_threshold")


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """New config with one named parameter swept to ``value``."""
    out = cfg.model_copy(deep=True)
    if axis == "mcs":
        for f in out.flows:
            f.mcs = str(value)
    elif axis == "bandwidth":
        width = int(value)
        for n in out.topology.nodes:
            out.nodes[n] = NodeCfg(cap_mhz=width)
    elif axis == "sp_duty":
        duty = float(value)
        for sp in out.sp_table:
            sp.duration_us = int(duty * sp.period_us)
    elif axis == "n_stations":
        n = int(value)
        if not out.flows:
            raise UnknownAxisError("n_stations needs a template flow")
        tpl = out.flows[0]
        center = tpl.dst
        cap = out.nodes[tpl.src].cap_mhz if tpl.src in out.nodes else 20
        stations = [f"STA{i}" for i in range(1, n + 1)]
        out.topology.nodes = [center] + stations
        out.topology.mesh = True
        out.topology.links = []
        out.nodes = {m: NodeCfg(cap_mhz=cap) for m in [center] + stations}
        out.flows = [tpl.model_copy(update={"src": s}) for s in stations]
        out.sp_table = []
    elif axis == "rts_threshold":
        out.params.rts_threshold_bytes = int(value)
    else:
        raise UnknownAxisError(f"unknown axis {axis!r}; known: {SWEEP_AXES}")
    out.name = f"{cfg.name}[{axis}={value}]"
    return ScenarioConfig.model_validate(out.model_dump())


def sweep(cfg: ScenarioConfig, axis: str, values: list, seeds: list[int]
          ) -> tuple[str, list[dict]]:
    """One summary row per (value, seed); returns (csv_text, rows)."""
    rows = []
    header: list[str] = []
    lines = []
    for value in values:
        point_cfg = apply_axis(cfg, axis, value)
        for seed in seeds:
            result = build_and_run(point_cfg, seed_override=seed)
            s = result.summary
            if not header:
                header = s.csv_header() + [axis, "seed"]
                lines.append(",".join(header))
            row_vals = s.csv_row() + [value, seed]
            lines.append(",".join(
                repr(v) if isinstance(v, float) else str(v) for v in row_vals))
            row = dict(zip(header, row_vals))
            rows.append(row)
    return "\n".join(lines) + "\n", rows


def write_outputs(result: RunResult, out_dir: str) -> tuple[str, str]:
    """Emit the trace and summary files for one run; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    base = f"{result.name}_seed{result.seed}"
    trace_path = os.path.join(out_dir, f"{base}.trace.jsonl")
    summary_path = os.path.join(out_dir, f"{base}.summary.csv")
    result.trace.write_jsonl(trace_path)
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(result.summary.to_csv())
    return trace_path, summary_path
