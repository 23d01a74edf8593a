"""Trace validator: replays a finished trace against the protocol invariants.

Checks are reconstructive, not instrumented: NAV state, collision symmetry
and gating are all re-derived from the records alone plus the scenario
config, so a violation means the simulator (not the bookkeeping) broke a
rule. Returns human-readable violation strings; an empty list is a pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ScenarioConfig
from .frames import Plane
from .mac_common import ServicePeriod, contention_window, expand_service_periods
from .mac_separated import BoundaryMode, plane_region
from .medium import Topology
from .trace import Ev, Outcome, TraceRecord


@dataclass
class _Tx:
    frame: int
    node: str
    t_start: int
    t_end: int
    channels: tuple[int, ...]
    ftype: str
    plane: str
    access: bool
    grant: int | None


def _collect_tx(records: list[TraceRecord]) -> list[_Tx]:
    started: dict[int, _Tx] = {}
    for r in records:
        if r.event == Ev.TX_START:
            started[r.frame] = _Tx(
                frame=r.frame, node=r.node, t_start=r.t, t_end=-1,
                channels=r.ch or (), ftype=r.ftype or "", plane=r.plane or "",
                access=bool(r.extra.get("acc")), grant=r.extra.get("grant"),
            )
        elif r.event == Ev.TX_END and r.frame in started:
            started[r.frame].t_end = r.t
    return list(started.values())


def _topology(cfg: ScenarioConfig) -> Topology:
    if cfg.topology.mesh:
        return Topology.full_mesh(cfg.topology.nodes)
    return Topology(cfg.topology.nodes, [tuple(l) for l in cfg.topology.links])


def check_nav_discipline(records: list[TraceRecord]) -> list[str]:
    """No contention-launched transmission may start under an active NAV on
    any channel it occupies. NAV is re-derived from delivered third-party
    frames exactly as the MAC applies it (max rule, per channel)."""
    out = []
    nav: dict[tuple[str, int], int] = {}
    tx_meta: dict[int, TraceRecord] = {}
    for r in records:
        if r.event == Ev.TX_START:
            tx_meta[r.frame] = r
            if r.extra.get("acc"):
                for c in r.ch or ():
                    until = nav.get((r.node, c), 0)
                    if until > r.t:
                        out.append(
                            f"nav: {r.node} started frame {r.frame} at t={r.t} "
                            f"with NAV on ch{c} until {until}"
                        )
        elif r.event == Ev.RX and r.outcome == Outcome.DELIVERED:
            dst = r.extra.get("dst", "")
            dur = r.extra.get("dur", 0)
            if dst != r.node and dur > 0:
                for c in r.ch or ():
                    key = (r.node, c)
                    nav[key] = max(nav.get(key, 0), r.t + dur)
    return out


def check_backoff_bounds(records: list[TraceRecord], cfg: ScenarioConfig) -> list[str]:
    out = []
    for r in records:
        if r.event != Ev.BACKOFF:
            continue
        ac = r.extra.get("ac")
        e = cfg.params.edca.get(ac)
        if e is None:
            continue
        cw = contention_window(r.extra.get("retry", 0), e.cwmin, e.cwmax)
        if r.extra.get("cw") != cw:
            out.append(f"backoff: {r.node} cw={r.extra.get('cw')} != {cw} "
                       f"for retry={r.extra.get('retry')}")
        if not 0 <= r.extra.get("draw", 0) <= cw:
            out.append(f"backoff: {r.node} draw={r.extra.get('draw')} "
                       f"outside [0,{cw}]")
    return out


def check_collision_symmetry(records: list[TraceRecord], cfg: ScenarioConfig) -> list[str]:
    """If two heard frames overlap on a shared channel at a receiver, both
    must have resolved Collided there."""
    out = []
    topo = _topology(cfg)
    txs = sorted(_collect_tx(records), key=lambda x: x.t_start)
    outcome_at: dict[tuple[str, int], str] = {}
    for r in records:
        if r.event == Ev.RX:
            outcome_at[(r.node, r.frame)] = r.outcome
    for i, a in enumerate(txs):
        for b in txs[i + 1:]:
            if b.t_start >= a.t_end:
                break
            if not set(a.channels) & set(b.channels):
                continue
            for node in topo.nodes:
                if node in (a.node, b.node):
                    continue
                if topo.hears(a.node, node) and topo.hears(b.node, node):
                    for f in (a, b):
                        got = outcome_at.get((node, f.frame))
                        if got != Outcome.COLLIDED:
                            out.append(
                                f"symmetry: frame {f.frame} at {node} resolved "
                                f"{got}, expected Collided (overlaps frame "
                                f"{(b if f is a else a).frame})"
                            )
    return out


def check_rtwt_gating(records: list[TraceRecord], cfg: ScenarioConfig) -> list[str]:
    """No transmission by a non-owner may intersect a foreign service period."""
    occ = expand_service_periods(
        [ServicePeriod(sp.owner_src, sp.owner_dst, sp.start_us, sp.duration_us,
                       sp.period_us) for sp in cfg.sp_table],
        cfg.sim.duration_us,
    )
    if not occ:
        return []
    out = []
    for tx in _collect_tx(records):
        for o in occ:
            if tx.t_start < o.end and o.start < tx.t_end:
                if tx.node not in (o.owner_src, o.owner_dst):
                    out.append(
                        f"rtwt: {tx.node} frame {tx.frame} "
                        f"[{tx.t_start},{tx.t_end}) intersects foreign period "
                        f"[{o.start},{o.end})"
                    )
    return out


def check_reservation_coverage(records: list[TraceRecord], cfg: ScenarioConfig) -> list[str]:
    """Separated variant: every data-plane transmission lies inside exactly
    one granted reservation, on its channels, by one of its endpoints."""
    if cfg.mac.variant != "separated":
        return []
    out = []
    grants: dict[int, dict] = {}
    for r in records:
        if r.event == Ev.RESERVATION:
            grants[r.extra["grant"]] = {
                "start": r.extra["start"], "end": r.extra["end"],
                "ch": set(r.ch or ()), "src": r.extra["src"],
                "dst": r.extra["dst"],
            }
    for tx in _collect_tx(records):
        if tx.plane != Plane.DP.value:
            continue
        g = grants.get(tx.grant)
        if g is None:
            out.append(f"coverage: DP frame {tx.frame} has no reservation")
            continue
        if not (g["start"] <= tx.t_start and tx.t_end <= g["end"]):
            out.append(f"coverage: DP frame {tx.frame} "
                       f"[{tx.t_start},{tx.t_end}) outside grant "
                       f"[{g['start']},{g['end']})")
        if not set(tx.channels) <= g["ch"]:
            out.append(f"coverage: DP frame {tx.frame} channels {tx.channels} "
                       f"outside grant channels {sorted(g['ch'])}")
        if tx.node not in (g["src"], g["dst"]):
            out.append(f"coverage: DP frame {tx.frame} sent by {tx.node}, "
                       f"grant belongs to {g['src']}->{g['dst']}")
    return out


def check_boundary_exclusivity(records: list[TraceRecord], cfg: ScenarioConfig) -> list[str]:
    """Separated variant: control frames only in control regions, data frames
    only in data regions."""
    if cfg.mac.variant != "separated" or cfg.mac.boundary is None:
        return []
    b = cfg.mac.boundary
    boundary = BoundaryMode(mode=b.mode, control_channel=b.control_channel,
                            epoch_us=b.epoch_us, cp_window_us=b.cp_window_us)
    out = []
    for tx in _collect_tx(records):
        want = Plane.CP if tx.plane == Plane.CP.value else Plane.DP
        for c in tx.channels:
            if plane_region(tx.t_start, c, boundary) is not want:
                out.append(
                    f"boundary: {tx.plane} frame {tx.frame} starts at "
                    f"t={tx.t_start} on ch{c}, a "
                    f"{plane_region(tx.t_start, c, boundary).value} region"
                )
    return out


def validate_trace(records, cfg: ScenarioConfig) -> list[str]:
    """Run the full invariant suite; empty result means the trace is clean."""
    records = list(records)
    out = []
    out += check_nav_discipline(records)
    out += check_backoff_bounds(records, cfg)
    out += check_collision_symmetry(records, cfg)
    out += check_rtwt_gating(records, cfg)
    out += check_reservation_coverage(records, cfg)
    out += check_boundary_exclusivity(records, cfg)
    return out
