"""Trace aggregation: collision classification and the per-run summary.

Collisions are counted per colliding pair per receiver (a 3-way collision at
one receiver yields 3 pairs) so counts are comparable across MAC variants.
Access delay is arrival to first transmission attempt, not to delivery, so
retry storms surface in the tail percentiles of other traffic rather than
redefining the mean.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import Iterable

from .frames import FrameType, Plane
from .mac_common import BEACON_KEY
from .trace import Ev, Outcome, Trace, TraceRecord

DELAY_ACS = ("VO", "VI", "BE", "BK")
ATTEMPT_FTYPES = {FrameType.RTS.value, FrameType.DATA.value, FrameType.BEACON.value}


def classify_collision(f1_plane: str, f2_plane: str) -> str:
    """CpCp if both control-plane, DpDp if both data-plane, CpDp otherwise."""
    if f1_plane == Plane.CP.value and f2_plane == Plane.CP.value:
        return "CpCp"
    if f1_plane == Plane.DP.value and f2_plane == Plane.DP.value:
        return "DpDp"
    return "CpDp"


@dataclass
class Summary:
    collisions_cp_cp: int = 0
    collisions_cp_dp: int = 0
    collisions_dp_dp: int = 0
    delay_vo_mean_us: float = 0.0
    delay_vo_p99_us: float = 0.0
    delay_vo_max_us: float = 0.0
    delay_vi_mean_us: float = 0.0
    delay_vi_p99_us: float = 0.0
    delay_vi_max_us: float = 0.0
    delay_be_mean_us: float = 0.0
    delay_be_p99_us: float = 0.0
    delay_be_max_us: float = 0.0
    delay_bk_mean_us: float = 0.0
    delay_bk_p99_us: float = 0.0
    delay_bk_max_us: float = 0.0
    busy_fraction: list[float] = field(default_factory=list)
    cp_overhead_ratio: float = 0.0
    secondary_usage_ratio: float = 0.0
    dcf_goodput_bps: float = 0.0
    beacon_max_deferral_us: float = 0.0
    released_tail_us: int = 0

    def csv_header(self) -> list[str]:
        cols = []
        for f in fields(self):
            if f.name == "busy_fraction":
                cols.extend(f"busy_frac_ch{i}" for i in range(len(self.busy_fraction)))
            else:
                cols.append(f.name)
        return cols

    def csv_row(self) -> list:
        row = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "busy_fraction":
                row.extend(v)
            else:
                row.append(v)
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        w.writerow([repr(v) if isinstance(v, float) else v for v in self.csv_row()])
        return buf.getvalue()


def parse_summary_csv(text: str) -> Summary:
    rows = list(csv.reader(io.StringIO(text)))
    header, data = rows[0], rows[1]
    by_name = dict(zip(header, data))
    s = Summary()
    busy = []
    i = 0
    while f"busy_frac_ch{i}" in by_name:
        busy.append(float(by_name[f"busy_frac_ch{i}"]))
        i += 1
    s.busy_fraction = busy
    for f in fields(s):
        if f.name == "busy_fraction" or f.name not in by_name:
            continue
        raw = by_name[f.name]
        setattr(s, f.name, int(raw) if f.type == "int" else float(raw))
    return s


@dataclass
class _FrameInfo:
    t_start: int
    t_end: int = -1
    channels: tuple[int, ...] = ()
    sender: str = ""
    ftype: str = ""
    plane: str = ""
    size_bytes: int = 0
    msdu: int | None = None
    dst: str = ""


def _percentile(sorted_vals: list, q: float) -> float:
    if not sorted_vals:
        return 0.0
    k = max(math.ceil(q * len(sorted_vals)) - 1, 0)
    return float(sorted_vals[k])


def summarize(trace: Trace | Iterable[TraceRecord], *, duration_us: int,
              n_channels: int, primary: int) -> Summary:
    """Aggregate one run's trace into the problem metrics."""
    records = list(trace)
    frames: dict[int, _FrameInfo] = {}
    collided_at: dict[str, list[int]] = {}
    delivered_frames: set[int] = set()
    arrivals: dict[int, tuple[int, str, int]] = {}  # msdu -> (t, ac, bytes)
    first_attempt: dict[int, int] = {}
    delivered_msdus: dict[int, int] = {}  # msdu -> bytes, unique deliveries
    released = 0

    for r in records:
        if r.event == Ev.TX_START:
            frames[r.frame] = _FrameInfo(
                t_start=r.t, channels=r.ch or (), sender=r.node,
                ftype=r.ftype or "", plane=r.plane or "",
                msdu=r.extra.get("msdu"), dst=r.extra.get("dst", ""),
            )
            m = r.extra.get("msdu")
            if (m is not None and r.ftype in ATTEMPT_FTYPES
                    and m not in first_attempt):
                first_attempt[m] = r.t
        elif r.event == Ev.TX_END:
            fi = frames.get(r.frame)
            if fi is not None:
                fi.t_end = r.t
        elif r.event == Ev.RX:
            if r.outcome == Outcome.COLLIDED:
                collided_at.setdefault(r.node, []).append(r.frame)
            elif r.outcome == Outcome.DELIVERED:
                dst = r.extra.get("dst", "")
                if dst == r.node or dst == "*":
                    delivered_frames.add(r.frame)
                    m = r.extra.get("msdu")
                    if (m is not None and r.ftype == FrameType.DATA.value
                            and dst == r.node and m not in delivered_msdus):
                        delivered_msdus[m] = 0  # bytes filled below
        elif r.event == Ev.ARRIVAL:
            m = r.extra.get("msdu")
            if m is not None and m not in arrivals:
                arrivals[m] = (r.t, r.extra.get("ac", ""), r.extra.get("bytes", 0))
        elif r.event == Ev.RELEASE:
            released += r.extra.get("us", 0)

    for fi in frames.values():
        if fi.t_end < 0:
            fi.t_end = duration_us

    s = Summary()
    s.released_tail_us = released

    # Collision pairs, classified per receiver: a pair is two frames that
    # overlapped on a shared channel at that receiver, at least one of which
    # was received as Collided (the other may be the receiver's own frame).
    for receiver in sorted(collided_at):
        coll_set = set(collided_at[receiver])
        own = {fid for fid, fi in frames.items() if fi.sender == receiver}
        pool = sorted(coll_set | own,
                      key=lambda fid: (frames[fid].t_start, fid))
        for i, f1 in enumerate(pool):
            a = frames[f1]
            for f2 in pool[i + 1:]:
                b = frames[f2]
                if b.t_start >= a.t_end:
                    break
                if f1 not in coll_set and f2 not in coll_set:
                    continue
                if not set(a.channels) & set(b.channels):
                    continue
                kind = classify_collision(a.plane, b.plane)
                if kind == "CpCp":
                    s.collisions_cp_cp += 1
                elif kind == "DpDp":
                    s.collisions_dp_dp += 1
                else:
                    s.collisions_cp_dp += 1

    # Access delay per AC; beacons feed the deferral metric instead.
    delays: dict[str, list[int]] = {ac: [] for ac in DELAY_ACS}
    beacon_deferrals: list[int] = []
    for m, (t_arr, ac, nbytes) in arrivals.items():
        t_tx = first_attempt.get(m)
        if t_tx is None:
            continue
        if ac == BEACON_KEY:
            beacon_deferrals.append(t_tx - t_arr)
        elif ac in delays:
            delays[ac].append(t_tx - t_arr)
    for ac in DELAY_ACS:
        vals = sorted(delays[ac])
        prefix = f"delay_{ac.lower()}"
        if vals:
            setattr(s, f"{prefix}_mean_us", sum(vals) / len(vals))
            setattr(s, f"{prefix}_p99_us", _percentile(vals, 0.99))
            setattr(s, f"{prefix}_max_us", float(vals[-1]))
    s.beacon_max_deferral_us = float(max(beacon_deferrals, default=0))

    # Per-channel busy fraction: union of occupied intervals, clipped to the run.
    per_ch: dict[int, list[tuple[int, int]]] = {c: [] for c in range(n_channels)}
    for fi in frames.values():
        a, b = min(fi.t_start, duration_us), min(fi.t_end, duration_us)
        if b > a:
            for c in fi.channels:
                if c in per_ch:
                    per_ch[c].append((a, b))
    busy_us: dict[int, int] = {}
    for c, ivals in per_ch.items():
        total = 0
        end = -1
        for a, b in sorted(ivals):
            if a > end:
                total += b - a
                end = b
            elif b > end:
                total += b - end
                end = b
        busy_us[c] = total
    s.busy_fraction = [busy_us[c] / duration_us for c in range(n_channels)]

    # Relative plane overhead over delivered frames' airtimes.
    cp_air = dp_air = 0
    for fid in delivered_frames:
        fi = frames[fid]
        air = fi.t_end - fi.t_start
        if fi.plane == Plane.CP.value:
            cp_air += air
        else:
            dp_air += air
    if cp_air + dp_air > 0:
        s.cp_overhead_ratio = cp_air / (cp_air + dp_air)

    secondaries = [c for c in range(n_channels) if c != primary]
    if secondaries and busy_us.get(primary, 0) > 0:
        s.secondary_usage_ratio = (
            sum(busy_us[c] for c in secondaries)
            / (busy_us[primary] * len(secondaries))
        )

    # Unique delivered data payloads per second.
    for m in delivered_msdus:
        if m in arrivals:
            delivered_msdus[m] = arrivals[m][2]
    total_bits = sum(b * 8 for b in delivered_msdus.values())
    s.dcf_goodput_bps = total_bits / (duration_us / 1_000_000)
    return s
