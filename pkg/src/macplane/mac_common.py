"""Shared MAC vocabulary: access categories, timing constants, backoff
arithmetic, channel bonding and service-period gating.

Timing defaults are conventional OFDM-PHY values (slot 9 us, SIFS 16 us);
every constant is overridable from the scenario file.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .engine import RngStream
from .frames import Mcs
from .medium import ChannelSet

INF = 2**62


class AC(str, Enum):
    VO = "VO"
    VI = "VI"
    BE = "BE"
    BK = "BK"

    @property
    def rank(self) -> int:
        """Internal contention priority, lower wins."""
        return {"VO": 1, "VI": 2, "BE": 3, "BK": 4}[self.value]


# Pseudo entity key for beacon traffic: contends with VO parameters but wins
# any internal tie.
BEACON_KEY = "BEACON"


@dataclass(frozen=True)
class EdcaParams:
    ac: str
    aifs_slots: int
    cwmin: int
    cwmax: int
    txop_limit_us: int


DEFAULT_EDCA: dict[AC, EdcaParams] = {
    AC.VO: EdcaParams("VO", aifs_slots=2, cwmin=3, cwmax=7, txop_limit_us=2_000),
    AC.VI: EdcaParams("VI", aifs_slots=2, cwmin=7, cwmax=15, txop_limit_us=4_000),
    AC.BE: EdcaParams("BE", aifs_slots=3, cwmin=15, cwmax=1023, txop_limit_us=8_000),
    AC.BK: EdcaParams("BK", aifs_slots=7, cwmin=15, cwmax=1023, txop_limit_us=8_000),
}


@dataclass(frozen=True)
class MacTiming:
    slot_us: int = 9
    sifs_us: int = 16

    @property
    def difs_us(self) -> int:
        return self.sifs_us + 2 * self.slot_us

    def aifs_us(self, aifs_slots: int) -> int:
        return self.sifs_us + aifs_slots * self.slot_us

    def response_timeout_us(self, response_airtime_us: int) -> int:
        """Wait after our frame ends before giving up on a SIFS response."""
        return self.sifs_us + response_airtime_us + self.slot_us


class Handshake(str, Enum):
    DIRECT = "Direct"
    RTS_CTS = "RtsCts"


def select_handshake(payload_bytes: int, rts_threshold_bytes: int) -> Handshake:
    """RTS/CTS only for payloads strictly larger than the threshold."""
    return Handshake.RTS_CTS if payload_bytes > rts_threshold_bytes else Handshake.DIRECT


def contention_window(retry: int, cwmin: int, cwmax: int) -> int:
    return min(cwmax, (cwmin + 1) * 2**retry - 1)


def backoff_draw(retry: int, cwmin: int, cwmax: int, rng: RngStream) -> int:
    """Uniform draw on [0, cw] with the binary-exponential window."""
    return rng.uniform_int(0, contention_window(retry, cwmin, cwmax))


def bond_width(channels: ChannelSet, idle_map: dict[int, bool],
               cap_tx_mhz: int, cap_rx_mhz: int) -> int:
    """Widest standard block containing the primary whose secondaries are all
    idle, capped by both ends' capabilities. Called right after a TXOP was won
    on the primary, so 20 MHz is always available."""
    cap = min(cap_tx_mhz, cap_rx_mhz)
    best = 20
    for w in (40, 80, 160):
        if w > cap:
            break
        blk = channels.block(w)
        if blk is None:
            break
        if all(idle_map.get(c, False) for c in blk if c != channels.primary):
            best = w
        else:
            break
    return best


@dataclass(frozen=True)
class ServicePeriod:
    owner_src: str
    owner_dst: str
    start_us: int
    duration_us: int
    period_us: int


@dataclass(frozen=True)
class SpOccurrence:
    start: int
    end: int
    owner_src: str
    owner_dst: str


def expand_service_periods(table: list[ServicePeriod], horizon_us: int) -> list[SpOccurrence]:
    """Materialize recurring service periods over [0, horizon)."""
    occ: list[SpOccurrence] = []
    for sp in table:
        if sp.duration_us <= 0:
            continue
        if sp.period_us <= 0:
            occ.append(SpOccurrence(sp.start_us, sp.start_us + sp.duration_us,
                                    sp.owner_src, sp.owner_dst))
            continue
        k = 0
        while sp.start_us + k * sp.period_us < horizon_us:
            s = sp.start_us + k * sp.period_us
            occ.append(SpOccurrence(s, s + sp.duration_us, sp.owner_src, sp.owner_dst))
            k += 1
    occ.sort(key=lambda o: (o.start, o.end))
    return occ


@dataclass(frozen=True)
class GateDecision:
    """Either blocked until a time, or allowed until the next foreign period."""

    blocked_until: Optional[int]
    gap_end: int

    @property
    def allowed(self) -> bool:
        return self.blocked_until is None


def rtwt_gate(t: int, occurrences: list[SpOccurrence], node: str) -> GateDecision:
    """Access decision for a contention-based transmitter at time t.

    Inside a foreign service period the node is blocked until it ends. The
    owner of the current period is allowed until its period ends; otherwise
    the node is allowed until the next foreign period starts (INF if none).
    """
    for occ in occurrences:
        if occ.start <= t < occ.end:
            if node == occ.owner_src or node == occ.owner_dst:
                return GateDecision(blocked_until=None, gap_end=occ.end)
            return GateDecision(blocked_until=occ.end, gap_end=occ.end)
        if occ.start > t:
            if node == occ.owner_src or node == occ.owner_dst:
                continue
            return GateDecision(blocked_until=None, gap_end=occ.start)
    return GateDecision(blocked_until=None, gap_end=INF)


class SpPolicy(str, Enum):
    TRUNCATE = "truncate"
    DEFER = "defer"


@dataclass
class Msdu:
    uid: int
    src: str
    dst: str
    ac: str
    size_bytes: int
    mcs: Mcs
    nss: int
    arrival_us: int
    flow: int = 0
