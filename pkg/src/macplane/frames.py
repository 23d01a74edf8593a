"""Frame model, plane classification, PHY rate table and airtime arithmetic.

The rate table is deliberately simplified: a single base rate per modulation
at 20 MHz / 1 spatial stream, scaling linearly with bandwidth and stream
count. Control frames always use the basic rate on a single 20 MHz channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .errors import BadBandwidthError

PREAMBLE_US = 20
BROADCAST = "*"

VALID_BANDWIDTHS = (20, 40, 80, 160)


class Mcs(str, Enum):
    BASIC = "basic"
    QAM64 = "qam64"
    QAM256 = "qam256"
    QAM1024 = "qam1024"
    QAM4096 = "qam4096"


# Base rate in Mb/s at 20 MHz, 1 spatial stream. 64-QAM pins the familiar
# legacy top rate (54); the others scale with bits per symbol (6/8/10/12).
BASE_RATE_MBPS = {
    Mcs.BASIC: 6,
    Mcs.QAM64: 54,
    Mcs.QAM256: 72,
    Mcs.QAM1024: 90,
    Mcs.QAM4096: 108,
}

BITS_PER_SYMBOL = {
    Mcs.QAM64: 6,
    Mcs.QAM256: 8,
    Mcs.QAM1024: 10,
    Mcs.QAM4096: 12,
}


class FrameType(str, Enum):
    RTS = "RTS"
    CTS = "CTS"
    ACK = "ACK"
    BLOCK_ACK = "BlockAck"
    DATA = "Data"
    BEACON = "Beacon"
    RESV_REQ = "ReservationReq"
    RESV_GRANT = "ReservationGrant"


class Plane(str, Enum):
    CP = "CP"
    DP = "DP"


CONTROL_TYPES = frozenset(
    {
        FrameType.RTS,
        FrameType.CTS,
        FrameType.ACK,
        FrameType.BLOCK_ACK,
        FrameType.RESV_REQ,
        FrameType.RESV_GRANT,
    }
)

# Fixed sizes for frames whose payload the simulator does not model.
CONTROL_BYTES = {
    FrameType.RTS: 20,
    FrameType.CTS: 14,
    FrameType.ACK: 14,
    FrameType.BLOCK_ACK: 32,
    FrameType.RESV_REQ: 20,
    FrameType.RESV_GRANT: 20,
}
BEACON_BYTES = 100


def classify(ftype: FrameType) -> Plane:
    """Plane of a frame by its format: control formats are CP, data and
    management formats (user data and beacons) are DP."""
    return Plane.CP if ftype in CONTROL_TYPES else Plane.DP


def phy_rate_mbps(mcs: Mcs, bandwidth_mhz: int, nss: int = 1) -> int:
    if bandwidth_mhz not in VALID_BANDWIDTHS:
        raise BadBandwidthError(f"bandwidth {bandwidth_mhz} MHz not in {VALID_BANDWIDTHS}")
    if nss < 1:
        raise BadBandwidthError(f"nss must be >= 1, got {nss}")
    return BASE_RATE_MBPS[mcs] * (bandwidth_mhz // 20) * nss


def airtime_us(size_bytes: int, mcs: Mcs, bandwidth_mhz: int = 20, nss: int = 1) -> int:
    """Fixed preamble plus payload time, rounded up to the next microsecond."""
    rate = phy_rate_mbps(mcs, bandwidth_mhz, nss)
    bits = size_bytes * 8
    return PREAMBLE_US + -(-bits // rate)


def nav_duration_us(remaining_airtimes: Iterable[int], sifs_us: int) -> int:
    """Duration-field value covering a whole remaining exchange: one SIFS
    before each remaining frame plus that frame's airtime."""
    return sum(sifs_us + a for a in remaining_airtimes)


@dataclass
class Frame:
    ftype: FrameType
    size_bytes: int
    src: str
    dst: str
    mcs: Mcs = Mcs.BASIC
    bandwidth_mhz: int = 20
    nss: int = 1
    duration_field_us: int = 0
    plane: Plane = None  # type: ignore[assignment]
    msdu: Optional[int] = None
    grant: Optional[int] = None
    info: Optional[object] = None  # opaque payload (e.g. reservation details)
    # Assigned by the medium when the frame first hits the air, so ids are
    # per-simulation and traces stay reproducible under concurrent runs.
    id: Optional[int] = None

    def __post_init__(self):
        if self.plane is None:
            self.plane = classify(self.ftype)

    @property
    def airtime_us(self) -> int:
        return airtime_us(self.size_bytes, self.mcs, self.bandwidth_mhz, self.nss)


def control_frame(ftype: FrameType, src: str, dst: str, duration_us: int = 0, **kw) -> Frame:
    """Control frames ride the basic MCS on 20 MHz, fixed size per type."""
    return Frame(
        ftype=ftype,
        size_bytes=CONTROL_BYTES[ftype],
        src=src,
        dst=dst,
        duration_field_us=duration_us,
        **kw,
    )
