"""Deterministic discrete-event simulator of 802.11-style MAC channel access.

Two protocol variants share one engine: a baseline hybrid MAC where control
and data frames contend on the same channel, and a plane-separated variant
where contention carries only reservation signalling and data rides
collision-free granted slots.
"""

from .config import ScenarioConfig, config_from_dict, load_config
from .engine import Event, EventKind, RngStream, Simulator
from .frames import Frame, FrameType, Mcs, Plane, airtime_us, classify, phy_rate_mbps
from .medium import ChannelSet, Medium, Topology
from .metrics import Summary, summarize
from .runner import RunResult, build_and_run, sweep, write_outputs
from .scenarios import BUILTIN_SCENARIOS, builtin, list_scenarios
from .trace import Trace, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SCENARIOS",
    "ChannelSet",
    "Event",
    "EventKind",
    "Frame",
    "FrameType",
    "Mcs",
    "Medium",
    "Plane",
    "RngStream",
    "RunResult",
    "ScenarioConfig",
    "Simulator",
    "Summary",
    "Topology",
    "Trace",
    "TraceRecord",
    "airtime_us",
    "build_and_run",
    "builtin",
    "classify",
    "config_from_dict",
    "list_scenarios",
    "load_config",
    "phy_rate_mbps",
    "summarize",
    "sweep",
    "write_outputs",
    "__version__",
]
