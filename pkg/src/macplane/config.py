"""Scenario configuration: a flat, versioned schema loaded from YAML or JSON.

Unknown keys are rejected outright so experiment files stay diffable and
archivable; every cross-reference (flows to nodes, channels, service-period
owners) is validated before a simulation is built.
"""

from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .errors import ConfigError

SCHEMA_VERSION = 1

_STRICT = ConfigDict(extra="forbid")


class TopologyCfg(BaseModel):
    model_config = _STRICT
    nodes: list[str]
    links: list[tuple[str, str]] = []
    mesh: bool = False  # all pairs hear each other; links ignored


class ChannelsCfg(BaseModel):
    model_config = _STRICT
    count: int = 1
    primary: int = 0


class ArrivalCfg(BaseModel):
    model_config = _STRICT
    kind: Literal["saturated", "poisson", "at"] = "saturated"
    rate_per_s: Optional[float] = None
    times_us: Optional[list[int]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "poisson" and not self.rate_per_s:
            raise ValueError("poisson arrival needs rate_per_s")
        if self.kind == "at" and not self.times_us:
            raise ValueError("'at' arrival needs times_us")
        return self


class FlowCfg(BaseModel):
    model_config = _STRICT
    src: str
    dst: str
    ac: Literal["VO", "VI", "BE", "BK"] = "BE"
    payload_bytes: int = 1500
    mcs: Literal["basic", "qam64", "qam256", "qam1024", "qam4096"] = "qam64"
    nss: int = 1
    arrival: ArrivalCfg = ArrivalCfg()


class EdcaCfg(BaseModel):
    model_config = _STRICT
    aifs_slots: int
    cwmin: int
    cwmax: int
    txop_limit_us: int


class BoundaryCfg(BaseModel):
    model_config = _STRICT
    mode: Literal["channel_split", "time_split"]
    control_channel: int = 0
    epoch_us: int = 0
    cp_window_us: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.mode == "time_split":
            if not (0 < self.cp_window_us < self.epoch_us):
                raise ValueError("time_split needs 0 < cp_window_us < epoch_us")
        return self


class MacCfg(BaseModel):
    model_config = _STRICT
    variant: Literal["baseline", "separated"] = "baseline"
    boundary: Optional[BoundaryCfg] = None

    @model_validator(mode="after")
    def _check(self):
        if self.variant == "separated" and self.boundary is None:
            raise ValueError("separated variant needs a boundary")
        return self


_DEFAULT_EDCA = {
    "VO": EdcaCfg(aifs_slots=2, cwmin=3, cwmax=7, txop_limit_us=2_000),
    "VI": EdcaCfg(aifs_slots=2, cwmin=7, cwmax=15, txop_limit_us=4_000),
    "BE": EdcaCfg(aifs_slots=3, cwmin=15, cwmax=1023, txop_limit_us=8_000),
    "BK": EdcaCfg(aifs_slots=7, cwmin=15, cwmax=1023, txop_limit_us=8_000),
}


class ParamsCfg(BaseModel):
    model_config = _STRICT
    slot_us: int = 9
    sifs_us: int = 16
    rts_threshold_bytes: int = 500
    retry_limit: int = 7
    edca: dict[str, EdcaCfg] = dict(_DEFAULT_EDCA)
    sp_policy: Literal["truncate", "defer"] = "truncate"
    scheduler_horizon_us: Optional[int] = None

    @model_validator(mode="after")
    def _check(self):
        missing = {"VO", "VI", "BE", "BK"} - set(self.edca)
        if missing:
            raise ValueError(f"edca table missing {sorted(missing)}")
        vo, bk = self.edca["VO"], self.edca["BK"]
        if not (vo.aifs_slots < bk.aifs_slots and vo.cwmin < bk.cwmin
                and vo.cwmax < bk.cwmax):
            raise ValueError("VO must be strictly more aggressive than BK")
        return self


class SpCfg(BaseModel):
    model_config = _STRICT
    owner_src: str
    owner_dst: str
    start_us: int
    duration_us: int
    period_us: int


class BeaconCfg(BaseModel):
    model_config = _STRICT
    node: str
    period_us: int
    offset_us: int = 0


class InterfererCfg(BaseModel):
    model_config = _STRICT
    node: str
    channel: int
    period_us: int
    busy_us: int


class SimCfg(BaseModel):
    model_config = _STRICT
    duration_us: int
    seed: int = 1


class NodeCfg(BaseModel):
    model_config = _STRICT
    cap_mhz: int = 20


class ScenarioConfig(BaseModel):
    model_config = _STRICT
    schema_version: int = SCHEMA_VERSION
    name: str = "scenario"
    topology: TopologyCfg
    channels: ChannelsCfg = ChannelsCfg()
    nodes: dict[str, NodeCfg] = {}
    flows: list[FlowCfg] = []
    mac: MacCfg = MacCfg()
    params: ParamsCfg = ParamsCfg()
    sp_table: list[SpCfg] = []
    beacons: Optional[BeaconCfg] = None
    interferers: list[InterfererCfg] = []
    sim: SimCfg

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        known = set(self.topology.nodes)
        if not self.topology.mesh:
            for a, b in self.topology.links:
                if a not in known or b not in known:
                    raise ValueError(f"link ({a},{b}) references unknown node")
        for f in self.flows:
            for n in (f.src, f.dst):
                if n not in known:
                    raise ValueError(f"flow references unknown node {n!r}")
        for n in self.nodes:
            if n not in known:
                raise ValueError(f"node params for unknown node {n!r}")
        ch = self.channels
        if not (0 <= ch.primary < ch.count):
            raise ValueError("primary channel outside the channel set")
        for sp in self.sp_table:
            for n in (sp.owner_src, sp.owner_dst):
                if n not in known:
                    raise ValueError(f"service period owner {n!r} unknown")
        if self.beacons is not None and self.beacons.node not in known:
            raise ValueError(f"beacon node {self.beacons.node!r} unknown")
        for itf in self.interferers:
            if itf.node not in known:
                raise ValueError(f"interferer node {itf.node!r} unknown")
            if not (0 <= itf.channel < ch.count):
                raise ValueError("interferer channel outside the channel set")
        if self.sim.duration_us <= 0:
            raise ValueError("sim.duration_us must be positive")
        b = self.mac.boundary
        if b is not None and b.mode == "channel_split":
            if not (0 <= b.control_channel < ch.count):
                raise ValueError("control channel outside the channel set")
            if ch.count < 2:
                raise ValueError("channel_split needs at least two channels")
        return self


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config field {loc!r}: {first['msg']}") from exc


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file (YAML or JSON)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"parse error{line}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)
