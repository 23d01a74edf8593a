"""Builtin scenarios, one per studied problem of the shared-plane MAC.

Each runs under both MAC variants with no change other than the ``mac``
field. Offered loads are saturated unless the effect under study needs
timed arrivals; p1/p2 pin those instants so the storyline they exercise
is identical across seeds.
"""

from __future__ import annotations

from .config import (
    ArrivalCfg,
    BeaconCfg,
    BoundaryCfg,
    ChannelsCfg,
    EdcaCfg,
    FlowCfg,
    InterfererCfg,
    MacCfg,
    NodeCfg,
    ParamsCfg,
    ScenarioConfig,
    SimCfg,
    SpCfg,
    TopologyCfg,
)

# VO payload sized so its airtime at 64-QAM/20 MHz is exactly 200 us
# (20 us preamble + 1215*8/54 = 180 us).
VO_PAYLOAD_BYTES = 1215


def _sat(src, dst, ac="BE", payload=1500, mcs="qam64") -> FlowCfg:
    return FlowCfg(src=src, dst=dst, ac=ac, payload_bytes=payload, mcs=mcs,
                   arrival=ArrivalCfg(kind="saturated"))


def p1a() -> ScenarioConfig:
    """Hidden-terminal chain with RTS/CTS: control frames collide with each
    other and with data at the middle receivers."""
    return ScenarioConfig(
        name="p1a",
        topology=TopologyCfg(nodes=["A", "B", "C", "D"],
                             links=[("A", "B"), ("B", "C"), ("C", "D")]),
        channels=ChannelsCfg(count=2, primary=0),
        nodes={n: NodeCfg(cap_mhz=20) for n in "ABCD"},
        flows=[_sat("A", "B"), _sat("D", "C")],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="channel_split", control_channel=0)),
        params=ParamsCfg(rts_threshold_bytes=500),
        sim=SimCfg(duration_us=1_000_000, seed=1),
    )


def p1b() -> ScenarioConfig:
    """Same chain without the handshake: acknowledgements collide with data."""
    cfg = p1a()
    return cfg.model_copy(update={
        "name": "p1b",
        "params": ParamsCfg(rts_threshold_bytes=2_000),
    })


def p2() -> ScenarioConfig:
    """Blocking on one channel: a voice frame arrives during a low-rate
    handshake, a beacon and a second voice frame during a long background
    burst. Arrival instants anchor to the deterministic first exchange."""
    edca = dict(ParamsCfg().edca)
    return ScenarioConfig(
        name="p2",
        topology=TopologyCfg(nodes=["AP", "STA1", "STA2", "STA3"], mesh=True),
        channels=ChannelsCfg(count=1, primary=0),
        nodes={n: NodeCfg(cap_mhz=20) for n in ("AP", "STA1", "STA2", "STA3")},
        flows=[
            _sat("STA1", "AP", ac="BK"),
            FlowCfg(src="STA2", dst="AP", ac="VO", payload_bytes=VO_PAYLOAD_BYTES,
                    mcs="qam64", arrival=ArrivalCfg(kind="at", times_us=[100])),
            FlowCfg(src="STA3", dst="AP", ac="VO", payload_bytes=VO_PAYLOAD_BYTES,
                    mcs="qam64", arrival=ArrivalCfg(kind="at", times_us=[4_000])),
        ],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="time_split", epoch_us=10_000,
                                        cp_window_us=2_000)),
        params=ParamsCfg(rts_threshold_bytes=1_300, edca=edca),
        beacons=BeaconCfg(node="AP", period_us=100_000, offset_us=2_000),
        sim=SimCfg(duration_us=50_000, seed=1),
    )


def p3() -> ScenarioConfig:
    """Primary-channel bottleneck: many saturated stations, four channels,
    every handshake and acknowledgement squeezed onto the primary."""
    n = 20
    stations = [f"STA{i}" for i in range(1, n + 1)]
    edca = dict(ParamsCfg().edca)
    edca["BE"] = EdcaCfg(aifs_slots=3, cwmin=15, cwmax=1023, txop_limit_us=0)
    return ScenarioConfig(
        name="p3",
        topology=TopologyCfg(nodes=["AP"] + stations, mesh=True),
        channels=ChannelsCfg(count=4, primary=0),
        nodes={n_: NodeCfg(cap_mhz=80) for n_ in ["AP"] + stations},
        flows=[_sat(s, "AP") for s in stations],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="channel_split", control_channel=0)),
        params=ParamsCfg(rts_threshold_bytes=500, edca=edca),
        sim=SimCfg(duration_us=300_000, seed=1),
    )


def p4a() -> ScenarioConfig:
    """Capability mismatch: a 160 MHz-capable sender bonded down to the
    40 MHz block its receiver supports."""
    return ScenarioConfig(
        name="p4a",
        topology=TopologyCfg(nodes=["AP", "STA"], mesh=True),
        channels=ChannelsCfg(count=8, primary=0),
        nodes={"AP": NodeCfg(cap_mhz=160), "STA": NodeCfg(cap_mhz=40)},
        flows=[_sat("AP", "STA")],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="channel_split", control_channel=0)),
        params=ParamsCfg(rts_threshold_bytes=500),
        sim=SimCfg(duration_us=200_000, seed=1),
    )


def p4b() -> ScenarioConfig:
    """Independent secondary state: a persistent occupant of the third
    channel caps every bond at 40 MHz despite 80 MHz capability."""
    return ScenarioConfig(
        name="p4b",
        topology=TopologyCfg(nodes=["AP", "STA", "IF"], mesh=True),
        channels=ChannelsCfg(count=4, primary=0),
        nodes={"AP": NodeCfg(cap_mhz=80), "STA": NodeCfg(cap_mhz=80),
               "IF": NodeCfg(cap_mhz=20)},
        flows=[_sat("AP", "STA")],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="channel_split", control_channel=0)),
        params=ParamsCfg(rts_threshold_bytes=500),
        interferers=[InterfererCfg(node="IF", channel=2, period_us=2_000,
                                   busy_us=2_000)],
        sim=SimCfg(duration_us=200_000, seed=1),
    )


def p5() -> ScenarioConfig:
    """Relative control-plane cost: one protected flow whose data rate is
    swept across the modulation generations and bond widths."""
    edca = dict(ParamsCfg().edca)
    edca["BE"] = EdcaCfg(aifs_slots=3, cwmin=15, cwmax=1023, txop_limit_us=0)
    return ScenarioConfig(
        name="p5",
        topology=TopologyCfg(nodes=["STA", "AP"], mesh=True),
        channels=ChannelsCfg(count=8, primary=0),
        nodes={"STA": NodeCfg(cap_mhz=20), "AP": NodeCfg(cap_mhz=20)},
        flows=[_sat("STA", "AP")],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="channel_split", control_channel=0)),
        params=ParamsCfg(rts_threshold_bytes=500, edca=edca),
        sim=SimCfg(duration_us=100_000, seed=1),
    )


def p6() -> ScenarioConfig:
    """Fragmented access intervals: recurring reserved periods carve up the
    line and contention-based traffic only fits in the gaps."""
    return ScenarioConfig(
        name="p6",
        topology=TopologyCfg(nodes=["AP", "STA1", "STA2", "E", "F"], mesh=True),
        channels=ChannelsCfg(count=1, primary=0),
        nodes={n: NodeCfg(cap_mhz=20) for n in ("AP", "STA1", "STA2", "E", "F")},
        flows=[_sat("STA1", "AP"), _sat("STA2", "AP")],
        mac=MacCfg(variant="baseline",
                   boundary=BoundaryCfg(mode="time_split", epoch_us=10_000,
                                        cp_window_us=2_000)),
        params=ParamsCfg(rts_threshold_bytes=500),
        sp_table=[SpCfg(owner_src="E", owner_dst="F", start_us=0,
                        duration_us=2_500, period_us=10_000)],
        sim=SimCfg(duration_us=500_000, seed=1),
    )


BUILTIN_SCENARIOS = {
    "p1a": (p1a, "Hidden-terminal chain, RTS/CTS handshake"),
    "p1b": (p1b, "Hidden-terminal chain, no handshake"),
    "p2": (p2, "Voice, beacon and background blocking on one channel"),
    "p3": (p3, "Primary-channel bottleneck under dense load"),
    "p4a": (p4a, "Secondary channels idled by capability mismatch"),
    "p4b": (p4b, "Secondary channels idled by an independent occupant"),
    "p5": (p5, "Control-plane share vs data rate and bandwidth"),
    "p6": (p6, "Reserved service periods fragmenting contention access"),
}


def builtin(name: str) -> ScenarioConfig:
    try:
        builder, _ = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; "
                       f"known: {sorted(BUILTIN_SCENARIOS)}") from None
    return builder()


def list_scenarios() -> list[dict]:
    return [
        {"name": name, "description": desc,
         "variant": BUILTIN_SCENARIOS[name][0]().mac.variant}
        for name, (_, desc) in BUILTIN_SCENARIOS.items()
    ]
