from macplane.engine import RngStream
from macplane.mac_common import (
    GateDecision,
    Handshake,
    INF,
    ServicePeriod,
    backoff_draw,
    bond_width,
    contention_window,
    expand_service_periods,
    rtwt_gate,
    select_handshake,
)
from macplane.medium import ChannelSet


def test_handshake_threshold_is_strictly_greater():
    assert select_handshake(1500, 500) is Handshake.RTS_CTS
    assert select_handshake(100, 500) is Handshake.DIRECT
    assert select_handshake(500, 500) is Handshake.DIRECT


def test_backoff_window_doubles_and_caps():
    assert contention_window(0, 15, 1023) == 15
    assert contention_window(3, 15, 1023) == 127
    assert contention_window(10, 15, 1023) == 1023  # capped


def test_backoff_draw_within_window():
    rng = RngStream(1, 0)
    for _ in range(200):
        assert 0 <= backoff_draw(0, 15, 1023, rng) <= 15
    rng = RngStream(1, 1)
    draws = [backoff_draw(10, 15, 1023, rng) for _ in range(200)]
    assert all(0 <= d <= 1023 for d in draws)
    assert max(draws) > 511  # the cap, not a smaller window, is in force


def test_backoff_draw_reproducible_per_stream():
    a = [backoff_draw(2, 15, 1023, RngStream(7, 3)) for _ in range(1)]
    b = [backoff_draw(2, 15, 1023, RngStream(7, 3)) for _ in range(1)]
    assert a == b


def test_bond_width_respects_both_capabilities():
    cs = ChannelSet(8, primary=0)
    idle = {c: True for c in range(8)}
    assert bond_width(cs, idle, 160, 40) == 40
    assert bond_width(cs, idle, 160, 160) == 160


def test_bond_width_blocked_by_busy_secondary():
    cs = ChannelSet(4, primary=0)
    idle = {0: True, 1: True, 2: False, 3: True}
    # Third channel busy: the 80 MHz block fails, 40 MHz still works.
    assert bond_width(cs, idle, 80, 80) == 40


def test_bond_width_minimum_is_primary_only():
    cs = ChannelSet(4, primary=0)
    idle = {c: True for c in range(4)}
    assert bond_width(cs, idle, 20, 20) == 20
    # Adjacent secondary busy: nothing beyond 20 MHz can bond.
    idle[1] = False
    assert bond_width(cs, idle, 160, 160) == 20


def test_gate_with_empty_table_allows_forever():
    assert rtwt_gate(100, [], "A") == GateDecision(None, INF)


def test_gate_blocks_inside_foreign_period():
    occ = expand_service_periods(
        [ServicePeriod("E", "F", 1000, 500, 10_000)], 30_000)
    g = rtwt_gate(1200, occ, "A")
    assert g.blocked_until == 1500
    # The owner may use its own period until it ends.
    g = rtwt_gate(1200, occ, "E")
    assert g.allowed and g.gap_end == 1500


def test_gate_gap_arithmetic_bounds_a_txop():
    # In a gap with the next foreign period 3 ms away, an 8 ms burst cannot
    # fit and must truncate or defer.
    occ = expand_service_periods(
        [ServicePeriod("E", "F", 5000, 2000, 10_000)], 40_000)
    g = rtwt_gate(2000, occ, "A")
    assert g.allowed
    assert g.gap_end == 5000
    assert g.gap_end - 2000 < 8000


def test_periodic_expansion_is_sorted_and_bounded():
    occ = expand_service_periods(
        [ServicePeriod("E", "F", 0, 1000, 5000)], 20_000)
    assert [(o.start, o.end) for o in occ] == [
        (0, 1000), (5000, 6000), (10_000, 11_000), (15_000, 16_000)]
