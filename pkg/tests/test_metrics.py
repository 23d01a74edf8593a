from macplane.metrics import classify_collision, parse_summary_csv, summarize
from macplane.trace import Ev, Outcome, Trace, TraceRecord


def test_pair_classification():
    assert classify_collision("CP", "CP") == "CpCp"
    assert classify_collision("CP", "DP") == "CpDp"
    assert classify_collision("DP", "CP") == "CpDp"
    assert classify_collision("DP", "DP") == "DpDp"


def _tx(trace, frame, node, t0, t1, ftype, plane, ch=(0,), dst="X", msdu=None):
    extra = {"src": node, "dst": dst, "dur": 0}
    if msdu is not None:
        extra["msdu"] = msdu
    trace.add(TraceRecord(t=t0, node=node, event=Ev.TX_START, frame=frame,
                          ftype=ftype, plane=plane, ch=ch, outcome=Outcome.SENT,
                          extra=dict(extra)))
    trace.add(TraceRecord(t=t1, node=node, event=Ev.TX_END, frame=frame,
                          ftype=ftype, plane=plane, ch=ch, outcome=Outcome.SENT,
                          extra=dict(extra)))


def _rx(trace, frame, node, t, ftype, plane, outcome, ch=(0,), dst="X",
        msdu=None, src="S"):
    extra = {"src": src, "dst": dst, "dur": 0}
    if msdu is not None:
        extra["msdu"] = msdu
    trace.add(TraceRecord(t=t, node=node, event=Ev.RX, frame=frame, ftype=ftype,
                          plane=plane, ch=ch, outcome=outcome, extra=extra))


def test_empty_trace_summarizes_to_zeros():
    s = summarize(Trace(), duration_us=1000, n_channels=2, primary=0)
    assert s.collisions_cp_cp == s.collisions_cp_dp == s.collisions_dp_dp == 0
    assert s.cp_overhead_ratio == 0.0
    assert s.busy_fraction == [0.0, 0.0]
    assert s.dcf_goodput_bps == 0.0


def test_cp_overhead_is_airtime_share_of_delivered_frames():
    tr = Trace()
    _tx(tr, 1, "A", 0, 47, "RTS", "CP", dst="B")
    _rx(tr, 1, "B", 47, "RTS", "CP", Outcome.DELIVERED, dst="B")
    _tx(tr, 2, "A", 100, 343, "Data", "DP", dst="B")
    _rx(tr, 2, "B", 343, "Data", "DP", Outcome.DELIVERED, dst="B")
    s = summarize(tr, duration_us=1000, n_channels=1, primary=0)
    assert abs(s.cp_overhead_ratio - 47 / (47 + 243)) < 1e-12


def test_three_way_collision_counts_three_pairs():
    tr = Trace()
    _tx(tr, 1, "A", 0, 100, "RTS", "CP", dst="R")
    _tx(tr, 2, "B", 10, 90, "CTS", "CP", dst="R")
    _tx(tr, 3, "C", 20, 120, "Data", "DP", dst="R")
    for f, ft, pl in ((1, "RTS", "CP"), (2, "CTS", "CP"), (3, "Data", "DP")):
        _rx(tr, f, "R", 120, ft, pl, Outcome.COLLIDED, dst="R")
    s = summarize(tr, duration_us=1000, n_channels=1, primary=0)
    assert s.collisions_cp_cp == 1   # RTS x CTS
    assert s.collisions_cp_dp == 2   # RTS x Data, CTS x Data
    assert s.collisions_dp_dp == 0


def test_receiver_own_frame_pairs_with_the_loss():
    tr = Trace()
    _tx(tr, 1, "A", 0, 100, "Data", "DP", dst="B")
    _tx(tr, 2, "B", 50, 80, "CTS", "CP", dst="Z")
    _rx(tr, 1, "B", 100, "Data", "DP", Outcome.COLLIDED, dst="B")
    s = summarize(tr, duration_us=1000, n_channels=1, primary=0)
    assert s.collisions_cp_dp == 1


def test_busy_fraction_unions_overlapping_airtime():
    tr = Trace()
    _tx(tr, 1, "A", 0, 100, "Data", "DP", dst="B")
    _tx(tr, 2, "B", 50, 150, "Data", "DP", dst="A")
    s = summarize(tr, duration_us=1000, n_channels=1, primary=0)
    assert s.busy_fraction == [0.15]


def test_access_delay_counts_first_attempt_only():
    tr = Trace()
    tr.add(TraceRecord(t=10, node="A", event=Ev.ARRIVAL,
                       extra={"msdu": 7, "ac": "VO", "bytes": 100, "dst": "B"}))
    _tx(tr, 1, "A", 60, 80, "Data", "DP", dst="B", msdu=7)
    _tx(tr, 2, "A", 200, 220, "Data", "DP", dst="B", msdu=7)  # retry
    s = summarize(tr, duration_us=1000, n_channels=1, primary=0)
    assert s.delay_vo_mean_us == 50.0
    assert s.delay_vo_max_us == 50.0


def test_goodput_counts_unique_delivered_payloads():
    tr = Trace()
    tr.add(TraceRecord(t=0, node="A", event=Ev.ARRIVAL,
                       extra={"msdu": 1, "ac": "BE", "bytes": 1000, "dst": "B"}))
    _tx(tr, 1, "A", 0, 100, "Data", "DP", dst="B", msdu=1)
    _rx(tr, 1, "B", 100, "Data", "DP", Outcome.DELIVERED, dst="B", msdu=1)
    # Duplicate delivery of the same payload must not double-count.
    _tx(tr, 2, "A", 200, 300, "Data", "DP", dst="B", msdu=1)
    _rx(tr, 2, "B", 300, "Data", "DP", Outcome.DELIVERED, dst="B", msdu=1)
    s = summarize(tr, duration_us=1_000_000, n_channels=1, primary=0)
    assert s.dcf_goodput_bps == 1000 * 8


def test_secondary_usage_ratio_definition():
    tr = Trace()
    _tx(tr, 1, "A", 0, 100, "Data", "DP", ch=(0, 1), dst="B")
    _tx(tr, 2, "A", 200, 300, "RTS", "CP", ch=(0,), dst="B")
    s = summarize(tr, duration_us=1000, n_channels=2, primary=0)
    # primary busy 200, one secondary busy 100 -> 100 / (200 * 1)
    assert abs(s.secondary_usage_ratio - 0.5) < 1e-12


def test_summary_csv_roundtrip_and_determinism():
    tr = Trace()
    _tx(tr, 1, "A", 0, 47, "RTS", "CP", dst="B")
    _rx(tr, 1, "B", 47, "RTS", "CP", Outcome.DELIVERED, dst="B")
    s = summarize(tr, duration_us=1000, n_channels=3, primary=0)
    text = s.to_csv()
    assert text == s.to_csv()
    assert parse_summary_csv(text) == s
    assert text.count("\n") == 2  # header + one data row


def test_trace_jsonl_shape():
    tr = Trace()
    _tx(tr, 1, "A", 0, 47, "RTS", "CP", dst="B")
    text = tr.to_jsonl()
    lines = [l for l in text.splitlines() if l]
    assert len(lines) == len(tr.records)
    import json
    keys = list(json.loads(lines[0]).keys())
    assert keys == ["t", "node", "event", "frame", "ftype", "plane", "ch",
                    "outcome", "extra"]
