import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from macplane.api import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


SMALL_RUN = {
    "name": "svc",
    "topology": {"nodes": ["a", "b"], "links": [["a", "b"]]},
    "flows": [{"src": "a", "dst": "b", "payload_bytes": 1500,
               "arrival": {"kind": "saturated"}}],
    "sim": {"duration_us": 20_000, "seed": 1},
}


def test_healthz(client):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"


def test_scenario_listing_and_lookup(client):
    names = {s["name"] for s in client.get("/scenarios").json()}
    assert {"p1a", "p1b", "p2", "p3", "p4a", "p4b", "p5", "p6"} <= names
    cfg = client.get("/scenarios/p1a").json()
    assert cfg["topology"]["nodes"] == ["A", "B", "C", "D"]
    assert client.get("/scenarios/nope").status_code == 404


def test_validate_endpoint(client):
    ok = client.post("/validate", json={"config": SMALL_RUN}).json()
    assert ok["valid"] is True
    bad = dict(SMALL_RUN)
    bad["flows"] = [{"src": "a", "dst": "zz"}]
    res = client.post("/validate", json={"config": bad}).json()
    assert res["valid"] is False and res["errors"]


def test_run_endpoint_returns_trace_and_summary(client):
    body = client.post("/runs", json={"config": SMALL_RUN, "seed": 3,
                                      "validate_trace": True}).json()
    assert body["seed"] == 3
    assert body["trace_records"] > 0
    assert body["trace_jsonl"].count("\n") == body["trace_records"]
    assert body["summary_csv"].startswith("collisions_cp_cp,")
    assert body["violations"] == []
    assert body["summary"]["dcf_goodput_bps"] > 0


def test_run_endpoint_is_deterministic(client):
    a = client.post("/runs", json={"config": SMALL_RUN, "seed": 2}).json()
    b = client.post("/runs", json={"config": SMALL_RUN, "seed": 2}).json()
    assert a["trace_jsonl"] == b["trace_jsonl"]
    assert a["summary_csv"] == b["summary_csv"]


def test_run_rejects_bad_config_and_bad_scenario(client):
    bad = dict(SMALL_RUN)
    bad["mystery"] = 1
    assert client.post("/runs", json={"config": bad}).status_code == 422
    assert client.post("/runs", json={"scenario": "nope"}).status_code == 404
    both = client.post("/runs", json={"scenario": "p1a", "config": SMALL_RUN})
    assert both.status_code == 422


def test_sweep_endpoint(client):
    req = {
        "config": {**SMALL_RUN, "channels": {"count": 8, "primary": 0}},
        "axis": "mcs",
        "values": ["qam64", "qam4096"],
        "seeds": [1, 2],
    }
    body = client.post("/sweeps", json=req).json()
    assert len(body["rows"]) == 4
    assert body["csv"].splitlines()[0].endswith("mcs,seed")
    ratios = {(r["mcs"], r["seed"]): r["cp_overhead_ratio"]
              for r in body["rows"]}
    assert ratios[("qam4096", 1)] > ratios[("qam64", 1)]


def test_sweep_unknown_axis_rejected(client):
    req = {"scenario": "p5", "axis": "nope", "values": [1], "seeds": [1]}
    assert client.post("/sweeps", json=req).status_code == 422
