"""Command-line client for the simulation service.

Every subcommand goes through the HTTP API. By default the app is driven
in-process (no server needed); pass ``--server URL`` to target a running
instance instead. Output files land in --out, defaulting to the
MACPLANE_OUT_DIR environment variable, then the working directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from .scenarios import BUILTIN_SCENARIOS


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .api import app

    return TestClient(app)


def _config_payload(spec: str) -> dict:
    """A builtin scenario name, or a path to a YAML/JSON config file."""
    if spec in BUILTIN_SCENARIOS and not os.path.exists(spec):
        return {"scenario": spec}
    with open(spec, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh.read())
    return {"config": data}


def _out_dir(args) -> str:
    return args.out or os.environ.get("MACPLANE_OUT_DIR") or "."


def _fail(resp) -> None:
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    print(f"error: {detail}", file=sys.stderr)
    sys.exit(1)


def cmd_run(args) -> int:
    payload = _config_payload(args.config)
    payload["seed"] = args.seed
    payload["validate_trace"] = args.validate_trace
    with _client(args.server) as client:
        resp = client.post("/runs", json=payload)
        if resp.status_code != 200:
            _fail(resp)
        body = resp.json()
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    base = f"{body['name']}_seed{body['seed']}"
    trace_path = os.path.join(out, f"{base}.trace.jsonl")
    summary_path = os.path.join(out, f"{base}.summary.csv")
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write(body["trace_jsonl"])
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(body["summary_csv"])
    print(f"wrote {trace_path} ({body['trace_records']} records)")
    print(f"wrote {summary_path}")
    if body.get("violations"):
        print(f"trace validator: {len(body['violations'])} violation(s)",
              file=sys.stderr)
        for v in body["violations"][:20]:
            print(f"  {v}", file=sys.stderr)
        return 1
    if args.validate_trace:
        print("trace validator: clean")
    return 0


def cmd_sweep(args) -> int:
    payload = _config_payload(args.config)
    payload["axis"] = args.axis
    payload["values"] = [_parse_value(v) for v in args.values.split(",")]
    payload["seeds"] = [int(s) for s in args.seeds.split(",")]
    with _client(args.server) as client:
        resp = client.post("/sweeps", json=payload)
        if resp.status_code != 200:
            _fail(resp)
        body = resp.json()
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    name = os.path.splitext(os.path.basename(args.config))[0]
    path = os.path.join(out, f"{name}_sweep_{args.axis}.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(body["csv"])
    print(f"wrote {path} ({len(body['rows'])} rows)")
    return 0


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def cmd_list_scenarios(args) -> int:
    with _client(args.server) as client:
        resp = client.get("/scenarios")
        if resp.status_code != 200:
            _fail(resp)
        for s in resp.json():
            print(f"{s['name']:6s} [{s['variant']}] {s['description']}")
    return 0


def cmd_validate(args) -> int:
    payload = _config_payload(args.config)
    if "scenario" in payload:
        print(f"{args.config}: builtin scenario, valid")
        return 0
    with _client(args.server) as client:
        resp = client.post("/validate", json=payload)
        if resp.status_code != 200:
            _fail(resp)
        body = resp.json()
    if body["valid"]:
        print(f"{args.config}: valid")
        return 0
    for err in body["errors"]:
        print(f"{args.config}: {err}", file=sys.stderr)
    return 1


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("macplane.api:app", host=args.host, port=args.port)
    return 0


def cmd_show(args) -> int:
    with _client(args.server) as client:
        resp = client.get(f"/scenarios/{args.name}")
        if resp.status_code != 200:
            _fail(resp)
        print(json.dumps(resp.json(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="macplane",
        description="MAC channel-access simulator: contention baseline vs "
                    "plane-separated reservation variant.",
    )
    p.add_argument("--server", default=None,
                   help="URL of a running service (default: in-process)")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one scenario, write trace+summary")
    runp.add_argument("--config", required=True,
                      help="config file path or builtin scenario name")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--validate-trace", action="store_true",
                      help="run the invariant suite on the produced trace")
    runp.set_defaults(fn=cmd_run)

    swp = sub.add_parser("sweep", help="run a parameter sweep, write a CSV")
    swp.add_argument("--config", required=True)
    swp.add_argument("--axis", required=True,
                     help="mcs | bandwidth | sp_duty | n_stations | rts_threshold")
    swp.add_argument("--values", required=True, help="comma-separated values")
    swp.add_argument("--seeds", default="1", help="comma-separated seeds")
    swp.add_argument("--out", default=None)
    swp.set_defaults(fn=cmd_sweep)

    lsp = sub.add_parser("list-scenarios", help="list builtin scenarios")
    lsp.set_defaults(fn=cmd_list_scenarios)

    vp = sub.add_parser("validate", help="validate a config file")
    vp.add_argument("--config", required=True)
    vp.set_defaults(fn=cmd_validate)

    shp = sub.add_parser("show-scenario", help="print a builtin config as JSON")
    shp.add_argument("name")
    shp.set_defaults(fn=cmd_show)

    srv = sub.add_parser("serve", help="serve the HTTP API")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
