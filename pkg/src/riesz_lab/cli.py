"""Command-line client for the riesz-lab service.

Every subcommand is an HTTP call.  Without ``--server`` the app runs
in-process, so the CLI and a remote server behave identically.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import httpx

from .experiments import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .api import create_app

    with warnings.catch_warnings():
        # starlette flags its httpx-based test client as deprecated; it is still the sync ASGI bridge
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    return TestClient(create_app())


def _read_toml(path: str) -> dict:
    import tomli

    return tomli.loads(Path(path).read_text())


def cmd_run(args) -> int:
    try:
        config = _read_toml(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        config.setdefault("output", {})["dir"] = args.output
    with _client(args.server) as client:
        resp = client.post("/runs", json=config)
    if resp.status_code == 422:
        print(f"config error: {resp.json()['detail']}", file=sys.stderr)
        return EXIT_CONFIG
    if resp.status_code != 200:
        print(f"run failed: {resp.json().get('detail', resp.text)}", file=sys.stderr)
        return EXIT_FAIL
    body = resp.json()
    print(json.dumps(body["summary"], indent=2, sort_keys=True))
    print(f"run {body['run_id']}: {body['verdict']}", file=sys.stderr)
    return body["exit_code"]


def cmd_list(args) -> int:
    with _client(args.server) as client:
        for item in client.get("/experiments").json():
            print(f"{item['kind']:20s} {item['description']}")
    return EXIT_PASS


def cmd_show_cache(args) -> int:
    with _client(args.server) as client:
        info = client.get("/cache").json()
    print(f"cache root: {info['root']} ({'enabled' if info['enabled'] else 'disabled'})")
    for e in info["entries"]:
        print(f"  {e['name']:40s} {e['size']:>12d}  {'ok' if e['valid'] else 'CORRUPT'}")
    if not info["entries"]:
        print("  (empty)")
    return EXIT_PASS


def cmd_export(args) -> int:
    with _client(args.server) as client:
        resp = client.get(f"/runs/{args.run_id}/csv")
    if resp.status_code != 200:
        print(f"unknown run {args.run_id}", file=sys.stderr)
        return EXIT_FAIL
    if args.output:
        Path(args.output).write_text(resp.text)
    else:
        sys.stdout.write(resp.text)
    return EXIT_PASS


def cmd_apply(args) -> int:
    params = {}
    for item in args.param:
        key, _, value = item.partition("=")
        params[key] = float(value)
    text = Path(args.expansion).read_text() if args.expansion != "-" else sys.stdin.read()
    with _client(args.server) as client:
        resp = client.post("/expansions/multiplier", json={"expansion": text, "profile": args.profile, "params": params})
    if resp.status_code != 200:
        print(f"error: {resp.json().get('detail')}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(resp.json()["expansion"])
    return EXIT_PASS


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riesz-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config (TOML)")
    p.add_argument("config")
    p.add_argument("--output", help="directory for results.csv / summary.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list-experiments", help="list experiment kinds")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("show-cache", help="list cached quadrature rules and tables")
    p.set_defaults(func=cmd_show_cache)

    p = sub.add_parser("export", help="print the CSV of a finished run")
    p.add_argument("run_id")
    p.add_argument("--output")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("apply", help="apply a spectral multiplier to an expansion file")
    p.add_argument("expansion", help="expansion text file, or - for stdin")
    p.add_argument("--profile", required=True, choices=["riesz", "band", "bump", "lp", "power"])
    p.add_argument("--param", action="append", default=[], help="name=value, repeatable")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
