"""Command line client for the run service.

By default commands execute in process against the FastAPI app through
an ASGI transport; --server points the same client at a remote
instance. Exit codes: 0 when every enabled check passed, 1 for a failed
check or a runtime solver error, 2 for configuration errors.
"""

import argparse
import asyncio
import sys

import httpx

from .service import create_app

_EXIT_OK = 0
_EXIT_FAIL = 1
_EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thinlab",
        description="Thin-obstacle finite-difference laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="path to a run configuration file")
        p.add_argument("--out", default=None,
                       help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override for randomized checks")
        p.add_argument("--server", default=None,
                       help="base URL of a running service; default runs "
                            "in process")

    p = sub.add_parser("solve", help="run one solve and persist artifacts")
    common(p)
    p = sub.add_parser("verify", help="solve then run the enabled checks")
    common(p)
    p.add_argument("--check", action="append", default=None, metavar="NAME",
                   help="enable only this check (repeatable)")
    p = sub.add_parser("sweep", help="run a penalty or mesh schedule")
    common(p)
    p.add_argument("--axis", required=True, choices=("penalty_k", "mesh_h"))
    p = sub.add_parser("oracle-compare",
                       help="projection solve against the brute-force oracle")
    common(p)
    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _post(args, path, body) -> httpx.Response:
    if args.server:
        with httpx.Client(base_url=args.server, timeout=None) as client:
            return client.post(path, json=body)

    async def in_process():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://thinlab",
                                     timeout=None) as client:
            return await client.post(path, json=body)

    return asyncio.run(in_process())


def _request_body(args):
    """Request payload from the parsed flags, or None if the config file
    cannot be read (the caller exits with the config error code)."""
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print("error: cannot read config: %s" % exc, file=sys.stderr)
        return None
    body = {"config_text": text}
    if args.out is not None:
        body["out_dir"] = args.out
    if args.seed is not None:
        body["seed"] = args.seed
    if getattr(args, "check", None):
        body["checks"] = args.check
    return body


def _print_manifest(payload):
    print("command: %s" % payload["command"])
    for entry in payload["summary"]:
        status = "pass" if entry["passed"] else "FAIL"
        print("  %-22s %s  %s" % (entry["check"], status, entry["detail"]))
    print("files: %d, overall: %s"
          % (len(payload["files"]),
             "pass" if payload["overall"] else "fail"))


def _run(args) -> int:
    body = _request_body(args)
    if body is None:
        return _EXIT_CONFIG
    path = {"solve": "/runs/solve", "verify": "/runs/verify",
            "sweep": "/runs/sweep",
            "oracle-compare": "/runs/oracle-compare"}[args.command]
    if args.command == "sweep":
        body["axis"] = args.axis
    response = _post(args, path, body)
    if response.status_code == 422:
        detail = response.json().get("detail")
        if isinstance(detail, dict):
            kind = detail.get("error", "error")
            print("%s: %s" % (kind, detail.get("message", "")),
                  file=sys.stderr)
            return _EXIT_CONFIG if kind == "ConfigError" else _EXIT_FAIL
        print("request error: %s" % (detail,), file=sys.stderr)
        return _EXIT_CONFIG
    response.raise_for_status()
    payload = response.json()
    _print_manifest(payload)
    if payload["overall"]:
        return _EXIT_OK
    failed = [e["check"] for e in payload["summary"] if not e["passed"]]
    print("failed checks: %s" % ", ".join(failed), file=sys.stderr)
    return _EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return _EXIT_OK
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
