"""Command-line interface: a thin client over the HTTP service.

Every data-shaped subcommand builds a request, sends it to the service
(an in-process app by default, or a live server via --base-url), and
writes the response payloads to local files. ``serve`` hosts the servers
themselves: the framed TCP protocol for training loops and, optionally,
the HTTP API.

Exit codes: 0 success, 1 runtime failure, 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import httpx


def _client(base_url: Optional[str]) -> httpx.Client:
    if base_url:
        return httpx.Client(base_url=base_url, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # starlette testclient deprecation
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(client: httpx.Client, path: str, payload: Dict) -> Dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise CliError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


class CliError(RuntimeError):
    pass


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="ascii") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _load_config_dict(path: Optional[str]) -> Dict:
    if not path:
        return {}
    import os

    from .runconfig import RunConfigError, load_run_config

    try:
        _, _, raw = load_run_config(path)
    except RunConfigError as exc:
        raise CliError(str(exc)) from exc
    # inline a replay file so the request is self-contained for any server
    data = raw.get("data", {})
    if data.get("kind") == "replay" and "file" in data:
        file_path = data["file"]
        if not os.path.isabs(file_path):
            file_path = os.path.join(os.path.dirname(os.path.abspath(path)),
                                     file_path)
        data = dict(data)
        data["messages_csv"] = _read(file_path)
        del data["file"]
        raw = dict(raw)
        raw["data"] = data
    return raw


def _parse_action(text: str) -> List[float]:
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise CliError(f"bad action {text!r}: {exc}") from exc
    if len(parts) != 3:
        raise CliError("action must have exactly 3 comma-separated values")
    return parts


def _parse_action_file(path: str) -> List[Tuple[int, List[float]]]:
    """Piecewise schedule CSV: header step,a1,a2,a3; later rows override."""
    pieces = []
    lines = _read(path).splitlines()
    if not lines or lines[0] != "step,a1,a2,a3":
        raise CliError(f"{path}: expected header 'step,a1,a2,a3'")
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise CliError(f"{path}:{i}: expected 4 fields")
        try:
            pieces.append((int(parts[0]), [float(x) for x in parts[1:]]))
        except ValueError as exc:
            raise CliError(f"{path}:{i}: {exc}") from exc
    if not pieces:
        raise CliError(f"{path}: no action rows")
    return pieces


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args: argparse.Namespace) -> int:
    payload = {
        "seed": args.seed, "duration_s": args.duration_s,
        "limit_rate": args.limit_rate, "market_rate": args.market_rate,
        "cancel_rate": args.cancel_rate, "size_mean": args.size_mean,
        "level_decay": args.level_decay, "init_mid": args.init_mid,
        "init_depth": args.init_depth,
    }
    with _client(args.base_url) as client:
        out = _post(client, "/data/generate", payload)
    _write(args.out, out["csv"])
    print(f"wrote {out['records']} records to {args.out}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    payload = {
        "messages_csv": _read(args.messages),
        "depth_every_s": args.depth_every_s,
        "event_log": args.event_log is not None,
    }
    with _client(args.base_url) as client:
        out = _post(client, "/replay", payload)
    _write(args.trades_out, out["trades_csv"])
    print(f"replayed {out['messages']} messages: {out['trades']} trades, "
          f"{out['skipped_cancels']} stale cancels")
    if args.depth_out:
        if not out.get("depth_csv"):
            raise CliError("--depth-out requires --depth-every-s")
        _write(args.depth_out, out["depth_csv"])
    if args.event_log:
        _write(args.event_log, out["event_log_csv"])
    return 0


def _run_episodes(args: argparse.Namespace, baseline: bool,
                  policy: Optional[Dict]) -> int:
    payload = {
        "config": _load_config_dict(args.config),
        "baseline": baseline,
        "policy": policy,
    }
    with _client(args.base_url) as client:
        out = _post(client, "/episodes/run", payload)
    _write(args.report_out, out["report_csv"])
    print(f"{out['episodes']} episode(s) -> {args.report_out}")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    return _run_episodes(args, baseline=True, policy=None)


def cmd_eval(args: argparse.Namespace) -> int:
    if args.action_file:
        policy = {"pieces": _parse_action_file(args.action_file)}
    else:
        policy = {"constant": _parse_action(args.action)}
    return _run_episodes(args, baseline=False, policy=policy)


def cmd_features(args: argparse.Namespace) -> int:
    payload = {
        "messages_csv": _read(args.messages),
        "interval_s": args.interval_s,
        "total_volume": args.total_volume,
        "steps": args.steps,
    }
    with _client(args.base_url) as client:
        out = _post(client, "/features", payload)
    _write(args.out, out["csv"])
    print(f"wrote {out['rows']} feature rows to {args.out}")
    return 0


def _parse_bind(text: str) -> Tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise CliError(f"bad bind address {text!r}; expected host:port")
    return host, int(port)


def cmd_serve(args: argparse.Namespace) -> int:
    from .tcpserver import EnvServer

    base_config = _load_config_dict(args.episodes_config)
    host, port = _parse_bind(args.bind)
    server = EnvServer((host, port), base_config)
    bhost, bport = server.bound_address
    print(f"protocol server on {bhost}:{bport}", flush=True)

    if args.http:
        import uvicorn

        from .service import create_app

        hhost, hport = _parse_bind(args.http)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        print(f"http service on {hhost}:{hport}", flush=True)
        uvicorn.run(create_app(base_config), host=hhost, port=hport,
                    log_level="warning")
    else:
        server.serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exec-arena",
        description="Multi-agent LOB execution simulator and RL environment",
    )
    parser.add_argument("--base-url", default=None,
                        help="drive a remote service instead of in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic message day")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration-s", type=float, default=3600.0)
    p.add_argument("--limit-rate", type=float, default=5.0)
    p.add_argument("--market-rate", type=float, default=0.5)
    p.add_argument("--cancel-rate", type=float, default=0.05)
    p.add_argument("--size-mean", type=float, default=100.0)
    p.add_argument("--level-decay", type=float, default=0.5)
    p.add_argument("--init-mid", type=int, default=10_000)
    p.add_argument("--init-depth", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("replay", help="replay a message CSV into market logs")
    p.add_argument("--messages", required=True)
    p.add_argument("--trades-out", required=True)
    p.add_argument("--depth-out", default=None)
    p.add_argument("--depth-every-s", type=float, default=None)
    p.add_argument("--event-log", default=None,
                   help="also dump the kernel event log CSV here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("baseline", help="teacher-only TWAP episodes")
    p.add_argument("--config", required=True)
    p.add_argument("--report-out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="scripted-policy episodes")
    p.add_argument("--config", required=True)
    p.add_argument("--action", default="0,0,0",
                   help="constant action a1,a2,a3")
    p.add_argument("--action-file", default=None,
                   help="piecewise schedule CSV (step,a1,a2,a3)")
    p.add_argument("--report-out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("features", help="message CSV in, feature CSV out")
    p.add_argument("--messages", required=True)
    p.add_argument("--interval-s", type=float, default=60.0)
    p.add_argument("--total-volume", type=int, default=1000)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("serve", help="host the protocol server (and HTTP API)")
    p.add_argument("--bind", default="127.0.0.1:9000")
    p.add_argument("--http", default=None,
                   help="also serve the HTTP API on host:port")
    p.add_argument("--episodes-config", default=None,
                   help="base run config merged into every reset")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"error: transport failure: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
