"""Threaded TCP server exposing reset/step over the framed protocol.

Each connection owns one environment instance, request/response with one
message in flight; concurrent connections are fully independent, which is
how training parallelism is expected to scale (many connections, each a
sequential environment).
"""

from __future__ import annotations

import socket
import socketserver
import threading
from typing import Dict, List, Optional, Tuple

import numpy as np

from .env import EnvError, ExecutionEnv
from .protocol import (
    ProtocolError,
    close_message,
    error_message,
    obs_message,
    read_frame,
    reset_message,
    step_message,
    transition_message,
    validate_action,
    write_frame,
)
from .runconfig import RunConfigError, env_config_from_dict


def merge_config(base: Dict, override: Dict) -> Dict:
    """Section-wise merge: override keys win inside each table."""
    merged: Dict = {}
    for key in set(base) | set(override):
        b, o = base.get(key), override.get(key)
        if isinstance(b, dict) and isinstance(o, dict):
            merged[key] = {**b, **o}
        elif o is not None:
            merged[key] = o
        else:
            merged[key] = b
    return merged


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        env: Optional[ExecutionEnv] = None
        done = False
        while True:
            try:
                message = read_frame(self.rfile)
            except ProtocolError as exc:
                self._send(error_message("protocol", str(exc)))
                return  # cannot resync a corrupt stream
            if message is None:
                return
            mtype = message.get("type")
            try:
                if mtype == "reset":
                    config = merge_config(self.server.base_config,
                                          message.get("config") or {})
                    env = ExecutionEnv(env_config_from_dict(config))
                    result = env.reset()
                    done = False
                    self._send(obs_message(result.observation.tolist(),
                                           _jsonable(result.info)))
                elif mtype == "step":
                    if env is None:
                        self._send(error_message("no_episode",
                                                 "reset before stepping"))
                        continue
                    if done:
                        self._send(error_message("episode_finished",
                                                 "episode is done; reset"))
                        continue
                    action = validate_action(message)
                    result = env.step(action)
                    done = result.done
                    self._send(transition_message(
                        result.observation.tolist(), result.reward,
                        result.done, _jsonable(result.info)))
                elif mtype == "close":
                    return
                else:
                    self._send(error_message("protocol",
                                             f"unknown type {mtype!r}"))
            except ProtocolError as exc:
                self._send(error_message("protocol", str(exc)))
            except (RunConfigError, EnvError, ValueError) as exc:
                self._send(error_message("config", str(exc)))

    def _send(self, message: Dict) -> None:
        write_frame(self.wfile, message)


class EnvServer(socketserver.ThreadingTCPServer):
    """One environment per connection; ``base_config`` seeds every reset."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: Tuple[str, int],
                 base_config: Optional[Dict] = None) -> None:
        super().__init__(address, _Handler)
        self.base_config = base_config or {}

    @property
    def bound_address(self) -> Tuple[str, int]:
        return self.server_address[:2]


def start_server(host: str = "127.0.0.1", port: int = 0,
                 base_config: Optional[Dict] = None) -> Tuple[EnvServer, threading.Thread]:
    """Start an EnvServer on a background thread (tests, embedded use)."""
    server = EnvServer((host, port), base_config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


class EnvClient:
    """Blocking client for the framed protocol; one environment per socket."""

    def __init__(self, host: str, port: int, timeout: float = 60.0) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")

    def _request(self, message: Dict) -> Dict:
        write_frame(self.wfile, message)
        reply = read_frame(self.rfile)
        if reply is None:
            raise ProtocolError("server closed the connection")
        return reply

    def reset(self, config: Optional[Dict] = None) -> Dict:
        return self._request(reset_message(config))

    def step(self, action: List[float]) -> Dict:
        return self._request(step_message(action))

    def close(self) -> None:
        try:
            write_frame(self.wfile, close_message())
        except OSError:
            pass
        finally:
            self.rfile.close()
            self.wfile.close()
            self.sock.close()
