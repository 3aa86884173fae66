"""Length-prefixed wire protocol for driving environments remotely.

Frames are a 4-byte big-endian unsigned length followed by a UTF-8 JSON
body. JSON floats round-trip exactly (shortest-repr encoding on write,
exact parse on read), so wire-driven trajectories match in-process ones
bit-for-bit on serialized reals.

Client -> server message types: ``reset`` (carries a config table),
``step`` (carries ``action`` of 3 reals), ``close``. Server -> client:
``obs`` (after reset), ``transition`` (after step), ``error`` (with a
``kind`` tag; the connection stays alive for recoverable errors). A close
is acknowledged by the server simply closing the connection.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO, Dict, List, Optional

HEADER_SIZE = 4
MAX_FRAME = 64 * 1024 * 1024

CLIENT_TYPES = ("reset", "step", "close")
SERVER_TYPES = ("obs", "transition", "error")


class ProtocolError(ValueError):
    pass


def encode_frame(message: Dict) -> bytes:
    """Serialize a message dict into one length-prefixed frame."""
    try:
        body = json.dumps(message, separators=(",", ":"), ensure_ascii=False,
                          allow_nan=False).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"unencodable message: {exc}") from exc
    if len(body) > MAX_FRAME:
        raise ProtocolError(f"frame too large: {len(body)} bytes")
    return struct.pack(">I", len(body)) + body


def decode_frame(data: bytes) -> Dict:
    """Inverse of encode_frame for a complete frame buffer."""
    if len(data) < HEADER_SIZE:
        raise ProtocolError("truncated frame header")
    (length,) = struct.unpack(">I", data[:HEADER_SIZE])
    body = data[HEADER_SIZE:]
    if len(body) != length:
        raise ProtocolError(f"length mismatch: header {length}, body {len(body)}")
    return _parse_body(body)


def _parse_body(body: bytes) -> Dict:
    try:
        message = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed body: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolError("body must be an object with a 'type' field")
    return message


def read_frame(stream: BinaryIO) -> Optional[Dict]:
    """Read one frame from a blocking stream; None on clean EOF."""
    header = _read_exact(stream, HEADER_SIZE, allow_eof=True)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame too large: {length} bytes")
    body = _read_exact(stream, length, allow_eof=False)
    return _parse_body(body)


def write_frame(stream: BinaryIO, message: Dict) -> None:
    stream.write(encode_frame(message))
    stream.flush()


def _read_exact(stream: BinaryIO, n: int, allow_eof: bool) -> Optional[bytes]:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            if allow_eof and remaining == n:
                return None
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


# ---------------------------------------------------------------------------
# message builders and validation
# ---------------------------------------------------------------------------


def reset_message(config: Optional[Dict] = None) -> Dict:
    return {"type": "reset", "config": config or {}}

def step_message(action: List[float]) -> Dict:
    return {"type": "step", "action": [float(a) for a in action]}

def close_message() -> Dict:
    return {"type": "close"}

def obs_message(obs: List[List[float]], info: Dict) -> Dict:
    return {"type": "obs", "obs": obs, "info": info}

def transition_message(obs: List[List[float]], reward: float, done: bool,
                       info: Dict) -> Dict:
    return {"type": "transition", "obs": obs, "reward": reward, "done": done,
            "info": info}

def error_message(kind: str, detail: str = "") -> Dict:
    return {"type": "error", "kind": kind, "detail": detail}


def validate_action(message: Dict) -> List[float]:
    action = message.get("action")
    if (not isinstance(action, list) or len(action) != 3
            or not all(isinstance(a, (int, float)) for a in action)):
        raise ProtocolError("step requires 'action' of 3 numbers")
    return [float(a) for a in action]
