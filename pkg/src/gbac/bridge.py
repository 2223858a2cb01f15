"""Wire protocol and client for external frame-based environments.

Framing: every message is a 4-byte big-endian unsigned length followed by a
UTF-8 JSON document of exactly that many bytes (max 16 MiB). The transport is
either a child process speaking the protocol over stdio or a TCP connection.
Strictly synchronous: one request, one response, no pipelining.

Handshake: {"cmd": "spec"} -> {"version": "gbac-bridge/1", "id": ..., "h": ...,
"w": ..., "actions": ..., "max_steps": ...}. Frames travel as base64 of
row-major uint8 grayscale bytes and are validated against h*w on receipt.
"""

from __future__ import annotations

import base64
import json
import os
import selectors
import shlex
import socket
import struct
import subprocess

import numpy as np

from .envs import EnvSpec, EnvStep, preprocess

MAX_PAYLOAD = 16 * 1024 * 1024
PROTOCOL_VERSION = "gbac-bridge/1"
DEFAULT_TIMEOUT = 30.0


class BridgeError(RuntimeError):
    """Base for everything that can go wrong on the wire."""


class BridgeConnectionError(BridgeError):
    """Transport failed: peer exited, connection closed, or timed out."""


class BridgeProtocolError(BridgeError):
    """Peer is reachable but spoke the protocol wrong."""


class BridgeFrameError(BridgeError):
    """Frame payload inconsistent with the advertised dimensions."""


# ---------------------------------------------------------------------------
# framing


def encode_message(obj: dict) -> bytes:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_PAYLOAD:
        raise BridgeProtocolError(
            f"outbound message of {len(payload)} bytes exceeds the {MAX_PAYLOAD}-byte cap"
        )
    return struct.pack(">I", len(payload)) + payload


def read_exact(read, n: int) -> bytes:
    """Read exactly n bytes from read(k) -> bytes; EOF mid-message is fatal."""
    chunks = []
    got = 0
    while got < n:
        chunk = read(n - got)
        if not chunk:
            raise BridgeConnectionError(
                f"connection closed mid-message ({got} of {n} bytes read)"
            )
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_message(read) -> dict:
    """One length-prefixed JSON document; oversize rejected before the read."""
    header = read_exact(read, 4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_PAYLOAD:
        raise BridgeProtocolError(
            f"inbound length prefix {length} exceeds the {MAX_PAYLOAD}-byte cap"
        )
    payload = read_exact(read, length)
    try:
        msg = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BridgeProtocolError(f"malformed JSON payload: {exc}") from exc
    if not isinstance(msg, dict):
        raise BridgeProtocolError(f"payload must be a JSON object, got {type(msg).__name__}")
    return msg


# ---------------------------------------------------------------------------
# transports


class SubprocessTransport:
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, cmd: str, timeout: float = DEFAULT_TIMEOUT):
        self.cmd = cmd
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                shlex.split(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise BridgeConnectionError(f"cannot spawn bridge command {cmd!r}: {exc}") from exc
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)

    def write(self, data: bytes) -> None:
        if self.proc.poll() is not None:
            raise BridgeConnectionError(
                f"bridge process exited with code {self.proc.returncode}"
            )
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            code = self.proc.poll()
            raise BridgeConnectionError(
                f"bridge process closed its pipe (exit code {code}): {exc}"
            ) from exc

    def read(self, n: int) -> bytes:
        if not self._sel.select(timeout=self.timeout):
            raise BridgeConnectionError(
                f"timed out after {self.timeout}s waiting for the bridge process"
            )
        data = os.read(self.proc.stdout.fileno(), n)
        if not data and self.proc.poll() is not None:
            raise BridgeConnectionError(
                f"bridge process exited with code {self.proc.returncode}"
            )
        return data

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self._sel.close()


class TCPTransport:
    """TCP connection to host:port."""

    def __init__(self, addr: str, timeout: float = DEFAULT_TIMEOUT):
        host, sep, port = addr.rpartition(":")
        if not sep or not port.isdigit():
            raise BridgeConnectionError(f"bridge address must be host:port, got {addr!r}")
        try:
            self.sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        except OSError as exc:
            raise BridgeConnectionError(f"cannot connect to {addr}: {exc}") from exc
        self.sock.settimeout(timeout)

    def write(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise BridgeConnectionError(f"send failed: {exc}") from exc

    def read(self, n: int) -> bytes:
        try:
            return self.sock.recv(n)
        except socket.timeout as exc:
            raise BridgeConnectionError("timed out waiting for the bridge server") from exc
        except OSError as exc:
            raise BridgeConnectionError(f"receive failed: {exc}") from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# client


def _require(msg: dict, field: str, kinds, context: str):
    if field not in msg:
        raise BridgeProtocolError(f"{context} reply missing field {field!r}")
    value = msg[field]
    if kinds is bool:
        if not isinstance(value, bool):
            raise BridgeProtocolError(f"{context} field {field!r} must be a boolean")
        return value
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise BridgeProtocolError(
            f"{context} field {field!r} has wrong type {type(value).__name__}"
        )
    return value


class BridgeClient:
    """Synchronous request/response client over either transport."""

    def __init__(self, cmd: str | None = None, addr: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT):
        if bool(cmd) == bool(addr):
            raise ValueError("exactly one of cmd or addr is required")
        self.transport = (
            SubprocessTransport(cmd, timeout) if cmd else TCPTransport(addr, timeout)
        )

    def request(self, obj: dict) -> dict:
        self.transport.write(encode_message(obj))
        reply = read_message(self.transport.read)
        if "error" in reply:
            raise BridgeProtocolError(f"bridge server error: {reply['error']}")
        return reply

    def handshake(self, seed: int = 0) -> EnvSpec:
        reply = self.request({"cmd": "spec"})
        version = _require(reply, "version", (str,), "spec")
        if version != PROTOCOL_VERSION:
            raise BridgeProtocolError(
                f"protocol version mismatch: we speak {PROTOCOL_VERSION!r}, "
                f"server speaks {version!r}"
            )
        return EnvSpec(
            id=_require(reply, "id", (str,), "spec"),
            frame_h=_require(reply, "h", (int,), "spec"),
            frame_w=_require(reply, "w", (int,), "spec"),
            action_count=_require(reply, "actions", (int,), "spec"),
            max_episode_steps=_require(reply, "max_steps", (int,), "spec"),
            seed=seed,
        )

    def _decode_frame(self, reply: dict, h: int, w: int, context: str) -> np.ndarray:
        b64 = _require(reply, "frame", (str,), context)
        try:
            raw = base64.b64decode(b64, validate=True)
        except Exception as exc:
            raise BridgeFrameError(f"{context} frame is not valid base64: {exc}") from exc
        if len(raw) != h * w:
            raise BridgeFrameError(
                f"{context} frame has {len(raw)} bytes, expected {h}*{w}={h * w}"
            )
        return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)

    def reset(self, seed: int, h: int, w: int) -> np.ndarray:
        reply = self.request({"cmd": "reset", "seed": int(seed)})
        return self._decode_frame(reply, h, w, "reset")

    def step(self, action: int, h: int, w: int) -> tuple[np.ndarray, float, bool]:
        reply = self.request({"cmd": "step", "action": int(action)})
        frame = self._decode_frame(reply, h, w, "step")
        reward = _require(reply, "reward", (int, float), "step")
        done = _require(reply, "done", bool, "step")
        return frame, float(reward), done

    def close(self) -> None:
        self.transport.close()


class BridgeEnv:
    """Remote environment with the same surface as the built-in toy envs.

    Frames arrive as u8 grayscale and leave preprocess() as float32 in [0, 1].
    Episode return/length tallies are kept client-side so EnvStep.info matches
    the toy envs' contract. Stepping a finished episode without reset is a
    protocol error here, before anything touches the wire.
    """

    def __init__(self, cmd: str | None = None, addr: str | None = None, seed: int = 0,
                 timeout: float = DEFAULT_TIMEOUT):
        self.client = BridgeClient(cmd=cmd, addr=addr, timeout=timeout)
        self.spec = self.client.handshake(seed=seed)
        self._seed = seed
        self._episodes = 0
        self._needs_reset = True
        self._return = 0.0
        self._steps = 0

    def reset(self) -> np.ndarray:
        frame = self.client.reset(
            self._seed + self._episodes, self.spec.frame_h, self.spec.frame_w
        )
        self._episodes += 1
        self._needs_reset = False
        self._return = 0.0
        self._steps = 0
        return preprocess(frame)

    def step(self, action: int) -> EnvStep:
        if self._needs_reset:
            raise BridgeProtocolError("step after done without reset")
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"invalid action {action} for {self.spec.id}")
        frame, reward, done = self.client.step(
            action, self.spec.frame_h, self.spec.frame_w
        )
        self._return += reward
        self._steps += 1
        info = None
        if done:
            self._needs_reset = True
            info = {"episode": {"r": self._return, "l": self._steps}}
        return EnvStep(preprocess(frame), reward, done, info)

    def close(self) -> None:
        self.client.close()
