"""Client side of the external-classifier bridge protocol.

The pipeline launches the backend as a child process and exchanges
frames over its stdin/stdout.  A frame is a 4-byte big-endian unsigned
length followed by that many bytes of UTF-8 JSON.  The session is
strictly request/response:

    hello            -> hello_ack (version + backend name)
    train            -> train_done
    predict          -> proba (one 4-probability row per path)
    shutdown         (no response; ends the session)

Any frame of type "error" aborts the fold.  Handles are single-owner;
requests on one handle are never interleaved.
"""

import json
import os
import select
import shlex
import struct
import subprocess
import time
from dataclasses import dataclass, field

from .errors import BackendError

PROTOCOL_VERSION = 1
_HEADER = struct.Struct(">I")
_MAX_FRAME = 64 * 1024 * 1024
DEFAULT_TIMEOUT = 120.0


@dataclass(eq=False)
class BackendHandle:
    """Transport to one external classifier process."""

    process: subprocess.Popen
    command: list[str]
    timeout: float = DEFAULT_TIMEOUT
    name: str = ""
    version: int = 0
    ready: bool = field(default=False, repr=False)

    def close(self):
        if self.process.poll() is None:
            try:
                send_frame(self, {"type": "shutdown"})
            except BackendError:
                pass
            try:
                self.process.stdin.close()
            except OSError:
                pass
            try:
                self.process.wait(timeout=min(10.0, self.timeout))
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def launch_backend(command: str | list[str], timeout: float = DEFAULT_TIMEOUT) -> BackendHandle:
    """Start the backend process; the handshake is a separate step."""
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    if not argv:
        raise BackendError("empty backend command")
    try:
        process = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
    except OSError as exc:
        raise BackendError(f"cannot launch backend {argv[0]!r}: {exc}") from exc
    return BackendHandle(process=process, command=argv, timeout=timeout)


def send_frame(handle: BackendHandle, message: dict):
    payload = json.dumps(message, separators=(",", ":")).encode("utf-8")
    try:
        handle.process.stdin.write(_HEADER.pack(len(payload)) + payload)
        handle.process.stdin.flush()
    except (BrokenPipeError, OSError) as exc:
        raise BackendError(
            f"backend {handle.name or handle.command[0]!r} closed its input: {exc}"
        ) from exc


def _read_exact(handle: BackendHandle, n: int, what: str) -> bytes:
    stream = handle.process.stdout
    deadline = time.monotonic() + handle.timeout
    chunks = []
    got = 0
    while got < n:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise BackendError(f"timeout after {handle.timeout:.0f}s waiting for {what}")
        ready, _, _ = select.select([stream], [], [], remaining)
        if not ready:
            continue
        chunk = os.read(stream.fileno(), n - got)
        if not chunk:
            raise BackendError(f"backend exited mid-frame while sending {what}")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def recv_frame(handle: BackendHandle) -> dict:
    header = _read_exact(handle, _HEADER.size, "frame header")
    (length,) = _HEADER.unpack(header)
    if length > _MAX_FRAME:
        raise BackendError(f"frame length {length} exceeds limit {_MAX_FRAME}")
    payload = _read_exact(handle, length, "frame payload")
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BackendError(f"frame is not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise BackendError("frame is not a JSON object with a 'type' field")
    if message["type"] == "error":
        raise BackendError(f"backend error frame: {message.get('message', '<no message>')}")
    return message


def _request(handle: BackendHandle, message: dict, expect: str) -> dict:
    send_frame(handle, message)
    reply = recv_frame(handle)
    if reply["type"] != expect:
        raise BackendError(
            f"expected {expect!r} frame in reply to {message['type']!r}, got {reply['type']!r}"
        )
    return reply


def backend_handshake(handle: BackendHandle) -> BackendHandle:
    """Negotiate the protocol version; must precede train/predict."""
    reply = _request(handle, {"type": "hello", "version": PROTOCOL_VERSION}, "hello_ack")
    version = reply.get("version")
    if version != PROTOCOL_VERSION:
        raise BackendError(
            f"protocol version mismatch: pipeline speaks {PROTOCOL_VERSION}, "
            f"backend answered {version!r}"
        )
    handle.version = version
    handle.name = str(reply.get("name", ""))
    handle.ready = True
    return handle


def backend_train(handle: BackendHandle, train_items, val_items):
    """Send (path, label) rows for the train and validation sets."""
    if not handle.ready:
        raise BackendError("handshake has not completed")
    message = {
        "type": "train",
        "train": [{"path": p, "label": int(lab)} for p, lab in train_items],
        "val": [{"path": p, "label": int(lab)} for p, lab in val_items],
    }
    _request(handle, message, "train_done")


def backend_predict(handle: BackendHandle, paths) -> list[list[float]]:
    """Request one probability row per path, in request order."""
    if not handle.ready:
        raise BackendError("handshake has not completed")
    paths = list(paths)
    reply = _request(handle, {"type": "predict", "paths": paths}, "proba")
    rows = reply.get("rows")
    if not isinstance(rows, list) or len(rows) != len(paths):
        raise BackendError(
            f"proba frame carries {len(rows) if isinstance(rows, list) else 'no'} rows "
            f"for {len(paths)} paths"
        )
    for i, row in enumerate(rows):
        if (
            not isinstance(row, list)
            or len(row) != 4
            or not all(isinstance(p, (int, float)) and p >= 0 for p in row)
            or abs(sum(row) - 1.0) > 1e-6
        ):
            raise BackendError(f"proba row {i} is not a 4-class probability vector: {row!r}")
    return [[float(p) for p in row] for row in rows]
