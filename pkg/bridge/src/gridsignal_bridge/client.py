"""Client wrapper presenting the wire as an ordinary environment object."""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass

import numpy as np


class BridgeError(RuntimeError):
    """Connection or protocol failure; the message names the failing op."""


@dataclass
class RemoteStep:
    state: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


class RemoteEnv:
    """``reset(seed)`` / ``step(action)`` facade over one server connection.

    Matches the in-process environment contract: observations arrive as an
    M x M float array with values in [0, 1], episode end is reported through
    the ``truncated`` flag, and stepping a finished episode raises.
    """

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise BridgeError(f"connect to {host}:{port} failed: {exc}") from exc
        self._reader = self._sock.makefile("rb")

    def _call(self, request: dict) -> dict:
        op = request.get("op", "?")
        try:
            self._sock.sendall((json.dumps(request) + "\n").encode())
            line = self._reader.readline()
        except OSError as exc:
            raise BridgeError(f"connection lost during {op!r}: {exc}") from exc
        if not line:
            raise BridgeError(f"connection closed during {op!r}")
        response = json.loads(line)
        if not response.get("ok"):
            code = response.get("error", "unknown")
            message = response.get("message", code)
            raise BridgeError(f"{op!r} failed ({code}): {message}")
        return response

    def spaces(self) -> dict:
        return self._call({"op": "spaces"})["info"]

    def reset(self, seed: int) -> np.ndarray:
        response = self._call({"op": "reset", "seed": int(seed)})
        return np.asarray(response["state"], dtype=float)

    def step(self, action: int) -> RemoteStep:
        response = self._call({"op": "step", "action": int(action)})
        return RemoteStep(
            state=np.asarray(response["state"], dtype=float),
            reward=response["reward"],
            terminated=response["terminated"],
            truncated=response["truncated"],
            info=response["info"],
        )

    def close(self) -> None:
        try:
            self._call({"op": "close"})
        except BridgeError:
            pass
        finally:
            self._reader.close()
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
