"""Single-connection environment server.

One TCP connection drives one fresh environment instance; requests are
newline-delimited JSON objects and each gets exactly one response, in order.
Parallel training means running several server processes -- the handler is
deliberately single-threaded.
"""

from __future__ import annotations

import json
import socketserver

import numpy as np

from gridsignal.env import EnvError, TrafficEnv
from gridsignal.harness import load_config


def env_factory_from_config(path: str):
    """Build a zero-argument environment factory from an experiment config.

    The served environment uses the unfluctuated OD matrix, matching what a
    training run sees; fluctuation sweeps stay on the harness side.
    """
    config = load_config(path)

    def factory() -> TrafficEnv:
        return TrafficEnv(config.network, config.od, config.reward_params)

    return factory


def _jsonable(value):
    """Coerce numpy scalars/arrays nested in dicts and lists to JSON types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        env = self.server.env_factory()
        has_reset = False
        action_count = env.spaces()["action_count"]
        while True:
            line = self.rfile.readline()
            if not line:
                return
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
                if not isinstance(request, dict):
                    raise ValueError("request must be an object")
            except ValueError:
                self._send({"ok": False, "error": "parse"})
                continue

            op = request.get("op")
            if op == "close":
                self._send({"ok": True})
                return
            if op == "spaces":
                self._send({"ok": True, "info": env.spaces()})
            elif op == "reset":
                state = env.reset(seed=int(request.get("seed", 0)))
                has_reset = True
                self._send({"ok": True, "state": state.tolist()})
            elif op == "step":
                if not has_reset:
                    self._send({"ok": False, "error": "not_reset"})
                    continue
                action = request.get("action")
                if not isinstance(action, int) or not 0 <= action < action_count:
                    self._send({"ok": False, "error": "action_range"})
                    continue
                try:
                    result = env.step(action)
                except EnvError as exc:
                    self._send({"ok": False, "error": "finished", "message": str(exc)})
                    continue
                self._send(
                    {
                        "ok": True,
                        "state": result.state.tolist(),
                        "reward": float(result.reward),
                        "terminated": bool(result.terminated),
                        "truncated": bool(result.truncated),
                        "info": _jsonable(result.info),
                    }
                )
            else:
                self._send({"ok": False, "error": "parse"})

    def _send(self, payload: dict) -> None:
        self.wfile.write((json.dumps(payload) + "\n").encode())
        self.wfile.flush()


class EnvBridgeServer(socketserver.TCPServer):
    """Serves one environment per connection on (host, port); port 0 binds an
    ephemeral port, readable afterwards from ``server_address``."""

    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], env_factory):
        super().__init__(address, _Handler)
        self.env_factory = env_factory

    @property
    def port(self) -> int:
        return self.server_address[1]
