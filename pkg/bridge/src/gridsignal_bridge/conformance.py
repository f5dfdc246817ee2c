"""Environment-API conformance checks.

A self-contained version of the checks RL toolkits run against third-party
environments: observation shape/range/dtype, return-value structure, reset
determinism, and rejection of out-of-range actions.  Works against any object
exposing ``spaces() / reset(seed) / step(action)``.
"""

from __future__ import annotations

import numpy as np


class ConformanceFailure(AssertionError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConformanceFailure(message)


def check_environment(env, probe_steps: int = 3, seed: int = 0) -> None:
    """Raise ConformanceFailure on the first contract violation."""
    spaces = env.spaces()
    _require(
        isinstance(spaces, dict) and set(spaces) >= {"state_shape", "action_count"},
        "spaces() must return a dict with state_shape and action_count",
    )
    shape = tuple(spaces["state_shape"])
    action_count = spaces["action_count"]
    _require(len(shape) == 2 and shape[0] == shape[1], "state must be square")
    _require(action_count == 3 * shape[0], "action count must be 3x the grid size")

    first = np.asarray(env.reset(seed))
    _require(first.shape == shape, f"reset state shape {first.shape} != {shape}")
    _require(np.issubdtype(first.dtype, np.floating), "state must be float-valued")
    _require(
        bool(np.all((first >= 0.0) & (first <= 1.0))), "state values must lie in [0, 1]"
    )

    again = np.asarray(env.reset(seed))
    _require(bool(np.array_equal(first, again)), "reset must be deterministic per seed")

    for action in (action_count, -1):
        try:
            env.step(action)
        except Exception:
            pass
        else:
            raise ConformanceFailure(f"out-of-range action {action} was accepted")

    for _ in range(probe_steps):
        result = env.step(0)
        state = np.asarray(result.state)
        _require(state.shape == shape, "step state shape drifted")
        _require(
            bool(np.all((state >= 0.0) & (state <= 1.0))), "step state left [0, 1]"
        )
        _require(isinstance(result.reward, float), "reward must be a float")
        _require(isinstance(result.terminated, bool), "terminated must be a bool")
        _require(isinstance(result.truncated, bool), "truncated must be a bool")
        _require(isinstance(result.info, dict), "info must be a dict")
