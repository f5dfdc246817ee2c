"""Socket bridge for the gridsignal environment.

The server speaks newline-delimited JSON over a TCP stream; the client wraps
the wire in the usual ``reset(seed)`` / ``step(action)`` environment API so
out-of-process agents can train against the simulator unchanged.
"""

from .client import BridgeError, RemoteEnv, RemoteStep
from .conformance import check_environment
from .server import EnvBridgeServer, env_factory_from_config

__all__ = [
    "BridgeError",
    "EnvBridgeServer",
    "RemoteEnv",
    "RemoteStep",
    "check_environment",
    "env_factory_from_config",
]

__version__ = "0.1.0"
