"""Command line entry point: ``gridsignal-bridge serve --config <file> --port <n>``."""

from __future__ import annotations

import argparse
import json
import sys

from .server import EnvBridgeServer, env_factory_from_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gridsignal-bridge")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="serve an environment over the wire")
    serve.add_argument("--config", required=True, help="experiment config JSON")
    serve.add_argument("--port", type=int, required=True, help="TCP port (0 = ephemeral)")
    serve.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)

    try:
        factory = env_factory_from_config(args.config)
        server = EnvBridgeServer((args.host, args.port), factory)
    except Exception as exc:  # configuration or bind failure
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stdout)
        sys.stdout.write("\n")
        return 1

    json.dump({"ok": True, "host": args.host, "port": server.port}, sys.stdout)
    sys.stdout.write("\n")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
