"""Command-line entrypoint: ``serve`` runs the HTTP service, ``query``
runs one deterministic turn and prints the answer, making the whole
pipeline usable without the UI."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .orchestrator import TurnMode
from .service import ServiceConfig, build_app, build_components


def _load_config(path_arg) -> ServiceConfig:
    path = path_arg or os.environ.get("OCEANQUERY_CONFIG") or "service.config.json"
    if not Path(path).exists():
        sys.exit(f"config file not found: {path} (pass --config or set OCEANQUERY_CONFIG)")
    return ServiceConfig.from_file(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="oceanquery")
    parser.add_argument("--config", help="path to service config JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the HTTP service")

    q = sub.add_parser("query", help="answer one question and print the result")
    q.add_argument("text", help="the question")
    q.add_argument("--mode", choices=[m.value for m in TurnMode],
                   default=TurnMode.DETERMINISTIC.value)

    args = parser.parse_args(argv)
    config = _load_config(args.config)

    if args.command == "serve":
        import uvicorn

        uvicorn.run(build_app(config), host=config.host, port=config.port)
        return 0

    parts = build_components(config)
    answer = parts["orchestrator"].run_turn(args.text, TurnMode(args.mode))
    print(json.dumps(answer.to_dict(), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
