"""Serve the embedding model over HTTP."""

from __future__ import annotations

import argparse

import uvicorn

from .app import ServiceConfig, create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-service")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="start the embedding service")
    serve.add_argument("--model", default="hash:384", help="hash:<dim> or st:<model-id>")
    serve.add_argument("--port", type=int, default=8099)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--max-batch", type=int, default=64)
    serve.add_argument("--no-normalize", action="store_true")
    args = parser.parse_args(argv)

    config = ServiceConfig(
        model=args.model,
        port=args.port,
        max_batch=args.max_batch,
        normalize=not args.no_normalize,
    )
    uvicorn.run(create_app(config), host=args.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
