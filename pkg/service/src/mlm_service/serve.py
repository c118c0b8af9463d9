"""Run the service: python -m mlm_service.serve --registry registry.json"""

import argparse
import logging

from .app import serve
from .registry import ModelRegistry


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mlm-service-serve")
    parser.add_argument("--registry", required=True,
                        help="registry.json produced by training")
    parser.add_argument("--port", type=int, default=8400)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    serve(ModelRegistry.from_file(args.registry), port=args.port,
          host=args.host)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
