"""Train the model suite from a config file:

    python -m mlm_service.train --config train.json

Config schema::

    {"corpus": "train.jsonl",        # instances: id/text/source/topic JSONL
     "dev_corpus": "dev.jsonl",      # optional, used for classifier eval
     "output_dir": "models",
     "family": "tiny",
     "epochs": 10, "batch_size": 16, "seed": 42}
"""

import argparse
import json
import logging
from pathlib import Path

from .training import load_instances, train_suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mlm-service-train")
    parser.add_argument("--config", required=True)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    config_path = Path(args.config)
    with config_path.open("r", encoding="utf-8") as fh:
        config = json.load(fh)
    base = config_path.parent
    instances = load_instances(base / config["corpus"])
    dev = load_instances(base / config["dev_corpus"]) \
        if config.get("dev_corpus") else None
    registry = train_suite(
        instances, base / config["output_dir"],
        family=config.get("family", "tiny"),
        epochs=config.get("epochs", 10),
        batch_size=config.get("batch_size", 16),
        seed=config.get("seed", 42),
        dev_instances=dev)
    print(f"registered {len(registry.entries)} models under "
          f"{base / config['output_dir']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
