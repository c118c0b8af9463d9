import json
import shutil
from pathlib import Path

import pytest

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "golden"
GOLDEN_TOPICS = ("energy", "transit")
GOLDEN_SOURCES = ("alpha", "beta", "gamma", "delta")


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR


def setup_golden_run(workdir: Path, normalization: str = "none",
                     stub_path: Path | None = None,
                     tag: str = "") -> tuple[Path, Path]:
    """Prepare an output directory seeded with the golden prompt files and a
    config that points at the golden stub tables. Returns (config_path,
    output_dir)."""
    out = workdir / f"out{tag}-{normalization}"
    (out / "prompts").mkdir(parents=True)
    for topic in GOLDEN_TOPICS:
        shutil.copy(GOLDEN_DIR / "prompts" / f"{topic}.jsonl",
                    out / "prompts" / f"{topic}.jsonl")
    config = json.loads((GOLDEN_DIR / "config.json").read_text())
    config["scorer"] = {"stub": str(stub_path or
                                    GOLDEN_DIR / "stub_tables.json")}
    config["ground_truth"] = {"mbr": str(GOLDEN_DIR / "mbr.csv")}
    config["normalization"] = normalization
    config["output_dir"] = str(out)
    config_path = workdir / f"config{tag}-{normalization}.json"
    config_path.write_text(json.dumps(config, sort_keys=True))
    return config_path, out


def run_stage(config_path: Path, stage: str, *extra: str) -> int:
    from framelens.cli import main
    return main([stage, "--config", str(config_path), *extra])
