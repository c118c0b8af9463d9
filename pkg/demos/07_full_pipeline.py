"""Drive the CLI end to end on the bundled golden fixture: represent ->
measure -> eval -> cluster -> report, into a temporary directory."""

import json
import shutil
import tempfile
from pathlib import Path

from framelens.cli import main

GOLDEN = Path(__file__).resolve().parent.parent / "fixtures" / "golden"

workdir = Path(tempfile.mkdtemp(prefix="framelens-demo-"))
out = workdir / "run"
(out / "prompts").mkdir(parents=True)
for topic in ("energy", "transit"):
    shutil.copy(GOLDEN / "prompts" / f"{topic}.jsonl", out / "prompts")

config = json.loads((GOLDEN / "config.json").read_text())
config.update({
    "scorer": {"stub": str(GOLDEN / "stub_tables.json")},
    "ground_truth": {"mbr": str(GOLDEN / "mbr.csv")},
    "normalization": "domain",
    "output_dir": str(out),
})
config_path = workdir / "config.json"
config_path.write_text(json.dumps(config, indent=2))

for stage in ("represent", "measure", "eval", "cluster", "report"):
    print(f"\n$ framelens {stage} --config {config_path}")
    status = main([stage, "--config", str(config_path)])
    assert status == 0, f"stage {stage} failed"

print("\n== aggregated report ==")
print((out / "report" / "agreement_grid.csv").read_text())
print(f"all outputs under {out}")
