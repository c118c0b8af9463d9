"""Regenerate the golden stub fixture: 4 synthetic sources x 2 topics x
6 prompts (4 automatic + 2 candidate-constrained manual per topic), stub
score tables covering source, base, and domain models, and a hand-built
leaning ground truth with one tie.

Run from this directory: python3 make_fixture.py
"""

import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
SOURCES = ["alpha", "beta", "gamma", "delta"]
FAMILY = "tiny"
QA = ["Yes", "True", "Maybe", "No", "False"]

POOLS = {
    "energy": ["cheap", "clean", "costly", "dirty",
               "efficient", "modern", "risky", "vital"],
    "transit": ["crowded", "fast", "green", "late",
                "public", "reliable", "slow", "subsidized"],
}

AUTO_TEXTS = {
    "energy": [
        ("solar_grid", "the new solar grid rollout looks ___MASK___ to local crews"),
        ("wind_farm", "critics call the wind farm project ___MASK___ for the region"),
        ("coal_plant", "shutting the coal plant down was ___MASK___ say residents"),
        ("fuel_tax", "the proposed fuel tax makes heating ___MASK___ this winter"),
    ],
    "transit": [
        ("bus_lane", "the downtown bus lane pilot felt ___MASK___ during rush hour"),
        ("rail_link", "the regional rail link remains ___MASK___ after years of work"),
        ("bike_path", "funding the bike path network is ___MASK___ supporters argue"),
        ("fare_hike", "riders describe the fare hike plan as ___MASK___ and unfair"),
    ],
}

MANUAL_TERMS = {"energy": "Solar power", "transit": "Public transit"}


def build_prompts(topic):
    prompts = []
    for i, (gram, text) in enumerate(AUTO_TEXTS[topic]):
        prompts.append({
            "id": f"{topic}/a{i:02d}:bo:{gram}:0:after",
            "text_with_mask": text,
            "topic": topic,
            "origin": "bigram_outer",
            "anchor": gram.replace("_", " "),
            "candidates": None,
            "gold_token": "fine",
        })
    term = MANUAL_TERMS[topic]
    prompts.append({
        "id": f"manual:{topic}:declarative:qa:affordable",
        "text_with_mask": f"{term} is affordable. ___MASK___",
        "topic": topic,
        "origin": "manual",
        "anchor": "declarative/qa/affordable",
        "candidates": QA,
        "gold_token": None,
    })
    prompts.append({
        "id": f"manual:{topic}:declarative:single:good-bad",
        "text_with_mask": f"{term} is ___MASK___.",
        "topic": topic,
        "origin": "manual",
        "anchor": "declarative/single/good-bad",
        "candidates": ["good", "bad"],
        "gold_token": None,
    })
    return prompts


def main():
    rng = np.random.default_rng(20240811)
    score = {}

    def row_for(tokens, low, high):
        values = rng.uniform(low, high, size=len(tokens)).round(4)
        return {t: float(v) for t, v in zip(tokens, values)}

    prompts_dir = HERE / "prompts"
    prompts_dir.mkdir(exist_ok=True)
    for topic, pool in POOLS.items():
        prompts = build_prompts(topic)
        with (prompts_dir / f"{topic}.jsonl").open("w", encoding="utf-8") as fh:
            for p in prompts:
                fh.write(json.dumps(p, ensure_ascii=False, sort_keys=True) + "\n")

        for source in SOURCES:
            key = f"source:{source}:{topic}:{FAMILY}"
            rows = {}
            for p in prompts:
                if p["candidates"]:
                    tokens = list(p["candidates"])
                    # one source misses one candidate of the single-mode
                    # prompt: exercises zero fill in candidates mode
                    if source == "delta" and p["id"].endswith("good-bad"):
                        tokens = ["good"]
                    rows[p["id"]] = row_for(tokens, 0.02, 0.5)
                else:
                    chosen = sorted(rng.choice(pool, size=4, replace=False))
                    rows[p["id"]] = row_for(chosen, 0.05, 0.3)
            score[key] = rows

        for kind in ("base", "domain"):
            key = f"{kind}:-:{topic}:{FAMILY}"
            rows = {}
            for p in prompts:
                tokens = list(p["candidates"]) if p["candidates"] else pool
                rows[p["id"]] = row_for(tokens, 0.05, 0.5)
            score[key] = rows

    with (HERE / "stub_tables.json").open("w", encoding="utf-8") as fh:
        json.dump({"score": score}, fh, ensure_ascii=False, sort_keys=True,
                  indent=1)
        fh.write("\n")

    (HERE / "mbr.csv").write_text(
        "outlet,leaning\n"
        "alpha,left\n"
        "beta,lean-left\n"
        "gamma,lean-right\n"
        "delta,lean-right\n", encoding="utf-8")

    (HERE / "survey.csv").write_text(
        "outlet,All US adults,Democrat,Republican\n"
        "alpha,40,60,20\n"
        "beta,30,40,20\n"
        "gamma,25,15,35\n"
        "delta,10,2,25\n", encoding="utf-8")

    config = {
        "topics": ["energy", "transit"],
        "sources": SOURCES,
        "prompt_method": "bigram_outer",
        "normalization": "none",
        "k": 3,
        "family": FAMILY,
        "seed": 42,
        "scorer": {"stub": "stub_tables.json"},
        "ground_truth": {"mbr": "mbr.csv"},
        "output_dir": "run_out",
    }
    with (HERE / "config.json").open("w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("fixture written to", HERE)


if __name__ == "__main__":
    main()
