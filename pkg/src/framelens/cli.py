"""Pipeline orchestration: subcommands over a shared run config.

Stages write their module's output files under the run's output directory
plus a manifest entry (config hash, input/output content hashes, package
version). Outputs carry no timestamps or absolute paths, so re-running a
stage with unchanged inputs rewrites byte-identical content. One command at
a time per output directory, enforced with a lock file.

Subcommands: ingest, prompts, represent, measure, eval, baseline, cluster,
report. The environment variable FRAMELENS_SCORER_URL overrides the
configured scorer backend with an HTTP endpoint.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock, Timeout

from . import __version__
from . import baselines as bl
from . import corpus as cp
from . import groundtruth as gt
from . import measure as ms
from . import prompts as pg
from . import represent as rp
from .scorer import HttpBackend, ModelId, ScorerClient, StubBackend

log = logging.getLogger(__name__)

SCORER_URL_ENV = "FRAMELENS_SCORER_URL"
EXTREMES_K = 5


class CliError(RuntimeError):
    pass


@dataclass
class RunConfig:
    topics: list[str]
    sources: list[str]
    output_dir: Path
    prompt_method: str = "bigram_outer"
    normalization: str = "none"
    k: int = 10
    family: str = "default"
    seed: int = 42
    scorer: dict = field(default_factory=dict)
    ground_truth: dict = field(default_factory=dict)
    raw_dir: Path | None = None
    manual_templates: Path | None = None
    baseline_method: str = "tfidf"
    max_words: int = 256
    dev_fraction: float = 0.10
    promptgen: dict = field(default_factory=dict)
    lda: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.topics or not self.sources:
            raise CliError("config needs non-empty topics and sources")
        if self.normalization not in rp.NORMALIZATION_MODES:
            raise CliError(f"unknown normalization {self.normalization!r}")
        if self.prompt_method not in pg.ORIGINS:
            raise CliError(f"unknown prompt method {self.prompt_method!r}")
        if self.scorer and set(self.scorer) - {"stub", "http"}:
            raise CliError(f"unknown scorer backend keys: "
                           f"{sorted(set(self.scorer) - {'stub', 'http'})}")
        if len(self.scorer) > 1:
            raise CliError("config must name exactly one scorer backend")

    def corpus_config(self) -> cp.CorpusConfig:
        return cp.CorpusConfig(max_words=self.max_words,
                               dev_fraction=self.dev_fraction,
                               split_seed=self.seed)

    def promptgen_config(self) -> pg.PromptGenConfig:
        return pg.PromptGenConfig(seed=self.seed, **self.promptgen)


def load_config(path: str | Path, overrides: argparse.Namespace) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base = path.parent

    def respath(key):
        if raw.get(key):
            raw[key] = base / raw[key]

    respath("output_dir")
    respath("raw_dir")
    respath("manual_templates")
    if "scorer" in raw and "stub" in raw["scorer"]:
        raw["scorer"] = {"stub": str(base / raw["scorer"]["stub"])}
    if "ground_truth" in raw:
        raw["ground_truth"] = {k: str(base / v)
                               for k, v in raw["ground_truth"].items()}

    if getattr(overrides, "topic", None):
        raw["topics"] = [overrides.topic]
    if getattr(overrides, "method", None):
        if overrides.method in bl.BASELINE_METHODS:
            raw["baseline_method"] = overrides.method
        else:
            raw["prompt_method"] = overrides.method
    if getattr(overrides, "normalization", None):
        raw["normalization"] = overrides.normalization
    if getattr(overrides, "backend", None):
        kind, _, value = overrides.backend.partition(":")
        if kind not in ("stub", "http") or not value:
            raise CliError("--backend takes stub:<path> or http:<url>")
        raw["scorer"] = {kind: value}
    if getattr(overrides, "out", None):
        raw["output_dir"] = Path(overrides.out)

    if "output_dir" not in raw:
        raise CliError("config needs output_dir (or pass --out)")
    raw["output_dir"] = Path(raw["output_dir"])
    if raw.get("raw_dir"):
        raw["raw_dir"] = Path(raw["raw_dir"])
    if raw.get("manual_templates"):
        raw["manual_templates"] = Path(raw["manual_templates"])
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise CliError(f"bad config: {exc}")


def make_client(config: RunConfig) -> ScorerClient:
    url = os.environ.get(SCORER_URL_ENV)
    if url:
        return ScorerClient(HttpBackend(url))
    if "http" in config.scorer:
        return ScorerClient(HttpBackend(config.scorer["http"]))
    if "stub" in config.scorer:
        stub_path = Path(config.scorer["stub"])
        if not stub_path.is_file():
            raise CliError(f"stub table not found: {stub_path}")
        return ScorerClient(StubBackend.from_file(stub_path))
    raise CliError("no scorer backend configured "
                   f"(set config.scorer or {SCORER_URL_ENV})")


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, stage: str, parameters: dict,
                    inputs: list[Path], outputs: list[Path]) -> None:
    canonical = json.dumps(parameters, sort_keys=True)
    doc = {
        "command": stage,
        "version": __version__,
        "parameters": parameters,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "inputs": {p.name: _sha256(p) for p in inputs},
        "outputs": {str(p.relative_to(out_dir)): _sha256(p)
                    for p in outputs},
    }
    with (out_dir / f"{stage}.manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise CliError(f"missing {path}; run '{hint}' first")
    return path


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def cmd_ingest(config: RunConfig) -> list[Path]:
    if config.raw_dir is None:
        raise CliError("config needs raw_dir for ingest")
    if not config.raw_dir.is_dir():
        raise CliError(f"raw_dir not found: {config.raw_dir}")
    instances = cp.ingest_tree(config.raw_dir, config.corpus_config())
    if not instances:
        raise CliError(f"no instances found under {config.raw_dir}")
    train, dev = cp.partition(instances, config.corpus_config())
    out = config.output_dir
    paths = [out / "instances.jsonl", out / "train.jsonl", out / "dev.jsonl"]
    cp.save_instances(instances, paths[0])
    cp.save_instances(train, paths[1])
    cp.save_instances(dev, paths[2])
    log.info("ingested %d instances (%d train / %d dev)",
             len(instances), len(train), len(dev))
    _write_manifest(out, "ingest",
                    {"raw_dir": config.raw_dir.name,
                     "max_words": config.max_words,
                     "dev_fraction": config.dev_fraction,
                     "seed": config.seed},
                    [], paths)
    return paths


def _generate_topic_prompts(config: RunConfig, topic: str,
                            dev: list[cp.Instance]) -> list[pg.MaskedPrompt]:
    method = config.prompt_method
    pgconf = config.promptgen_config()
    topic_dev = [i for i in dev
                 if i.topic == topic and i.source in config.sources]
    if method == "manual":
        if config.manual_templates is None:
            raise CliError("prompt method 'manual' needs manual_templates "
                           "in the config")
        templates = [t for t in pg.load_manual_templates(config.manual_templates)
                     if t.topic == topic]
        return pg.expand_manual_templates(templates)
    if not topic_dev:
        raise CliError(f"no dev instances for topic {topic!r}")
    if method == "random":
        return pg.generate_random(topic_dev, pgconf)
    if method == "attention":
        client = make_client(config)
        model = ModelId(kind="classifier", topic=topic, family=config.family)

        def importance(inst: cp.Instance):
            return client.token_importance(model, inst.text, inst.source)

        return pg.generate_attention(topic_dev, importance, pgconf)

    dev_sets = {s: [i for i in topic_dev if i.source == s]
                for s in config.sources}
    if method == "bigram_outer":
        grams = pg.extract_shared_ngrams(dev_sets, 2, pgconf.bo_min_sources)
        generate = pg.generate_bigram_outer
    elif method == "bigram_inner":
        grams = pg.extract_shared_ngrams(dev_sets, 2, pgconf.bi_min_sources)
        generate = pg.generate_bigram_inner
    elif method == "trigram_inner":
        grams = pg.extract_shared_ngrams(dev_sets, 3, pgconf.bi_min_sources)
        generate = pg.generate_trigram_inner
    else:
        raise CliError(f"unknown prompt method {method!r}")
    prompts = []
    for inst in topic_dev:
        prompts.extend(generate(inst, grams))
    return prompts


def cmd_prompts(config: RunConfig) -> list[Path]:
    dev = cp.load_instances(_require(config.output_dir / "dev.jsonl",
                                     "ingest"))
    prompts_dir = config.output_dir / "prompts"
    prompts_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for topic in config.topics:
        prompts = _generate_topic_prompts(config, topic, dev)
        if not prompts:
            log.warning("no prompts generated for topic %s", topic)
        path = prompts_dir / f"{topic}.jsonl"
        pg.save_prompts(prompts, path)
        outputs.append(path)
        log.info("topic %s: %d prompts (%s)", topic, len(prompts),
                 config.prompt_method)
    _write_manifest(config.output_dir, "prompts",
                    {"method": config.prompt_method,
                     "topics": config.topics, "seed": config.seed},
                    [config.output_dir / "dev.jsonl"], outputs)
    return outputs


def cmd_represent(config: RunConfig) -> list[Path]:
    client = make_client(config)
    rep_dir = config.output_dir / "representations"
    rep_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = [], []
    for topic in config.topics:
        prompts_path = _require(
            config.output_dir / "prompts" / f"{topic}.jsonl", "prompts")
        inputs.append(prompts_path)
        prompts = pg.load_prompts(prompts_path)
        rep = rp.build_topic_representation(
            prompts, config.sources, client, mode=config.normalization,
            k=config.k, family=config.family)
        path = rep_dir / f"{topic}.{config.normalization}.json"
        rp.save_representation(rep, path, mode=config.normalization,
                               k=config.k, family=config.family)
        outputs.append(path)
        log.info("topic %s: %d matrices, %d skipped", topic,
                 rep.prompt_count, len(rep.skipped))
    _write_manifest(config.output_dir, "represent",
                    {"normalization": config.normalization, "k": config.k,
                     "family": config.family, "topics": config.topics},
                    inputs, outputs)
    return outputs


def cmd_measure(config: RunConfig) -> list[Path]:
    measures_dir = config.output_dir / "measures"
    measures_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = [], []
    for topic in config.topics:
        rep_path = _require(
            config.output_dir / "representations"
            / f"{topic}.{config.normalization}.json", "represent")
        inputs.append(rep_path)
        rep, _ = rp.load_representation(rep_path)
        dm = ms.distance_matrix(rep)
        rankings = ms.similarity_rankings(dm)
        stem = f"{topic}.{config.normalization}"
        ms.save_distance_matrix(dm, measures_dir / f"{stem}.distances.json")
        ms.save_rankings(rankings, measures_dir / f"{stem}.rankings.json")
        outputs.extend([measures_dir / f"{stem}.distances.json",
                        measures_dir / f"{stem}.rankings.json"])
    _write_manifest(config.output_dir, "measure",
                    {"normalization": config.normalization,
                     "topics": config.topics}, inputs, outputs)
    return outputs


def _load_ground_truth(kind: str, path: Path,
                       sources: list[str]) -> list[ms.SimilarityRanking]:
    if not path.is_file():
        raise CliError(f"ground truth file not found: {path}")
    if kind.startswith("soa"):
        profiles = gt.normalize_survey(gt.load_survey_table(path))
        entries = gt.restrict_outlets(profiles, sources)
    elif kind == "mbr":
        entries = gt.restrict_outlets(gt.load_leaning_scores(path), sources)
    else:
        raise CliError(f"unknown ground truth kind {kind!r} "
                       "(use mbr or soa*)")
    return gt.ground_truth_rankings(entries)


def cmd_eval(config: RunConfig) -> list[Path]:
    if not config.ground_truth:
        raise CliError("config needs ground_truth entries for eval")
    eval_dir = config.output_dir / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = [], []
    for topic in config.topics:
        stem = f"{topic}.{config.normalization}"
        rankings_path = _require(
            config.output_dir / "measures" / f"{stem}.rankings.json",
            "measure")
        rep_path = _require(
            config.output_dir / "representations" / f"{stem}.json",
            "represent")
        inputs.extend([rankings_path, rep_path])
        predicted = ms.load_rankings(rankings_path)
        rep, _ = rp.load_representation(rep_path)
        prompts_path = config.output_dir / "prompts" / f"{topic}.jsonl"
        prompts_by_id = {}
        if prompts_path.is_file():
            prompts_by_id = {p.id: p for p in pg.load_prompts(prompts_path)}

        for kind in sorted(config.ground_truth):
            truth = _load_ground_truth(kind,
                                       Path(config.ground_truth[kind]),
                                       config.sources)
            report = ms.agreement(predicted, truth)
            metadata = {"topic": topic, "normalization": config.normalization,
                        "method": config.prompt_method,
                        "family": config.family, "ground_truth": kind}
            agreement_path = eval_dir / f"{stem}.{kind}.agreement.json"
            ms.save_agreement(report, agreement_path, metadata)
            outputs.append(agreement_path)

            records, skipped = ms.instance_level_agreement(rep, truth)
            if records:
                edges, counts = ms.tau_histogram(records)
                hist_path = eval_dir / f"{stem}.{kind}.tau_histogram.json"
                ms.save_histogram(edges, counts, skipped, hist_path)
                outputs.append(hist_path)
                selection = ms.extreme_instances(
                    records, min(EXTREMES_K, len(records)))
                extremes = ms.extremes_report(selection, rep, prompts_by_id)
                extremes_path = eval_dir / f"{stem}.{kind}.extremes.json"
                with extremes_path.open("w", encoding="utf-8") as fh:
                    json.dump(extremes, fh, ensure_ascii=False,
                              sort_keys=True, indent=1)
                    fh.write("\n")
                outputs.append(extremes_path)
            log.info("topic %s vs %s: mean tau %.4f", topic, kind,
                     report.mean_tau)
    _write_manifest(config.output_dir, "eval",
                    {"normalization": config.normalization,
                     "method": config.prompt_method,
                     "family": config.family, "topics": config.topics,
                     "ground_truth": sorted(config.ground_truth)},
                    inputs, outputs)
    return outputs


def cmd_baseline(config: RunConfig) -> list[Path]:
    method = config.baseline_method
    if method not in bl.BASELINE_METHODS:
        raise CliError(f"unknown baseline method {method!r}")
    instances = cp.load_instances(_require(
        config.output_dir / "instances.jsonl", "ingest"))
    dev = cp.load_instances(_require(config.output_dir / "dev.jsonl",
                                     "ingest"))
    dev = [i for i in dev if i.source in config.sources
           and i.topic in config.topics]
    base_dir = config.output_dir / "baselines"
    base_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    if method == "tfidf":
        model = bl.tfidf_fit(instances)
        bl.save_tfidf_model(model, base_dir / "tfidf.model.json")
        outputs.append(base_dir / "tfidf.model.json")
        embed = lambda inst: bl.tfidf_embed(model, inst)
    elif method == "lda":
        lda_config = bl.LdaConfig(seed=config.seed, **config.lda)
        model = bl.lda_fit(instances, lda_config)
        bl.save_lda_model(model, base_dir / "lda.model.json")
        outputs.append(base_dir / "lda.model.json")
        embed = lambda inst: bl.lda_embed(model, inst)
    else:
        embed = None

    for topic in config.topics:
        topic_dev = [i for i in dev if i.topic == topic]
        if not topic_dev:
            raise CliError(f"no dev instances for topic {topic!r}")
        if embed is not None:
            embeddings = bl.mean_outlet_embeddings(topic_dev, embed, method)
        else:
            embeddings = bl.lm_embed_outlets(
                topic_dev, method, make_client(config), topic=topic,
                family=config.family)
        stem = f"{method}.{topic}"
        bl.save_outlet_embeddings(embeddings,
                                  base_dir / f"{stem}.embeddings.json")
        rankings = bl.baseline_rankings(embeddings)
        ms.save_rankings(rankings, base_dir / f"{stem}.rankings.json")
        outputs.extend([base_dir / f"{stem}.embeddings.json",
                        base_dir / f"{stem}.rankings.json"])
        for kind in sorted(config.ground_truth):
            truth = _load_ground_truth(kind,
                                       Path(config.ground_truth[kind]),
                                       config.sources)
            report = ms.agreement(rankings, truth)
            metadata = {"topic": topic, "normalization": "none",
                        "method": f"baseline:{method}",
                        "family": config.family, "ground_truth": kind}
            path = base_dir / f"{stem}.{kind}.agreement.json"
            ms.save_agreement(report, path, metadata)
            outputs.append(path)
    _write_manifest(config.output_dir, f"baseline-{method}",
                    {"method": method, "topics": config.topics,
                     "seed": config.seed},
                    [config.output_dir / "instances.jsonl",
                     config.output_dir / "dev.jsonl"], outputs)
    return outputs


def cmd_cluster(config: RunConfig) -> list[Path]:
    cluster_dir = config.output_dir / "cluster"
    cluster_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = [], []
    for topic in config.topics:
        stem = f"{topic}.{config.normalization}"
        dm_path = _require(
            config.output_dir / "measures" / f"{stem}.distances.json",
            "measure")
        inputs.append(dm_path)
        dendrogram = ms.agglomerative_cluster(ms.load_distance_matrix(dm_path))
        path = cluster_dir / f"{stem}.dendrogram.json"
        ms.save_dendrogram(dendrogram, path)
        outputs.append(path)
    _write_manifest(config.output_dir, "cluster",
                    {"normalization": config.normalization,
                     "topics": config.topics}, inputs, outputs)
    return outputs


def cmd_report(config: RunConfig) -> list[Path]:
    """Aggregate agreement reports into delimited tables: the full
    method x normalization x family grid plus one-factor summaries, with
    means and stds taken across topics."""
    cells: dict[tuple, list[float]] = {}
    found = []
    for directory in (config.output_dir / "eval",
                      config.output_dir / "baselines"):
        if directory.is_dir():
            found.extend(sorted(directory.glob("*.agreement.json")))
    if not found:
        raise CliError(f"no agreement reports under {config.output_dir}; "
                       "run 'eval' (or 'baseline') first")
    for path in found:
        with path.open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
        meta = doc["metadata"]
        key = (meta["ground_truth"], meta["method"], meta["normalization"],
               meta["family"])
        cells.setdefault(key, []).append(float(doc["mean_tau"]))

    report_dir = config.output_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    def write_table(path: Path, headers: list[str], rows: list[list]) -> None:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(headers)
            writer.writerows(rows)

    def stats(values: list[float]) -> tuple[float, float]:
        return (statistics.fmean(values),
                statistics.pstdev(values) if len(values) > 1 else 0.0)

    grid_rows = []
    for key in sorted(cells):
        mean, std = stats(cells[key])
        grid_rows.append([*key, f"{mean:.6f}", f"{std:.6f}",
                          len(cells[key])])
    grid_path = report_dir / "agreement_grid.csv"
    write_table(grid_path,
                ["ground_truth", "method", "normalization", "family",
                 "mean_tau", "std_tau", "n_topics"], grid_rows)

    outputs = [grid_path]
    for factor, index in (("method", 1), ("normalization", 2),
                          ("family", 3)):
        grouped: dict[tuple, list[float]] = {}
        for key, values in cells.items():
            grouped.setdefault((key[0], key[index]), []).extend(values)
        rows = []
        for key in sorted(grouped):
            mean, std = stats(grouped[key])
            rows.append([*key, f"{mean:.6f}", f"{std:.6f}"])
        path = report_dir / f"agreement_by_{factor}.csv"
        write_table(path, ["ground_truth", factor, "mean_tau", "std_tau"],
                    rows)
        outputs.append(path)
    _write_manifest(config.output_dir, "report", {"cells": len(cells)},
                    found, outputs)
    return outputs


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "ingest": cmd_ingest,
    "prompts": cmd_prompts,
    "represent": cmd_represent,
    "measure": cmd_measure,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "cluster": cmd_cluster,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framelens",
        description="Measure differential framing of topics across sources "
                    "via masked-token prompting.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run config (JSON)")
    parser.add_argument("--topic", help="restrict the run to one topic")
    parser.add_argument("--method",
                        help="prompt method or baseline method override")
    parser.add_argument("--normalization",
                        choices=list(rp.NORMALIZATION_MODES))
    parser.add_argument("--backend", help="scorer override: "
                                          "stub:<path> or http:<url>")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        lock = FileLock(config.output_dir / ".framelens.lock")
        try:
            with lock.acquire(timeout=1):
                COMMANDS[args.command](config)
        except Timeout:
            raise CliError(
                f"another command is running in {config.output_dir} "
                "(lock held)")
    except (CliError, cp.CorpusError, pg.PromptError, rp.RepresentationError,
            ms.MeasurementError, gt.GroundTruthError, bl.BaselineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
