"""Command-line entry point: ``eclipsekit <command> [options]``.

Commands
--------
make-corpus   write a synthetic corpus (images, manifest, oracle, surrogate)
attack        run one attack over a corpus; traces, adversarial PNGs, summary
eval-p1       JPEG-compression robustness of attack runs
eval-p2       DCT-spectrum SVM detection of attack runs, plus query statistics
ablation      full ECLIPSE vs. no blur vs. no surrogate heatmap, end to end
serve-oracle  expose an oracle over the HTTP wire contract

Settings come from built-in defaults, then an optional TOML file
(``--config``; sections ``[attack]``, ``[oracle]``, ``[eval]`` plus
top-level ``corpus``, ``out``, ``workers``), then command-line flags.
Exit status is 0 on success, 1 when any per-image error was recorded and
2 when the command could not run at all.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .attacks import (
    ATTACKS,
    TABLE2_DEFAULTS,
    EclipseConfig,
    eclipse_attack,
    simba_attack,
    simba_dct_attack,
    square_attack_linf,
    write_trace,
)
from .corpus import CorpusError, load_corpus, load_images, make_synthetic_corpus, write_corpus
from .eval_p1 import compression_loss, p1_metrics, write_reports_csv, write_reports_json, write_table_csv
from .eval_p2 import (
    feature_matrix,
    query_stats,
    train_detector,
    write_cv_table,
    write_features,
    write_query_stats,
)
from .oracle import TOKEN_ENV, OracleError, SyntheticOracle, SyntheticOracleSpec, load_oracle, serve_oracle
from .saliency import HeatmapError, load_heatmap, occlusion_saliency
from .tensorops import read_image, write_image

log = logging.getLogger("eclipsekit")

DISPLAY_NAMES = {
    "eclipse": "ECLIPSE",
    "simba": "SimBA",
    "simba-dct": "SimBA-DCT",
    "square": "Square Attack L∞",
}
ABLATION_VARIANTS = (
    ("eclipse", "ECLIPSE", {}),
    ("no-blur", "No Gaussian blur", {"blur": False}),
    ("no-surrogate", "No Local Surrogate", {"heatmap": "none"}),
)
ABLATION_HEADERS = ("Variant", "Quality", "Median Loss", "Low-loss%", "Surviving%",
                    "ROC AUC", "Query Median", "Query IQR", "Failures")
SUMMARY_FIELDS = ("image_id", "attack", "target_label", "success", "total_queries",
                  "iterations", "final_fitness", "error")

DEFAULTS = {
    "corpus": None,
    "out": None,
    "workers": 1,
    "attack": {
        "name": "eclipse",
        "beta": 0.1,
        "step": 0.1,
        "max_iters": None,  # per-attack comparison default
        "kernel_size": 3,
        "sigma": 1.0,
        "sample_size": 64,
        "p_init": 0.2,
        "freq_fraction": 0.125,
        "seed": 0,
        "heatmap": "occlusion",
        "patch": 4,
        "stride": 2,
        "cache": "best",
        "blur": True,
        "success_threshold": 0.5,
    },
    "oracle": {"selector": None, "surrogate": None},
    "eval": {"quality": [75], "bands": 64, "degree": 3, "C": 1.0, "folds": 5,
             "ratio": 6.0, "benign": None, "seed": 0},
}

# command-line destination -> (section, key)
FLAG_KEYS = {
    "corpus": (None, "corpus"),
    "out": (None, "out"),
    "workers": (None, "workers"),
    "attack": ("attack", "name"),
    "beta": ("attack", "beta"),
    "step": ("attack", "step"),
    "max_iters": ("attack", "max_iters"),
    "kernel_size": ("attack", "kernel_size"),
    "sigma": ("attack", "sigma"),
    "sample_size": ("attack", "sample_size"),
    "p_init": ("attack", "p_init"),
    "freq_fraction": ("attack", "freq_fraction"),
    "seed": ("attack", "seed"),
    "heatmap": ("attack", "heatmap"),
    "cache": ("attack", "cache"),
    "oracle": ("oracle", "selector"),
    "surrogate": ("oracle", "surrogate"),
    "quality": ("eval", "quality"),
    "bands": ("eval", "bands"),
    "degree": ("eval", "degree"),
    "svm_c": ("eval", "C"),
    "folds": ("eval", "folds"),
    "ratio": ("eval", "ratio"),
    "benign": ("eval", "benign"),
}


class UsageError(Exception):
    """The command cannot run with the given settings."""


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    for key, value in doc.items():
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(DEFAULTS[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {key!r} must be a table")
            unknown = set(value) - set(DEFAULTS[key])
            if unknown:
                raise UsageError(f"unknown keys in [{key}]: {sorted(unknown)}")
    return doc


def resolve_settings(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if isinstance(value, dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    for dest, (section, key) in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            cfg[key] = value
        else:
            cfg[section][key] = value
    quality = cfg["eval"]["quality"]
    cfg["eval"]["quality"] = [int(q) for q in ([quality] if isinstance(quality, int) else quality)]
    return cfg


def parse_quality(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quality list {text!r}") from None
    if not values or any(not 1 <= v <= 100 for v in values):
        raise argparse.ArgumentTypeError("qualities must lie in [1, 100]")
    return values


def attack_parameters(cfg: dict) -> dict:
    """Attack settings with the per-attack iteration default filled in."""
    a = dict(cfg["attack"])
    if a["name"] not in ATTACKS:
        raise UsageError(f"unknown attack {a['name']!r}; choose from {', '.join(ATTACKS)}")
    if a["max_iters"] is None:
        a["max_iters"] = TABLE2_DEFAULTS[a["name"]]["max_iters"]
    return a


# ---------------------------------------------------------------------------
# oracles and heatmaps


def open_oracle(cfg: dict, corpus_dir: Path):
    selector = cfg["oracle"]["selector"]
    if selector is None:
        default = corpus_dir / "oracle.npz"
        if not default.is_file():
            raise UsageError("no --oracle given and the corpus has no oracle.npz")
        selector = f"synthetic:{default}"
    try:
        return load_oracle(selector)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot open oracle {selector!r}: {exc}") from exc


def open_surrogate(cfg: dict, corpus_dir: Path):
    path = cfg["oracle"]["surrogate"]
    if path is None:
        path = corpus_dir / "surrogate.npz"
        if not path.is_file():
            raise UsageError("occlusion heatmaps need --surrogate (or surrogate.npz in the corpus)")
    path = str(path)
    if path.startswith("synthetic:"):
        path = path[len("synthetic:"):]
    try:
        return SyntheticOracle(SyntheticOracleSpec.load(path))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot open surrogate {path!r}: {exc}") from exc


def heatmap_source(attack: dict, cfg: dict, corpus_dir: Path):
    """Return ``item -> heatmap`` for the configured source."""
    spec = attack["heatmap"]
    if spec == "none":
        return lambda item: None
    if spec == "occlusion":
        surrogate = open_surrogate(cfg, corpus_dir)
        return lambda item: occlusion_saliency(surrogate, item.image, item.target,
                                               attack["patch"], attack["stride"])
    if spec.startswith("file:"):
        path = Path(spec[len("file:"):])
        if path.is_dir():
            def per_image(item):
                for suffix in (".png", ".csv"):
                    candidate = path / f"{item.image_id}{suffix}"
                    if candidate.is_file():
                        return load_heatmap(candidate, item.image.shape[:2])
                raise HeatmapError(f"no heatmap for {item.image_id} in {path}")
            return per_image
        if not path.is_file():
            raise UsageError(f"heatmap file {path} not found")
        return lambda item: load_heatmap(path, item.image.shape[:2])
    raise UsageError(f"unknown heatmap source {spec!r}; use file:<path>, occlusion or none")


# ---------------------------------------------------------------------------
# attack runs


def run_attack_on(item, index: int, attack: dict, oracle, heatmaps):
    seed = int(attack["seed"]) + index
    name = attack["name"]
    if name == "eclipse":
        config = EclipseConfig(
            beta=attack["beta"], max_iterations=attack["max_iters"], epsilon0=attack["step"],
            probe_magnitude=attack["step"], sample_size=attack["sample_size"],
            kernel_size=attack["kernel_size"], sigma=attack["sigma"], seed=seed,
            blur=attack["blur"], cache=attack["cache"],
            success_threshold=attack["success_threshold"])
        return eclipse_attack(oracle, heatmaps(item), item.image, item.target, config)
    if name == "simba":
        return simba_attack(oracle, item.image, item.target, attack["step"], attack["beta"],
                            attack["max_iters"], seed, attack["success_threshold"])
    if name == "simba-dct":
        return simba_dct_attack(oracle, item.image, item.target, attack["step"], attack["beta"],
                                attack["max_iters"], attack["freq_fraction"], seed,
                                attack["success_threshold"])
    return square_attack_linf(oracle, item.image, item.target, attack["beta"], attack["p_init"],
                              attack["max_iters"], seed, attack["success_threshold"])


def execute_attack(items, attack: dict, oracle, heatmaps, out: Path, workers: int):
    """Attack every item and write traces, PNGs, summary and query stats.

    Returns ``(rows, outcomes)`` keyed in image-id order; failed images
    carry an ``error`` message and no outcome.
    """
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "adversarial").mkdir(exist_ok=True)

    def job(pair):
        index, item = pair
        try:
            return item, run_attack_on(item, index, attack, oracle, heatmaps), ""
        except (OracleError, HeatmapError) as exc:
            return item, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        results = list(pool.map(job, enumerate(items)))
    results.sort(key=lambda r: r[0].image_id)

    rows, outcomes = [], {}
    for item, outcome, error in results:
        if outcome is None:
            log.error("%s: %s", item.image_id, error)
            rows.append({"image_id": item.image_id, "attack": attack["name"],
                         "target_label": item.target, "success": "", "total_queries": "",
                         "iterations": "", "final_fitness": "", "error": error})
            continue
        image_rel = Path("adversarial") / f"{item.image_id}.png"
        write_image(out / image_rel, outcome.adversarial_image)
        write_trace(out / "traces" / f"{item.image_id}.jsonl", outcome, image_rel.as_posix())
        outcomes[item.image_id] = outcome
        rows.append({"image_id": item.image_id, "attack": attack["name"],
                     "target_label": item.target, "success": int(outcome.success),
                     "total_queries": outcome.total_queries,
                     "iterations": outcome.iterations_used,
                     "final_fitness": f"{outcome.final_fitness:.6f}", "error": ""})

    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    done = [o for o in outcomes.values()]
    if done:
        write_query_stats(out / "query_stats.csv", [(attack["name"], query_stats(done))])
    with open(out / "run.json", "w", encoding="utf-8") as fh:
        json.dump({"attack": attack, "images": len(items)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows, outcomes


def load_items(corpus) -> tuple[Path, list]:
    if corpus is None:
        raise UsageError("--corpus is required")
    corpus_dir = Path(corpus)
    if not corpus_dir.is_dir():
        raise UsageError(f"corpus directory {corpus_dir} does not exist")
    return corpus_dir, load_corpus(corpus_dir)


def require_out(cfg: dict) -> Path:
    if cfg["out"] is None:
        raise UsageError("--out is required")
    return Path(cfg["out"])


def cmd_attack(args) -> int:
    cfg = resolve_settings(args)
    attack = attack_parameters(cfg)
    corpus_dir, items = load_items(cfg["corpus"])
    out = require_out(cfg)
    oracle = open_oracle(cfg, corpus_dir)
    heatmaps = heatmap_source(attack, cfg, corpus_dir) if attack["name"] == "eclipse" else None
    rows, _ = execute_attack(items, attack, oracle, heatmaps, out, cfg["workers"])
    succeeded = sum(1 for r in rows if r["success"] == 1)
    print(f"{attack['name']}: {succeeded}/{len(rows)} successful; results in {out}")
    return 1 if any(r["error"] for r in rows) else 0


# ---------------------------------------------------------------------------
# evaluations


def read_run(run_dir) -> tuple[str, list[tuple[str, str, np.ndarray, int]]]:
    """Attack name and ``(image_id, target, adversarial, total_queries)`` for
    every successful image of an attack run, in image-id order."""
    run_dir = Path(run_dir)
    try:
        with open(run_dir / "run.json", encoding="utf-8") as fh:
            name = json.load(fh)["attack"]["name"]
        with open(run_dir / "summary.csv", newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"{run_dir} is not an attack run directory: {exc}") from exc
    done = []
    for row in sorted(rows, key=lambda r: r["image_id"]):
        if row["success"] == "1":
            image = read_image(run_dir / "adversarial" / f"{row['image_id']}.png")
            done.append((row["image_id"], row["target_label"], image, int(row["total_queries"])))
    return name, done


def read_outcome_pairs(run_dir) -> list[tuple[int, bool]]:
    with open(Path(run_dir) / "summary.csv", newline="", encoding="utf-8") as fh:
        return [(int(r["total_queries"]), r["success"] == "1")
                for r in csv.DictReader(fh) if not r["error"]]


def p1_reports(oracle, label: str, adversarial, qualities, workers: int = 1):
    """One report per quality over ``(image_id, target, image)`` triples."""
    if not adversarial:
        raise UsageError(f"{label}: no successful adversarial examples to evaluate")
    reports, records = [], []
    for q in qualities:
        def job(entry, q=q):
            image_id, target, image = entry[:3]
            return compression_loss(oracle, image, target, q, image_id)

        with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
            recs = list(pool.map(job, adversarial))
        records.extend(recs)
        reports.append(p1_metrics(recs, attack=label))
    return reports, records


def write_p1_outputs(out: Path, reports, records) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(out / "p1_reports.csv", reports)
    write_reports_json(out / "p1_reports.json", reports)
    for q in sorted({r.quality for r in reports}):
        write_table_csv(out / f"p1_table_q{q}.csv", [r for r in reports if r.quality == q])
    with open(out / "p1_records.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attack", "image_id", "quality", "pre_score", "post_score", "loss"])
        for label, rec in records:
            writer.writerow([label, rec.image_id, rec.quality, f"{rec.pre_score:.6f}",
                             f"{rec.post_score:.6f}", f"{rec.loss:.6f}"])


def cmd_eval_p1(args) -> int:
    cfg = resolve_settings(args)
    out = require_out(cfg)
    runs = [Path(r) for r in args.runs]
    oracle = open_oracle(cfg, runs[0] if cfg["corpus"] is None else Path(cfg["corpus"]))
    all_reports, all_records = [], []
    for run in runs:
        name, done = read_run(run)
        reports, records = p1_reports(oracle, DISPLAY_NAMES[name], done, cfg["eval"]["quality"],
                                      cfg["workers"])
        all_reports.extend(reports)
        all_records.extend((DISPLAY_NAMES[name], r) for r in records)
    write_p1_outputs(out, all_reports, all_records)
    for r in all_reports:
        print(f"{r.attack} q={r.quality}: median loss {r.median_loss:.3f}, "
              f"low-loss {r.low_loss_pct:.2f}%, surviving {r.surviving_pct:.2f}% (n={r.n})")
    return 0


def benign_pool(path) -> list[tuple[str, np.ndarray]]:
    """Unattacked images: PNGs in ``path`` and its ``benign/`` subfolder."""
    path = Path(path)
    if not path.is_dir():
        raise UsageError(f"benign directory {path} does not exist")
    images = load_images(path)
    if (path / "benign").is_dir():
        images += [(f"benign/{i}", img) for i, img in load_images(path / "benign")]
    if not images:
        raise UsageError(f"no benign images in {path}")
    return images


def pick_benign(pool, n_adversarial: int, ratio: float, seed: int):
    """``ratio`` benign images per adversarial one, drawn without replacement."""
    want = int(round(ratio * n_adversarial))
    if want >= len(pool):
        if want > len(pool):
            log.warning("only %d benign images for a %.1f:1 ratio (wanted %d)", len(pool), ratio, want)
        return list(pool)
    idx = np.sort(np.random.default_rng(seed).choice(len(pool), size=want, replace=False))
    return [pool[i] for i in idx]


def detection_report(label: str, benign, adversarial, ev: dict, out: Path | None, stem: str):
    """Cross-validated detector for one attack; writes features and model."""
    if not adversarial:
        raise UsageError(f"{label}: no successful adversarial examples to detect")
    chosen = pick_benign(benign, len(adversarial), ev["ratio"], ev["seed"])
    Xb = feature_matrix([img for _, img in chosen], ev["bands"])
    Xa = feature_matrix([a[2] for a in adversarial], ev["bands"])
    try:
        model, report = train_detector(Xb, Xa, degree=ev["degree"], C=ev["C"], folds=ev["folds"],
                                       seed=ev["seed"], comparison=f"Normal vs {label}")
    except ValueError as exc:
        raise UsageError(f"{label}: {exc}") from exc
    if out is not None:
        ids = [i for i, _ in chosen] + [a[0] for a in adversarial]
        labels = ["benign"] * len(chosen) + ["adversarial"] * len(adversarial)
        write_features(out / f"features_{stem}.csv", ids, labels, np.vstack([Xb, Xa]), ev["bands"])
        model.save(out / f"detector_{stem}.json")
    return report


def cmd_eval_p2(args) -> int:
    cfg = resolve_settings(args)
    out = require_out(cfg)
    ev = cfg["eval"]
    benign_dir = ev["benign"] or cfg["corpus"]
    if benign_dir is None:
        raise UsageError("--benign (or --corpus) is required")
    benign = benign_pool(benign_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, stats = [], []
    for run in args.runs:
        name, done = read_run(run)
        reports.append(detection_report(DISPLAY_NAMES[name], benign, done, ev, out, name))
        stats.append((name, query_stats(read_outcome_pairs(run))))
    write_cv_table(out / "cv_table.csv", reports)
    write_cv_folds(out / "cv_folds.csv", reports)
    write_query_stats(out / "query_stats.csv", stats)
    for r in reports:
        print(f"{r.comparison}: ROC AUC {r.mean('roc_auc'):.2f} (± {r.std('roc_auc'):.2f})")
    return 0


def write_cv_folds(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comparison", "fold", "accuracy", "precision", "recall", "f1", "roc_auc"])
        for r in reports:
            for f in r.folds:
                writer.writerow([r.comparison, f["fold"]] +
                                [f"{f[m]:.6f}" for m in ("accuracy", "precision", "recall", "f1", "roc_auc")])


def fmt_optional(value) -> str:
    return "" if value is None else f"{value:.1f}"


def cmd_ablation(args) -> int:
    cfg = resolve_settings(args)
    cfg["attack"]["name"] = "eclipse"
    corpus_dir, items = load_items(cfg["corpus"])
    out = require_out(cfg)
    oracle = open_oracle(cfg, corpus_dir)
    ev = cfg["eval"]
    benign = benign_pool(ev["benign"] or corpus_dir)
    rows, errors = [], False
    for stem, label, overrides in ABLATION_VARIANTS:
        attack = attack_parameters(cfg)
        attack.update(overrides)
        heatmaps = heatmap_source(attack, cfg, corpus_dir)
        run_rows, outcomes = execute_attack(items, attack, oracle, heatmaps, out / stem, cfg["workers"])
        errors |= any(r["error"] for r in run_rows)
        done = [(i, next(it.target for it in items if it.image_id == i), o.adversarial_image, o.total_queries)
                for i, o in sorted(outcomes.items()) if o.success]
        reports, _ = p1_reports(oracle, label, done, ev["quality"], cfg["workers"])
        cv = detection_report(label, benign, done, ev, out / stem, stem)
        qs = query_stats(list(outcomes.values()))
        for rep in reports:
            rows.append([label, rep.quality, f"{rep.median_loss:.2f}", f"{rep.low_loss_pct:.2f}",
                         f"{rep.surviving_pct:.2f}",
                         f"{cv.mean('roc_auc'):.2f} (± {cv.std('roc_auc'):.2f})",
                         fmt_optional(qs.median), fmt_optional(qs.iqr), qs.failures])
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ABLATION_HEADERS)
        writer.writerows(rows)
    for row in rows:
        print(" | ".join(str(v) for v in row))
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# utilities


def cmd_make_corpus(args) -> int:
    if args.images < 1:
        raise UsageError("--images must be at least 1")
    if args.benign_ratio < 1:
        raise UsageError("--benign-ratio must be at least 1")
    n_benign = int(round((args.benign_ratio - 1) * args.images))
    corpus = make_synthetic_corpus(args.images, args.size, tuple(args.labels.split(",")), args.seed,
                                   n_benign=n_benign, difficulty=tuple(args.difficulty))
    write_corpus(corpus, args.out)
    print(f"wrote {args.images} images (+{n_benign} benign) to {args.out}")
    return 0


def cmd_serve_oracle(args) -> int:
    oracle = load_oracle(args.oracle)
    server = serve_oracle(oracle, args.host, args.port, os.environ.get(TOKEN_ENV))
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, *, corpus=True):
    p.add_argument("--config", help="TOML settings file; flags override it")
    if corpus:
        p.add_argument("--corpus", help="corpus directory with manifest.csv")
    p.add_argument("--out", help="output directory")
    p.add_argument("--oracle", help="synthetic:<spec.npz> or http:<url> (default: corpus oracle.npz)")
    p.add_argument("--workers", type=int, help="parallel per-image runs (default 1)")
    p.add_argument("--seed", type=int, help="base seed; image k uses seed + k")


def _add_attack_params(p):
    p.add_argument("--beta", type=float, help="L-inf budget (default 0.1)")
    p.add_argument("--step", type=float, help="step size (default 0.1)")
    p.add_argument("--max-iters", type=int, help="iteration cap (default per attack)")
    p.add_argument("--kernel-size", type=int, help="ECLIPSE blur kernel side (default 3)")
    p.add_argument("--sigma", type=float, help="ECLIPSE blur width (default 1.0)")
    p.add_argument("--sample-size", type=int, help="ECLIPSE probes per iteration (default 64)")
    p.add_argument("--cache", choices=("best", "all", "none"), help="ECLIPSE query reuse")
    p.add_argument("--heatmap", help="file:<path>, occlusion or none (default occlusion)")
    p.add_argument("--surrogate", help="surrogate spec for occlusion heatmaps")


def _add_eval_params(p):
    p.add_argument("--quality", type=parse_quality, help="JPEG qualities, e.g. 50,75,95")
    p.add_argument("--bands", type=int, help="spectral bands (default 64)")
    p.add_argument("--degree", type=int, help="SVM polynomial degree (default 3)")
    p.add_argument("--C", dest="svm_c", type=float, help="SVM regularization (default 1)")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--ratio", type=float, help="benign per adversarial example (default 6)")
    p.add_argument("--benign", help="folder of benign PNGs (default: the corpus)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eclipsekit", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="run an attack over a corpus")
    _add_common(p)
    p.add_argument("--attack", choices=ATTACKS, help="attack (default eclipse)")
    p.add_argument("--p-init", type=float, help="Square Attack initial area fraction (default 0.2)")
    p.add_argument("--freq-fraction", type=float, help="SimBA-DCT low-frequency share (default 0.125)")
    _add_attack_params(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("eval-p1", help="JPEG-compression robustness of attack runs")
    _add_common(p)
    _add_eval_params(p)
    p.add_argument("runs", nargs="+", help="attack output directories")
    p.set_defaults(func=cmd_eval_p1)

    p = sub.add_parser("eval-p2", help="spectral SVM detection of attack runs")
    _add_common(p)
    _add_eval_params(p)
    p.add_argument("runs", nargs="+", help="attack output directories")
    p.set_defaults(func=cmd_eval_p2)

    p = sub.add_parser("ablation", help="ECLIPSE vs. no blur vs. no surrogate heatmap")
    _add_common(p)
    _add_attack_params(p)
    _add_eval_params(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("make-corpus", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--images", type=int, default=20)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--labels", default="cat,dog", help="comma list; first is ground truth, second target")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--benign-ratio", type=float, default=6.0,
                   help="benign images (originals + extras) per attacked image")
    p.add_argument("--difficulty", type=float, nargs=2, default=(0.35, 0.55), metavar=("LO", "HI"))
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("serve-oracle", help="serve an oracle over HTTP")
    p.add_argument("--oracle", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusError, HeatmapError, OracleError, tomllib.TOMLDecodeError, OSError) as exc:
        print(f"eclipsekit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
