"""Config-driven pipeline: data generation, GAN training, sweeps, sampling,
evaluation, density reports, and the augmentation experiment.

One TOML config file drives every subcommand; a few flags override it
(--seed, --epochs, --out, --jobs). All randomness flows from the single
root seed through named substreams, and artifacts land under
<out>/<run-id>/ where the run id hashes the effective config, so re-running
an identical config reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import boost, dataio, evaluation, gan, oracle
from .dataio import DataError
from .seeding import stream

SUBCOMMANDS = ("gen-data", "train-gan", "sweep", "sample", "eval", "augment-train", "report")


class ConfigError(ValueError):
    """Bad or incomplete pipeline configuration."""


@dataclass
class PipelineConfig:
    doc: dict
    path: str

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    @property
    def out_dir(self) -> str:
        return self.doc.get("output", {}).get("dir", "runs")

    def section(self, name: str) -> dict:
        sec = self.doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        return sec

    def require(self, name: str, key: str):
        sec = self.section(name)
        if key not in sec:
            raise ConfigError(f"{self.path}: missing {key!r} in [{name}]")
        return sec[key]


def load_config(path) -> PipelineConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        doc = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:  # carries line/column context
        raise ConfigError(f"{path}: {e}") from None
    return PipelineConfig(doc=doc, path=str(path))


def run_id(doc: dict, subcommand: str) -> str:
    payload = json.dumps({"cmd": subcommand, "config": doc}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _write_manifest(out: Path, subcommand: str, doc: dict, artifacts: list[str]) -> None:
    manifest = {
        "subcommand": subcommand,
        "config_hash": run_id(doc, subcommand),
        "root_seed": int(doc.get("seed", 0)),
        "artifacts": sorted(artifacts),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# shared pieces


def _load_dataset(cfg: PipelineConfig) -> tuple[dataio.Dataset, object | None]:
    """Dataset plus a row simulator when the data comes from an oracle kind."""
    sec = cfg.section("dataset")
    if "kind" in sec:
        kind = sec["kind"]
        n = int(sec.get("n", 1000))
        ranges = {k: tuple(v) for k, v in sec.get("ranges", {}).items()}
        data = oracle.generate_dataset(kind, n, cfg.seed, ranges=ranges or None)
        _, sim = oracle.row_simulator(kind)
        return data, sim
    if "csv" in sec:
        schema_path = cfg.require("dataset", "schema")
        for p in (sec["csv"], schema_path):
            if not Path(p).exists():
                raise ConfigError(f"dataset file {p} does not exist")
        return dataio.load_csv(sec["csv"], dataio.load_schema(schema_path)), None
    raise ConfigError(f"{cfg.path}: [dataset] needs either 'kind' or 'csv'")


def _gan_config(cfg: PipelineConfig, data_dim: int, seed: int | None = None) -> gan.GanConfig:
    sec = cfg.section("gan")
    reg = gan.RegularizerMode(
        mode=sec.get("regularizer", "none"),
        i_fraction=float(sec.get("i_fraction", 0.5)),
    )
    return gan.GanConfig(
        latent_dim=int(sec.get("latent_dim", max(8, data_dim))),
        gen_hidden=tuple(sec.get("gen_hidden", (64, 64, 64))),
        disc_hidden=tuple(sec.get("disc_hidden", (64, 64, 64))),
        lr=float(sec.get("lr", 5e-4)),
        batch_size=int(sec.get("batch_size", 64)),
        epochs=int(sec.get("epochs", 2000)),
        disc_steps_per_gen_step=int(sec.get("disc_steps_per_gen_step", 1)),
        regularizer=reg,
        seed=cfg.seed if seed is None else seed,
        eval_every=int(sec.get("eval_every", 50)),
        saturating_gen_loss=bool(sec.get("saturating_gen_loss", False)),
    )


def _eval_params(cfg: PipelineConfig) -> dict:
    sec = cfg.section("eval")
    return {
        "bins": int(sec.get("bins", 50)),
        "smoothing": float(sec.get("smoothing", 1e-6)),
        "n_eval": int(sec.get("n_eval", 512)),
    }


def _boost_config(cfg: PipelineConfig, seed: int | None = None) -> boost.GbrtConfig:
    sec = cfg.section("boost")
    return boost.GbrtConfig(
        n_trees=int(sec.get("n_trees", 200)),
        max_depth=int(sec.get("max_depth", 3)),
        min_samples_leaf=int(sec.get("min_samples_leaf", 5)),
        learning_rate=float(sec.get("learning_rate", 0.1)),
        seed=cfg.seed if seed is None else seed,
    )


def _resolve_netlist(name_or_path: str) -> oracle.Netlist:
    if Path(name_or_path).exists():
        return oracle.load_netlist(name_or_path)
    try:
        return oracle.builtin_netlist(name_or_path)
    except Exception:
        raise ConfigError(
            f"netlist {name_or_path!r} is neither a file nor a builtin name"
        ) from None


def _train_with_reports(cfg: PipelineConfig, data, simulator, gan_cfg):
    """Train a GAN, capturing the per-epoch eval reports for export."""
    params = _eval_params(cfg)
    base = evaluation.make_evaluator(data, simulator=simulator, **params)
    reports: list[evaluation.EvalReport] = []

    def hook(model, epoch):
        report = base(model, epoch)
        reports.append(report)
        return report

    model = gan.build(gan_cfg, len(data.schema))
    best, final, log = gan.train(model, data, hook)
    return best, final, log, reports


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(cfg: PipelineConfig, out: Path) -> list[str]:
    data, _ = _load_dataset(cfg)
    dataio.save_csv(out / "dataset.csv", data)
    dataio.save_schema(out / "schema.toml", data.schema)
    return ["dataset.csv", "schema.toml"]


def _cmd_train_gan(cfg: PipelineConfig, out: Path) -> list[str]:
    data, sim = _load_dataset(cfg)
    best, final, log, reports = _train_with_reports(cfg, data, sim, _gan_config(cfg, len(data.schema)))
    gan.save_gan(out / "best.json", best)
    gan.save_gan(out / "final.json", final)
    gan.write_train_log(out / "train_log.csv", log)
    artifacts = ["best.json", "final.json", "train_log.csv"]
    for report in reports:
        name = f"eval_epoch_{report.epoch}.json"
        evaluation.write_report(out / name, report)
        artifacts.append(name)
    return artifacts


def _sweep_cell(args: tuple) -> dict:
    doc, n_layers, lr, reg_mode = args
    cfg = PipelineConfig(doc=doc, path="<sweep>")
    data, sim = _load_dataset(cfg)
    sweep = cfg.section("sweep")
    width = int(sweep.get("width", 64))
    gan_sec = dict(cfg.section("gan"))
    gan_sec.update(
        {
            "gen_hidden": [width] * n_layers,
            "disc_hidden": [width] * n_layers,
            "lr": lr,
            "regularizer": reg_mode,
            "epochs": int(sweep.get("epochs", gan_sec.get("epochs", 2000))),
        }
    )
    cell_cfg = PipelineConfig(doc={**doc, "gan": gan_sec}, path="<sweep>")
    best, final, log, _ = _train_with_reports(
        cell_cfg, data, sim, _gan_config(cell_cfg, len(data.schema))
    )
    last = log.entries[-1]
    best_scores = [
        e.mean_pct_error if e.mean_pct_error is not None else e.mean_kl for e in log.entries
    ]
    return {
        "regularizer": reg_mode,
        "hidden_layers": n_layers,
        "lr": lr,
        "best_score": min(best_scores),
        "final_mean_kl": last.mean_kl,
        "final_mean_pct_error": last.mean_pct_error,
    }


def _cmd_sweep(cfg: PipelineConfig, out: Path, jobs: int) -> list[str]:
    sweep = cfg.section("sweep")
    layer_counts = [int(x) for x in sweep.get("hidden_layers", (2, 3, 4))]
    lrs = [float(x) for x in sweep.get("learning_rates", (0.00025, 0.0005, 0.001))]
    regs = list(sweep.get("regularizers", ("none", "spectral_norm", "spectral_reg")))
    cells = [
        (cfg.doc, n, lr, reg) for reg, n, lr in itertools.product(regs, layer_counts, lrs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["regularizer"], r["hidden_layers"], r["lr"]))
    lines = ["regularizer,hidden_layers,lr,best_score,final_mean_kl,final_mean_pct_error"]
    for r in rows:
        pct = "" if r["final_mean_pct_error"] is None else repr(r["final_mean_pct_error"])
        lines.append(
            f"{r['regularizer']},{r['hidden_layers']},{r['lr']!r},"
            f"{r['best_score']!r},{r['final_mean_kl']!r},{pct}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ["sweep.csv"]


def _cmd_sample(cfg: PipelineConfig, out: Path) -> list[str]:
    sec = cfg.section("sample")
    ckpt = cfg.require("sample", "checkpoint")
    if not Path(ckpt).exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    model = gan.load_gan(ckpt)
    n = int(sec.get("n", 1000))
    data = gan.sample(model, n, stream(cfg.seed, "cli-sample"))
    dataio.save_csv(out / "samples.csv", data)
    dataio.save_schema(out / "schema.toml", data.schema)
    return ["samples.csv", "schema.toml"]


def _cmd_eval(cfg: PipelineConfig, out: Path) -> list[str]:
    ckpt = cfg.require("eval", "checkpoint")
    if not Path(ckpt).exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    model = gan.load_gan(ckpt)
    data, sim = _load_dataset(cfg)
    params = _eval_params(cfg)
    hook = evaluation.make_evaluator(data, simulator=sim, **params)
    report = hook(model, model.step)
    evaluation.write_report(out / "eval_report.json", report)
    return ["eval_report.json"]


def _cmd_augment_train(cfg: PipelineConfig, out: Path) -> list[str]:
    sec = cfg.section("experiment")
    netlist = _resolve_netlist(cfg.require("experiment", "netlist"))
    seeds = [int(s) for s in sec.get("seeds", ())]
    if not seeds:
        raise ConfigError("experiment.seeds must be a non-empty list")
    n_real = int(sec.get("n_real", 100))
    n_artificial = int(sec.get("n_artificial", 2000))
    n_test_points = int(sec.get("n_test_points", 25))
    dataset_sec = cfg.section("dataset")
    if "kind" not in dataset_sec:
        raise ConfigError("augment-train needs an oracle dataset kind")
    kind = dataset_sec["kind"]
    artifacts = []
    results = []
    for s in seeds:
        real = oracle.generate_dataset(kind, n_real, s)
        _, sim = oracle.row_simulator(kind)
        best, _final, _log, _reports = _train_with_reports(
            cfg, real, sim, _gan_config(cfg, len(real.schema), seed=s)
        )
        artificial = gan.sample(best, n_artificial, stream(s, "artificial-sample"))
        record = boost.augmentation_experiment(
            real,
            artificial,
            netlist,
            _boost_config(cfg, seed=s),
            n_test_points=n_test_points,
            seed=s,
        )
        name = f"augment_seed{s}.json"
        boost.write_augmentation(out / name, record)
        artifacts.append(name)
        results.append(record)
    improved = sum(1 for r in results if r.pct_error_augmented < r.pct_error_real)
    reductions = [
        (r.pct_error_real - r.pct_error_augmented) / r.pct_error_real for r in results
    ]
    summary = {
        "netlist": netlist.name,
        "seeds": seeds,
        "pct_error_real": [r.pct_error_real for r in results],
        "pct_error_augmented": [r.pct_error_augmented for r in results],
        "n_improved": improved,
        "median_relative_reduction": float(np.median(reductions)),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1), encoding="utf-8"
    )
    artifacts.append("summary.json")
    return artifacts


def _cmd_report(cfg: PipelineConfig, out: Path) -> list[str]:
    sec = cfg.section("report")
    bins = int(sec.get("bins", 50))
    data, _ = _load_dataset(cfg)
    artifacts = []
    for name in data.schema.names:
        hist = evaluation.density_export(data, name, bins)
        fname = f"hist_training_{name}.csv"
        evaluation.write_histogram(out / fname, hist)
        artifacts.append(fname)
    ckpt = sec.get("checkpoint")
    if ckpt:
        if not Path(ckpt).exists():
            raise ConfigError(f"checkpoint {ckpt} does not exist")
        model = gan.load_gan(ckpt)
        generated = gan.sample(
            model, int(sec.get("n_generated", 2000)), stream(cfg.seed, "report-sample")
        )
        for name in generated.schema.names:
            hist = evaluation.density_export(generated, name, bins)
            fname = f"hist_generated_{name}.csv"
            evaluation.write_histogram(out / fname, hist)
            artifacts.append(fname)
    return artifacts


# ---------------------------------------------------------------------------
# entry point


def run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="circuit-augmentor",
        description="GAN-based augmentation pipeline for circuit performance data",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="pipeline TOML config")
    parser.add_argument("--seed", type=int, default=None, help="override the root seed")
    parser.add_argument("--epochs", type=int, default=None, help="override gan.epochs")
    parser.add_argument("--out", default=None, help="override output.dir")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        doc = json.loads(json.dumps(cfg.doc))  # deep copy, TOML types -> plain
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.epochs is not None:
            doc.setdefault("gan", {})["epochs"] = args.epochs
        if args.out is not None:
            doc.setdefault("output", {})["dir"] = args.out
        cfg = PipelineConfig(doc=doc, path=cfg.path)

        out = Path(cfg.out_dir) / run_id(doc, args.subcommand)
        out.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "gen-data":
            artifacts = _cmd_gen_data(cfg, out)
        elif args.subcommand == "train-gan":
            artifacts = _cmd_train_gan(cfg, out)
        elif args.subcommand == "sweep":
            artifacts = _cmd_sweep(cfg, out, args.jobs)
        elif args.subcommand == "sample":
            artifacts = _cmd_sample(cfg, out)
        elif args.subcommand == "eval":
            artifacts = _cmd_eval(cfg, out)
        elif args.subcommand == "augment-train":
            artifacts = _cmd_augment_train(cfg, out)
        else:
            artifacts = _cmd_report(cfg, out)
        _write_manifest(out, args.subcommand, doc, artifacts)
    except (ConfigError, DataError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(out)
    return 0


def main() -> None:
    sys.exit(run())
