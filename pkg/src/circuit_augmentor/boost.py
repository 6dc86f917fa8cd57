"""Gradient-boosted regression trees and the critical-path augmentation study.

Squared-error boosting with exact greedy variance-reduction splits over
sorted unique feature values; leaves carry learning_rate * mean residual so
prediction is simply init_value plus the sum of tree outputs. Trees are
plain nested dicts, serialized pre-order as JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle
from .dataio import DataError, Dataset, concat_datasets
from .linalg import ValidationError
from .oracle import Netlist, OracleConstants, ProcessPoint


@dataclass(frozen=True)
class GbrtConfig:
    n_trees: int = 200
    max_depth: int = 3
    min_samples_leaf: int = 5
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if not 1 <= self.max_depth <= 12:
            raise ValidationError("max_depth must be in [1, 12]")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValidationError("learning_rate must be in (0, 1]")


@dataclass
class GbrtModel:
    init_value: float
    trees: list[dict]
    learning_rate: float
    feature_names: list[str]
    target: str
    stage_mse: list[float] = field(default_factory=list)
    degenerate: bool = False


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Minimum-SSE split; returns (feature, threshold, sse) or None."""
    n = y.size
    if n < 2 * min_leaf:
        return None
    best = None
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        vs = x[order, f]
        ys = y[order]
        cs = np.cumsum(ys)
        css = np.cumsum(ys * ys)
        k = np.arange(1, n)  # rows on the left of each boundary
        ok = (vs[1:] != vs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not ok.any():
            continue
        sse_left = css[:-1] - cs[:-1] ** 2 / k
        sse_right = (css[-1] - css[:-1]) - (cs[-1] - cs[:-1]) ** 2 / (n - k)
        total = np.where(ok, sse_left + sse_right, np.inf)
        j = int(np.argmin(total))
        if best is None or total[j] < best[2]:
            best = (f, 0.5 * (vs[j] + vs[j + 1]), float(total[j]))
    return best


def _grow(x: np.ndarray, y: np.ndarray, depth: int, cfg: GbrtConfig, lr: float) -> dict:
    sse_here = float(((y - y.mean()) ** 2).sum())
    split = _best_split(x, y, cfg.min_samples_leaf) if depth < cfg.max_depth else None
    if split is None or split[2] >= sse_here - 1e-12:
        return {"value": lr * float(y.mean())}
    f, thr, _ = split
    mask = x[:, f] <= thr
    return {
        "feature": f,
        "threshold": thr,
        "left": _grow(x[mask], y[mask], depth + 1, cfg, lr),
        "right": _grow(x[~mask], y[~mask], depth + 1, cfg, lr),
    }


def _tree_output(node: dict, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    stack = [(node, np.arange(x.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if "value" in nd:
            out[idx] = nd["value"]
            continue
        mask = x[idx, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], idx[mask]))
        stack.append((nd["right"], idx[~mask]))
    return out


def fit_gbrt(train: Dataset, target: str, config: GbrtConfig = GbrtConfig()) -> GbrtModel:
    """Stagewise residual fitting; training MSE recorded per stage."""
    out_names = [train.schema.names[i] for i in train.schema.output_indices]
    if target not in out_names:
        raise ValidationError(f"target {target!r} is not a simulator_output feature")
    if train.n_rows < 2 * config.min_samples_leaf:
        raise ValidationError(
            f"need >= {2 * config.min_samples_leaf} rows, got {train.n_rows}"
        )
    in_idx = train.schema.input_indices
    x = train.values[:, in_idx]
    y = train.column(target)
    model = GbrtModel(
        init_value=float(y.mean()),
        trees=[],
        learning_rate=config.learning_rate,
        feature_names=[train.schema.names[i] for i in in_idx],
        target=target,
    )
    residual = y - model.init_value
    if np.all(y == y[0]):
        model.degenerate = True
        return model
    for _ in range(config.n_trees):
        tree = _grow(x, residual, 0, config, config.learning_rate)
        residual = residual - _tree_output(tree, x)
        model.trees.append(tree)
        model.stage_mse.append(float(np.mean(residual**2)))
    return model


def predict_gbrt(model: GbrtModel, rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != len(model.feature_names):
        raise ValidationError(
            f"expected {len(model.feature_names)} feature columns, got {rows.shape[1]}"
        )
    out = np.full(rows.shape[0], model.init_value)
    for tree in model.trees:
        out += _tree_output(tree, rows)
    return out


def save_gbrt(path, model: GbrtModel) -> None:
    doc = {
        "format_version": 1,
        "kind": "gbrt",
        "init_value": model.init_value,
        "learning_rate": model.learning_rate,
        "feature_names": model.feature_names,
        "target": model.target,
        "stage_mse": model.stage_mse,
        "degenerate": model.degenerate,
        "trees": model.trees,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def load_gbrt(path) -> GbrtModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != "gbrt":
        raise ValidationError(f"{path} is not a boosted-trees checkpoint")
    return GbrtModel(
        init_value=float(doc["init_value"]),
        trees=list(doc["trees"]),
        learning_rate=float(doc["learning_rate"]),
        feature_names=list(doc["feature_names"]),
        target=doc["target"],
        stage_mse=list(doc["stage_mse"]),
        degenerate=bool(doc["degenerate"]),
    )


# ---------------------------------------------------------------------------
# augmentation experiment


@dataclass
class AugmentationRecord:
    netlist: str
    n_real: int
    n_artificial: int
    simulated_ps: float
    predicted_real_ps: float
    predicted_augmented_ps: float
    pct_error_real: float
    pct_error_augmented: float
    per_point: dict[str, list[float]]


def write_augmentation(path, record: AugmentationRecord) -> None:
    doc = {
        "netlist": record.netlist,
        "n_real": record.n_real,
        "n_artificial": record.n_artificial,
        "simulated_ps": record.simulated_ps,
        "predicted_real_ps": record.predicted_real_ps,
        "predicted_augmented_ps": record.predicted_augmented_ps,
        "pct_error_real": record.pct_error_real,
        "pct_error_augmented": record.pct_error_augmented,
        "per_point": record.per_point,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def _delay_provider(models: dict[str, GbrtModel], schema):
    def delay_fn(kind, point: ProcessPoint):
        row = oracle.point_to_row(schema, point).reshape(1, -1)
        lh = np.array([predict_gbrt(models[f"delay_lh_{p}"], row)[0] for p in kind.pins])
        hl = np.array([predict_gbrt(models[f"delay_hl_{p}"], row)[0] for p in kind.pins])
        return oracle.DelayResult(pins=kind.pins, delay_lh=lh, delay_hl=hl)

    return delay_fn


def augmentation_experiment(
    real: Dataset,
    artificial: Dataset,
    netlist: Netlist,
    config: GbrtConfig = GbrtConfig(),
    n_test_points: int = 25,
    seed: int = 0,
    constants: OracleConstants | None = None,
) -> AugmentationRecord:
    """Critical-path prediction accuracy with and without artificial rows.

    Per delay output, one model is fit on the real rows and one on real +
    artificial; both predict per-gate delays that are composed into the
    netlist's critical-path delay at sampled operating points and scored
    against the oracle's delay.
    """
    if real.schema.names != artificial.schema.names:
        raise DataError("real and artificial datasets do not share a schema")
    c = constants or oracle.load_constants()
    out_names = [real.schema.names[i] for i in real.schema.output_indices]
    for kind_name in {g.kind for g in netlist.gates}:
        for pin in c.gates[kind_name].pins:
            for edge in ("lh", "hl"):
                if f"delay_{edge}_{pin}" not in out_names:
                    raise DataError(
                        f"netlist kind {kind_name!r} needs output delay_{edge}_{pin}"
                    )
    augmented = concat_datasets(real, artificial) if artificial.n_rows else real
    real_models = {t: fit_gbrt(real, t, config) for t in out_names}
    aug_models = {t: fit_gbrt(augmented, t, config) for t in out_names}
    points = oracle.sample_points(n_test_points, seed, c)
    sim, pred_r, pred_a = [], [], []
    for pt in points:
        sim.append(oracle.critical_path_delay(netlist, pt, constants=c))
        pred_r.append(
            oracle.critical_path_delay(netlist, pt, _delay_provider(real_models, real.schema), c)
        )
        pred_a.append(
            oracle.critical_path_delay(netlist, pt, _delay_provider(aug_models, real.schema), c)
        )
    sim = np.array(sim)
    pred_r = np.array(pred_r)
    pred_a = np.array(pred_a)
    err_r = 100.0 * np.abs(pred_r - sim) / sim
    err_a = 100.0 * np.abs(pred_a - sim) / sim
    return AugmentationRecord(
        netlist=netlist.name,
        n_real=real.n_rows,
        n_artificial=artificial.n_rows,
        simulated_ps=float(sim.mean()),
        predicted_real_ps=float(pred_r.mean()),
        predicted_augmented_ps=float(pred_a.mean()),
        pct_error_real=float(err_r.mean()),
        pct_error_augmented=float(err_a.mean()),
        per_point={
            "simulated": sim.tolist(),
            "predicted_real": pred_r.tolist(),
            "predicted_augmented": pred_a.tolist(),
        },
    )
