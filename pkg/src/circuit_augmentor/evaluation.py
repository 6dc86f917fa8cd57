"""Scoring for generated data: simulator-in-the-loop percentage error,
reference-network comparison, histogram KL divergence, density export, and
mode-collapse diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio, gan, linalg
from .dataio import DataError, Dataset
from .nn import MlpRegressor, predict
from .seeding import stream

DENOMINATOR_FLOOR = 1e-12
DIVERSITY_COLLAPSE_THRESHOLD = 0.2
SPECTRAL_COLLAPSE_RATIO = 0.05
MIN_DIVERSITY_ROWS = 50


@dataclass
class PctErrorReport:
    per_output: dict[str, float]
    mean: float
    n_used: int
    n_rejected: int


def avg_percentage_error(generated: Dataset, simulator) -> PctErrorReport:
    """Re-simulate generated input features and score the generated outputs.

    simulator(input_rows) -> (outputs, valid_mask); rows the simulator
    rejects are excluded and tallied. Per output feature: mean over kept
    rows of 100 * |gen - sim| / max(|sim|, 1e-12).
    """
    in_idx = generated.schema.input_indices
    out_idx = generated.schema.output_indices
    sim_out, valid = simulator(generated.values[:, in_idx])
    n_rejected = int(np.sum(~valid))
    if not np.any(valid):
        raise DataError(f"simulator rejected all {generated.n_rows} rows")
    gen_out = generated.values[np.ix_(valid, out_idx)]
    sim_kept = np.atleast_2d(np.asarray(sim_out, dtype=np.float64))[valid]
    denom = np.maximum(np.abs(sim_kept), DENOMINATOR_FLOOR)
    pct = 100.0 * np.abs(gen_out - sim_kept) / denom
    per_output = {
        generated.schema.names[i]: float(pct[:, k].mean()) for k, i in enumerate(out_idx)
    }
    mean = float(np.mean(list(per_output.values())))
    return PctErrorReport(
        per_output=per_output, mean=mean, n_used=int(valid.sum()), n_rejected=n_rejected
    )


@dataclass
class AnnComparison:
    mse: float
    rmse: float
    mae: float


def eval_vs_ann(generated: Dataset, ann: MlpRegressor) -> AnnComparison:
    """Generated outputs vs a trained network's predictions on the same inputs."""
    in_names = [generated.schema.names[i] for i in generated.schema.input_indices]
    out_names = [generated.schema.names[i] for i in generated.schema.output_indices]
    if ann.input_features != in_names:
        raise DataError("network input features do not match the dataset schema")
    if any(t not in out_names for t in ann.target_features):
        raise DataError("network targets are not output features of the dataset")
    pred = predict(ann, generated.values[:, generated.schema.input_indices])
    gen = np.column_stack([generated.column(t) for t in ann.target_features])
    err = gen - pred
    mse = float(np.mean(err**2))
    return AnnComparison(mse=mse, rmse=float(np.sqrt(mse)), mae=float(np.mean(np.abs(err))))


# ---------------------------------------------------------------------------
# distribution comparison


@dataclass
class KlResult:
    per_feature: dict[str, float]
    mean: float


def _smoothed(counts: np.ndarray, smoothing: float) -> np.ndarray:
    dens = counts / counts.sum()
    return (dens + smoothing) / (1.0 + counts.size * smoothing)


def _feature_kl(p_col, q_col, categorical: bool, bins: int, smoothing: float) -> float:
    if categorical:
        k = len(dataio.CORNER_CODES)
        p_counts = np.bincount(np.clip(np.rint(p_col), 0, k - 1).astype(int), minlength=k)
        q_counts = np.bincount(np.clip(np.rint(q_col), 0, k - 1).astype(int), minlength=k)
    else:
        lo, hi = float(p_col.min()), float(p_col.max())
        span = hi - lo
        if span == 0.0:
            lo, hi = lo - 0.5, hi + 0.5
        else:
            lo, hi = lo - 0.05 * span, hi + 0.05 * span
        edges = np.linspace(lo, hi, bins + 1)
        p_counts, _ = np.histogram(p_col, edges)
        q_counts, _ = np.histogram(np.clip(q_col, lo, hi), edges)
    p = _smoothed(p_counts.astype(np.float64), smoothing)
    q = _smoothed(q_counts.astype(np.float64), smoothing)
    return float(np.sum(p * np.log(p / q)))


def kl_divergence(
    p_data: Dataset, q_data: Dataset, bins: int = 50, smoothing: float = 1e-6
) -> KlResult:
    """Per-feature KL(p_data || q_data) from histograms on p_data's range.

    Bin edges cover the reference range extended 5% per side; q values
    outside it land in the extreme bins. The corner feature uses exact
    category mass. Additive smoothing keeps the estimate finite.
    """
    if p_data.n_rows == 0 or q_data.n_rows == 0:
        raise DataError("cannot compare empty datasets")
    if p_data.schema.names != q_data.schema.names:
        raise DataError("datasets do not share a schema")
    if bins < 2:
        raise DataError(f"bins must be >= 2, got {bins}")
    cat = p_data.schema.categorical_mask
    per = {}
    for j, name in enumerate(p_data.schema.names):
        per[name] = _feature_kl(
            p_data.values[:, j], q_data.values[:, j], bool(cat[j]), bins, smoothing
        )
    return KlResult(per_feature=per, mean=float(np.mean(list(per.values()))))


@dataclass
class Histogram:
    feature: str
    edges: np.ndarray
    counts: np.ndarray
    densities: np.ndarray


def density_export(data: Dataset, feature: str, bins: int = 50) -> Histogram:
    """Uniform-bin density over the feature's observed range."""
    col = data.column(feature)
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(col, edges)
    width = (hi - lo) / bins
    return Histogram(
        feature=feature, edges=edges, counts=counts,
        densities=counts / (col.size * width),
    )


def write_histogram(path, hist: Histogram) -> None:
    lines = ["bin_lo,bin_hi,count,density"]
    for i in range(hist.counts.size):
        lines.append(
            f"{hist.edges[i]!r},{hist.edges[i + 1]!r},{int(hist.counts[i])},{hist.densities[i]!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# mode collapse


def _mean_nn_distance(x: np.ndarray) -> float:
    """Mean distance to the nearest other row (duplicates give zero)."""
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    best = np.empty(n)
    step = max(1, 2_000_000 // n)
    for i0 in range(0, n, step):
        blk = slice(i0, min(i0 + step, n))
        d2 = sq[blk, None] + sq[None, :] - 2.0 * (x[blk] @ x.T)
        np.fill_diagonal(d2[:, i0:], np.inf)  # self-distances
        best[blk] = d2.min(axis=1)
    return float(np.sqrt(np.maximum(best, 0.0)).mean())


@dataclass
class ModeCollapseReport:
    diversity_score: float
    mean_nn_generated: float
    mean_nn_training: float
    spectral_collapse: bool
    collapse: bool


def mode_collapse_report(
    generated: Dataset, training: Dataset, disc_spectra=None
) -> ModeCollapseReport:
    """Nearest-neighbor diversity in scaled space plus a spectral criterion.

    Collapse is flagged when generated diversity falls below 0.2 of the
    training data's, or when any discriminator layer has more than half of
    its singular values below 0.05 * sigma_1.
    """
    if generated.n_rows < MIN_DIVERSITY_ROWS or training.n_rows < MIN_DIVERSITY_ROWS:
        raise DataError(f"need >= {MIN_DIVERSITY_ROWS} rows in both datasets")
    if generated.schema.names != training.schema.names:
        raise DataError("datasets do not share a schema")
    scaler = dataio.fit_scaler(training)
    nn_train = _mean_nn_distance(dataio.transform(scaler, training.values))
    nn_gen = _mean_nn_distance(dataio.transform(scaler, generated.values))
    if nn_train == 0.0:
        raise DataError("training data has zero nearest-neighbor spread")
    score = nn_gen / nn_train
    spectral = False
    for spectrum in disc_spectra or []:
        s = np.asarray(spectrum, dtype=np.float64)
        if s.size and np.sum(s < SPECTRAL_COLLAPSE_RATIO * s[0]) > s.size / 2:
            spectral = True
    return ModeCollapseReport(
        diversity_score=score,
        mean_nn_generated=nn_gen,
        mean_nn_training=nn_train,
        spectral_collapse=spectral,
        collapse=score < DIVERSITY_COLLAPSE_THRESHOLD or spectral,
    )


# ---------------------------------------------------------------------------
# per-epoch evaluation


@dataclass
class EvalReport:
    epoch: int
    pct_error: dict[str, float] | None  # None without a simulator
    mean_pct_error: float | None
    kl: dict[str, float]
    mean_kl: float
    diversity_score: float | None
    collapse: bool | None
    disc_spectra: list[np.ndarray]
    n_rejected: int = 0


def write_report(path, report: EvalReport) -> None:
    doc = {
        "epoch": report.epoch,
        "pct_error": report.pct_error,
        "mean_pct_error": report.mean_pct_error,
        "kl": report.kl,
        "mean_kl": report.mean_kl,
        "diversity_score": report.diversity_score,
        "collapse": report.collapse,
        "disc_spectra": [[float(x) for x in s] for s in report.disc_spectra],
        "n_rejected": report.n_rejected,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def make_evaluator(
    training: Dataset,
    simulator=None,
    bins: int = 50,
    smoothing: float = 1e-6,
    n_eval: int = 512,
):
    """Evaluation hook for gan.train; samples with an epoch-keyed stream so
    repeated evaluation of the same checkpoint is reproducible."""

    def evaluate(model: gan.GanModel, epoch: int) -> EvalReport:
        rng = stream(model.config.seed, f"eval-sample:{epoch}")
        gen_ds = gan.sample(model, n_eval, rng)
        spectra = [
            linalg.svd(lyr.weight).sigma for lyr in gan.conditioned_discriminator(model).layers
        ]
        pct = mean_pct = None
        n_rejected = 0
        if simulator is not None:
            r = avg_percentage_error(gen_ds, simulator)
            pct, mean_pct, n_rejected = r.per_output, r.mean, r.n_rejected
        kl = kl_divergence(training, gen_ds, bins=bins, smoothing=smoothing)
        diversity = collapse = None
        if gen_ds.n_rows >= MIN_DIVERSITY_ROWS and training.n_rows >= MIN_DIVERSITY_ROWS:
            mc = mode_collapse_report(gen_ds, training, spectra)
            diversity, collapse = mc.diversity_score, mc.collapse
        return EvalReport(
            epoch=epoch,
            pct_error=pct,
            mean_pct_error=mean_pct,
            kl=kl.per_feature,
            mean_kl=kl.mean,
            diversity_score=diversity,
            collapse=collapse,
            disc_spectra=spectra,
            n_rejected=n_rejected,
        )

    return evaluate
