"""GAN training with switchable discriminator weight conditioning.

Three modes: no conditioning, spectral normalization (divide each weight
matrix by a warm power-iteration estimate of its largest singular value),
and spectral regularization (raise the top i singular values to sigma_1,
then normalize). Conditioned matrices are rebuilt from the raw stored
weights before every discriminator forward pass; gradients pass through the
conditioning as a constant 1/sigma scale with sigma detached.

The generator minimizes the non-saturating surrogate -E[log D(G(z))] by
default; the saturating minimax form E[log(1 - D(G(z)))] sits behind a
config flag for ablation.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, linalg, nn
from .dataio import Dataset, FeatureSchema, MinMaxScaler
from .linalg import PowerIterState, ValidationError
from .seeding import stream

REGULARIZER_MODES = ("none", "spectral_norm", "spectral_reg")


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or a failing evaluation."""


@dataclass(frozen=True)
class RegularizerMode:
    mode: str = "none"
    i_fraction: float = 0.5  # only read in spectral_reg mode

    def __post_init__(self):
        if self.mode not in REGULARIZER_MODES:
            raise ValidationError(f"unknown regularizer mode {self.mode!r}")
        if self.mode == "spectral_reg" and not 0.0 < self.i_fraction <= 1.0:
            raise ValidationError(f"i_fraction must be in (0, 1], got {self.i_fraction}")


def regularized_rank_count(i_fraction: float, shape: tuple[int, int]) -> int:
    """i = max(1, round(i_fraction * r)) with r = min(rows, cols), half-up."""
    r = min(shape)
    return max(1, int(np.floor(i_fraction * r + 0.5)))


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int
    gen_hidden: tuple[int, ...] = (64, 64, 64)
    disc_hidden: tuple[int, ...] = (64, 64, 64)
    lr: float = 5e-4
    batch_size: int = 64
    epochs: int = 2000
    disc_steps_per_gen_step: int = 1
    regularizer: RegularizerMode = RegularizerMode()
    seed: int = 0
    eval_every: int = 50
    beta1: float = 0.5
    beta2: float = 0.999
    saturating_gen_loss: bool = False

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValidationError("latent_dim must be >= 1")
        for name in ("gen_hidden", "disc_hidden"):
            hidden = getattr(self, name)
            if not 1 <= len(hidden) <= 8 or any(h < 1 for h in hidden):
                raise ValidationError(f"{name} must hold 1..8 positive widths")
        if self.lr <= 0.0:
            raise ValidationError("lr must be > 0")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2")
        if self.epochs < 0 or self.disc_steps_per_gen_step < 1 or self.eval_every < 1:
            raise ValidationError("epochs >= 0, disc_steps_per_gen_step and eval_every >= 1")


@dataclass
class TrainLogEntry:
    epoch: int
    d_loss: float
    g_loss: float
    pct_error: dict[str, float] | None  # None when no simulator is wired in
    mean_pct_error: float | None
    mean_kl: float
    disc_spectra: list[np.ndarray]


@dataclass
class TrainLog:
    entries: list[TrainLogEntry] = field(default_factory=list)

    def append(self, entry: TrainLogEntry) -> None:
        if self.entries and entry.epoch <= self.entries[-1].epoch:
            raise ValidationError("log epochs must be strictly increasing")
        finite = [entry.d_loss, entry.g_loss, entry.mean_kl]
        if entry.mean_pct_error is not None:
            finite.append(entry.mean_pct_error)
            finite.extend(entry.pct_error.values())
        if not np.all(np.isfinite(finite)):
            raise ValidationError(f"non-finite log values at epoch {entry.epoch}")
        if any(not np.all(np.isfinite(s)) for s in entry.disc_spectra):
            raise ValidationError(f"non-finite spectrum at epoch {entry.epoch}")
        self.entries.append(entry)


@dataclass
class GanModel:
    gen: nn.MlpParams
    disc: nn.MlpParams
    disc_power_states: list[PowerIterState]
    gen_adam: nn.AdamState
    disc_adam: nn.AdamState
    config: GanConfig
    scaler: MinMaxScaler | None = None
    schema: FeatureSchema | None = None
    log: TrainLog = field(default_factory=TrainLog)
    step: int = 0
    effective_cache: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def data_dim(self) -> int:
        return self.gen.out_dim


def build(config: GanConfig, data_dim: int) -> GanModel:
    """Deterministically initialize generator, discriminator and optimizers."""
    if data_dim < 1:
        raise ValidationError(f"data_dim must be >= 1, got {data_dim}")
    gen_dims = [config.latent_dim, *config.gen_hidden]
    gen_specs = [
        nn.LayerSpec(gen_dims[i], gen_dims[i + 1], nn.leaky_relu()) for i in range(len(gen_dims) - 1)
    ]
    gen_specs.append(nn.LayerSpec(gen_dims[-1], data_dim, nn.tanh()))
    disc_dims = [data_dim, *config.disc_hidden]
    disc_specs = [
        nn.LayerSpec(disc_dims[i], disc_dims[i + 1], nn.leaky_relu())
        for i in range(len(disc_dims) - 1)
    ]
    disc_specs.append(nn.LayerSpec(disc_dims[-1], 1, nn.linear()))
    gen = nn.init_mlp(gen_specs, stream(config.seed, "gan-init-gen"))
    disc = nn.init_mlp(disc_specs, stream(config.seed, "gan-init-disc"))
    rng_power = stream(config.seed, "gan-power")
    states = []
    for lyr in disc.layers:
        state = linalg.init_power_state(lyr.weight.shape[0], rng_power)
        # warm the estimate so the very first conditioned forward is accurate
        _, state = linalg.spectral_norm(lyr.weight, state, iters=5)
        states.append(state)
    model = GanModel(
        gen=gen,
        disc=disc,
        disc_power_states=states,
        gen_adam=nn.init_adam(
            nn.mlp_arrays(gen), lr=config.lr, beta1=config.beta1, beta2=config.beta2
        ),
        disc_adam=nn.init_adam(
            nn.mlp_arrays(disc), lr=config.lr, beta1=config.beta1, beta2=config.beta2
        ),
        config=config,
    )
    _conditioned_disc_weights(model, advance=False)
    return model


# ---------------------------------------------------------------------------
# weight conditioning


def apply_spectral_normalization(
    w: np.ndarray, state: PowerIterState
) -> tuple[np.ndarray, PowerIterState]:
    """w / sigma_hat with one warm power-iteration step; zero matrices pass through."""
    sigma, state = linalg.spectral_norm(w, state, iters=1)
    if sigma < 1e-12:
        return w, state
    return w / sigma, state


def apply_spectral_regularization(w: np.ndarray, i: int) -> np.ndarray:
    """Raise the top i singular values to sigma_1, then divide by sigma_1."""
    a = linalg.as_matrix(w)
    r = min(a.shape)
    if not 1 <= i <= r:
        raise ValidationError(f"i must be in [1, {r}], got {i}")
    res = linalg.svd(a)
    sigma1 = res.sigma[0]
    if sigma1 < 1e-12:
        return a
    d = res.sigma.copy()
    d[:i] = sigma1
    return (res.u * d) @ res.v.T / sigma1


def _sigma_estimate(w: np.ndarray, state: PowerIterState) -> float:
    """Spectral-norm estimate from the stored vector, without advancing it."""
    v = w.T @ state.u_vec
    nv = np.linalg.norm(v)
    if nv < 1e-300:
        return 0.0
    return float(np.linalg.norm(w @ (v / nv)))


def _conditioned_disc_weights(model: GanModel, advance: bool) -> tuple[list[np.ndarray], list[float]]:
    """Weights the discriminator actually uses, plus the detached 1/sigma scales.

    advance=True moves each layer's power state one warm step (once per
    discriminator update); advance=False reads the current estimate only.
    """
    reg = model.config.regularizer
    weights: list[np.ndarray] = []
    scales: list[float] = []
    for j, lyr in enumerate(model.disc.layers):
        w = lyr.weight
        if reg.mode == "none":
            weights.append(w)
            scales.append(1.0)
            continue
        if reg.mode == "spectral_norm":
            if advance:
                sigma, state = linalg.spectral_norm(w, model.disc_power_states[j], iters=1)
                model.disc_power_states[j] = state
            else:
                sigma = _sigma_estimate(w, model.disc_power_states[j])
            if sigma < 1e-12:
                weights.append(w)
                scales.append(1.0)
            else:
                weights.append(w / sigma)
                scales.append(sigma)
            continue
        res = linalg.svd(w)
        sigma1 = res.sigma[0]
        if sigma1 < 1e-12:
            weights.append(w)
            scales.append(1.0)
        else:
            i = regularized_rank_count(reg.i_fraction, w.shape)
            d = res.sigma.copy()
            d[:i] = sigma1
            weights.append((res.u * d) @ res.v.T / sigma1)
            scales.append(sigma1)
    model.effective_cache = weights
    return weights, scales


def conditioned_discriminator(model: GanModel) -> nn.MlpParams:
    """Discriminator with the conditioned weights most recently used in training."""
    if model.effective_cache is None:
        _conditioned_disc_weights(model, advance=False)
    layers = [
        nn.Layer(weight=w, bias=lyr.bias, spec=lyr.spec)
        for w, lyr in zip(model.effective_cache, model.disc.layers)
    ]
    return nn.MlpParams(layers)


def _disc_with(model: GanModel, weights: list[np.ndarray]) -> nn.MlpParams:
    return nn.MlpParams(
        [nn.Layer(weight=w, bias=l.bias, spec=l.spec) for w, l in zip(weights, model.disc.layers)]
    )


# ---------------------------------------------------------------------------
# training


def _saturating_loss(logits: np.ndarray) -> tuple[float, np.ndarray]:
    """mean log(1 - sigmoid(z)) and its gradient; minimized by the generator."""
    z = logits.reshape(-1)
    loss = -(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))))
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    return float(loss.mean()), -p / z.size


def train_step(
    model: GanModel, real_batch: np.ndarray, rng: np.random.Generator
) -> tuple[GanModel, float, float]:
    """One adversarial update; mutates and returns the model.

    The discriminator sees real rows labeled 1 and generated rows labeled 0,
    disc_steps_per_gen_step times; the generator then takes one step.
    """
    x = np.atleast_2d(np.asarray(real_batch, dtype=np.float64))
    if x.shape[0] < 2:
        raise ValidationError("real_batch needs at least 2 rows")
    if x.shape[1] != model.data_dim:
        raise ValidationError(f"real_batch has {x.shape[1]} columns, expected {model.data_dim}")
    cfg = model.config
    n = x.shape[0]
    d_loss = g_loss = float("nan")

    for _ in range(cfg.disc_steps_per_gen_step):
        z = rng.standard_normal((n, cfg.latent_dim))
        fake, _ = nn.forward(model.gen, z)
        eff, scales = _conditioned_disc_weights(model, advance=True)
        disc_eff = _disc_with(model, eff)
        logits_real, cache_real = nn.forward(disc_eff, x)
        logits_fake, cache_fake = nn.forward(disc_eff, fake)
        logits = np.concatenate([logits_real.reshape(-1), logits_fake.reshape(-1)])
        labels = np.concatenate([np.ones(n), np.zeros(n)])
        d_loss, grad = nn.bce_with_logits(logits, labels)
        if not np.isfinite(d_loss):
            raise TrainingError(f"non-finite discriminator loss at training step {model.step}")
        grads_real, _ = nn.backward(disc_eff, cache_real, grad[:n].reshape(-1, 1))
        grads_fake, _ = nn.backward(disc_eff, cache_fake, grad[n:].reshape(-1, 1))
        flat = []
        for gr, gf, s in zip(grads_real, grads_fake, scales):
            flat.append((gr.weight + gf.weight) / s)  # sigma detached: constant scale
            flat.append(gr.bias + gf.bias)
        arrays, model.disc_adam = nn.adam_update(nn.mlp_arrays(model.disc), flat, model.disc_adam)
        model.disc = nn.with_arrays(model.disc, arrays)

    z = rng.standard_normal((n, cfg.latent_dim))
    fake, gen_cache = nn.forward(model.gen, z)
    eff, _ = _conditioned_disc_weights(model, advance=False)
    disc_eff = _disc_with(model, eff)
    logits, disc_cache = nn.forward(disc_eff, fake)
    if cfg.saturating_gen_loss:
        g_loss, grad = _saturating_loss(logits)
    else:
        g_loss, grad = nn.bce_with_logits(logits, np.ones(n))
    if not np.isfinite(g_loss):
        raise TrainingError(f"non-finite generator loss at training step {model.step}")
    _, grad_fake = nn.backward(disc_eff, disc_cache, grad.reshape(-1, 1))
    gen_grads, _ = nn.backward(model.gen, gen_cache, grad_fake)
    arrays, model.gen_adam = nn.adam_update(
        nn.mlp_arrays(model.gen), nn.grad_arrays(gen_grads), model.gen_adam
    )
    model.gen = nn.with_arrays(model.gen, arrays)
    model.step += 1
    return model, d_loss, g_loss


def train(model: GanModel, data: Dataset, evaluator=None) -> tuple[GanModel, GanModel, TrainLog]:
    """Epoch loop with periodic evaluation and best-checkpoint tracking.

    evaluator(model, epoch) -> eval report; the checkpoint with the lowest
    mean avg % error wins (mean KL when no simulator is attached). Returns
    (best_model, final_model, log).
    """
    if data.n_rows == 0:
        raise ValidationError("cannot train on an empty dataset")
    cfg = model.config
    if model.scaler is None:
        model.scaler = dataio.fit_scaler(data)
        model.schema = data.schema
    x_all = dataio.transform(model.scaler, data.values)
    rng_shuffle = stream(cfg.seed, "gan-shuffle")
    rng_latent = stream(cfg.seed, "gan-latent")
    best: GanModel | None = None
    best_score = float("inf")
    for epoch in range(1, cfg.epochs + 1):
        perm = rng_shuffle.permutation(x_all.shape[0])
        d_losses, g_losses = [], []
        for start in range(0, x_all.shape[0], cfg.batch_size):
            batch = x_all[perm[start : start + cfg.batch_size]]
            if batch.shape[0] < 2:
                continue  # degenerate trailing batch
            try:
                _, d_loss, g_loss = train_step(model, batch, rng_latent)
            except TrainingError as e:
                raise TrainingError(f"epoch {epoch}: {e}") from e
            d_losses.append(d_loss)
            g_losses.append(g_loss)
        if evaluator is not None and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            try:
                report = evaluator(model, epoch)
            except Exception as e:
                raise TrainingError(f"evaluator failed at epoch {epoch}: {e}") from e
            model.log.append(
                TrainLogEntry(
                    epoch=epoch,
                    d_loss=float(np.mean(d_losses)) if d_losses else float("nan"),
                    g_loss=float(np.mean(g_losses)) if g_losses else float("nan"),
                    pct_error=report.pct_error,
                    mean_pct_error=report.mean_pct_error,
                    mean_kl=report.mean_kl,
                    disc_spectra=report.disc_spectra,
                )
            )
            score = report.mean_pct_error if report.mean_pct_error is not None else report.mean_kl
            if score < best_score:
                best_score = score
                best = copy.deepcopy(model)
    final = model
    if best is None:
        best = copy.deepcopy(final)
    return best, final, final.log


def sample(model: GanModel, n: int, rng: np.random.Generator) -> Dataset:
    """Draw n artificial rows in physical units using the stored scaler."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if model.scaler is None or model.schema is None:
        raise ValidationError("model has no scaler; train or load a trained checkpoint first")
    z = rng.standard_normal((n, model.config.latent_dim))
    out, _ = nn.forward(model.gen, z)
    return Dataset(schema=model.schema, values=dataio.inverse_transform(model.scaler, out))


# ---------------------------------------------------------------------------
# persistence


def write_train_log(path, log: TrainLog) -> None:
    """One CSV row per evaluated epoch; spectra flattened as sigma_l<j>_<k>."""
    lines = []
    if log.entries:
        first = log.entries[0]
        pct_names = sorted(first.pct_error) if first.pct_error is not None else []
        spec_cols = [
            f"sigma_l{j}_{k}" for j, s in enumerate(first.disc_spectra) for k in range(s.size)
        ]
        header = ["epoch", "d_loss", "g_loss", "mean_pct_error", "mean_kl"]
        header += [f"pct_{p}" for p in pct_names] + spec_cols
        lines.append(",".join(header))
        for e in log.entries:
            row = [str(e.epoch), repr(e.d_loss), repr(e.g_loss)]
            row.append("" if e.mean_pct_error is None else repr(e.mean_pct_error))
            row.append(repr(e.mean_kl))
            row += [repr(e.pct_error[p]) for p in pct_names]
            row += [repr(float(x)) for s in e.disc_spectra for x in s]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _config_doc(cfg: GanConfig) -> dict:
    return {
        "latent_dim": cfg.latent_dim,
        "gen_hidden": list(cfg.gen_hidden),
        "disc_hidden": list(cfg.disc_hidden),
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "disc_steps_per_gen_step": cfg.disc_steps_per_gen_step,
        "regularizer": {"mode": cfg.regularizer.mode, "i_fraction": cfg.regularizer.i_fraction},
        "seed": cfg.seed,
        "eval_every": cfg.eval_every,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "saturating_gen_loss": cfg.saturating_gen_loss,
    }


def config_from_doc(doc: dict) -> GanConfig:
    reg = doc.get("regularizer", {"mode": "none"})
    return GanConfig(
        latent_dim=int(doc["latent_dim"]),
        gen_hidden=tuple(doc.get("gen_hidden", (64, 64, 64))),
        disc_hidden=tuple(doc.get("disc_hidden", (64, 64, 64))),
        lr=float(doc.get("lr", 5e-4)),
        batch_size=int(doc.get("batch_size", 64)),
        epochs=int(doc.get("epochs", 2000)),
        disc_steps_per_gen_step=int(doc.get("disc_steps_per_gen_step", 1)),
        regularizer=RegularizerMode(
            mode=reg.get("mode", "none"), i_fraction=float(reg.get("i_fraction", 0.5))
        ),
        seed=int(doc.get("seed", 0)),
        eval_every=int(doc.get("eval_every", 50)),
        beta1=float(doc.get("beta1", 0.5)),
        beta2=float(doc.get("beta2", 0.999)),
        saturating_gen_loss=bool(doc.get("saturating_gen_loss", False)),
    )


def _schema_doc(schema: FeatureSchema) -> list[dict]:
    return [
        {"name": f.name, "role": f.role, "unit": f.unit, "categorical": f.categorical}
        for f in schema.features
    ]


def _schema_from_doc(doc: list[dict]) -> FeatureSchema:
    return FeatureSchema(
        tuple(
            dataio.Feature(
                name=f["name"], role=f["role"], unit=f.get("unit", ""),
                categorical=bool(f.get("categorical", False)),
            )
            for f in doc
        )
    )


def save_gan(path, model: GanModel) -> None:
    doc = {
        "format_version": nn.CHECKPOINT_VERSION,
        "kind": "gan",
        "config": _config_doc(model.config),
        "data_dim": model.data_dim,
        "gen": nn.mlp_to_doc(model.gen),
        "disc": nn.mlp_to_doc(model.disc),
        "power_u": [s.u_vec.tolist() for s in model.disc_power_states],
        "scaler": None if model.scaler is None else nn.scaler_to_doc(model.scaler),
        "schema": None if model.schema is None else _schema_doc(model.schema),
        "step": model.step,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def load_gan(path) -> GanModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != "gan":
        raise ValidationError(f"{path} is not a GAN checkpoint")
    config = config_from_doc(doc["config"])
    gen = nn.mlp_from_doc(doc["gen"])
    disc = nn.mlp_from_doc(doc["disc"])
    model = GanModel(
        gen=gen,
        disc=disc,
        disc_power_states=[
            PowerIterState(u_vec=np.array(u, dtype=np.float64)) for u in doc["power_u"]
        ],
        gen_adam=nn.init_adam(nn.mlp_arrays(gen), config.lr, config.beta1, config.beta2),
        disc_adam=nn.init_adam(nn.mlp_arrays(disc), config.lr, config.beta1, config.beta2),
        config=config,
        scaler=None if doc["scaler"] is None else nn.scaler_from_doc(doc["scaler"]),
        schema=None if doc["schema"] is None else _schema_from_doc(doc["schema"]),
        step=int(doc.get("step", 0)),
    )
    _conditioned_disc_weights(model, advance=False)
    return model
