"""Dense MLP with manual forward/backward passes and Adam optimization.

Also hosts the standalone MLP regressor used as the trained-network
reference when scoring generated data, and the versioned JSON checkpoint
format shared with the GAN module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import Dataset, MinMaxScaler
from .linalg import ValidationError
from .seeding import stream

CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# layers and activations


@dataclass(frozen=True)
class ActivationKind:
    kind: str  # leaky_relu | tanh | sigmoid | linear
    alpha: float = 0.2

    def __post_init__(self):
        if self.kind not in ("leaky_relu", "tanh", "sigmoid", "linear"):
            raise ValidationError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"leaky_relu alpha must be in (0, 1), got {self.alpha}")


def leaky_relu(alpha: float = 0.2) -> ActivationKind:
    return ActivationKind("leaky_relu", alpha)


def tanh() -> ActivationKind:
    return ActivationKind("tanh")


def sigmoid() -> ActivationKind:
    return ActivationKind("sigmoid")


def linear() -> ActivationKind:
    return ActivationKind("linear")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: ActivationKind

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValidationError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")


@dataclass
class Layer:
    weight: np.ndarray  # out_dim x in_dim
    bias: np.ndarray  # out_dim
    spec: LayerSpec


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.spec.out_dim != b.spec.in_dim:
                raise ValidationError(
                    f"layer dims mismatch: {a.spec.out_dim} feeds {b.spec.in_dim}"
                )
        for lyr in self.layers:
            if lyr.weight.shape != (lyr.spec.out_dim, lyr.spec.in_dim):
                raise ValidationError("weight shape does not match layer spec")
            if lyr.bias.shape != (lyr.spec.out_dim,):
                raise ValidationError("bias shape does not match layer spec")

    @property
    def in_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].spec.out_dim

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.spec) for l in self.layers])


def init_mlp(specs: list[LayerSpec], rng: np.random.Generator) -> MlpParams:
    """He-uniform init for leaky-ReLU layers, Xavier-uniform otherwise; zero biases."""
    layers = []
    for spec in specs:
        if spec.activation.kind == "leaky_relu":
            limit = np.sqrt(6.0 / spec.in_dim)
        else:
            limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        w = rng.uniform(-limit, limit, size=(spec.out_dim, spec.in_dim))
        layers.append(Layer(weight=w, bias=np.zeros(spec.out_dim), spec=spec))
    return MlpParams(layers)


def _activate(z: np.ndarray, act: ActivationKind) -> np.ndarray:
    if act.kind == "leaky_relu":
        return np.where(z > 0.0, z, act.alpha * z)
    if act.kind == "tanh":
        return np.tanh(z)
    if act.kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    return z


def _activate_grad(z: np.ndarray, a: np.ndarray, act: ActivationKind) -> np.ndarray:
    if act.kind == "leaky_relu":
        return np.where(z > 0.0, 1.0, act.alpha)
    if act.kind == "tanh":
        return 1.0 - a * a
    if act.kind == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class ForwardCache:
    batch: np.ndarray
    pre: list[np.ndarray]  # z per layer
    post: list[np.ndarray]  # activation(z) per layer


def forward(params: MlpParams, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Batched forward pass; the cache holds what backward needs."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != params.in_dim:
        raise ValidationError(f"batch has {x.shape[1]} columns, expected {params.in_dim}")
    pre, post = [], []
    a = x
    for lyr in params.layers:
        z = a @ lyr.weight.T + lyr.bias
        a = _activate(z, lyr.spec.activation)
        pre.append(z)
        post.append(a)
    return a, ForwardCache(batch=x, pre=pre, post=post)


@dataclass
class LayerGrads:
    weight: np.ndarray
    bias: np.ndarray


def backward(
    params: MlpParams, cache: ForwardCache, grad_output: np.ndarray
) -> tuple[list[LayerGrads], np.ndarray]:
    """Backpropagate grad_output; returns per-layer grads and the input grad."""
    if len(cache.pre) != len(params.layers):
        raise ValidationError("cache does not match network depth")
    g = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
    if g.shape != cache.post[-1].shape:
        raise ValidationError(
            f"grad_output shape {g.shape} does not match output {cache.post[-1].shape}"
        )
    grads: list[LayerGrads] = [None] * len(params.layers)  # type: ignore[list-item]
    for i in range(len(params.layers) - 1, -1, -1):
        lyr = params.layers[i]
        dz = g * _activate_grad(cache.pre[i], cache.post[i], lyr.spec.activation)
        inp = cache.batch if i == 0 else cache.post[i - 1]
        grads[i] = LayerGrads(weight=dz.T @ inp, bias=dz.sum(axis=0))
        g = dz @ lyr.weight
    return grads, g


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy on logits, stable for |logit| up to ~500.

    Returns the loss and d(loss)/d(logits) = (sigmoid(z) - y) / n.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if z.shape != y.shape:
        raise ValidationError("logits and labels must have the same length")
    if np.any((y != 0.0) & (y != 1.0)):
        raise ValidationError("labels must be 0 or 1")
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    return float(per.mean()), (p - y) / z.size


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int
    lr: float
    beta1: float
    beta2: float
    eps: float


def init_adam(
    arrays: list[np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
        raise ValidationError("betas must be in [0, 1)")
    if eps <= 0.0 or lr <= 0.0:
        raise ValidationError("lr and eps must be positive")
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_update(
    arrays: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam step over a list of parameter arrays."""
    if len(arrays) != len(state.m) or len(arrays) != len(grads):
        raise ValidationError("parameter/gradient/state lengths differ")
    t = state.t + 1
    out, m_new, v_new = [], [], []
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        if a.shape != g.shape:
            raise ValidationError("gradient shape does not match parameter shape")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        out.append(a - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        m_new.append(m)
        v_new.append(v)
    return out, replace(state, m=m_new, v=v_new, t=t)


def mlp_arrays(params: MlpParams) -> list[np.ndarray]:
    arrays = []
    for lyr in params.layers:
        arrays.append(lyr.weight)
        arrays.append(lyr.bias)
    return arrays


def grad_arrays(grads: list[LayerGrads]) -> list[np.ndarray]:
    arrays = []
    for g in grads:
        arrays.append(g.weight)
        arrays.append(g.bias)
    return arrays


def with_arrays(params: MlpParams, arrays: list[np.ndarray]) -> MlpParams:
    layers = []
    for i, lyr in enumerate(params.layers):
        layers.append(Layer(weight=arrays[2 * i], bias=arrays[2 * i + 1], spec=lyr.spec))
    return MlpParams(layers)


# ---------------------------------------------------------------------------
# MLP regressor


@dataclass(frozen=True)
class RegressorConfig:
    hidden: tuple[int, ...] = (64, 64, 64)
    alpha: float = 0.2
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 800
    batch_size: int = 16
    test_fraction: float = 0.2
    seed: int = 0
    targets: tuple[str, ...] | None = None  # None = every simulator_output feature


@dataclass
class RegressionMetrics:
    mse: float
    rmse: float
    mae: float
    r2: float | None
    mean_pct_error: float
    degenerate: bool = False


@dataclass
class MlpRegressor:
    params: MlpParams
    input_scaler: MinMaxScaler
    target_scaler: MinMaxScaler
    input_features: list[str]
    target_features: list[str]
    metrics: RegressionMetrics


def fit_mlp_regressor(data: Dataset, config: RegressorConfig = RegressorConfig()) -> MlpRegressor:
    """Train an MLP on the dataset's input features against its output features.

    Scalers are fit on the training split only; metrics are reported on the
    held-out split in physical units. A constant target degrades gracefully:
    the model predicts the constant and is flagged degenerate.
    """
    if data.n_rows < 2:
        raise ValidationError("need at least 2 rows to fit and hold out a test split")
    out_names = [data.schema.names[i] for i in data.schema.output_indices]
    target_names = list(config.targets) if config.targets else out_names
    for t in target_names:
        if t not in out_names:
            raise ValidationError(f"target {t!r} is not a simulator_output feature")
    in_names = [data.schema.names[i] for i in data.schema.input_indices]

    train, test = dataio.split(data, config.test_fraction, config.seed)
    x_cols = [data.schema.index_of(n) for n in in_names]
    y_cols = [data.schema.index_of(n) for n in target_names]

    in_scaler = MinMaxScaler(
        mins=train.values[:, x_cols].min(axis=0), maxs=train.values[:, x_cols].max(axis=0)
    )
    tg_scaler = MinMaxScaler(
        mins=train.values[:, y_cols].min(axis=0), maxs=train.values[:, y_cols].max(axis=0)
    )
    degenerate = bool(tg_scaler.degenerate.all())

    x_train = dataio.transform(in_scaler, train.values[:, x_cols])
    y_train = dataio.transform(tg_scaler, train.values[:, y_cols])

    dims = [len(in_names), *config.hidden]
    specs = [
        LayerSpec(dims[i], dims[i + 1], leaky_relu(config.alpha)) for i in range(len(dims) - 1)
    ]
    specs.append(LayerSpec(dims[-1], len(target_names), linear()))
    rng_init = stream(config.seed, "regressor-init")
    rng_shuffle = stream(config.seed, "regressor-shuffle")
    params = init_mlp(specs, rng_init)
    adam = init_adam(mlp_arrays(params), lr=config.lr, beta1=config.beta1, beta2=config.beta2)

    n = x_train.shape[0]
    bs = min(config.batch_size, n)
    for _ in range(config.epochs):
        order = rng_shuffle.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            xb, yb = x_train[idx], y_train[idx]
            pred, cache = forward(params, xb)
            grad_out = 2.0 * (pred - yb) / pred.size
            grads, _ = backward(params, cache, grad_out)
            arrays, adam = adam_update(mlp_arrays(params), grad_arrays(grads), adam)
            params = with_arrays(params, arrays)

    model = MlpRegressor(
        params=params,
        input_scaler=in_scaler,
        target_scaler=tg_scaler,
        input_features=in_names,
        target_features=target_names,
        metrics=RegressionMetrics(0.0, 0.0, 0.0, None, 0.0, degenerate),
    )
    y_true = test.values[:, y_cols]
    y_pred = predict(model, test.values[:, x_cols])
    err = y_pred - y_true
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((y_true - y_true.mean(axis=0)) ** 2))
    r2 = None if degenerate or sst == 0.0 else float(1.0 - np.sum(err**2) / sst)
    pct = float(np.mean(100.0 * np.abs(err) / np.maximum(np.abs(y_true), 1e-12)))
    model.metrics = RegressionMetrics(
        mse=mse, rmse=float(np.sqrt(mse)), mae=mae, r2=r2, mean_pct_error=pct, degenerate=degenerate
    )
    return model


def predict(model: MlpRegressor, rows: np.ndarray) -> np.ndarray:
    """Predict target features (physical units) for rows of input features."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != len(model.input_features):
        raise ValidationError(
            f"expected {len(model.input_features)} input columns, got {rows.shape[1]}"
        )
    x = dataio.transform(model.input_scaler, rows)
    out, _ = forward(model.params, x)
    return dataio.inverse_transform(model.target_scaler, out)


# ---------------------------------------------------------------------------
# checkpoint serialization


def _activation_doc(act: ActivationKind) -> dict:
    return {"kind": act.kind, "alpha": act.alpha}


def _activation_from(doc: dict) -> ActivationKind:
    return ActivationKind(kind=doc["kind"], alpha=doc.get("alpha", 0.2))


def mlp_to_doc(params: MlpParams) -> list[dict]:
    return [
        {
            "in_dim": l.spec.in_dim,
            "out_dim": l.spec.out_dim,
            "activation": _activation_doc(l.spec.activation),
            "weight": l.weight.reshape(-1).tolist(),
            "bias": l.bias.tolist(),
        }
        for l in params.layers
    ]


def mlp_from_doc(doc: list[dict]) -> MlpParams:
    layers = []
    for d in doc:
        spec = LayerSpec(d["in_dim"], d["out_dim"], _activation_from(d["activation"]))
        w = np.array(d["weight"], dtype=np.float64).reshape(spec.out_dim, spec.in_dim)
        layers.append(Layer(weight=w, bias=np.array(d["bias"], dtype=np.float64), spec=spec))
    return MlpParams(layers)


def scaler_to_doc(scaler: MinMaxScaler) -> dict:
    return {
        "mins": scaler.mins.tolist(),
        "maxs": scaler.maxs.tolist(),
        "categorical": scaler.categorical.astype(int).tolist(),
    }


def scaler_from_doc(doc: dict) -> MinMaxScaler:
    return MinMaxScaler(
        mins=np.array(doc["mins"], dtype=np.float64),
        maxs=np.array(doc["maxs"], dtype=np.float64),
        categorical=np.array(doc["categorical"], dtype=bool),
    )


def save_regressor(path, model: MlpRegressor) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "mlp_regressor",
        "layers": mlp_to_doc(model.params),
        "input_scaler": scaler_to_doc(model.input_scaler),
        "target_scaler": scaler_to_doc(model.target_scaler),
        "input_features": model.input_features,
        "target_features": model.target_features,
        "metrics": {
            "mse": model.metrics.mse,
            "rmse": model.metrics.rmse,
            "mae": model.metrics.mae,
            "r2": model.metrics.r2,
            "mean_pct_error": model.metrics.mean_pct_error,
            "degenerate": model.metrics.degenerate,
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def load_regressor(path) -> MlpRegressor:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != "mlp_regressor":
        raise ValidationError(f"{path} is not an MLP regressor checkpoint")
    m = doc["metrics"]
    return MlpRegressor(
        params=mlp_from_doc(doc["layers"]),
        input_scaler=scaler_from_doc(doc["input_scaler"]),
        target_scaler=scaler_from_doc(doc["target_scaler"]),
        input_features=list(doc["input_features"]),
        target_features=list(doc["target_features"]),
        metrics=RegressionMetrics(
            mse=m["mse"],
            rmse=m["rmse"],
            mae=m["mae"],
            r2=m["r2"],
            mean_pct_error=m["mean_pct_error"],
            degenerate=m["degenerate"],
        ),
    )
