import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuit_augmentor import nn, oracle
from circuit_augmentor.dataio import Dataset

import naive


def small_net(seed, in_dim=None, depth=None):
    rng = np.random.default_rng(seed)
    in_dim = in_dim or int(rng.integers(1, 6))
    depth = depth or int(rng.integers(1, 4))
    acts = [nn.leaky_relu(0.2), nn.tanh(), nn.sigmoid(), nn.linear()]
    specs = []
    d = in_dim
    for _ in range(depth):
        out = int(rng.integers(1, 6))
        specs.append(nn.LayerSpec(d, out, acts[int(rng.integers(0, len(acts)))]))
        d = out
    return nn.init_mlp(specs, rng), rng


def test_forward_shapes_and_determinism():
    params, rng = small_net(0, in_dim=4, depth=3)
    x = rng.standard_normal((7, 4))
    out1, cache = nn.forward(params, x)
    out2, _ = nn.forward(params, x)
    assert out1.shape == (7, params.out_dim)
    assert np.array_equal(out1, out2)


def test_activations_pointwise():
    z = np.array([[-2.0, 0.0, 3.0]])
    spec = nn.LayerSpec(3, 3, nn.leaky_relu(0.2))
    params = nn.MlpParams([nn.Layer(np.eye(3), np.zeros(3), spec)])
    out, _ = nn.forward(params, z)
    assert out[0] == pytest.approx([-0.4, 0.0, 3.0], abs=1e-15)

    spec_t = nn.LayerSpec(3, 3, nn.tanh())
    params_t = nn.MlpParams([nn.Layer(np.eye(3), np.zeros(3), spec_t)])
    out_t, _ = nn.forward(params_t, z)
    assert out_t == pytest.approx(np.tanh(z), abs=1e-15)
    assert np.all(np.abs(out_t) < 1.0)


def test_init_bounds_and_zero_biases():
    rng = np.random.default_rng(5)
    specs = [
        nn.LayerSpec(24, 48, nn.leaky_relu(0.2)),
        nn.LayerSpec(48, 8, nn.tanh()),
    ]
    params = nn.init_mlp(specs, rng)
    he = math.sqrt(6.0 / 24)
    xavier = math.sqrt(6.0 / (48 + 8))
    assert np.max(np.abs(params.layers[0].weight)) <= he
    assert np.max(np.abs(params.layers[1].weight)) <= xavier
    # uniform init should come close to its bound with this many draws
    assert np.max(np.abs(params.layers[0].weight)) > 0.9 * he
    assert np.all(params.layers[0].bias == 0.0)
    assert np.all(params.layers[1].bias == 0.0)


def test_mlp_params_validation():
    spec = nn.LayerSpec(3, 2, nn.linear())
    with pytest.raises(nn.ValidationError):
        nn.MlpParams([nn.Layer(np.zeros((3, 3)), np.zeros(2), spec)])
    good = nn.Layer(np.zeros((2, 3)), np.zeros(2), spec)
    bad_next = nn.Layer(np.zeros((1, 4)), np.zeros(1), nn.LayerSpec(4, 1, nn.linear()))
    with pytest.raises(nn.ValidationError):
        nn.MlpParams([good, bad_next])


def flatten_params(params):
    return np.concatenate([a.reshape(-1) for a in nn.mlp_arrays(params)])


def unflatten_into(params, flat):
    arrays = nn.mlp_arrays(params)
    out = []
    at = 0
    for a in arrays:
        out.append(flat[at : at + a.size].reshape(a.shape))
        at += a.size
    return nn.with_arrays(params, out)


def test_backward_matches_finite_differences():
    # squared-output loss; checks weight, bias, and input grads together
    worst = 0.0
    for seed in range(100):
        params, rng = small_net(seed)
        x = rng.standard_normal((4, params.in_dim))

        def loss_at(flat_list):
            p = unflatten_into(params, np.array(flat_list))
            out, _ = nn.forward(p, x)
            return 0.5 * float(np.sum(out * out))

        out, cache = nn.forward(params, x)
        grads, _ = nn.backward(params, cache, out)
        analytic = np.concatenate(
            [a.reshape(-1) for g in grads for a in (g.weight, g.bias)]
        )
        numeric = np.array(naive.fd_gradient(loss_at, list(flatten_params(params)), eps=1e-6))
        scale = max(1.0, float(np.max(np.abs(numeric))))
        worst = max(worst, float(np.max(np.abs(analytic - numeric))) / scale)
    assert worst <= 1e-4


def test_backward_input_gradient():
    params, rng = small_net(7, in_dim=3, depth=2)
    x = rng.standard_normal((1, 3))

    def loss_at(vals):
        out, _ = nn.forward(params, np.array([vals]))
        return 0.5 * float(np.sum(out * out))

    out, cache = nn.forward(params, x)
    _, grad_in = nn.backward(params, cache, out)
    numeric = naive.fd_gradient(loss_at, list(x[0]), eps=1e-6)
    assert grad_in[0] == pytest.approx(numeric, abs=1e-6)


# ---------------------------------------------------------------------------
# losses


def test_bce_matches_naive_and_is_symmetric():
    rng = np.random.default_rng(2)
    z = rng.uniform(-8, 8, size=40)
    y = (rng.uniform(size=40) < 0.5).astype(float)
    loss, grad = nn.bce_with_logits(z, y)
    assert loss == pytest.approx(naive.naive_bce(list(z), list(y)), abs=1e-12)
    # classifying z as real equals classifying -z as fake
    for zi in [-3.7, -0.2, 0.0, 1.4, 9.0]:
        a, _ = nn.bce_with_logits(np.array([zi]), np.array([1.0]))
        b, _ = nn.bce_with_logits(np.array([-zi]), np.array([0.0]))
        assert a == b


def test_bce_extreme_logits_finite():
    loss, grad = nn.bce_with_logits(np.array([500.0, -500.0]), np.array([0.0, 1.0]))
    assert np.isfinite(loss) and loss == pytest.approx(500.0, rel=1e-12)
    assert np.all(np.isfinite(grad))


def test_bce_gradient_matches_finite_differences():
    z = np.array([-1.5, 0.3, 2.0])
    y = np.array([1.0, 0.0, 1.0])
    _, grad = nn.bce_with_logits(z, y)
    numeric = naive.fd_gradient(lambda v: nn.bce_with_logits(np.array(v), y)[0], list(z))
    assert grad == pytest.approx(numeric, abs=1e-8)


def test_bce_validation():
    with pytest.raises(nn.ValidationError):
        nn.bce_with_logits(np.zeros(3), np.zeros(2))
    with pytest.raises(nn.ValidationError):
        nn.bce_with_logits(np.zeros(2), np.array([0.5, 1.0]))


def test_bce_at_zero_logits_is_ln2():
    loss, _ = nn.bce_with_logits(np.zeros(8), np.array([0, 1] * 4, dtype=float))
    assert loss == math.log(2.0)


# ---------------------------------------------------------------------------
# Adam


def test_adam_first_step_is_signed_lr():
    # with bias correction the first update is lr * g / (|g| + eps')
    arrays = [np.array([[1.0, -2.0]])]
    state = nn.init_adam(arrays, lr=0.01)
    grad = [np.array([[0.3, -0.7]])]
    new_arrays, state = nn.adam_update(arrays, grad, state)
    step = new_arrays[0] - arrays[0]
    assert step[0] == pytest.approx([-0.01, 0.01], rel=1e-6)


def test_adam_converges_on_quadratic():
    arrays = [np.array([5.0, -3.0])]
    state = nn.init_adam(arrays, lr=0.05)
    for _ in range(2000):
        grad = [2.0 * arrays[0]]
        arrays, state = nn.adam_update(arrays, grad, state)
    assert np.max(np.abs(arrays[0])) < 1e-3


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_adam_step_bounded_by_lr(seed):
    # per-coordinate Adam steps are at most ~lr after bias correction
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal((3, 3))]
    state = nn.init_adam(arrays, lr=0.01)
    for _ in range(5):
        grads = [rng.standard_normal((3, 3)) * 10.0 ** rng.integers(-3, 4)]
        new_arrays, state = nn.adam_update(arrays, grads, state)
        assert np.max(np.abs(new_arrays[0] - arrays[0])) <= 0.011
        arrays = new_arrays


# ---------------------------------------------------------------------------
# regressor


def _toy_regression_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    schema = oracle.gate_schema("nand2")
    data = oracle.generate_dataset("nand2", n, seed)
    return data, schema


def test_regressor_learns_gate_delays():
    data, _ = _toy_regression_data()
    model = nn.fit_mlp_regressor(data, nn.RegressorConfig(seed=0))
    assert not model.metrics.degenerate
    assert model.metrics.r2 > 0.9
    assert model.metrics.mse == pytest.approx(model.metrics.rmse**2, rel=1e-12)


def test_regressor_requires_two_rows():
    data, _ = _toy_regression_data(n=5)
    single = Dataset(schema=data.schema, values=data.values[:1])
    with pytest.raises(nn.ValidationError):
        nn.fit_mlp_regressor(single, nn.RegressorConfig(epochs=1))


def test_regressor_constant_target_degenerate():
    data, _ = _toy_regression_data(n=60)
    vals = data.values.copy()
    vals[:, data.schema.output_indices] = 7.5
    const = Dataset(schema=data.schema, values=vals)
    model = nn.fit_mlp_regressor(const, nn.RegressorConfig(epochs=5, seed=1))
    assert model.metrics.degenerate
    assert model.metrics.r2 is None
    pred = nn.predict(model, const.inputs()[:4])
    assert pred == pytest.approx(7.5 * np.ones_like(pred), rel=1e-6)


def test_regressor_save_load_round_trip(tmp_path):
    data, _ = _toy_regression_data(n=80)
    model = nn.fit_mlp_regressor(data, nn.RegressorConfig(epochs=20, seed=2))
    path = tmp_path / "reg.json"
    nn.save_regressor(path, model)
    loaded = nn.load_regressor(path)
    x = data.inputs()[:10]
    assert np.array_equal(nn.predict(model, x), nn.predict(loaded, x))
