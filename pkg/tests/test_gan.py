import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuit_augmentor import dataio, evaluation, gan, linalg, nn, oracle
from circuit_augmentor.seeding import stream


def tiny_config(**kw):
    base = dict(
        latent_dim=4,
        gen_hidden=(8, 8),
        disc_hidden=(8, 8),
        batch_size=8,
        epochs=3,
        eval_every=1,
        seed=0,
    )
    base.update(kw)
    return gan.GanConfig(**base)


def tiny_data(n=32, seed=0):
    return oracle.generate_dataset("not", n, seed)


def zero_disc(model):
    """All-zero discriminator stays a fixed point of the update when real and
    fake half-batches are equal, so both losses are computable exactly."""
    for lyr in model.disc.layers:
        lyr.weight[:] = 0.0
        lyr.bias[:] = 0.0
    return model


# ---------------------------------------------------------------------------
# configuration


def test_regularizer_mode_validation():
    gan.RegularizerMode(mode="spectral_reg", i_fraction=1.0)
    with pytest.raises(gan.ValidationError):
        gan.RegularizerMode(mode="spectral")
    with pytest.raises(gan.ValidationError):
        gan.RegularizerMode(mode="spectral_reg", i_fraction=0.0)
    with pytest.raises(gan.ValidationError):
        gan.RegularizerMode(mode="spectral_reg", i_fraction=1.3)


def test_gan_config_validation():
    with pytest.raises(gan.ValidationError):
        tiny_config(batch_size=1)
    with pytest.raises(gan.ValidationError):
        tiny_config(epochs=-1)
    with pytest.raises(gan.ValidationError):
        tiny_config(gen_hidden=())
    with pytest.raises(gan.ValidationError):
        tiny_config(lr=0.0)


def test_regularized_rank_count_rounds_half_up():
    assert gan.regularized_rank_count(0.5, (5, 9)) == 3  # floor(2.5 + .5)
    assert gan.regularized_rank_count(0.5, (4, 9)) == 2
    assert gan.regularized_rank_count(0.1, (5, 9)) == 1
    assert gan.regularized_rank_count(0.01, (100, 3)) == 1  # never zero
    assert gan.regularized_rank_count(1.0, (6, 4)) == 4


# ---------------------------------------------------------------------------
# construction


def test_build_shapes_and_determinism():
    cfg = tiny_config()
    a = gan.build(cfg, data_dim=5)
    b = gan.build(cfg, data_dim=5)
    assert a.gen.in_dim == 4 and a.gen.out_dim == 5
    assert a.disc.in_dim == 5 and a.disc.out_dim == 1
    assert len(a.disc_power_states) == len(a.disc.layers)
    for la, lb in zip(a.gen.layers, b.gen.layers):
        assert np.array_equal(la.weight, lb.weight)
    assert a.gen.layers[-1].spec.activation.kind == "tanh"
    assert a.disc.layers[-1].spec.activation.kind == "linear"


def test_build_gen_disc_streams_differ():
    model = gan.build(tiny_config(), data_dim=8)
    # same shape, independent init streams
    assert not np.array_equal(model.gen.layers[0].weight.T, model.disc.layers[0].weight)


# ---------------------------------------------------------------------------
# spectral conditioning


def test_apply_spectral_normalization_unit_norm():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((12, 6)) * 3.0
    state = linalg.init_power_state(12, rng)
    for _ in range(50):  # warm the state on the fixed matrix
        w_sn, state = gan.apply_spectral_normalization(w, state)
    assert linalg.svd(w_sn).sigma[0] == pytest.approx(1.0, abs=1e-6)


def test_apply_spectral_normalization_zero_matrix_unchanged():
    state = linalg.init_power_state(3, np.random.default_rng(0))
    w = np.zeros((3, 2))
    w_sn, state2 = gan.apply_spectral_normalization(w, state)
    assert np.array_equal(w_sn, w)
    assert np.array_equal(state2.u_vec, state.u_vec)


def test_apply_spectral_regularization_raises_top_i():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((10, 10)) * 2.0
    out = gan.apply_spectral_regularization(w, i=5)
    sigma = linalg.svd(out).sigma
    assert sigma[:5] == pytest.approx(np.ones(5), abs=1e-9)
    ref = linalg.svd(w).sigma
    assert sigma[5:] == pytest.approx(ref[5:] / ref[0], abs=1e-9)


def test_spectral_regularization_rank_one_equals_normalization():
    rng = np.random.default_rng(3)
    for _ in range(10):
        w = rng.standard_normal((9, 7))
        exact = w / linalg.svd(w).sigma[0]
        assert np.max(np.abs(gan.apply_spectral_regularization(w, 1) - exact)) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_spectral_regularization_preserves_subspaces(seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((6, 5))
    i = int(rng.integers(1, 6))
    out = gan.apply_spectral_regularization(w, i)
    # row/column spaces are unchanged: out = U D' V^T / sigma_1 shares both
    ref = linalg.svd(w)
    proj = ref.u @ ref.u.T
    assert np.max(np.abs(proj @ out - out)) < 1e-9


# ---------------------------------------------------------------------------
# training steps


def test_frozen_zero_discriminator_gives_ln2_losses():
    data = tiny_data()
    model = zero_disc(gan.build(tiny_config(), len(data.schema)))
    scaler = dataio.fit_scaler(data)
    model.scaler, model.schema = scaler, data.schema
    batch = dataio.transform(scaler, data.values[:8])
    model, d_loss, g_loss = gan.train_step(model, batch, stream(0, "t"))
    assert d_loss == math.log(2.0)
    assert g_loss == math.log(2.0)
    # the all-zero discriminator is a fixed point of its own update
    assert all(np.all(lyr.weight == 0.0) for lyr in model.disc.layers)


def test_frozen_zero_disc_saturating_loss_is_minus_ln2():
    data = tiny_data()
    cfg = tiny_config(saturating_gen_loss=True)
    model = zero_disc(gan.build(cfg, len(data.schema)))
    scaler = dataio.fit_scaler(data)
    model.scaler, model.schema = scaler, data.schema
    batch = dataio.transform(scaler, data.values[:8])
    _, d_loss, g_loss = gan.train_step(model, batch, stream(0, "t"))
    assert d_loss == math.log(2.0)
    assert g_loss == -math.log(2.0)


def test_train_step_updates_and_counts():
    data = tiny_data()
    model = gan.build(tiny_config(), len(data.schema))
    scaler = dataio.fit_scaler(data)
    model.scaler, model.schema = scaler, data.schema
    w_before = model.gen.layers[0].weight.copy()
    batch = dataio.transform(scaler, data.values[:8])
    model, d_loss, g_loss = gan.train_step(model, batch, stream(0, "s"))
    assert model.step == 1
    assert np.isfinite(d_loss) and np.isfinite(g_loss)
    assert not np.array_equal(model.gen.layers[0].weight, w_before)


def test_train_step_raises_on_nonfinite():
    data = tiny_data()
    model = gan.build(tiny_config(), len(data.schema))
    scaler = dataio.fit_scaler(data)
    model.scaler, model.schema = scaler, data.schema
    model.gen.layers[0].weight[0, 0] = np.nan
    with pytest.raises(gan.TrainingError):
        gan.train_step(model, dataio.transform(scaler, data.values[:8]), stream(0, "x"))


def test_spectral_norm_mode_keeps_used_weights_near_unit():
    data = tiny_data(n=64)
    cfg = tiny_config(regularizer=gan.RegularizerMode(mode="spectral_norm"), epochs=5)
    model = gan.build(cfg, len(data.schema))
    best, final, log = gan.train(model, data)
    weights, _ = gan._conditioned_disc_weights(final, advance=False)
    for w in weights:
        assert linalg.svd(w).sigma[0] == pytest.approx(1.0, abs=0.05)


def test_spectral_reg_mode_top_half_equal():
    data = tiny_data(n=64)
    cfg = tiny_config(
        regularizer=gan.RegularizerMode(mode="spectral_reg", i_fraction=0.5), epochs=5
    )
    model = gan.build(cfg, len(data.schema))
    best, final, log = gan.train(model, data)
    weights, _ = gan._conditioned_disc_weights(final, advance=False)
    for w in weights:
        sigma = linalg.svd(w).sigma
        i = gan.regularized_rank_count(0.5, w.shape)
        assert sigma[:i] == pytest.approx(np.ones(i), abs=1e-6)
        assert sigma[0] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# the train loop


def test_train_logs_and_selects_best():
    data = oracle.generate_dataset("nand2", 96, 1)
    _, sim = oracle.row_simulator("nand2")
    cfg = tiny_config(epochs=4, eval_every=2, batch_size=16)
    model = gan.build(cfg, len(data.schema))
    hook = evaluation.make_evaluator(data, simulator=sim, n_eval=64)
    best, final, log = gan.train(model, data, hook)
    epochs = [e.epoch for e in log.entries]
    assert epochs == [2, 4]
    assert all(e.mean_pct_error is not None for e in log.entries)
    best_epoch = min(log.entries, key=lambda e: e.mean_pct_error).epoch
    assert best.step == best_epoch * (96 // 16)


def test_train_without_evaluator_has_empty_log():
    data = tiny_data(n=40)
    model = gan.build(tiny_config(epochs=2), len(data.schema))
    best, final, log = gan.train(model, data)
    assert log.entries == []
    assert final.step == 2 * (40 // 8)


def test_train_skips_single_row_trailing_batch():
    data = tiny_data(n=9)  # batch 8 leaves a 1-row tail
    model = gan.build(tiny_config(epochs=2), len(data.schema))
    best, final, log = gan.train(model, data)
    assert final.step == 2  # one usable batch per epoch


def test_train_log_rejects_disorder():
    log = gan.TrainLog()
    entry = gan.TrainLogEntry(
        epoch=5, d_loss=0.1, g_loss=0.2, pct_error=None,
        mean_pct_error=None, mean_kl=0.3, disc_spectra=[],
    )
    log.append(entry)
    with pytest.raises(gan.ValidationError):
        log.append(entry)


# ---------------------------------------------------------------------------
# sampling and persistence


def test_sample_shape_range_determinism():
    data = tiny_data(n=64)
    model = gan.build(tiny_config(epochs=2), len(data.schema))
    best, final, log = gan.train(model, data)
    out1 = gan.sample(final, 33, stream(7, "s"))
    out2 = gan.sample(final, 33, stream(7, "s"))
    assert out1.n_rows == 33
    assert out1.schema.names == data.schema.names
    assert np.array_equal(out1.values, out2.values)
    # inverse transform keeps samples inside the observed training box
    for j in range(data.values.shape[1]):
        assert out1.values[:, j].min() >= data.values[:, j].min() - 1e-9
        assert out1.values[:, j].max() <= data.values[:, j].max() + 1e-9


def test_checkpoint_round_trip(tmp_path):
    data = tiny_data(n=48)
    cfg = tiny_config(regularizer=gan.RegularizerMode(mode="spectral_norm"), epochs=3)
    model = gan.build(cfg, len(data.schema))
    best, final, log = gan.train(model, data)
    path = tmp_path / "gan.json"
    gan.save_gan(path, final)
    loaded = gan.load_gan(path)
    assert loaded.config == final.config
    assert loaded.step == final.step
    a = gan.sample(final, 16, stream(3, "cmp"))
    b = gan.sample(loaded, 16, stream(3, "cmp"))
    assert np.array_equal(a.values, b.values)
    for sa, sb in zip(final.disc_power_states, loaded.disc_power_states):
        assert np.array_equal(sa.u_vec, sb.u_vec)


def test_load_rejects_wrong_kind(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"kind": "zebra"}', encoding="utf-8")
    with pytest.raises(gan.ValidationError):
        gan.load_gan(path)


def test_write_train_log_columns(tmp_path):
    data = oracle.generate_dataset("not", 64, 3)
    _, sim = oracle.row_simulator("not")
    model = gan.build(tiny_config(epochs=2, eval_every=1), len(data.schema))
    hook = evaluation.make_evaluator(data, simulator=sim, n_eval=64)
    best, final, log = gan.train(model, data, hook)
    path = tmp_path / "log.csv"
    gan.write_train_log(path, log)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[:5] == ["epoch", "d_loss", "g_loss", "mean_pct_error", "mean_kl"]
    assert len(lines) == 1 + len(log.entries)
