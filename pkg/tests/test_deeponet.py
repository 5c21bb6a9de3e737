import numpy as np
import pytest

from latentflow.analysis import model_predictions, reconstruction_error
from latentflow.checkpoint import load_checkpoint, save_checkpoint
from latentflow.dataset import CoordNormalizer, SnapshotDataset
from latentflow.deeponet import (
    DeepONetModel,
    deeponet_eval,
    deeponet_latent_series,
    init_deeponet,
    train_deeponet,
)
from latentflow.fourier import PeriodicGrid
from latentflow.nn import gradient_rel_error, numerical_gradient, param_count
from latentflow.training import TrainConfig

NORM = CoordNormalizer(t_shift=5.0, t_scale=5.0, x_shift=0.0, x_scale=np.pi, u_shift=0.3,
                       u_scale=2.0)


def _with_layer(model, which, fn):
    """Return a copy of ``model`` with ``fn`` applied to the last layer of branch or trunk."""
    fb, ft, bias = model._split(model.theta.copy())
    dims = model.branch_dims if which == "branch" else model.trunk_dims
    net = model._net(dims, fb if which == "branch" else ft).copy()
    fn(net.layers[-1])
    parts = [net.flatten(), ft] if which == "branch" else [fb, net.flatten()]
    theta = np.concatenate([*parts, [bias]])
    return DeepONetModel(model.branch_dims, model.trunk_dims, theta, model.activation,
                         model.normalizer)


def test_parameter_layout():
    m = init_deeponet(latent_dim=3, seed=0)
    assert m.theta.size == 2 * param_count([1, 20, 20, 20, 3]) + 1
    assert m.output_bias == 0.0
    assert m.branch.dims == [1, 20, 20, 20, 3]
    assert m.trunk.activation == "sine"


def test_zero_model_returns_bias():
    m = init_deeponet(latent_dim=2, seed=0, normalizer=NORM)
    theta = np.zeros_like(m.theta)
    theta[-1] = 0.75
    m = DeepONetModel(m.branch_dims, m.trunk_dims, theta, m.activation, NORM)
    assert deeponet_eval(m, 1.0, 2.0) == pytest.approx(NORM.invert(u=0.75))
    out = m.predict(np.linspace(-3, 3, 5), 7.0)
    np.testing.assert_allclose(out, NORM.invert(u=0.75), rtol=1e-15)


def test_rank_one_case_is_product():
    m = init_deeponet(latent_dim=1, seed=3, normalizer=NORM)
    x, t = 0.4, 6.2
    xn, tn = NORM.apply(x=x, t=t)
    b = m.branch
    from latentflow.nn import mlp_forward

    bv, _ = mlp_forward(b, np.array([[tn]]))
    tv, _ = mlp_forward(m.trunk, np.array([[xn]]))
    expected = NORM.invert(u=bv[0, 0] * tv[0, 0] + m.output_bias)
    assert deeponet_eval(m, x, t) == pytest.approx(expected, rel=1e-14)


def test_batch_matches_scalar_eval():
    m = init_deeponet(latent_dim=3, seed=1, normalizer=NORM)
    xs = np.linspace(-np.pi, np.pi, 9)
    ts = np.linspace(0, 10, 9)
    batch = m.predict(xs, ts)
    scalar = np.array([deeponet_eval(m, x, t) for x, t in zip(xs, ts)])
    np.testing.assert_allclose(batch, scalar, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("alpha", [0.1, 3.0, -2.5])
def test_inner_product_gauge_freedom(alpha):
    m = init_deeponet(latent_dim=3, seed=2, normalizer=NORM)

    def scale(factor):
        def fn(layer):
            layer.weights[...] *= factor
            layer.biases[...] *= factor
        return fn

    g = _with_layer(_with_layer(m, "branch", scale(alpha)), "trunk", scale(1 / alpha))
    assert g.output_bias == m.output_bias
    x, t = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(0, 10, 7))
    np.testing.assert_allclose(g.predict(x, t), m.predict(x, t), rtol=0, atol=1e-10)


def test_fixed_time_is_combination_of_trunk_functions():
    from latentflow.nn import mlp_forward

    m = init_deeponet(latent_dim=4, seed=4, normalizer=NORM)
    t = 3.3
    xs = np.linspace(-np.pi, np.pi, 12)
    coeff, _ = mlp_forward(m.branch, np.array([[NORM.apply(t=t)]]))
    basis, _ = mlp_forward(m.trunk, NORM.apply(x=xs)[:, None])
    assembled = NORM.invert(u=basis @ coeff[0] + m.output_bias)
    np.testing.assert_allclose(m.predict(xs, t), assembled, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("act,latent,hidden,seed", [
    ("sine", 3, (20, 20, 20), 0), ("sine", 1, (5,), 1), ("swish", 2, (6, 4), 2),
    ("tanh", 3, (5, 5), 3), ("swish", 6, (8,), 4), ("sine", 2, (7, 3), 5),
])
def test_loss_gradient_matches_finite_differences(act, latent, hidden, seed):
    m = init_deeponet(latent, hidden, act, seed)
    rng = np.random.default_rng(seed)
    tn = rng.uniform(-1, 1, 5)
    xn = rng.uniform(-1, 1, 6)
    target = rng.standard_normal((5, 6))
    m.theta[-1] = 0.3

    def loss(theta):
        pred, _ = m.grid_forward(theta, tn, xn)
        return float(np.mean((pred - target) ** 2))

    pred, cache = m.grid_forward(m.theta, tn, xn)
    grad = m.grid_backward(m.theta, cache, 2 * (pred - target) / pred.size)
    h = 1e-6 if act == "sine" else 1e-5
    assert gradient_rel_error(grad, numerical_gradient(loss, m.theta, h)) < 1e-5


def test_latent_series_shapes_and_labels():
    m = init_deeponet(latent_dim=3, seed=0, normalizer=NORM)
    lt = deeponet_latent_series(m, np.linspace(0, 10, 501))
    assert lt.coords.shape == (501, 3)
    assert lt.labels == ["branch_1", "branch_2", "branch_3"]
    assert lt.source == "deeponet"


def test_constant_branch_gives_identical_rows():
    m = init_deeponet(latent_dim=3, seed=0, normalizer=NORM)

    def freeze(layer):
        layer.weights[...] = 0.0
        layer.biases[...] = [0.1, -0.2, 0.3]

    m = _with_layer(m, "branch", freeze)
    lt = deeponet_latent_series(m, np.linspace(0, 10, 20))
    np.testing.assert_array_equal(lt.coords, np.tile([0.1, -0.2, 0.3], (20, 1)))


def _grid_dataset(fn, nt=501, n=64, t_end=2 * np.pi):
    grid = PeriodicGrid(n)
    t = np.linspace(0.0, t_end, nt)
    T, X = np.meshgrid(t, grid.nodes, indexing="ij")
    return SnapshotDataset(t, grid, fn(X, T), {"equation": "toy"})


def test_training_fits_constant_data_within_500_epochs():
    ds = _grid_dataset(lambda x, t: np.full_like(x, 0.7))
    with pytest.warns(UserWarning, match="zero variance"):
        model, history = train_deeponet(ds, TrainConfig(epochs=500, learning_rate=1e-3, seed=0))
    assert len(history) == 500 and np.all(np.isfinite(history))
    err = reconstruction_error(model_predictions(model, ds), ds.values).relative_error_percent
    assert err < 0.1


def test_training_fits_separable_data_with_one_mode():
    ds = _grid_dataset(lambda x, t: np.sin(x) * np.cos(t))
    model, _ = train_deeponet(ds, TrainConfig(epochs=500, learning_rate=1e-3, latent_dim=1,
                                              seed=0))
    err = reconstruction_error(model_predictions(model, ds), ds.values).relative_error_percent
    assert err < 2.0


def test_training_is_deterministic():
    ds = _grid_dataset(lambda x, t: np.sin(x - t), nt=20, n=16)
    cfg = TrainConfig(epochs=5, learning_rate=1e-3, seed=11)
    a, ha = train_deeponet(ds, cfg)
    b, hb = train_deeponet(ds, cfg)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert ha == hb


def test_checkpoint_roundtrip(tmp_path):
    m = init_deeponet(latent_dim=3, seed=9, normalizer=NORM)
    m.theta[-1] = -0.4
    save_checkpoint(m, tmp_path / "m.lfck", seed=9)
    back, header = load_checkpoint(tmp_path / "m.lfck")
    assert header["seed"] == 9
    np.testing.assert_array_equal(back.theta, m.theta)
    assert back.normalizer == NORM
    assert back.predict(0.3, 2.0) == m.predict(0.3, 2.0)
