import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_atlas.errors import DimensionError, SingularSystemError, TrainingDivergedError
from latent_atlas.numerics import (
    ACTIVATIONS,
    Adam,
    DenseNet,
    Layer,
    RngState,
    adam_step,
    backward,
    child_seed,
    forward,
    grad_check,
    grad_check_net,
    rng_normal,
    solve_least_squares,
    splitmix64,
)

# ---------------------------------------------------------------- rng


def test_splitmix64_reference_values():
    # reference outputs of the canonical splitmix64 generator seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & (2**64 - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_stream_matches_scalar_definition():
    rng = RngState(1234)
    block = rng.next_u64(5)
    golden = 0x9E3779B97F4A7C15
    expect = [splitmix64((1234 + i * golden) & (2**64 - 1)) for i in range(5)]
    assert [int(v) for v in block] == expect
    assert rng.counter == 5


def test_normal_same_seed_identical():
    a = rng_normal(RngState(42), [4])
    b = rng_normal(RngState(42), [4])
    assert a.tobytes() == b.tobytes()


def test_normal_different_seed_differs():
    assert not np.array_equal(rng_normal(RngState(42), [4]), rng_normal(RngState(43), [4]))


def test_normal_moments():
    z = rng_normal(RngState(7), [100000]).astype(np.float64)
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1) < 0.05


def test_normal_empty_shape_rejected():
    with pytest.raises(ValueError):
        rng_normal(RngState(0), [])


def test_stream_continues_across_calls():
    whole = RngState(9).normal(10)
    r = RngState(9)
    parts = np.concatenate([r.normal(4), r.normal(6)])
    # Box-Muller consumes uniforms in pairs, so an even split reproduces the block
    assert whole.tobytes() == parts.tobytes()


def test_uniform_range():
    u = RngState(3).uniform(100000)
    assert u.min() > 0 and u.max() <= 1


def test_child_seed_definition():
    assert child_seed(5, 3) == splitmix64(5 ^ 3)
    assert RngState(5).spawn(3).seed == child_seed(5, 3)


def test_permutation_is_permutation():
    p = RngState(1).permutation(50)
    assert sorted(p.tolist()) == list(range(50))


# ---------------------------------------------------------------- dense nets


def _identity_net(d):
    return DenseNet([Layer(np.eye(d, dtype=np.float32), np.zeros(d, np.float32), "identity")])


def test_identity_layer_passes_input():
    x = RngState(0).normal((5, 4))
    out, _ = forward(_identity_net(4), x)
    assert np.array_equal(out, x)


def test_relu_negative_input_zero():
    net = DenseNet.init([3, 4], ["relu"], RngState(0))
    net.layers[0].weight[:] = np.abs(net.layers[0].weight)
    out = net(-np.ones((2, 3), np.float32))
    assert np.all(out == 0)


def test_two_layer_matches_hand_product():
    net = DenseNet.init([3, 4, 2], ["tanh", "identity"], RngState(0))
    net.layers[0].bias[:] = 0.1
    net.layers[1].bias[:] = -0.2
    x = np.array([[1.0, 0.0, 0.0]], np.float32)
    w0, b0 = net.layers[0].weight.astype(np.float64), net.layers[0].bias.astype(np.float64)
    w1, b1 = net.layers[1].weight.astype(np.float64), net.layers[1].bias.astype(np.float64)
    expect = np.tanh(w0[:, 0] + b0) @ w1.T + b1
    assert np.allclose(net(x)[0], expect, atol=1e-6)


def test_width_mismatch_raises():
    with pytest.raises(DimensionError):
        forward(_identity_net(4), np.zeros((2, 5), np.float32))


def test_layers_must_chain():
    a = Layer(np.zeros((3, 2), np.float32), np.zeros(3, np.float32))
    b = Layer(np.zeros((2, 4), np.float32), np.zeros(2, np.float32))
    with pytest.raises(DimensionError):
        DenseNet([a, b])


def test_zero_grad_output_gives_zero_grads():
    net = DenseNet.init([5, 6, 3], ["leaky_relu", "sigmoid"], RngState(1))
    x = RngState(2).normal((4, 5))
    out, cache = forward(net, x)
    grads, gin = backward(net, cache, np.zeros_like(out))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(gin == 0)


def test_identity_net_squared_error_input_grad():
    rng = RngState(3)
    w = rng.normal((3, 3))
    b = rng.normal(3)
    net = DenseNet([Layer(w, b, "identity")]).astype(np.float64)
    x = rng.normal((2, 3)).astype(np.float64)
    t = rng.normal((2, 3)).astype(np.float64)
    out, cache = net.forward(x)
    _, gin = net.backward(cache, 2 * (out - t))
    expect = 2 * (x @ net.layers[0].weight.T + net.layers[0].bias - t) @ net.layers[0].weight
    assert np.allclose(gin, expect, atol=1e-12)


@pytest.mark.parametrize("act", sorted(ACTIVATIONS))
def test_backward_matches_finite_differences(act):
    net = DenseNet.init([6, 8, 5], [act, act], RngState(11))
    x = RngState(12).normal((7, 6))
    t = RngState(13).normal((7, 5)).astype(np.float64)

    def loss_fn(out):
        d = out - t
        return float(np.mean(d**2)), 2 * d / d.size

    assert grad_check_net(net, loss_fn, x) < 1e-3


def test_forward_backward_pure():
    net = DenseNet.init([4, 6, 2], ["leaky_relu", "tanh"], RngState(0))
    x = RngState(1).normal((3, 4))
    o1, c1 = net.forward(x)
    o2, c2 = net.forward(x)
    assert o1.tobytes() == o2.tobytes()
    g = np.ones_like(o1)
    g1, i1 = net.backward(c1, g)
    g2, i2 = net.backward(c2, g)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(g1 + [i1], g2 + [i2]))


def test_backward_grad_shape_mismatch():
    net = DenseNet.init([4, 2], ["identity"], RngState(0))
    _, cache = net.forward(np.zeros((3, 4), np.float32))
    with pytest.raises(DimensionError):
        net.backward(cache, np.zeros((3, 5), np.float32))


# ---------------------------------------------------------------- grad_check


def test_grad_check_linear_least_squares():
    rng = RngState(4)
    A = rng.normal((20, 5)).astype(np.float64)
    y = rng.normal(20).astype(np.float64)
    w = rng.normal(5).astype(np.float64)

    def f():
        r = A @ w - y
        return float(r @ r), [2 * A.T @ r]

    assert grad_check([w], f) < 1e-6


def test_grad_check_detects_corrupted_gradient():
    net = DenseNet.init([4, 5, 3], ["tanh", "identity"], RngState(0))
    net64 = net.astype(np.float64)
    x = RngState(1).normal((6, 4)).astype(np.float64)

    def f():
        out, cache = net64.forward(x)
        grads, _ = net64.backward(cache, 2 * out / out.size)
        grads[0] = grads[0] * 1.5  # planted bug
        return float(np.mean(out**2)), grads

    assert grad_check(net64.params(), f) > 1e-1


def test_grad_check_requires_positive_eps_and_finite_loss():
    w = np.zeros(2)
    with pytest.raises(ValueError):
        grad_check([w], lambda: (0.0, [w]), eps=0)
    with pytest.raises(TrainingDivergedError):
        grad_check([w], lambda: (float("nan"), [w]))


# ---------------------------------------------------------------- adam


def test_adam_zero_grads_keep_params():
    p = [np.array([1.0, -2.0], np.float32)]
    before = p[0].copy()
    opt = Adam(lr=0.1)
    adam_step(p, [np.zeros(2, np.float32)], opt)
    assert np.array_equal(p[0], before)
    assert opt.t == 1


def test_adam_first_step_size():
    p = [np.array([0.5])]
    opt = Adam(lr=0.1)
    opt.step(p, [np.array([1.0])])
    assert p[0][0] == pytest.approx(0.4, abs=1e-6)


def test_adam_deterministic():
    def run():
        rng = RngState(0)
        p = [rng.normal((3, 3))]
        opt = Adam(lr=0.01)
        for _ in range(20):
            opt.step(p, [rng.normal((3, 3))])
        return p[0].tobytes() + opt.m[0].tobytes() + opt.v[0].tobytes()

    assert run() == run()


def test_adam_rejects_nonfinite_without_side_effects():
    p = [np.ones(3)]
    opt = Adam()
    with pytest.raises(TrainingDivergedError, match="non-finite"):
        opt.step(p, [np.array([1.0, np.nan, 0.0])])
    assert np.array_equal(p[0], np.ones(3)) and opt.t == 0


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        Adam().step([np.ones(3)], [np.ones(4)])


# ---------------------------------------------------------------- least squares


def test_lstsq_identity():
    A = RngState(0).normal((16, 16))
    X = solve_least_squares(A, A, 0.0)
    assert np.abs(X - np.eye(16)).max() < 1e-4


def test_lstsq_huge_ridge():
    rng = RngState(1)
    X = solve_least_squares(rng.normal((50, 8)), rng.normal((50, 3)), 1e9)
    assert np.linalg.norm(X) < 1e-3


def test_lstsq_planted_recovery():
    rng = RngState(2)
    A = rng.normal((500, 16)).astype(np.float64)
    Xs = rng.normal((16, 5)).astype(np.float64)
    B = A @ Xs + 0.01 * rng.normal((500, 5))
    X = solve_least_squares(A, B, 1e-6)
    assert np.linalg.norm(X - Xs) / np.linalg.norm(Xs) < 0.05


def test_lstsq_singular_needs_ridge():
    A = np.ones((10, 3))
    with pytest.raises(SingularSystemError, match="ridge"):
        solve_least_squares(A, np.ones((10, 2)), 0.0)
    assert np.all(np.isfinite(solve_least_squares(A, np.ones((10, 2)), 1e-3)))


def test_lstsq_result_float32_and_vector_rhs():
    rng = RngState(5)
    A = rng.normal((30, 4))
    X = solve_least_squares(A, rng.normal(30), 0.0)
    assert X.dtype == np.float32 and X.shape == (4,)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_lstsq_exact_on_consistent_systems(d, k, seed):
    rng = RngState(seed)
    A = rng.normal((3 * d + 2, d)).astype(np.float64)
    Xs = rng.normal((d, k)).astype(np.float64)
    X = solve_least_squares(A, A @ Xs, 0.0)
    assert np.abs(X - Xs).max() < 1e-4


def test_lstsq_row_mismatch():
    with pytest.raises(DimensionError):
        solve_least_squares(np.ones((3, 2)), np.ones((4, 2)))
