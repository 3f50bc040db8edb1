import numpy as np
import pytest
from helpers import fd_gradient, max_rel_err

from wavinr.siren import backward_batch, forward_batch, forward_with_cache, init_siren, set_omega


def test_init_deterministic():
    a = init_siren(3, 8, 2, omega=5.0, seed=42)
    b = init_siren(3, 8, 2, omega=5.0, seed=42)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_init_bounds():
    net = init_siren(3, 64, 4, omega=5.0, seed=7)
    assert np.max(np.abs(net.weights[0])) <= 1.0  # fan_in 1
    bound_hidden = np.sqrt(6.0 / 64) / 5.0
    assert np.max(np.abs(net.weights[1])) <= bound_hidden
    assert np.max(np.abs(net.weights[2])) <= bound_hidden
    for b in net.biases:
        assert np.all(b == 0.0)


def test_init_shapes_depth2():
    net = init_siren(2, 64, 1, omega=3.0, seed=0)
    assert [w.shape for w in net.weights] == [(64, 1), (1, 64)]


def test_forward_zero_weights():
    net = init_siren(2, 4, 2, omega=1.0, seed=0)
    for w in net.weights:
        w[...] = 0.0
    out = forward_batch(net, [0.3, -0.7])
    assert np.all(out == 0.0)


def test_forward_one_neuron_analytic():
    net = init_siren(2, 1, 1, omega=np.pi / 2, seed=0)
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    out = forward_batch(net, [1.0])
    assert abs(out[0, 0] - 1.0) < 1e-15  # sin(pi/2)


def test_forward_batch_equals_stacked_singles():
    net = init_siren(3, 6, 3, omega=4.0, seed=3)
    coords = [-0.9, -0.3, 0.0, 0.4, 1.0]
    batch = forward_batch(net, coords)
    singles = np.vstack([forward_batch(net, [c]) for c in coords])
    # summation order may differ between batched and single-sample GEMMs
    assert np.allclose(batch, singles, rtol=1e-13, atol=1e-15)


def test_backward_zero_upstream():
    net = init_siren(2, 5, 2, omega=2.0, seed=1)
    grads = backward_batch(net, [0.1, 0.2], np.zeros((2, 2)))
    for g in grads.weights + grads.biases:
        assert np.all(g == 0.0)


def test_backward_one_neuron_analytic():
    # d out / d H_1 at x=1 is omega*cos(omega)*H_2*x = 0 when omega = pi/2
    net = init_siren(2, 1, 1, omega=np.pi / 2, seed=0)
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    grads = backward_batch(net, [1.0], np.ones((1, 1)))
    assert abs(grads.weights[0][0, 0]) < 1e-15
    # d out / d H_2 is the hidden activation sin(pi/2) = 1
    assert abs(grads.weights[1][0, 0] - 1.0) < 1e-15


@pytest.mark.parametrize("depth,width,out_dim,seed", [(2, 6, 3, 0), (3, 5, 2, 1), (2, 16, 4, 2)])
def test_backward_matches_finite_differences(depth, width, out_dim, seed):
    rng = np.random.default_rng(seed)
    net = init_siren(depth, width, out_dim, omega=3.0, seed=seed)
    for b in net.biases:
        b[...] = 0.1 * rng.standard_normal(b.shape)
    coords = rng.uniform(-1, 1, size=7)
    upstream = rng.standard_normal((7, out_dim))

    def loss():
        return float(np.sum(upstream * forward_batch(net, coords)))

    analytic = backward_batch(net, coords, upstream)
    numeric = fd_gradient(loss, net.weights + net.biases)
    err = max_rel_err(analytic.weights + analytic.biases, numeric)
    assert err < 1e-4


def test_gradcheck_many_random_nets():
    rng = np.random.default_rng(99)
    worst = 0.0
    for trial in range(20):
        depth = int(rng.integers(2, 4))
        width = int(rng.integers(2, 17))
        out_dim = int(rng.integers(1, 5))
        net = init_siren(depth, width, out_dim, omega=float(rng.uniform(0.5, 8)), seed=trial)
        coords = rng.uniform(-1, 1, size=4)
        upstream = rng.standard_normal((4, out_dim))

        def loss():
            return float(np.sum(upstream * forward_batch(net, coords)))

        analytic = backward_batch(net, coords, upstream)
        numeric = fd_gradient(loss, net.weights + net.biases)
        worst = max(worst, max_rel_err(analytic.weights + analytic.biases, numeric))
    assert worst < 1e-4


def test_backward_reuses_forward_cache():
    net = init_siren(3, 4, 2, omega=2.0, seed=5)
    coords = [0.25, -0.5]
    upstream = np.ones((2, 2))
    _, cache = forward_with_cache(net, coords)
    with_cache = backward_batch(net, coords, upstream, cache=cache)
    without = backward_batch(net, coords, upstream)
    for a, b in zip(with_cache.weights, without.weights):
        assert np.array_equal(a, b)


def test_output_bounded_by_l1_chain():
    # |out| <= prod of induced-l1 row sums, loose sanity cap
    rng = np.random.default_rng(11)
    net = init_siren(2, 8, 3, omega=6.0, seed=12)
    coords = rng.uniform(-1, 1, size=16)
    out = forward_batch(net, coords)
    cap = np.max(np.sum(np.abs(net.weights[-1]), axis=1))  # |sin| <= 1 into last layer
    assert np.max(np.abs(out)) <= cap * 1.01


def test_set_omega_same_value_bitwise():
    net = init_siren(2, 6, 2, omega=4.0, seed=8)
    coords = [0.1, 0.9]
    before = forward_batch(net, coords)
    after = forward_batch(set_omega(net, 4.0), coords)
    assert np.array_equal(before, after)


def test_set_omega_changes_forward_analytically():
    net = init_siren(2, 1, 1, omega=2.0, seed=0)
    net.weights[0][...] = 1.0
    net.weights[1][...] = 1.0
    out1 = forward_batch(net, [0.5])[0, 0]
    out2 = forward_batch(set_omega(net, 4.0), [0.5])[0, 0]
    assert abs(out1 - np.sin(1.0)) < 1e-15
    assert abs(out2 - np.sin(2.0)) < 1e-15


def test_set_omega_never_touches_weights():
    net = init_siren(3, 5, 2, omega=3.0, seed=9)
    checksums = [w.tobytes() for w in net.weights]
    swapped = set_omega(net, 7.5)
    assert swapped.omega == 7.5
    for w, c in zip(swapped.weights, checksums):
        assert w.tobytes() == c


def test_set_omega_rejects_nonpositive():
    net = init_siren(2, 4, 1, omega=1.0, seed=0)
    with pytest.raises(ValueError):
        set_omega(net, 0.0)


def test_forward_determinism_bitwise():
    a = forward_batch(init_siren(2, 8, 2, omega=5.0, seed=3), [0.2, 0.4])
    b = forward_batch(init_siren(2, 8, 2, omega=5.0, seed=3), [0.2, 0.4])
    assert np.array_equal(a, b)
