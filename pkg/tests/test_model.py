import numpy as np
import pytest
from helpers import fd_gradient, max_rel_err

from wavinr.checkpoint import load_model, save_model
from wavinr.model import (
    apply_rank_mask,
    backward_image,
    build_model,
    coordinate_grid,
    count_flops,
    dense_mlp_flops,
    forward,
    generate_coefficients,
    generate_image,
)
from wavinr.siren import forward_batch
from wavinr.tensor_ops import ShapeError, frobenius_norm, mode_product, numerical_tucker_rank
from wavinr.wavelet import hwt

DIMS = (8, 8, 4)


def small_model(seed=0, dims=DIMS, lambda_x=8, lambda_y=8, width=6, rz=2, mu=10.0):
    return build_model(
        dims,
        lambda_x=lambda_x,
        lambda_y=lambda_y,
        mu=mu,
        omega_z=2.0,
        rz=rz,
        width=width,
        depth=2,
        seed=seed,
    )


def test_coordinate_grid_examples():
    assert np.array_equal(coordinate_grid(2), [-1.0, 1.0])
    assert np.array_equal(coordinate_grid(3), [-1.0, 0.0, 1.0])
    assert np.array_equal(coordinate_grid(1), [0.0])
    g = coordinate_grid(5)
    assert np.all(np.diff(g) > 0)
    assert np.allclose(g + g[::-1], 0.0)


def test_apply_rank_mask():
    rng = np.random.default_rng(0)
    core = rng.standard_normal((4, 5, 3))
    assert np.array_equal(apply_rank_mask(core, (4, 5, 3)), core)
    masked = apply_rank_mask(core, (1, 1, 3))
    assert np.array_equal(masked[0, 0, :], core[0, 0, :])
    masked[0, 0, :] = 0.0
    assert np.all(masked == 0.0)
    with pytest.raises(ShapeError):
        apply_rank_mask(core, (5, 5, 3))


def test_zero_core_gives_zero_blocks():
    model = small_model()
    model.core[...] = 0.0
    blocks = generate_coefficients(model, DIMS)
    for b in blocks.as_list():
        assert np.all(b == 0.0)


def tucker_synthesis_oracle(core, u, v, w):
    return mode_product(mode_product(mode_product(core, w, 3), v, 2), u, 1)


def test_full_rank_masking_matches_tucker_oracle():
    model = small_model(seed=3)
    cx, cy, rz = model.core_dims
    model.set_ranks([cx] * 4, [cy] * 4)
    state = forward(model, DIMS)
    for s in range(4):
        u = state.factors["U"][s]
        v = state.factors["V"][s]
        w = state.factors["W"]
        oracle = tucker_synthesis_oracle(model.core, u, v, w)
        got = state.blocks.as_list()[s]
        assert np.max(np.abs(got - oracle)) < 1e-13 * max(1.0, np.max(np.abs(oracle)))


def test_masked_fast_path_matches_naive_order():
    # naive order: zero the core outside the prefix, then full mode products
    model = small_model(seed=4)
    state = forward(model, DIMS)
    for s in range(4):
        rx, ry = model.ranks_x[s], model.ranks_y[s]
        masked = apply_rank_mask(model.core, (rx, ry, model.core_dims[2]))
        oracle = tucker_synthesis_oracle(
            masked, state.factors["U"][s], state.factors["V"][s], state.factors["W"]
        )
        got = state.blocks.as_list()[s]
        assert np.max(np.abs(got - oracle)) < 1e-13 * max(1.0, np.max(np.abs(oracle)))


def test_rank_cap_by_construction():
    model = small_model(seed=5, lambda_x=6, lambda_y=6)
    model.set_ranks([1, 2, 2, 1], [1, 2, 2, 1])
    blocks = generate_coefficients(model, DIMS)
    r = numerical_tucker_rank(blocks.b1, 1e-8)
    assert r[0] <= 1 and r[1] <= 1 and r[2] <= model.core_dims[2]


def test_rank_cap_fuzz_mode1():
    rng = np.random.default_rng(6)
    for trial in range(10):
        model = small_model(seed=100 + trial)
        model.core[...] = rng.standard_normal(model.core_dims)
        rx = int(rng.integers(1, model.core_dims[0] + 1))
        model.set_ranks([rx, 2, 2, 2], [2, 2, 2, 2])
        b1 = generate_coefficients(model, DIMS).b1
        assert numerical_tucker_rank(b1, 1e-8)[0] <= rx


def test_spectral_coupling_and_spatial_decoupling():
    model = small_model(seed=7)
    before = generate_coefficients(model, DIMS)

    # perturbing the shared spectral net changes every band
    model.spectral.weights[0][0, 0] += 0.05
    after = generate_coefficients(model, DIMS)
    for b_new, b_old in zip(after.as_list(), before.as_list()):
        assert not np.array_equal(b_new, b_old)
    model.spectral.weights[0][0, 0] -= 0.05

    # perturbing band 2's x-net changes only band 2, bitwise
    base = generate_coefficients(model, DIMS)
    model.spatial_x[1].weights[0][0, 0] += 0.05
    bumped = generate_coefficients(model, DIMS)
    assert not np.array_equal(bumped.b2, base.b2)
    assert np.array_equal(bumped.b1, base.b1)
    assert np.array_equal(bumped.b3, base.b3)
    assert np.array_equal(bumped.b4, base.b4)


def test_generate_image_zero_params():
    model = small_model(seed=8)
    model.core[...] = 0.0
    assert np.all(generate_image(model, DIMS) == 0.0)


def test_generate_image_energy_identity():
    model = small_model(seed=9)
    state = forward(model, DIMS)
    energy_blocks = sum(frobenius_norm(b) ** 2 for b in state.blocks.as_list())
    energy_img = frobenius_norm(state.image) ** 2
    assert abs(energy_img - energy_blocks) < 1e-12 * max(1.0, energy_blocks)


def test_hwt_of_image_matches_coefficients():
    model = small_model(seed=10)
    state = forward(model, DIMS)
    rec = hwt(state.image)
    for got, want in zip(rec.as_list(), state.blocks.as_list()):
        assert np.max(np.abs(got - want)) < 1e-12 * max(1.0, np.max(np.abs(want)))


def test_backward_zero_upstream():
    model = small_model(seed=11)
    state = forward(model, DIMS)
    grads = backward_image(model, state, np.zeros(DIMS))
    for g in grads.flat():
        assert np.all(g == 0.0)


def test_masked_core_gradient_exactly_zero():
    model = small_model(seed=12)
    cx, cy, _ = model.core_dims
    assert max(model.ranks_x) < cx  # masking active in this configuration
    state = forward(model, DIMS)
    rng = np.random.default_rng(12)
    grads = backward_image(model, state, rng.standard_normal(DIMS))
    rx_max, ry_max = max(model.ranks_x), max(model.ranks_y)
    assert np.all(grads.core[rx_max:, :, :] == 0.0)
    assert np.all(grads.core[:, ry_max:, :] == 0.0)
    assert np.any(grads.core[:rx_max, :ry_max, :] != 0.0)


def test_full_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    model = small_model(seed=13)
    target = rng.standard_normal(DIMS)

    def loss():
        diff = generate_image(model, DIMS) - target
        return float((diff**2).sum())

    state = forward(model, DIMS)
    grads = backward_image(model, state, 2.0 * (state.image - target))
    numeric = fd_gradient(loss, model.params())
    assert max_rel_err(grads.flat(), numeric) < 1e-4


def test_gradient_wrt_single_spatial_weight():
    model = small_model(seed=14, dims=(8, 8, 3), rz=2)
    dims = (8, 8, 3)
    rng = np.random.default_rng(14)
    target = rng.standard_normal(dims)

    def loss():
        diff = generate_image(model, dims) - target
        return float((diff**2).sum())

    state = forward(model, dims)
    grads = backward_image(model, state, 2.0 * (state.image - target))
    w = model.spatial_y[2].weights[1]
    numeric = fd_gradient(loss, [w])
    assert max_rel_err([grads.spatial_y[2].weights[1]], numeric) < 1e-4


def test_count_flops_formula():
    assert count_flops((2, 2, 1), width=1, depth=1, r=1) == 20
    base = count_flops((16, 16, 4), width=8, depth=2, r=3)
    assert count_flops((16, 16, 8), width=8, depth=2, r=3) > base
    assert count_flops((32, 16, 4), width=8, depth=2, r=3) > base


def test_count_flops_ratio_at_reference_scale():
    dims = (256, 256, 31)
    banded = count_flops(dims, width=256, depth=2, r=31)
    dense = dense_mlp_flops(dims, width=256, depth=2)
    assert dense >= 10 * banded


def test_checkpoint_roundtrip_bitexact(tmp_path):
    model = small_model(seed=15)
    model.set_ranks([1, 2, 3, 2], [2, 2, 2, 2])
    model.set_band_omega(2, 7.25)
    path = tmp_path / "model.cfnr"
    save_model(path, model)
    loaded = load_model(path)
    assert np.array_equal(loaded.core, model.core)
    assert loaded.ranks_x == model.ranks_x and loaded.ranks_y == model.ranks_y
    assert loaded.omegas == model.omegas and loaded.omega_z == model.omega_z
    for na, nb in zip(
        loaded.spatial_x + loaded.spatial_y + [loaded.spectral],
        model.spatial_x + model.spatial_y + [model.spectral],
    ):
        for wa, wb in zip(na.weights, nb.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(na.biases, nb.biases):
            assert np.array_equal(ba, bb)
    assert np.array_equal(generate_image(loaded, DIMS), generate_image(model, DIMS))


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.cfnr"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    from wavinr.checkpoint import CheckpointError

    with pytest.raises(CheckpointError):
        load_model(path)


def test_build_model_core_sizing_and_feasibility():
    model = small_model(lambda_x=8, lambda_y=8)
    cx, cy, rz = model.core_dims
    assert cx == 3 and cy == 3  # round(0.4 * 8), above the initial rank 2
    assert sum(model.ranks_x) == 8 and sum(model.ranks_y) == 8
    with pytest.raises(ValueError):
        build_model((8, 8, 4), lambda_x=24, lambda_y=8, mu=10, omega_z=2, rz=2,
                    width=4, depth=2, seed=0)


def test_factor_rows_are_net_outputs():
    model = small_model(seed=16)
    state = forward(model, DIMS)
    grid = coordinate_grid(DIMS[0] // 2)
    direct = forward_batch(model.spatial_x[0], grid)
    assert np.array_equal(state.factors["U"][0], direct)
