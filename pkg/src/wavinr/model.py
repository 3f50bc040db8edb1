"""Four-band generative tensor model behind the wavelet synthesis.

Each detail band s is produced as  B_s = mask_s(core) x3 W x2 V_s x1 U_s,
where the core tensor and the spectral factor W (rows = outputs of one shared
sinusoidal MLP on the band grid) are shared across the four bands, while each
band owns its own pair of spatial MLPs (U_s, V_s) with a per-band activation
frequency. The image is the inverse Haar transform of the four bands.

Rank masking keeps only the leading (rx_s, ry_s, r_z) block of the shared
core for band s, which caps the band's Tucker rank while letting all bands
share one core. Because the mask touches spatial core indices only, it
commutes with the mode-3 (spectral) product; the implementation exploits this
by slicing the leading block instead of multiplying a zero-padded core. The
test suite checks this fast path against the naive masked-core order.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .siren import MlpGrads, SirenMlp, backward_batch, forward_with_cache, init_siren
from .tensor_ops import ShapeError
from .wavelet import WaveletBlocks, hwt, ihwt

N_BANDS = 4


def coordinate_grid(n):
    """n coordinates mapping index 1..n linearly onto [-1, 1]; n=1 gives [0]."""
    if n < 1:
        raise ValueError("grid size must be >= 1")
    if n == 1:
        return np.zeros(1)
    return np.linspace(-1.0, 1.0, n)


def apply_rank_mask(core, ranks):
    """Zero every core entry outside the leading (rx, ry, rz) block."""
    rx, ry, rz = ranks
    cx, cy, cz = core.shape
    if not (1 <= rx <= cx and 1 <= ry <= cy and 1 <= rz <= cz):
        raise ShapeError(f"ranks {ranks} exceed core dims {core.shape}")
    masked = np.zeros_like(core)
    masked[:rx, :ry, :rz] = core[:rx, :ry, :rz]
    return masked


@dataclass
class ModelGrads:
    core: np.ndarray
    spatial_x: List[MlpGrads]
    spatial_y: List[MlpGrads]
    spectral: MlpGrads

    def flat(self):
        out = [self.core]
        for g in self.spatial_x + self.spatial_y + [self.spectral]:
            out.extend(g.weights)
            out.extend(g.biases)
        return out


@dataclass
class BandModel:
    """Shared core + shared spectral MLP + four unshared spatial MLP pairs."""

    core: np.ndarray  # (c_x, c_y, r_z)
    spatial_x: List[SirenMlp]  # out_dim c_x, activation frequency omega_s
    spatial_y: List[SirenMlp]  # out_dim c_y, same omega_s as the x partner
    spectral: SirenMlp  # out_dim r_z, frequency omega_z (held fixed)
    ranks_x: List[int]
    ranks_y: List[int]

    @property
    def omegas(self):
        return [net.omega for net in self.spatial_x]

    @property
    def omega_z(self):
        return self.spectral.omega

    @property
    def core_dims(self):
        return self.core.shape

    def set_band_omega(self, s, new_omega):
        """Point band s at a new activation frequency; weights are retained."""
        from .siren import set_omega

        self.spatial_x[s] = set_omega(self.spatial_x[s], new_omega)
        self.spatial_y[s] = set_omega(self.spatial_y[s], new_omega)

    def set_ranks(self, ranks_x, ranks_y):
        cx, cy, _ = self.core.shape
        for rx, ry in zip(ranks_x, ranks_y):
            if not (1 <= rx <= cx and 1 <= ry <= cy):
                raise ShapeError(f"rank ({rx},{ry}) outside core dims ({cx},{cy})")
        self.ranks_x = list(ranks_x)
        self.ranks_y = list(ranks_y)

    def params(self):
        """Flat list of parameter arrays (mutated in place by the optimizer)."""
        out = [self.core]
        for net in self.spatial_x + self.spatial_y + [self.spectral]:
            out.extend(net.weights)
            out.extend(net.biases)
        return out

    def decay_flags(self):
        """True where weight decay applies: MLP weight matrices only."""
        flags = [False]  # core
        for net in self.spatial_x + self.spatial_y + [self.spectral]:
            flags.extend([True] * len(net.weights))
            flags.extend([False] * len(net.biases))
        return flags

    def param_count(self):
        n = self.core.size
        for net in self.spatial_x + self.spatial_y + [self.spectral]:
            n += net.param_count()
        return n


class ForwardState:
    """Caches from one synthesis pass, reused by the matching backward pass."""

    def __init__(self, dims, factors, caches, partials, blocks, image):
        self.dims = dims
        self.factors = factors  # dict: 'U' list, 'V' list, 'W'
        self.caches = caches  # MLP forward caches, same keys
        self.partials = partials  # per band: (core_block, P, Q)
        self.blocks = blocks
        self.image = image


def _check_dims(dims):
    n1, n2, n3 = dims
    if n1 % 2 or n2 % 2 or n1 < 2 or n2 < 2 or n3 < 1:
        raise ShapeError(f"spatial dims must be even and >= 2, got {dims}")
    return n1, n2, n3


def forward(model: BandModel, dims) -> ForwardState:
    n1, n2, n3 = _check_dims(dims)
    p, q = n1 // 2, n2 // 2
    gx, gy, gz = coordinate_grid(p), coordinate_grid(q), coordinate_grid(n3)

    w_mat, w_cache = forward_with_cache(model.spectral, gz)  # (n3, r_z)
    us, vs, u_caches, v_caches = [], [], [], []
    for s in range(N_BANDS):
        u, cu = forward_with_cache(model.spatial_x[s], gx)  # (p, c_x)
        v, cv = forward_with_cache(model.spatial_y[s], gy)  # (q, c_y)
        us.append(u)
        vs.append(v)
        u_caches.append(cu)
        v_caches.append(cv)

    blocks = []
    partials = []
    for s in range(N_BANDS):
        rx, ry = model.ranks_x[s], model.ranks_y[s]
        cblk = model.core[:rx, :ry, :]
        pten = np.einsum("abc,kc->abk", cblk, w_mat)  # core block x3 W
        qten = np.einsum("abk,jb->ajk", pten, vs[s][:, :ry])  # x2 V_s
        bten = np.einsum("ajk,ia->ijk", qten, us[s][:, :rx])  # x1 U_s
        blocks.append(bten)
        partials.append((cblk, pten, qten))

    wb = WaveletBlocks(*blocks)
    image = ihwt(wb)
    return ForwardState(
        dims=(n1, n2, n3),
        factors={"U": us, "V": vs, "W": w_mat},
        caches={"U": u_caches, "V": v_caches, "W": w_cache},
        partials=partials,
        blocks=wb,
        image=image,
    )


def generate_coefficients(model: BandModel, dims) -> WaveletBlocks:
    """The four generated coefficient tensors, each (n1/2, n2/2, n3)."""
    return forward(model, dims).blocks


def generate_image(model: BandModel, dims):
    """Inverse-transform the generated coefficients into an (n1, n2, n3) tensor."""
    return forward(model, dims).image


def backward_from_coefficients(model: BandModel, state: ForwardState, upstream_blocks) -> ModelGrads:
    """Exact gradients of sum(upstream_s * B_s) w.r.t. every model parameter.

    Masked core entries receive exactly zero gradient; core and spectral
    gradients accumulate across the four bands in fixed band order.
    """
    n1, n2, n3 = state.dims
    p, q = n1 // 2, n2 // 2
    us, vs, w_mat = state.factors["U"], state.factors["V"], state.factors["W"]
    gx, gy, gz = coordinate_grid(p), coordinate_grid(q), coordinate_grid(n3)

    g_core = np.zeros_like(model.core)
    g_w = np.zeros_like(w_mat)
    gx_nets, gy_nets = [], []
    for s in range(N_BANDS):
        gb = np.asarray(upstream_blocks[s], dtype=np.float64)
        if gb.shape != (p, q, n3):
            raise ShapeError(f"upstream block {s} has shape {gb.shape}, expected {(p, q, n3)}")
        rx, ry = model.ranks_x[s], model.ranks_y[s]
        cblk, pten, qten = state.partials[s]

        g_u = np.zeros((p, us[s].shape[1]))
        g_u[:, :rx] = np.einsum("ijk,ajk->ia", gb, qten)
        g_q = np.einsum("ijk,ia->ajk", gb, us[s][:, :rx])
        g_v = np.zeros((q, vs[s].shape[1]))
        g_v[:, :ry] = np.einsum("ajk,abk->jb", g_q, pten)
        g_p = np.einsum("ajk,jb->abk", g_q, vs[s][:, :ry])
        g_w += np.einsum("abk,abc->kc", g_p, cblk)
        g_core[:rx, :ry, :] += np.einsum("abk,kc->abc", g_p, w_mat)

        gx_nets.append(backward_batch(model.spatial_x[s], gx, g_u, cache=state.caches["U"][s]))
        gy_nets.append(backward_batch(model.spatial_y[s], gy, g_v, cache=state.caches["V"][s]))

    g_spec = backward_batch(model.spectral, gz, g_w, cache=state.caches["W"])
    return ModelGrads(core=g_core, spatial_x=gx_nets, spatial_y=gy_nets, spectral=g_spec)


def backward_image(model: BandModel, state: ForwardState, upstream_image) -> ModelGrads:
    """Chain the image-space upstream through the transform (its adjoint is the
    forward transform, by orthogonality) and into the band parameters."""
    up = np.asarray(upstream_image, dtype=np.float64)
    if up.shape != state.dims:
        raise ShapeError(f"upstream image shape {up.shape} != {state.dims}")
    return backward_from_coefficients(model, state, hwt(up))


def count_flops(dims, width, depth, r):
    """Synthesis cost estimate: four factor MLPs plus core contraction and
    the inverse transform, versus querying a dense MLP at every voxel."""
    n1, n2, n3 = dims
    return int(4 * width**2 * depth * (n1 // 2 + n2 // 2 + n3) + (r + 1) * n1 * n2 * n3)


def dense_mlp_flops(dims, width, depth):
    n1, n2, n3 = dims
    return int(width**2 * depth * n1 * n2 * n3)


def initial_core_dims(lambda_x, lambda_y, dims, core_frac=0.4):
    """Core spatial sizes: core_frac of the budget, at least the largest initial
    rank, at most half the matching image dim."""
    n1, n2, _ = dims
    init_max_x = int(np.ceil(lambda_x / N_BANDS))
    init_max_y = int(np.ceil(lambda_y / N_BANDS))
    cx = min(max(int(round(core_frac * lambda_x)), init_max_x), n1 // 2)
    cy = min(max(int(round(core_frac * lambda_y)), init_max_y), n2 // 2)
    if lambda_x > N_BANDS * cx or lambda_y > N_BANDS * cy:
        raise ValueError(
            f"rank budgets ({lambda_x},{lambda_y}) infeasible for core caps ({cx},{cy}); "
            f"lower the budget to at most (4*{cx}, 4*{cy})"
        )
    return cx, cy


def build_model(
    dims,
    lambda_x,
    lambda_y,
    mu,
    omega_z,
    rz,
    width,
    depth,
    seed,
    core_frac=0.4,
    use_bias=True,
    core_scale=0.1,
) -> BandModel:
    """Construct a model with the symmetric prior: equal initial ranks and
    equal initial frequencies mu/4 per band."""
    from .evolution import apportion

    _check_dims(dims)
    rz = int(rz)
    if rz < 1:
        raise ValueError("spectral rank must be >= 1")
    cx, cy = initial_core_dims(lambda_x, lambda_y, dims, core_frac)
    ranks_x = apportion([1.0] * N_BANDS, lambda_x, cap=cx)
    ranks_y = apportion([1.0] * N_BANDS, lambda_y, cap=cy)
    omega0 = mu / N_BANDS

    seeds = np.random.SeedSequence(seed).spawn(2 * N_BANDS + 2)
    spatial_x = [
        init_siren(depth, width, cx, omega0, seeds[s], use_bias) for s in range(N_BANDS)
    ]
    spatial_y = [
        init_siren(depth, width, cy, omega0, seeds[N_BANDS + s], use_bias)
        for s in range(N_BANDS)
    ]
    spectral = init_siren(depth, width, rz, omega_z, seeds[2 * N_BANDS], use_bias)
    core_rng = np.random.default_rng(seeds[2 * N_BANDS + 1])
    core = core_rng.uniform(-core_scale, core_scale, size=(cx, cy, rz)) / np.sqrt(rz)
    return BandModel(
        core=core,
        spatial_x=spatial_x,
        spatial_y=spatial_y,
        spectral=spectral,
        ranks_x=ranks_x,
        ranks_y=ranks_y,
    )
