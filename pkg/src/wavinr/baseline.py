"""Single-frequency baseline: one Tucker-factored INR on the undecomposed
tensor, at a parameter budget matched to a given band model. No frequency
decoupling, no evolution; one global activation frequency.
"""

from dataclasses import dataclass

import numpy as np

from .model import coordinate_grid
from .optim import Adam, AdamConfig, cosine_lr
from .siren import SirenMlp, backward_batch, forward_with_cache, init_siren
from .tensor_ops import NumericalError


@dataclass
class SingleModel:
    core: np.ndarray  # (c1, c2, r_z)
    net_x: SirenMlp
    net_y: SirenMlp
    net_z: SirenMlp

    def params(self):
        out = [self.core]
        for net in (self.net_x, self.net_y, self.net_z):
            out.extend(net.weights)
            out.extend(net.biases)
        return out

    def decay_flags(self):
        flags = [False]
        for net in (self.net_x, self.net_y, self.net_z):
            flags.extend([True] * len(net.weights))
            flags.extend([False] * len(net.biases))
        return flags

    def param_count(self):
        return self.core.size + sum(
            n.param_count() for n in (self.net_x, self.net_y, self.net_z)
        )


def mlp_param_count(depth, width, out_dim, use_bias=True):
    sizes = [(width, 1)] + [(width, width)] * (depth - 2) + [(out_dim, width)]
    n = sum(r * c for r, c in sizes)
    if use_bias:
        n += sum(r for r, _ in sizes)
    return n


def matched_rank(target_params, dims, rz, width, depth, use_bias=True):
    """Smallest spatial rank whose baseline parameter count reaches the target
    (capped at the spatial dims); keeps the comparison budget-fair."""
    n1, n2, _ = dims
    best = 1
    for c in range(1, max(n1, n2) + 1):
        total = (
            c * c * rz
            + mlp_param_count(depth, width, c, use_bias) * 2
            + mlp_param_count(depth, width, rz, use_bias)
        )
        best = c
        if total >= target_params:
            break
    return best


def build_single(dims, rank, rz, omega, omega_z, width, depth, seed, use_bias=True,
                 core_scale=0.1) -> SingleModel:
    seeds = np.random.SeedSequence(seed).spawn(4)
    net_x = init_siren(depth, width, rank, omega, seeds[0], use_bias)
    net_y = init_siren(depth, width, rank, omega, seeds[1], use_bias)
    net_z = init_siren(depth, width, rz, omega_z, seeds[2], use_bias)
    rng = np.random.default_rng(seeds[3])
    core = rng.uniform(-core_scale, core_scale, size=(rank, rank, rz)) / np.sqrt(rz)
    return SingleModel(core=core, net_x=net_x, net_y=net_y, net_z=net_z)


def single_forward(model: SingleModel, dims):
    n1, n2, n3 = dims
    gx, gy, gz = coordinate_grid(n1), coordinate_grid(n2), coordinate_grid(n3)
    u, cu = forward_with_cache(model.net_x, gx)
    v, cv = forward_with_cache(model.net_y, gy)
    w, cw = forward_with_cache(model.net_z, gz)
    pten = np.einsum("abc,kc->abk", model.core, w)
    qten = np.einsum("abk,jb->ajk", pten, v)
    image = np.einsum("ajk,ia->ijk", qten, u)
    return image, (u, v, w, cu, cv, cw, pten, qten)


def single_backward(model: SingleModel, dims, cache, g_img):
    n1, n2, n3 = dims
    u, v, w, cu, cv, cw, pten, qten = cache
    gx, gy, gz = coordinate_grid(n1), coordinate_grid(n2), coordinate_grid(n3)
    g_u = np.einsum("ijk,ajk->ia", g_img, qten)
    g_q = np.einsum("ijk,ia->ajk", g_img, u)
    g_v = np.einsum("ajk,abk->jb", g_q, pten)
    g_p = np.einsum("ajk,jb->abk", g_q, v)
    g_w = np.einsum("abk,abc->kc", g_p, model.core)
    g_core = np.einsum("abk,kc->abc", g_p, w)
    gx_net = backward_batch(model.net_x, gx, g_u, cache=cu)
    gy_net = backward_batch(model.net_y, gy, g_v, cache=cv)
    gz_net = backward_batch(model.net_z, gz, g_w, cache=cw)
    flat = [g_core]
    for g in (gx_net, gy_net, gz_net):
        flat.extend(g.weights)
        flat.extend(g.biases)
    return flat


def fit_single(data, model: SingleModel, iters, adam_config: AdamConfig = None,
               record_every=50, reference=None):
    """Full-batch regression fit of the single-frequency model."""
    from .metrics import psnr as psnr_fn

    import time

    cfg = adam_config or AdamConfig()
    opt = Adam(model.params(), model.decay_flags(), cfg)
    dims = data.shape
    history = []
    image = None
    t0 = time.perf_counter()
    for it in range(1, iters + 1):
        image, cache = single_forward(model, dims)
        diff = image - data
        loss = float((diff**2).sum())
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss at iteration {it}")
        grads = single_backward(model, dims, cache, 2.0 * diff)
        opt.step(grads, lr=cosine_lr(it, iters, cfg.lr, cfg.lr_floor))
        if it % record_every == 0 or it == iters:
            row = {"iter": it, "loss": loss, "wall_ms": (time.perf_counter() - t0) * 1e3}
            if reference is not None:
                row["psnr"] = psnr_fn(reference, image)
            history.append(row)
    return image, history
