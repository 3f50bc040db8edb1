"""Adam over the flat parameter list, plus the shared full-batch training loop.

The loop interleaves gradient steps with the cadence-driven rank/frequency
evolution and records a loss (and PSNR against an optional reference) every
`record_every` iterations. Gradients are full-batch: every step synthesizes
the whole tensor.
"""

import csv
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .evolution import EvolutionState, maybe_evolve
from .model import BandModel, backward_from_coefficients, backward_image, forward
from .tensor_ops import NumericalError


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    # Cosine decay from lr to lr_floor over the run; lr_floor=None keeps lr flat.
    lr_floor: Optional[float] = None


class Adam:
    """Bias-corrected Adam with decoupled weight decay on selected parameters."""

    def __init__(self, params, decay_flags=None, config: AdamConfig = None):
        self.params = list(params)
        self.config = config or AdamConfig()
        self.decay_flags = (
            list(decay_flags) if decay_flags is not None else [False] * len(self.params)
        )
        if len(self.decay_flags) != len(self.params):
            raise ValueError("decay_flags must match params")
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads, lr=None):
        cfg = self.config
        if lr is None:
            lr = cfg.lr
        self.t += 1
        b1c = 1.0 - cfg.beta1**self.t
        b2c = 1.0 - cfg.beta2**self.t
        for p, g, m, v, decay in zip(self.params, grads, self.m, self.v, self.decay_flags):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = lr * (m / b1c) / (np.sqrt(v / b2c) + cfg.eps)
            if decay and cfg.weight_decay:
                update = update + lr * cfg.weight_decay * p
            p -= update


def cosine_lr(step, total, lr0, lr_floor):
    if lr_floor is None or total <= 1:
        return lr0
    frac = (step - 1) / max(total - 1, 1)
    return lr_floor + 0.5 * (lr0 - lr_floor) * (1.0 + np.cos(np.pi * frac))


@dataclass
class TrainResult:
    model: BandModel
    history: List[dict]
    final_image: np.ndarray
    evolution: Optional[EvolutionState]


def train(
    model: BandModel,
    dims,
    loss_fn: Callable,
    iters: int,
    evolution: Optional[EvolutionState] = None,
    adam_config: Optional[AdamConfig] = None,
    reference: Optional[np.ndarray] = None,
    record_every: int = 50,
    optimizer: Optional[Adam] = None,
    iter_offset: int = 0,
    loss_on: str = "image",
    hooks: Optional[List[Callable]] = None,
) -> TrainResult:
    """Run `iters` full-batch steps of: synthesize, loss, backward, Adam step.

    With loss_on="image", loss_fn maps the generated image to (loss_value,
    d loss / d image); with loss_on="coeffs" it maps the four generated bands
    to (loss_value, list of per-band upstream gradients). The evolution state,
    when given, is consulted every iteration against its own cadence counted
    from iter_offset (used by the alternating-scheme driver, whose inner runs
    accumulate iterations across outer rounds). Hooks receive (iteration,
    forward_state) snapshots at the recording cadence.
    """
    from .metrics import psnr as psnr_fn

    if iters < 1:
        raise ValueError("iters must be >= 1")
    if loss_on not in ("image", "coeffs"):
        raise ValueError(f"loss_on must be 'image' or 'coeffs', got {loss_on}")
    cfg = adam_config or AdamConfig()
    opt = optimizer or Adam(model.params(), model.decay_flags(), cfg)
    history = []
    t0 = time.perf_counter()
    state = None
    for it in range(1, iters + 1):
        state = forward(model, dims)
        if loss_on == "image":
            loss, g_img = loss_fn(state.image)
            upstream_flat = g_img
        else:
            loss, g_blocks = loss_fn(state.blocks)
            upstream_flat = np.concatenate([g.ravel() for g in g_blocks])
        if not np.isfinite(loss):
            gmax = (
                float(np.max(np.abs(upstream_flat)))
                if np.all(np.isfinite(upstream_flat))
                else float("nan")
            )
            raise NumericalError(
                f"non-finite loss at iteration {iter_offset + it}: loss={loss}, max|grad|={gmax}"
            )
        if loss_on == "image":
            grads = backward_image(model, state, g_img)
        else:
            grads = backward_from_coefficients(model, state, g_blocks)
        opt.step(grads.flat(), lr=cosine_lr(it, iters, cfg.lr, cfg.lr_floor))

        if evolution is not None and maybe_evolve(iter_offset + it, evolution, state.blocks):
            model.set_ranks(evolution.ranks_x, evolution.ranks_y)
            for s, om in enumerate(evolution.omegas):
                model.set_band_omega(s, om)

        if it % record_every == 0 or it == iters:
            row = {
                "iter": iter_offset + it,
                "loss": float(loss),
                "wall_ms": (time.perf_counter() - t0) * 1e3,
            }
            if reference is not None:
                row["psnr"] = psnr_fn(reference, state.image)
            history.append(row)
            for hook in hooks or ():
                hook(iter_offset + it, state)
    return TrainResult(
        model=model, history=history, final_image=state.image, evolution=evolution
    )


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "loss", "psnr", "wall_ms"])
        for row in history:
            writer.writerow(
                [
                    row["iter"],
                    f"{row['loss']:.17g}",
                    "" if "psnr" not in row else f"{row['psnr']:.17g}",
                    f"{row['wall_ms']:.3f}",
                ]
            )
