"""Deterministic synthetic targets used by the tests and the bundled CLI inputs.

These stand in for the full-scale image corpora: a smooth exactly-low-rank
tensor with known Tucker rank (inpainting/denoising ground truth) and a
textured multi-frequency image (the frequency-decoupling benchmark).
"""

import numpy as np

from .tensor_ops import mode_product


def _smooth_factor(n, rank, rng):
    """n x rank matrix whose columns are smooth waves; column 0 is constant so
    affine renormalization of the synthesized tensor cannot raise its rank."""
    x = np.linspace(0.0, 1.0, n)
    cols = [np.ones(n)]
    for j in range(1, rank):
        freq = j * 0.9 + rng.uniform(0.0, 0.4)
        phase = rng.uniform(0, 2 * np.pi)
        cols.append(np.cos(2.0 * np.pi * freq * x + phase))
    return np.stack(cols, axis=1)


def smooth_lowrank(dims, ranks=(5, 5, 3), seed=0):
    """Smooth tensor with exact Tucker rank `ranks`, affinely scaled to [0, 1]."""
    n1, n2, n3 = dims
    r1, r2, r3 = ranks
    rng = np.random.default_rng(seed)
    u = _smooth_factor(n1, r1, rng)
    v = _smooth_factor(n2, r2, rng)
    w = _smooth_factor(n3, r3, rng)
    core = rng.standard_normal((r1, r2, r3))
    t = mode_product(mode_product(mode_product(core, u, 1), v, 2), w, 3)
    lo, hi = t.min(), t.max()
    return (t - lo) / (hi - lo)


def textured_image(dims=(128, 128, 3), seed=0):
    """Multi-frequency test image: smooth base, fine oriented gratings, and a
    few hard edges, per-band variation included. Values in [0, 1]."""
    n1, n2, n3 = dims
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, n1), np.linspace(0.0, 1.0, n2), indexing="ij"
    )
    img = np.zeros(dims)
    for k in range(n3):
        base = 0.5 + 0.22 * np.cos(2 * np.pi * (0.8 * xx + 0.5 * yy) + 0.9 * k)
        fine = 0.16 * np.sin(2 * np.pi * (9.0 * xx + 15.0 * yy) + rng.uniform(0, 2 * np.pi))
        fine += 0.12 * np.sin(2 * np.pi * (21.0 * xx - 6.0 * yy) + rng.uniform(0, 2 * np.pi))
        weave = 0.08 * np.sin(2 * np.pi * 13.0 * xx) * np.sin(2 * np.pi * 13.0 * yy)
        img[:, :, k] = base + fine + weave
    # hard-edged plateaus give the detail bands genuine discontinuities
    img[n1 // 8 : n1 // 4, n2 // 8 : n2 // 2, :] += 0.18
    img[n1 // 2 : 3 * n1 // 4, 5 * n2 // 8 : 7 * n2 // 8, :] -= 0.18
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def bundled(name, dims=None, seed=0):
    """Resolve a `synth:` input name used by the command-line front end."""
    if name == "lowrank":
        return smooth_lowrank(dims or (64, 64, 8), seed=seed)
    if name == "textured":
        return textured_image(dims or (128, 128, 3), seed=seed)
    raise ValueError(f"unknown synthetic input '{name}' (expected lowrank|textured)")
