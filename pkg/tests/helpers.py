"""Shared test utilities: finite-difference gradients and comparison scales."""

import numpy as np


def fd_gradient(loss_fn, arrays, h=1e-6):
    """Central finite differences of loss_fn() w.r.t. every entry of `arrays`.

    loss_fn recomputes the loss from the arrays' current (mutated) contents.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric):
    """Max entry deviation of the concatenated gradients, relative to the
    overall gradient scale (guards against finite-difference noise on zeros)."""
    a = np.concatenate([np.asarray(x).ravel() for x in analytic])
    n = np.concatenate([np.asarray(x).ravel() for x in numeric])
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)), 1e-12)
    return float(np.max(np.abs(a - n)) / scale)


def kolda_unfold_oracle(t, mode):
    """Independent index-walk building the mode-n unfolding entry by entry."""
    n1, n2, n3 = t.shape
    dims = [n1, n2, n3]
    rest = [d for i, d in enumerate(dims) if i != mode - 1]
    out = np.zeros((dims[mode - 1], rest[0] * rest[1]))
    for i1 in range(n1):
        for i2 in range(n2):
            for i3 in range(n3):
                idx = [i1, i2, i3]
                row = idx[mode - 1]
                others = [idx[m] for m in range(3) if m != mode - 1]
                sizes = [dims[m] for m in range(3) if m != mode - 1]
                col = others[0] + others[1] * sizes[0]
                out[row, col] = t[i1, i2, i3]
    return out


def mode_product_oracle(t, a, mode):
    """Triple-loop mode product."""
    n = list(t.shape)
    n[mode - 1] = a.shape[0]
    out = np.zeros(n)
    for i1 in range(n[0]):
        for i2 in range(n[1]):
            for i3 in range(n[2]):
                idx = [i1, i2, i3]
                acc = 0.0
                for j in range(t.shape[mode - 1]):
                    src = list(idx)
                    src[mode - 1] = j
                    acc += a[idx[mode - 1], j] * t[tuple(src)]
                out[i1, i2, i3] = acc
    return out
