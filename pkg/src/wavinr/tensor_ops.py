"""Dense order-3 tensor algebra: unfolding, mode products, norms, singular values.

Tensors are numpy float64 arrays of shape (n1, n2, n3). The canonical linear
layout (used by the serializers) is mode-1 fastest, i.e. Fortran order.
Unfoldings follow the standard Kolda/Bader column ordering: in the mode-n
unfolding, the lowest remaining mode index varies fastest along columns.
"""

import numpy as np

# Singular values below this fraction of sigma_max are clamped to zero so that
# nuclear-norm ratios stay stable across runs. The Gram-matrix route cannot
# resolve singular values below sqrt(eps) * sigma_max (~1.5e-8), so the clamp
# sits above that noise floor.
SV_CLAMP = 1e-7

_JACOBI_MAX_SWEEPS = 100
_JACOBI_OFFDIAG_TOL = 1e-14


class ShapeError(ValueError):
    """Dimension or shape mismatch in a tensor operation."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge."""


def as_tensor3(t):
    """Validate and return `t` as a float64 array of order 3."""
    a = np.asarray(t, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeError(f"expected an order-3 tensor, got ndim={a.ndim}")
    return a


def unfold(t, mode):
    """Mode-n unfolding of an order-3 tensor (Kolda column ordering).

    Returns a matrix of shape (n_mode, prod of the other dims).
    """
    t = as_tensor3(t)
    if mode not in (1, 2, 3):
        raise ShapeError(f"mode must be 1, 2 or 3, got {mode}")
    ax = mode - 1
    moved = np.moveaxis(t, ax, 0)
    return moved.reshape(t.shape[ax], -1, order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold`: rebuild the (n1, n2, n3) tensor."""
    m = np.asarray(m, dtype=np.float64)
    if mode not in (1, 2, 3):
        raise ShapeError(f"mode must be 1, 2 or 3, got {mode}")
    n1, n2, n3 = dims
    ax = mode - 1
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise ShapeError(f"matrix shape {m.shape} inconsistent with dims {dims} mode {mode}")
    moved = m.reshape([dims[ax]] + rest, order="F")
    return np.moveaxis(moved, 0, ax)


def mode_product(t, a, mode):
    """Mode-n product t x_n a, i.e. fold(a @ unfold(t, n), n)."""
    t = as_tensor3(t)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != t.shape[mode - 1]:
        raise ShapeError(
            f"matrix {a.shape} cannot multiply mode {mode} of tensor {t.shape}"
        )
    new_dims = list(t.shape)
    new_dims[mode - 1] = a.shape[0]
    return fold(a @ unfold(t, mode), mode, tuple(new_dims))


def frobenius_norm(t):
    """sqrt of the sum of squared entries (any array shape)."""
    return float(np.sqrt(np.sum(np.asarray(t, dtype=np.float64) ** 2)))


def _jacobi_eigvals(g):
    """Eigenvalues of a symmetric matrix via cyclic Jacobi rotations."""
    a = g.copy()
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0]])
    tol = _JACOBI_OFFDIAG_TOL * max(np.linalg.norm(a), np.finfo(float).tiny)
    offdiag_mask = ~np.eye(n, dtype=bool)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(a[offdiag_mask] ** 2))
        if off <= tol:
            return np.diag(a).copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol / n:
                    continue
                # Classical Jacobi rotation annihilating a[p, q].
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                tsign = 1.0 if theta >= 0 else -1.0
                tpar = tsign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(tpar * tpar + 1.0)
                s = tpar * c
                rows = a[[p, q], :].copy()
                a[p, :] = c * rows[0] - s * rows[1]
                a[q, :] = s * rows[0] + c * rows[1]
                cols = a[:, [p, q]].copy()
                a[:, p] = c * cols[:, 0] - s * cols[:, 1]
                a[:, q] = s * cols[:, 0] + c * cols[:, 1]
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise NumericalError(
        f"Jacobi eigensolver did not converge within {_JACOBI_MAX_SWEEPS} sweeps"
    )


def singular_values(m):
    """Descending singular values via Jacobi on the Gram matrix of the shorter side.

    Values below SV_CLAMP * sigma_max are clamped to exactly zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("singular_values: non-finite entries")
    if m.size == 0:
        return np.zeros(min(m.shape))
    gram = m @ m.T if m.shape[0] <= m.shape[1] else m.T @ m
    eigs = _jacobi_eigvals(gram)
    sv = np.sqrt(np.maximum(eigs, 0.0))
    sv = np.sort(sv)[::-1]
    if sv[0] > 0:
        sv[sv < SV_CLAMP * sv[0]] = 0.0
    return sv


def nuclear_norm(m):
    """Sum of singular values."""
    return float(np.sum(singular_values(m)))


def numerical_tucker_rank(t, tol):
    """Per-mode count of singular values of unfold(t, i) above tol * sigma_max."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    t = as_tensor3(t)
    ranks = []
    for mode in (1, 2, 3):
        sv = singular_values(unfold(t, mode))
        smax = sv[0] if sv.size else 0.0
        if smax == 0.0:
            ranks.append(0)
        else:
            ranks.append(int(np.sum(sv > tol * smax)))
    return tuple(ranks)
