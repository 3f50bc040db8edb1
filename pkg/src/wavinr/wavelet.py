"""Single-level 2-D Haar transform, applied matrix-wise and frontal-slice-wise.

The forward transform of an (n1, n2) matrix A is W_n1 A W_n2^T with the
orthogonal Haar matrix W_n = [H; G]; splitting into 2x2 blocks gives the four
coefficient matrices (approximation, horizontal, vertical, diagonal). The
inverse is the matrix form A = W_n1^T B W_n2, which is exact because W is
orthogonal. Spatial dims must be even; callers pad beforehand.
"""

from typing import NamedTuple

import numpy as np

from .tensor_ops import ShapeError, as_tensor3

_INV_SQRT2 = np.sqrt(2.0) / 2.0


class WaveletBlocks(NamedTuple):
    """The four coefficient tensors of one transform level, each (n1/2, n2/2, n3)."""

    b1: np.ndarray  # approximation (low/low)
    b2: np.ndarray  # horizontal detail
    b3: np.ndarray  # vertical detail
    b4: np.ndarray  # diagonal detail

    @property
    def dims(self):
        return self.b1.shape

    def as_list(self):
        return [self.b1, self.b2, self.b3, self.b4]


def haar_filters(n):
    """Averaging and differencing halves (H, G) of the order-n Haar matrix."""
    if n < 2 or n % 2 != 0:
        raise ShapeError(f"Haar matrix needs an even order >= 2, got {n}")
    h = np.zeros((n // 2, n))
    g = np.zeros((n // 2, n))
    idx = np.arange(n // 2)
    h[idx, 2 * idx] = _INV_SQRT2
    h[idx, 2 * idx + 1] = _INV_SQRT2
    g[idx, 2 * idx] = _INV_SQRT2
    g[idx, 2 * idx + 1] = -_INV_SQRT2
    return h, g


def haar_matrix(n):
    """Orthogonal n x n Haar matrix, averaging rows stacked over differencing rows."""
    h, g = haar_filters(n)
    return np.vstack([h, g])


def hwt2(a):
    """2-D Haar transform of a matrix; returns (b1, b2, b3, b4)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={a.ndim}")
    n1, n2 = a.shape
    h1, g1 = haar_filters(n1)
    h2, g2 = haar_filters(n2)
    ha = h1 @ a
    ga = g1 @ a
    return ha @ h2.T, ha @ g2.T, ga @ h2.T, ga @ g2.T


def hwt(a) -> WaveletBlocks:
    """Frontal-slice-wise 2-D Haar transform of an (n1, n2, n3) tensor.

    Applies exactly the matrix transform of hwt2 to every slice, so per-slice
    results agree bitwise with the 2-D call.
    """
    a = as_tensor3(a)
    n1, n2, n3 = a.shape
    h1, g1 = haar_filters(n1)
    h2, g2 = haar_filters(n2)
    blocks = [np.empty((n1 // 2, n2 // 2, n3)) for _ in range(4)]
    for k in range(n3):
        ha = h1 @ a[:, :, k]
        ga = g1 @ a[:, :, k]
        blocks[0][:, :, k] = ha @ h2.T
        blocks[1][:, :, k] = ha @ g2.T
        blocks[2][:, :, k] = ga @ h2.T
        blocks[3][:, :, k] = ga @ g2.T
    return WaveletBlocks(*blocks)


def ihwt(blocks: WaveletBlocks):
    """Inverse transform: reassemble the block matrix and apply W^T . W per slice."""
    b1, b2, b3, b4 = blocks
    for b in (b2, b3, b4):
        if b.shape != b1.shape:
            raise ShapeError("wavelet blocks must share identical dims")
    p, q, n3 = b1.shape
    h1, g1 = haar_filters(2 * p)
    h2, g2 = haar_filters(2 * q)
    out = np.empty((2 * p, 2 * q, n3))
    for k in range(n3):
        top = h1.T @ b1[:, :, k] + g1.T @ b3[:, :, k]
        bot = h1.T @ b2[:, :, k] + g1.T @ b4[:, :, k]
        out[:, :, k] = top @ h2 + bot @ g2
    return out
