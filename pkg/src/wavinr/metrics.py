"""Quality metrics: PSNR (band-averaged, peak 1), SSIM, and relative NRMSE.

Data is assumed normalized to [0, 1] on ingest, so the PSNR peak is fixed at
1. PSNR and SSIM are computed per frontal slice and averaged; NRMSE is the
global relative Frobenius error. NaN inputs raise instead of propagating.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .tensor_ops import ShapeError

# An exactly-reproduced slice inside an inexact pair is floored here instead of
# yielding an infinite band PSNR; overall PSNR is +inf only when mse == 0.
_MSE_FLOOR = np.finfo(np.float64).tiny


@dataclass
class MetricsReport:
    psnr: float
    ssim: float
    nrmse: float

    def as_dict(self):
        return {"psnr": self.psnr, "ssim": self.ssim, "nrmse": self.nrmse}


def _check_pair(ref, est):
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ShapeError(f"shape mismatch {ref.shape} vs {est.shape}")
    if not np.all(np.isfinite(ref)) or not np.all(np.isfinite(est)):
        raise ValueError("metrics require finite inputs")
    if ref.ndim == 2:
        ref = ref[:, :, None]
        est = est[:, :, None]
    if ref.ndim != 3:
        raise ShapeError(f"expected order-3 inputs, got ndim={ref.ndim}")
    return ref, est


def psnr(ref, est, per_slice=True):
    """10*log10(1 / mse) in dB against peak 1; +inf on an exact match.

    per_slice=True averages per-band PSNRs (the reporting convention);
    per_slice=False uses the global mse (the value NRMSE determines).
    """
    ref, est = _check_pair(ref, est)
    diff2 = (ref - est) ** 2
    if float(diff2.sum()) == 0.0:
        return float("inf")
    if not per_slice:
        return float(10.0 * np.log10(1.0 / diff2.mean()))
    vals = []
    for k in range(ref.shape[2]):
        mse = max(float(diff2[:, :, k].mean()), _MSE_FLOOR)
        vals.append(10.0 * np.log10(1.0 / mse))
    return float(np.mean(vals))


def nrmse(ref, est):
    """Relative Frobenius error ||ref - est||_F / ||ref||_F."""
    ref, est = _check_pair(ref, est)
    denom = float(np.sqrt((ref**2).sum()))
    if denom == 0.0:
        raise ValueError("nrmse undefined for a zero reference")
    return float(np.sqrt(((ref - est) ** 2).sum()) / denom)


def _gaussian_window(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(ref, est, k1=0.01, k2=0.03, win_size=11, sigma=1.5, data_range=1.0):
    """Single-scale SSIM with the standard 11x11 Gaussian window, per slice
    then averaged. Spatial dims must be at least the window size."""
    ref, est = _check_pair(ref, est)
    n1, n2, n3 = ref.shape
    if n1 < win_size or n2 < win_size:
        raise ShapeError(f"ssim needs spatial dims >= {win_size}, got {(n1, n2)}")
    win = _gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    vals = []
    for k in range(n3):
        a = ref[:, :, k]
        b = est[:, :, k]
        mu_a = convolve2d(a, win, mode="valid")
        mu_b = convolve2d(b, win, mode="valid")
        mu_aa = mu_a * mu_a
        mu_bb = mu_b * mu_b
        mu_ab = mu_a * mu_b
        var_a = convolve2d(a * a, win, mode="valid") - mu_aa
        var_b = convolve2d(b * b, win, mode="valid") - mu_bb
        cov = convolve2d(a * b, win, mode="valid") - mu_ab
        num = (2.0 * mu_ab + c1) * (2.0 * cov + c2)
        den = (mu_aa + mu_bb + c1) * (var_a + var_b + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def evaluate(ref, est) -> MetricsReport:
    return MetricsReport(psnr=psnr(ref, est), ssim=ssim(ref, est), nrmse=nrmse(ref, est))
