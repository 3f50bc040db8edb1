"""Wavelet-band implicit neural representations with self-evolving parameters."""

__version__ = "0.1.0"

from .evolution import EvolutionState, evolve_omegas, evolve_ranks, maybe_evolve, mean_laplacian
from .metrics import MetricsReport, evaluate, nrmse, psnr, ssim
from .model import (
    BandModel,
    apply_rank_mask,
    build_model,
    coordinate_grid,
    count_flops,
    generate_coefficients,
    generate_image,
)
from .siren import SirenMlp, backward_batch, forward_batch, init_siren, set_omega
from .tasks import (
    NoiseSpec,
    TaskResult,
    denoise_mixed,
    fit_inpainting,
    fit_regression,
    soft_threshold,
    synthesize_noise,
)
from .tensor_ops import (
    fold,
    frobenius_norm,
    mode_product,
    nuclear_norm,
    numerical_tucker_rank,
    singular_values,
    unfold,
)
from .wavelet import WaveletBlocks, haar_matrix, hwt, hwt2, ihwt

__all__ = [
    "BandModel",
    "EvolutionState",
    "MetricsReport",
    "NoiseSpec",
    "SirenMlp",
    "TaskResult",
    "WaveletBlocks",
    "apply_rank_mask",
    "backward_batch",
    "build_model",
    "coordinate_grid",
    "count_flops",
    "denoise_mixed",
    "evaluate",
    "evolve_omegas",
    "evolve_ranks",
    "fit_inpainting",
    "fit_regression",
    "fold",
    "forward_batch",
    "frobenius_norm",
    "generate_coefficients",
    "generate_image",
    "haar_matrix",
    "hwt",
    "hwt2",
    "ihwt",
    "init_siren",
    "maybe_evolve",
    "mean_laplacian",
    "mode_product",
    "nrmse",
    "nuclear_norm",
    "numerical_tucker_rank",
    "psnr",
    "set_omega",
    "singular_values",
    "soft_threshold",
    "ssim",
    "synthesize_noise",
    "unfold",
]
