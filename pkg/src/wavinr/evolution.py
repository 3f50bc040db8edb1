"""Self-evolving schedulers for per-band ranks and activation frequencies.

Both updates run on a fixed cadence (default every 500 training iterations)
and conserve their budgets exactly: spatial ranks are re-apportioned from the
nuclear norms of the Frobenius-normalized band unfoldings under fixed sums
(lambda_x, lambda_y), and frequencies are re-apportioned from the mean
spatial Laplacians of the bands under a fixed sum mu, with the exponent
1/(2d-2) tied to the MLP depth.
"""

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .tensor_ops import ShapeError, frobenius_norm, nuclear_norm, unfold
from .wavelet import WaveletBlocks

N_BANDS = 4


def apportion(weights, total, floor=1, cap=None):
    """Largest-remainder integer split of `total` proportional to `weights`.

    Every part gets at least `floor` and at most `cap`; the parts sum to
    `total` exactly. Ties break on the lower index, so the result is
    deterministic and order-stable.
    """
    w = np.asarray(weights, dtype=np.float64)
    k = len(w)
    if cap is None:
        cap = total
    if not (k * floor <= total <= k * cap):
        raise ValueError(f"total {total} infeasible for {k} parts in [{floor},{cap}]")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    ssum = w.sum()
    if ssum == 0:
        quota = np.full(k, total / k)
    else:
        quota = total * w / ssum
    parts = np.clip(np.floor(quota).astype(int), floor, cap)
    # Walk the sum to the target one unit at a time, favoring the part whose
    # quota is least well served; deterministic tie-break on index.
    while parts.sum() < total:
        room = parts < cap
        resid = np.where(room, quota - parts, -np.inf)
        parts[int(np.argmax(resid))] += 1
    while parts.sum() > total:
        slack = parts > floor
        resid = np.where(slack, quota - parts, np.inf)
        parts[int(np.argmin(resid))] -= 1
    return [int(p) for p in parts]


def mean_laplacian(b):
    """Mean over interior points of the absolute spatial 5-point Laplacian."""
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = b.shape[0], b.shape[1]
    if n1 < 3 or n2 < 3:
        raise ShapeError(f"mean_laplacian needs spatial dims >= 3, got {b.shape}")
    return float(np.mean(np.abs(_laplacian_interior(b))))


def _laplacian_interior(b):
    # paired differences keep the value exactly zero on constant/affine input
    c = b[1:-1, 1:-1]
    return (c - b[2:, 1:-1]) + (c - b[:-2, 1:-1]) + (c - b[1:-1, 2:]) + (c - b[1:-1, :-2])


def evolve_omegas(laplacians, mu, d):
    """Re-split the frequency budget proportional to laplacian^(1/(2d-2)).

    Returns None when every laplacian is zero (caller keeps the previous
    frequencies).
    """
    lap = np.asarray(laplacians, dtype=np.float64)
    if np.any(lap < 0):
        raise ValueError("laplacians must be nonnegative")
    if mu <= 0 or d < 2:
        raise ValueError("need mu > 0 and depth >= 2")
    if np.all(lap == 0):
        return None
    roots = lap ** (1.0 / (2 * d - 2))
    return [float(x) for x in mu * roots / roots.sum()]


def band_nuclear_norms(blocks: WaveletBlocks, mode):
    """Nuclear norm of each band's mode-n unfolding after Frobenius normalization.

    A zero band contributes norm 0 (its rank then falls to the floor of 1).
    """
    norms = []
    for b in blocks.as_list():
        m = unfold(b, mode)
        f = frobenius_norm(m)
        norms.append(nuclear_norm(m / f) if f > 0 else 0.0)
    return norms


def evolve_ranks(blocks: WaveletBlocks, lambda_x, lambda_y, k, cap_x=None, cap_y=None):
    """Re-apportion the spatial rank budgets from normalized nuclear norms.

    Shares are proportional to norm^(1/k); integerization is by largest
    remainder with a floor of 1 per band, so the sums are exact.
    """
    if k <= 0:
        raise ValueError("power parameter k must be positive")
    nn1 = np.asarray(band_nuclear_norms(blocks, 1))
    nn2 = np.asarray(band_nuclear_norms(blocks, 2))
    rx = apportion(nn1 ** (1.0 / k), lambda_x, cap=cap_x)
    ry = apportion(nn2 ** (1.0 / k), lambda_y, cap=cap_y)
    return rx, ry, nn1.tolist(), nn2.tolist()


@dataclass
class EvolutionState:
    """Budgets, cadence, and the currently assigned per-band ranks/frequencies."""

    lambda_x: int
    lambda_y: int
    mu: float
    k: float = 3.0
    depth: int = 2
    cadence: int = 500
    cap_x: Optional[int] = None
    cap_y: Optional[int] = None
    ranks_x: List[int] = field(default_factory=list)
    ranks_y: List[int] = field(default_factory=list)
    omegas: List[float] = field(default_factory=list)
    log: List[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.ranks_x:
            self.ranks_x = apportion([1.0] * N_BANDS, self.lambda_x, cap=self.cap_x)
        if not self.ranks_y:
            self.ranks_y = apportion([1.0] * N_BANDS, self.lambda_y, cap=self.cap_y)
        if not self.omegas:
            self.omegas = [self.mu / N_BANDS] * N_BANDS

    def check_budgets(self):
        assert sum(self.ranks_x) == self.lambda_x
        assert sum(self.ranks_y) == self.lambda_y
        assert abs(sum(self.omegas) - self.mu) <= 1e-9 * max(1.0, self.mu)


def maybe_evolve(iteration, state: EvolutionState, blocks: WaveletBlocks):
    """Run both updates when the iteration hits the cadence; returns True if
    the state changed."""
    if iteration <= 0 or iteration % state.cadence != 0:
        return False
    laps = [mean_laplacian(b) for b in blocks.as_list()]
    new_omegas = evolve_omegas(laps, state.mu, state.depth)
    rx, ry, nn1, nn2 = evolve_ranks(
        blocks, state.lambda_x, state.lambda_y, state.k, state.cap_x, state.cap_y
    )
    changed = (
        rx != state.ranks_x
        or ry != state.ranks_y
        or (new_omegas is not None and new_omegas != state.omegas)
    )
    state.ranks_x = rx
    state.ranks_y = ry
    if new_omegas is not None:
        state.omegas = new_omegas
    state.log.append(
        {
            "iter": iteration,
            "omegas": list(state.omegas),
            "ranks_x": list(rx),
            "ranks_y": list(ry),
            "laplacians": laps,
            "nuclear_mode1": nn1,
            "nuclear_mode2": nn2,
        }
    )
    return changed


def write_evolution_log(state: EvolutionState, path):
    """One CSV row per trigger: iteration, frequencies, ranks, laplacians, norms."""
    header = (
        ["iter"]
        + [f"omega_{s+1}" for s in range(N_BANDS)]
        + [f"rx_{s+1}" for s in range(N_BANDS)]
        + [f"ry_{s+1}" for s in range(N_BANDS)]
        + [f"lap_{s+1}" for s in range(N_BANDS)]
        + [f"nn1_{s+1}" for s in range(N_BANDS)]
        + [f"nn2_{s+1}" for s in range(N_BANDS)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in state.log:
            writer.writerow(
                [row["iter"]]
                + [f"{v:.17g}" for v in row["omegas"]]
                + row["ranks_x"]
                + row["ranks_y"]
                + [f"{v:.17g}" for v in row["laplacians"]]
                + [f"{v:.17g}" for v in row["nuclear_mode1"]]
                + [f"{v:.17g}" for v in row["nuclear_mode2"]]
            )
