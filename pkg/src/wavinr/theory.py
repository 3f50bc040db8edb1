"""Executable checks of the smoothness, Laplacian, and rank properties of the
band transform, plus the frequency-polynomial Laplacian cap of the generator.

Every check measures the quantity exactly and compares against the stated
bound; a claim passes iff measured <= bound * (1 + 1e-12). The generator cap
is evaluated with the model's stored activation frequencies and entrywise
l1 norms: on the normalized coordinate grids the inter-sample spacing is at
most 1, so the index-parameterized network has first-layer norms no larger
than the stored ones and the same cap applies (valid for grids of length
>= 3 per axis).
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from .model import BandModel, forward
from .tensor_ops import ShapeError, numerical_tucker_rank
from .wavelet import hwt

_REL_SLACK = 1e-12


@dataclass
class SmoothnessBounds:
    """Max absolute forward differences along each mode."""

    L1: float
    L2: float
    L3: float


@dataclass
class Claim:
    name: str
    measured: float
    bound: float

    @property
    def passed(self):
        return self.measured <= self.bound * (1.0 + _REL_SLACK)

    @property
    def slack(self):
        return self.bound - self.measured


@dataclass
class BoundReport:
    claims: List[Claim]

    @property
    def passed(self):
        return all(c.passed for c in self.claims)

    def violations(self):
        return [c for c in self.claims if not c.passed]


def _max_forward_diff(t, axis):
    if t.shape[axis] < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(t, axis=axis))))


def smoothness_constants(t) -> SmoothnessBounds:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or t.shape[0] < 2 or t.shape[1] < 2:
        raise ShapeError(f"need an order-3 tensor with spatial dims >= 2, got {t.shape}")
    return SmoothnessBounds(
        L1=_max_forward_diff(t, 0),
        L2=_max_forward_diff(t, 1),
        L3=_max_forward_diff(t, 2),
    )


def check_coefficient_smoothness(t) -> BoundReport:
    """Per-band forward-difference caps in each direction (12 claims)."""
    sc = smoothness_constants(t)
    l1, l2, l3 = sc.L1, sc.L2, sc.L3
    blocks = hwt(t)
    x_bounds = [4 * l1, 2 * min(2 * l1, l2), 2 * l1, 2 * min(l1, l2)]
    y_bounds = [4 * l2, 2 * l2, 2 * min(l1, 2 * l2), 2 * min(l1, l2)]
    claims = []
    for s, b in enumerate(blocks.as_list(), start=1):
        claims.append(Claim(f"band{s}_x", _max_forward_diff(b, 0), x_bounds[s - 1]))
        claims.append(Claim(f"band{s}_y", _max_forward_diff(b, 1), y_bounds[s - 1]))
        claims.append(Claim(f"band{s}_z", _max_forward_diff(b, 2), 2 * l3))
    return BoundReport(claims)


def max_laplacian(b):
    """Exact max of the absolute spatial 5-point Laplacian over interior points."""
    from .evolution import _laplacian_interior

    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] < 3 or b.shape[1] < 3:
        raise ShapeError(f"need spatial dims >= 3, got {b.shape}")
    return float(np.max(np.abs(_laplacian_interior(b))))


def check_laplacian_bounds(t) -> BoundReport:
    """Per-band interior-Laplacian caps derived from the difference caps."""
    sc = smoothness_constants(t)
    l1, l2 = sc.L1, sc.L2
    blocks = hwt(t)
    bounds = [
        8 * (l1 + l2),
        4 * (l2 + min(2 * l1, l2)),
        4 * (l1 + min(l1, 2 * l2)),
        8 * min(l1, l2),
    ]
    claims = [
        Claim(f"band{s}_laplacian", max_laplacian(b), bounds[s - 1])
        for s, b in enumerate(blocks.as_list(), start=1)
    ]
    return BoundReport(claims)


def check_rank_lemma(t, tol=1e-8) -> BoundReport:
    """Each band's per-mode numerical Tucker rank never exceeds the tensor's."""
    base = numerical_tucker_rank(t, tol)
    blocks = hwt(t)
    claims = []
    for s, b in enumerate(blocks.as_list(), start=1):
        br = numerical_tucker_rank(b, tol)
        for mode in range(3):
            claims.append(
                Claim(f"band{s}_mode{mode + 1}_rank", float(br[mode]), float(base[mode]))
            )
    return BoundReport(claims)


def network_l1_bound(model: BandModel):
    """Entrywise l1 norms: max over the core and every weight matrix."""
    eta = float(np.abs(model.core).sum())
    for net in model.spatial_x + model.spatial_y + [model.spectral]:
        for w in net.weights:
            eta = max(eta, float(np.abs(w).sum()))
    return eta


def model_laplacian_bound(model: BandModel, dims) -> BoundReport:
    """Generated-band Laplacian cap: C * omega_s^(2d-2) per band, with
    C = 4 * eta^(3d+1) * omega_z^(d-1) * n3 * max(n1/2, n2/2)."""
    n1, n2, n3 = dims
    p, q = n1 // 2, n2 // 2
    if p < 3 or q < 3 or n3 < 3:
        raise ShapeError("the cap is checked on grids of length >= 3 per axis")
    d = model.spatial_x[0].depth
    eta = network_l1_bound(model)
    const = 4.0 * eta ** (3 * d + 1) * model.omega_z ** (d - 1) * n3 * max(p, q)
    blocks = forward(model, dims).blocks
    claims = []
    for s, b in enumerate(blocks.as_list()):
        bound = const * model.omegas[s] ** (2 * d - 2)
        claims.append(Claim(f"band{s + 1}_model_laplacian", max_laplacian(b), bound))
    return BoundReport(claims)


def ramp_tightness_ratio(n=16):
    """How much of the first band's x-difference cap a linear ramp attains.

    The ramp t(i,j,k) = i has unit forward differences along x only; it drives
    the approximation band to the cap exactly, witnessing optimality.
    """
    i = np.arange(1, n + 1, dtype=np.float64)
    t = np.broadcast_to(i[:, None, None], (n, n, 2)).copy()
    sc = smoothness_constants(t)
    measured = _max_forward_diff(hwt(t).b1, 0)
    return measured / (4 * sc.L1)


# ---------------------------------------------------------------------------
# Fuzz campaigns (used by the verification command and the acceptance suite)
# ---------------------------------------------------------------------------


def _random_dims(rng, max_side=12, max_depth=6):
    n1 = 2 * int(rng.integers(3, max_side // 2 + 1))
    n2 = 2 * int(rng.integers(3, max_side // 2 + 1))
    n3 = int(rng.integers(3, max_depth + 1))
    return n1, n2, n3


def fuzz_smoothness(trials, seed=0):
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        t = rng.random(_random_dims(rng))
        reports.append(check_coefficient_smoothness(t))
    return reports


def fuzz_laplacian(trials, seed=0):
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        t = rng.random(_random_dims(rng))
        reports.append(check_laplacian_bounds(t))
    return reports


def _random_lowrank(rng):
    n1, n2, n3 = _random_dims(rng)
    r1 = int(rng.integers(1, min(4, n1) + 1))
    r2 = int(rng.integers(1, min(4, n2) + 1))
    r3 = int(rng.integers(1, min(3, n3) + 1))
    core = rng.standard_normal((r1, r2, r3))
    u = rng.standard_normal((n1, r1))
    v = rng.standard_normal((n2, r2))
    w = rng.standard_normal((n3, r3))
    return np.einsum("abc,ia,jb,kc->ijk", core, u, v, w)


def fuzz_rank_lemma(trials, seed=0, tol=1e-8):
    rng = np.random.default_rng(seed)
    return [check_rank_lemma(_random_lowrank(rng), tol) for _ in range(trials)]


def fuzz_model_bound(trials, seed=0):
    from .model import build_model

    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        n1 = 2 * int(rng.integers(3, 7))
        n2 = 2 * int(rng.integers(3, 7))
        n3 = int(rng.integers(3, 6))
        width = int(rng.integers(2, 9))
        mu = float(rng.uniform(4.0, 40.0))
        model = build_model(
            (n1, n2, n3),
            lambda_x=8,
            lambda_y=8,
            mu=mu,
            omega_z=float(rng.uniform(1.0, 4.0)),
            rz=int(rng.integers(1, n3 + 1)),
            width=width,
            depth=2,
            seed=int(rng.integers(0, 2**31)),
            core_frac=0.4,
        )
        # spread the frequencies so the per-band caps are exercised unevenly
        parts = rng.dirichlet(np.ones(4))
        for s in range(4):
            model.set_band_omega(s, max(mu * parts[s], 1e-3))
        reports.append(model_laplacian_bound(model, (n1, n2, n3)))
    return reports


def summarize(reports):
    """Aggregate fuzz output: total claims, violations, worst relative margin."""
    total = 0
    violations = 0
    worst = np.inf
    for rep in reports:
        for c in rep.claims:
            total += 1
            if not c.passed:
                violations += 1
            if c.bound > 0:
                worst = min(worst, c.slack / c.bound)
    return {"claims": total, "violations": violations, "worst_margin": worst}
