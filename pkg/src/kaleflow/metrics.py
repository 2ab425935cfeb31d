"""Point clouds and evaluation metrics: squared MMD, exact W2, discrete KL."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kernel import KernelSpec, gram

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ParticleCloud:
    """N weighted points in R^d representing an empirical measure.

    ``weights`` is optional; ``None`` means uniform 1/N.  Explicit weights must
    be nonnegative and sum to 1 within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be an N x d array with N, d >= 1, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (pts.shape[0],):
                raise ValueError(f"weights must have length N={pts.shape[0]}, got shape {w.shape}")
            if (w < 0).any():
                raise ValueError("weights must be nonnegative")
            if abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights must sum to 1 within {WEIGHT_TOL}, got {w.sum()!r}")
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def w(self) -> np.ndarray:
        """Weight vector, materializing the uniform default."""
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights

    def is_uniform(self) -> bool:
        if self.weights is None:
            return True
        return bool(np.allclose(self.weights, 1.0 / self.n, atol=WEIGHT_TOL, rtol=0.0))


def mmd_squared(A: ParticleCloud, B: ParticleCloud, kernel: KernelSpec) -> float:
    """Squared maximum mean discrepancy between two weighted clouds.

    Computed as the quadratic form wA' K_AA wA - 2 wA' K_AB wB + wB' K_BB wB
    and clamped at 0, since round-off can push it to about -1e-15.
    """
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    wa, wb = A.w, B.w
    val = (
        wa @ gram(kernel, A.points, A.points) @ wa
        - 2.0 * wa @ gram(kernel, A.points, B.points) @ wb
        + wb @ gram(kernel, B.points, B.points) @ wb
    )
    return max(float(val), 0.0)


def wasserstein2_exact(A: ParticleCloud, B: ParticleCloud) -> float:
    """Exact Wasserstein-2 distance between equal-size uniform clouds.

    Solves the assignment problem on the squared-distance cost matrix exactly
    (cubic time), then returns sqrt of the mean matched squared distance.

    Raises ``ValueError`` for unequal sizes or non-uniform weights; general
    weighted transport is out of scope.
    """
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    if A.n != B.n:
        raise ValueError(f"clouds must have equal sizes, got {A.n} and {B.n}")
    if not (A.is_uniform() and B.is_uniform()):
        raise ValueError("wasserstein2_exact supports uniform weights only")
    diff = A.points[:, None, :] - B.points[None, :, :]
    cost = np.einsum("ijk,ijk->ij", diff, diff)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def discrete_kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence sum_i p_i log(p_i / q_i) between probability vectors.

    Terms with p_i = 0 contribute 0; returns ``inf`` if p puts mass where
    q has none.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-d vectors of equal length")
    support = p > 0
    if (q[support] <= 0).any():
        return math.inf
    ps = p[support]
    return float(np.sum(ps * np.log(ps / q[support])))
