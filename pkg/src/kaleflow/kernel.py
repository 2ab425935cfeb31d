"""Gaussian RKHS kernel: Gram matrices, spatial gradients, and norm bounds.

The kernel is k(x, y) = exp(-||x - y||^2 / (2 sigma^2)), the only kernel used
throughout.  Gram computation uses the squared-distance expansion
||a||^2 + ||b||^2 - 2 a.b with clamping at zero against negative round-off,
which keeps the cost at O(N*M*d) dense matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel with bandwidth ``sigma`` (> 0, same units as coordinates)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"kernel bandwidth must be positive, got sigma={self.sigma}")


@dataclass(frozen=True)
class KernelBounds:
    """RKHS norm bounds for the kernel feature map and its derivatives.

    ``K`` bounds k(x, x); ``K1d`` bounds sum_i ||d_i k_x||^2; ``K2d`` bounds
    sum_{i,j} ||d_i d_j k_x||^2 (norms in the RKHS).
    """

    K: float
    K1d: float
    K2d: float

    def __post_init__(self):
        if not (self.K > 0 and self.K1d > 0 and self.K2d > 0):
            raise ValueError("kernel bounds must be strictly positive")


def gram(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix G[i, j] = k(A_i, B_j) for point rows A (N x d), B (M x d).

    When ``B is A`` the result is exactly symmetric with unit diagonal.
    """
    A = np.asarray(A, dtype=float)
    same = B is A
    B = A if same else np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("point arrays must be 2-d (rows are points)")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: A has d={A.shape[1]}, B has d={B.shape[1]}")
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    G = np.exp(-sq / (2.0 * spec.sigma**2))
    if same:
        G = 0.5 * (G + G.T)
        np.fill_diagonal(G, 1.0)
    return G


def kernel_grad(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Spatial gradient grad_z k(x, z) = ((x - z) / sigma^2) * k(x, z)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, z has shape {z.shape}")
    diff = x - z
    return (diff / spec.sigma**2) * np.exp(-(diff @ diff) / (2.0 * spec.sigma**2))


def kernel_bounds(spec: KernelSpec, d: int) -> KernelBounds:
    """Tight norm bounds for the Gaussian kernel in dimension ``d``.

    K(x, x) = 1 everywhere, so K = 1.  Differentiating the kernel at x = y
    gives d_i d_{i+d} k(x, x) = 1/sigma^2 per coordinate, hence K1d = d/sigma^2.
    The fourth-order terms are d_i^2 d_j^2 of exp(-||u||^2/(2 sigma^2)) at
    u = 0: 3/sigma^4 on the diagonal (i = j) and 1/sigma^4 off it, summing to
    K2d = d (d + 2) / sigma^4.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got d={d}")
    s2 = spec.sigma**2
    return KernelBounds(K=1.0, K1d=d / s2, K2d=d * (d + 2) / s2**2)
