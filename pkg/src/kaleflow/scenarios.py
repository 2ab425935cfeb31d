"""Seeded generators for the experimental settings, all planar (d = 2).

Geometry constants below are declared substitutes for data we do not have;
they reproduce the qualitative layouts and are overridable through the
module-level constants.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .metrics import ParticleCloud

# three rings: unit circles in a row; the source blob sits at the middle
# ring's center so the flow can reach every ring through the inter-ring gaps
RING_RADIUS = 1.0
RING_CENTERS = np.array([[0.0, 0.0], [2.5, 0.0], [5.0, 0.0]])
RING_SOURCE_MEAN = (2.5, 0.0)
RING_SOURCE_STD = 0.5

# heart: implicit region (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0, rejection-sampled
HEART_BOX = ((-1.2, 1.2), (-1.0, 1.4))

# spiral: r = 0.1 + 0.15 theta for theta in [0, 6 pi], radial band +/- 0.05
SPIRAL_R0 = 0.1
SPIRAL_SLOPE = 0.15
SPIRAL_TURNS = 6.0 * np.pi
SPIRAL_HALF_WIDTH = 0.05

# mixture of Gaussians: means on the corners of the unit square
MOG_MEANS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
MOG_STD = 0.25
MOG_SOURCE_MEAN = (0.5, 0.5)

SCENARIOS = ("three_rings", "shape_transfer", "mog_4corners", "gaussian_pair")


def three_rings(n: int, seed: int) -> tuple[ParticleCloud, ParticleCloud]:
    """Gaussian source blob and a target uniform on three non-overlapping rings.

    Ring atoms are split evenly across the rings with jittered-stratified
    angles (marginally uniform on each circle, far lower clumping than iid
    draws); the source is N(ring-center, RING_SOURCE_STD^2 I).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    base, extra = divmod(n, len(RING_CENTERS))
    pts = []
    for k, center in enumerate(RING_CENTERS):
        cnt = base + (1 if k < extra else 0)
        if cnt == 0:
            continue
        angles = (np.arange(cnt) + rng.uniform(0.0, 1.0, size=cnt)) * (2.0 * np.pi / cnt)
        pts.append(center + RING_RADIUS * np.c_[np.cos(angles), np.sin(angles)])
    target = np.vstack(pts)[rng.permutation(n)]
    source = rng.normal(size=(n, 2)) * RING_SOURCE_STD + np.asarray(RING_SOURCE_MEAN)
    return ParticleCloud(source), ParticleCloud(target)


def heart_residual(points: np.ndarray) -> np.ndarray:
    """(x^2 + y^2 - 1)^3 - x^2 y^3; nonpositive inside the heart region."""
    x, y = points[:, 0], points[:, 1]
    return (x**2 + y**2 - 1.0) ** 3 - x**2 * y**3


def spiral_offsets(points: np.ndarray) -> np.ndarray:
    """Signed radial distance from each point to the spiral center curve.

    The curve radius at the point's angle is ambiguous across turns; take the
    branch whose radius is closest to the point's.
    """
    r = np.linalg.norm(points, axis=1)
    theta = np.arctan2(points[:, 1], points[:, 0]) % (2.0 * np.pi)
    best = np.full(len(points), np.inf)
    k_max = int(SPIRAL_TURNS // (2.0 * np.pi)) + 1
    for k in range(k_max + 1):
        th = theta + 2.0 * np.pi * k
        valid = th <= SPIRAL_TURNS
        cand = np.where(valid, r - (SPIRAL_R0 + SPIRAL_SLOPE * th), np.inf)
        best = np.where(np.abs(cand) < np.abs(best), cand, best)
    return best


def shape_transfer(n: int, seed: int) -> tuple[ParticleCloud, ParticleCloud]:
    """Source uniform in a heart region, target uniform in (theta, offset) on a
    thickened Archimedean spiral band."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = HEART_BOX
    pts = np.empty((0, 2))
    while len(pts) < n:
        cand = rng.uniform((x0, y0), (x1, y1), size=(2 * n, 2))
        pts = np.vstack([pts, cand[heart_residual(cand) <= 0.0]])
    heart = pts[:n]

    theta = rng.uniform(0.0, SPIRAL_TURNS, size=n)
    offset = rng.uniform(-SPIRAL_HALF_WIDTH, SPIRAL_HALF_WIDTH, size=n)
    radius = SPIRAL_R0 + SPIRAL_SLOPE * theta + offset
    spiral = np.c_[radius * np.cos(theta), radius * np.sin(theta)]
    return ParticleCloud(heart), ParticleCloud(spiral)


def mog_log_density_grad(points: np.ndarray) -> np.ndarray:
    """grad log pi for the balanced 4-corner Gaussian mixture, row-wise."""
    s2 = MOG_STD**2
    d2 = ((points[:, None, :] - MOG_MEANS[None]) ** 2).sum(axis=2)
    logw = -d2 / (2.0 * s2)
    w = np.exp(logw - logsumexp(logw, axis=1, keepdims=True))
    return (w[..., None] * (MOG_MEANS[None] - points[:, None, :])).sum(axis=1) / s2


def mog_4corners(
    n: int, seed: int
) -> tuple[ParticleCloud, ParticleCloud, Callable[[np.ndarray], np.ndarray]]:
    """Unit-Gaussian source at the square's center, 4-corner mixture target,
    plus the analytic mixture log-density gradient for Langevin runs."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, len(MOG_MEANS), size=n)
    target = MOG_MEANS[comp] + MOG_STD * rng.normal(size=(n, 2))
    source = rng.normal(size=(n, 2)) + np.asarray(MOG_SOURCE_MEAN)
    return ParticleCloud(source), ParticleCloud(target), mog_log_density_grad


def gaussian_pair(n: int, mean_gap: float, seed: int) -> tuple[ParticleCloud, ParticleCloud]:
    """Two unit isotropic Gaussians in R^2 with means ``mean_gap`` apart."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    source = rng.normal(size=(n, 2))
    target = rng.normal(size=(n, 2)) + np.array([mean_gap, 0.0])
    return ParticleCloud(source), ParticleCloud(target)
