import numpy as np
import pytest

from kaleflow import DualProblem, KernelSpec, ParticleCloud, compute_grams


def finite_diff_grad(fun, x, eps=1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        hi, lo = x.copy(), x.copy()
        hi[i] += eps
        lo[i] -= eps
        out[i] = (fun(hi) - fun(lo)) / (2.0 * eps)
    return out


def random_clouds(rng, n, m, d, spread=1.0, shift=0.5):
    X = spread * rng.normal(size=(n, d))
    Y = spread * rng.normal(size=(m, d)) + shift
    return X, Y


def random_problem(rng, n=8, m=6, d=2, sigma=0.7, lam=1.0, weighted=False, shift=0.5):
    X, Y = random_clouds(rng, n, m, d, shift=shift)
    grams = compute_grams(KernelSpec(sigma), X, Y)
    if weighted:
        q = rng.dirichlet(np.ones(n) * 5.0)
        p = rng.dirichlet(np.ones(m) * 5.0)
    else:
        q = np.full(n, 1.0 / n)
        p = np.full(m, 1.0 / m)
    return DualProblem(grams=grams, q_weights=q, p_weights=p, lam=lam)


def uniform_cloud(points):
    return ParticleCloud(np.asarray(points, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)
