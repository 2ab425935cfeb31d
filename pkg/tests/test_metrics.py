import itertools
import math

import numpy as np
import pytest

from kaleflow import KernelSpec, ParticleCloud, discrete_kl, mmd_squared, wasserstein2_exact


class TestParticleCloud:
    def test_uniform_default(self):
        c = ParticleCloud(np.zeros((4, 2)))
        assert np.allclose(c.w, 0.25)
        assert c.is_uniform()

    def test_weight_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ParticleCloud(np.zeros((2, 1)), np.array([0.6, 0.6]))
        with pytest.raises(ValueError, match="nonnegative"):
            ParticleCloud(np.zeros((2, 1)), np.array([1.5, -0.5]))
        with pytest.raises(ValueError):
            ParticleCloud(np.zeros((0, 2)))


class TestMmdSquared:
    def test_identical_clouds_zero(self, rng):
        pts = rng.normal(size=(10, 2))
        a = ParticleCloud(pts)
        b = ParticleCloud(pts.copy())
        assert mmd_squared(a, b, KernelSpec(0.5)) <= 1e-15

    def test_two_singletons_closed_form(self):
        r, sigma = 1.3, 0.6
        a = ParticleCloud(np.array([[0.0, 0.0]]))
        b = ParticleCloud(np.array([[r, 0.0]]))
        expected = 2.0 - 2.0 * math.exp(-(r**2) / (2 * sigma**2))
        assert mmd_squared(a, b, KernelSpec(sigma)) == pytest.approx(expected, rel=1e-14)

    def test_matches_double_loop_oracle(self, rng):
        spec = KernelSpec(0.8)
        A = ParticleCloud(rng.normal(size=(10, 2)))
        B = ParticleCloud(rng.normal(size=(10, 2)) + 0.3)

        def k(x, y):
            return math.exp(-np.sum((x - y) ** 2) / (2 * spec.sigma**2))

        n = 10
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += k(A.points[i], A.points[j]) / n**2
                total += k(B.points[i], B.points[j]) / n**2
                total -= 2.0 * k(A.points[i], B.points[j]) / n**2
        assert mmd_squared(A, B, spec) == pytest.approx(total, abs=1e-12)

    def test_nonnegative_and_symmetric(self, rng):
        spec = KernelSpec(0.5)
        for _ in range(10):
            A = ParticleCloud(rng.normal(size=(6, 2)))
            B = ParticleCloud(rng.normal(size=(8, 2)))
            ab = mmd_squared(A, B, spec)
            assert ab >= 0.0
            assert ab == pytest.approx(mmd_squared(B, A, spec), rel=1e-12)


def w2_bruteforce(A, B):
    n = A.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.sum((A[i] - B[perm[i]]) ** 2) for i in range(n)) / n
        best = min(best, cost)
    return math.sqrt(best)


class TestWasserstein2Exact:
    def test_identical_zero(self, rng):
        pts = rng.normal(size=(5, 2))
        assert wasserstein2_exact(ParticleCloud(pts), ParticleCloud(pts.copy())) == 0.0

    def test_single_point_euclidean(self):
        a = ParticleCloud(np.array([[0.0, 0.0]]))
        b = ParticleCloud(np.array([[3.0, 4.0]]))
        assert wasserstein2_exact(a, b) == pytest.approx(5.0, rel=1e-14)

    def test_matches_factorial_bruteforce(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 7))
            A = rng.normal(size=(n, 2))
            B = rng.normal(size=(n, 2))
            got = wasserstein2_exact(ParticleCloud(A), ParticleCloud(B))
            assert got == pytest.approx(w2_bruteforce(A, B), abs=1e-12)

    def test_metric_axioms_on_random_triples(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 21))
            A, B, C = (ParticleCloud(rng.normal(size=(n, 2))) for _ in range(3))
            ab = wasserstein2_exact(A, B)
            ba = wasserstein2_exact(B, A)
            assert abs(ab - ba) <= 1e-10
            assert ab <= wasserstein2_exact(A, C) + wasserstein2_exact(C, B) + 1e-10

    def test_translation_invariance(self, rng):
        A = rng.normal(size=(8, 2))
        B = rng.normal(size=(8, 2))
        shift = rng.normal(size=2)
        d0 = wasserstein2_exact(ParticleCloud(A), ParticleCloud(B))
        d1 = wasserstein2_exact(ParticleCloud(A + shift), ParticleCloud(B + shift))
        assert d0 == pytest.approx(d1, abs=1e-12)

    def test_unsupported_inputs(self, rng):
        a = ParticleCloud(rng.normal(size=(3, 2)))
        b = ParticleCloud(rng.normal(size=(4, 2)))
        with pytest.raises(ValueError, match="equal sizes"):
            wasserstein2_exact(a, b)
        c = ParticleCloud(rng.normal(size=(3, 2)), np.array([0.5, 0.25, 0.25]))
        with pytest.raises(ValueError, match="uniform"):
            wasserstein2_exact(a, c)


class TestDiscreteKl:
    def test_equal_vectors_zero(self):
        p = np.array([0.2, 0.3, 0.5])
        assert discrete_kl(p, p.copy()) == 0.0

    def test_log2_case(self):
        assert discrete_kl(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(
            math.log(2.0), rel=1e-14
        )

    def test_support_violation_is_inf(self):
        assert discrete_kl(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == math.inf

    def test_gibbs_nonnegativity(self, rng):
        for _ in range(25):
            k = int(rng.integers(2, 10))
            p = rng.dirichlet(np.ones(k))
            q = rng.dirichlet(np.ones(k))
            assert discrete_kl(p, q) >= 0.0
