"""Empirical KALE dual problem and its solvers.

Given target atoms X with weights q, source atoms Y with weights p, and a
regularization strength lambda, the dual problem is

    min_{f > 0}  sum_i q_i (f_i log f_i - f_i + 1)
                 + (1 / 2 lambda) || sum_i q_i f_i k(X_i, .) - mu_P ||_H^2

with mu_P = sum_j p_j k(Y_j, .).  The quadratic term expands through the Gram
matrices as f' diag(q) K_XX diag(q) f - 2 f' diag(q) K_XY p + p' K_YY p.
The objective is strictly convex in f on the support of q, with gradient

    g_i = q_i log f_i + (q_i / lambda) [ (K_XX diag(q) f)_i - (K_XY p)_i ]

and Hessian diag(q / f) + (1/lambda) diag(q) K_XX diag(q).

The optimizer f* is an entropically regularized density-ratio estimate on the
target atoms; the associated witness function

    h*(z) = (1 / lambda) [ sum_j p_j k(Y_j, z) - sum_i q_i f*_i k(X_i, z) ]

satisfies log f*_i = h*(X_i) at the optimum, and the divergence value is
(1 + lambda) times the optimal dual objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernel import KernelSpec, gram
from .metrics import WEIGHT_TOL, ParticleCloud

SOLVERS = ("newton", "coordinate_descent", "gradient_descent")
SOLVER_ALIASES = {"newton": "newton", "cd": "coordinate_descent",
                  "coordinate_descent": "coordinate_descent",
                  "gd": "gradient_descent", "gradient_descent": "gradient_descent"}

DEFAULT_TOL = 1e-9
NEWTON_MAX_ITER = 100
CD_MAX_SWEEPS = 500
GD_MAX_ITER = 20_000


@dataclass(frozen=True)
class GramBundle:
    """Gram matrices of a (target X, source Y) pair at one bandwidth.

    Carries the generating points and sigma so downstream consumers (witness
    construction, flows) do not need to re-derive them.
    """

    k_xx: np.ndarray
    k_xy: np.ndarray
    k_yy: np.ndarray
    x_points: np.ndarray
    y_points: np.ndarray
    sigma: float

    @property
    def n(self) -> int:
        return self.k_xx.shape[0]

    @property
    def m(self) -> int:
        return self.k_yy.shape[0]


def compute_grams(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> GramBundle:
    """Build the three Gram matrices for target atoms X and source atoms Y."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return GramBundle(
        k_xx=gram(spec, X, X),
        k_xy=gram(spec, X, Y),
        k_yy=gram(spec, Y, Y),
        x_points=X,
        y_points=Y,
        sigma=spec.sigma,
    )


@dataclass(frozen=True)
class DualProblem:
    """Immutable dual-problem instance: Gram bundle, weights, and lambda."""

    grams: GramBundle
    q_weights: np.ndarray
    p_weights: np.ndarray
    lam: float

    def __post_init__(self):
        q = np.asarray(self.q_weights, dtype=float)
        p = np.asarray(self.p_weights, dtype=float)
        if q.shape != (self.grams.n,):
            raise ValueError(f"q_weights must have length {self.grams.n}, got {q.shape}")
        if p.shape != (self.grams.m,):
            raise ValueError(f"p_weights must have length {self.grams.m}, got {p.shape}")
        if (q < 0).any() or (p < 0).any():
            raise ValueError("weights must be nonnegative")
        for name, w in (("q_weights", q), ("p_weights", p)):
            if abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError(f"{name} must sum to 1 within {WEIGHT_TOL}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "q_weights", q)
        object.__setattr__(self, "p_weights", p)


def build_dual_problem(
    kernel: KernelSpec, target: ParticleCloud, source: ParticleCloud, lam: float
) -> DualProblem:
    """Assemble a DualProblem from clouds (target supplies X/q, source Y/p)."""
    if target.dim != source.dim:
        raise ValueError(f"dimension mismatch: target d={target.dim}, source d={source.dim}")
    grams = compute_grams(kernel, target.points, source.points)
    return DualProblem(grams=grams, q_weights=target.w, p_weights=source.w, lam=lam)


@dataclass(frozen=True)
class DualSolution:
    """Solver output: the density-ratio vector plus diagnostics."""

    f: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    solver: str
    converged: bool


@dataclass(frozen=True)
class WitnessFunction:
    """Kernel expansion h(z) = (1/lam) [sum_j y_coeffs_j k(y_j, z) - sum_i x_coeffs_i k(x_i, z)]."""

    lam: float
    sigma: float
    x_atoms: np.ndarray
    x_coeffs: np.ndarray
    y_atoms: np.ndarray
    y_coeffs: np.ndarray

    @property
    def spec(self) -> KernelSpec:
        return KernelSpec(self.sigma)


def _check_f(f: np.ndarray, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValueError(f"f must have length {n}, got shape {f.shape}")
    if (f <= 0).any():
        raise ValueError("f must be strictly positive")
    return f


def dual_objective(prob: DualProblem, f: np.ndarray) -> float:
    """Dual objective J(f): entropy term plus the RKHS quadratic term.

    Both terms are nonnegative (x log x - x + 1 >= 0 and a squared RKHS norm)
    and are clamped at 0 against round-off, so the value never goes negative.
    """
    f = _check_f(f, prob.grams.n)
    q, p, lam = prob.q_weights, prob.p_weights, prob.lam
    g = prob.grams
    entropy = max(float(np.sum(q * (f * np.log(f) - f + 1.0))), 0.0)
    qf = q * f
    quad = max(float(qf @ g.k_xx @ qf - 2.0 * qf @ (g.k_xy @ p) + p @ g.k_yy @ p), 0.0)
    return entropy + quad / (2.0 * lam)


def dual_gradient(prob: DualProblem, f: np.ndarray) -> np.ndarray:
    """Gradient of the dual objective with respect to f."""
    f = _check_f(f, prob.grams.n)
    q, p, lam = prob.q_weights, prob.p_weights, prob.lam
    g = prob.grams
    return q * np.log(f) + (q / lam) * (g.k_xx @ (q * f) - g.k_xy @ p)


def dual_hessian(prob: DualProblem, f: np.ndarray) -> np.ndarray:
    """Hessian diag(q/f) + (1/lambda) diag(q) K_XX diag(q); PD when q > 0."""
    f = _check_f(f, prob.grams.n)
    q, lam = prob.q_weights, prob.lam
    H = (np.outer(q, q) * prob.grams.k_xx) / lam
    H[np.diag_indices_from(H)] += q / f
    return H


def _objective_u(u, q, k_xx, b, yy_quad, lam):
    # J(exp(u)) with b = K_XY p and yy_quad = p' K_YY p precomputed
    f = np.exp(u)
    qf = q * f
    entropy = np.sum(q * (f * u - f + 1.0))
    return entropy + (qf @ k_xx @ qf - 2.0 * qf @ b + yy_quad) / (2.0 * lam)


def _solve_newton(prob: DualProblem, tol, max_iter, f0):
    """Damped Newton in u = log f.

    The search direction comes from the strictly convex f-space model
    (H_f^{-1} grad_f, mapped to u by df/f); the exact u-space Hessian is
    indefinite far from the optimum and stalls at small lambda.  Armijo
    backtracking on J(exp(u)) guarantees monotone progress.
    """
    q, p, lam = prob.q_weights, prob.p_weights, prob.lam
    g = prob.grams
    support = q > 0
    full = bool(support.all())
    k_xx = g.k_xx if full else g.k_xx[np.ix_(support, support)]
    b = (g.k_xy @ p) if full else (g.k_xy @ p)[support]
    yy_quad = float(p @ g.k_yy @ p)
    qs = q if full else q[support]
    u = np.zeros(qs.size) if f0 is None else np.log(f0 if full else f0[support])
    qq_kxx = np.outer(qs, qs) * k_xx

    it = 0
    for it in range(max_iter + 1):
        f = np.exp(u)
        g_f = qs * u + (qs / lam) * (k_xx @ (qs * f) - b)
        grad_norm = float(np.linalg.norm(g_f))
        if grad_norm <= tol or it == max_iter:
            break
        H = qq_kxx / lam
        H[np.diag_indices_from(H)] += qs / f
        try:
            step_u = -cho_solve(cho_factor(H, lower=True), g_f) / f
        except np.linalg.LinAlgError:
            step_u = -f * g_f
        g_u = f * g_f
        slope = float(g_u @ step_u)
        if slope >= 0:
            step_u = -g_u
            slope = float(g_u @ step_u)
        J0 = _objective_u(u, qs, k_xx, b, yy_quad, lam)
        if -slope <= 1e-12 * (1.0 + abs(J0)):
            # predicted decrease is below the objective's float resolution:
            # inside the quadratic basin, take the full Newton step
            u = u + step_u
            continue
        t = 1.0
        while t > 1e-16:
            if _objective_u(u + t * step_u, qs, k_xx, b, yy_quad, lam) <= J0 + 1e-4 * t * slope:
                break
            t *= 0.5
        u = u + t * step_u

    f_sub = np.exp(u)
    if full:
        f = f_sub
    else:
        f = np.ones(q.size)
        f[support] = f_sub
    return f, it, grad_norm


def _solve_coordinate_descent(prob: DualProblem, tol, max_sweeps, f0):
    """Cyclic coordinate descent with an exact 1-d Newton inner solve.

    Maintains s = K_XX (q * f) so each coordinate update costs O(N); one sweep
    is O(N^2).  Coordinates with q_i = 0 are inert and stay at f_i = 1.
    """
    q, p, lam = prob.q_weights, prob.p_weights, prob.lam
    g = prob.grams
    n = g.n
    k_xx = g.k_xx
    b = g.k_xy @ p
    f = np.ones(n) if f0 is None else f0.copy()
    s = k_xx @ (q * f)
    active = np.flatnonzero(q > 0)
    diag = np.diag(k_xx)

    sweeps = 0
    grad_norm = float(np.linalg.norm(q * np.log(f) + (q / lam) * (s - b)))
    while grad_norm > tol and sweeps < max_sweeps:
        for i in active:
            qi, fi = q[i], f[i]
            # contribution of the other coordinates, fixed during the 1-d solve
            c = s[i] - diag[i] * qi * fi - b[i]
            kii = diag[i] * qi
            for _ in range(60):
                phi = np.log(fi) + (kii * fi + c) / lam
                if abs(qi * phi) <= 0.1 * tol:
                    break
                dphi = 1.0 / fi + kii / lam
                step = -phi / dphi
                fi_new = fi + step
                while fi_new <= 0:
                    step *= 0.5
                    fi_new = fi + step
                if fi_new == fi:
                    break
                fi = fi_new
            if fi != f[i]:
                s += k_xx[:, i] * (qi * (fi - f[i]))
                f[i] = fi
        sweeps += 1
        grad_norm = float(np.linalg.norm(q * np.log(f) + (q / lam) * (s - b)))
    return f, sweeps, grad_norm


def _solve_gradient_descent(prob: DualProblem, tol, max_iter, f0):
    """Armijo gradient descent in u = log f; slow but dependency-free baseline."""
    q, p, lam = prob.q_weights, prob.p_weights, prob.lam
    g = prob.grams
    b = g.k_xy @ p
    yy_quad = float(p @ g.k_yy @ p)
    u = np.zeros(g.n) if f0 is None else np.log(f0)
    it = 0
    t = 1.0
    for it in range(max_iter + 1):
        f = np.exp(u)
        g_f = q * np.log(f) + (q / lam) * (g.k_xx @ (q * f) - b)
        grad_norm = float(np.linalg.norm(g_f))
        if grad_norm <= tol or it == max_iter:
            break
        g_u = f * g_f
        J0 = _objective_u(u, q, g.k_xx, b, yy_quad, lam)
        slope = -float(g_u @ g_u)
        t = min(4.0 * t, 1e6)  # grow the trial step again after earlier backtracking
        while t > 1e-18:
            if _objective_u(u - t * g_u, q, g.k_xx, b, yy_quad, lam) <= J0 + 1e-4 * t * slope:
                break
            t *= 0.5
        u = u - t * g_u
    return np.exp(u), it, grad_norm


def solve_dual(
    prob: DualProblem,
    method: str = "newton",
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    warm_start: np.ndarray | None = None,
) -> DualSolution:
    """Solve the dual problem; non-convergence is reported, never raised.

    Parameters
    ----------
    prob : DualProblem
    method : {"newton", "coordinate_descent", "gradient_descent"}
        Short aliases "cd" and "gd" are accepted.
    tol : float
        Convergence threshold on the Euclidean norm of the f-space gradient.
    max_iter : int, optional
        Iteration cap (Newton iterations, CD sweeps, or GD steps); defaults
        are 100 / 500 / 20000 respectively.
    warm_start : array, optional
        Strictly positive initial f, typically the previous flow step's
        solution.  Defaults to all-ones.

    Returns
    -------
    DualSolution
        ``converged`` is False when the cap was hit first; the best iterate
        is still returned with its objective and gradient norm.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    try:
        method = SOLVER_ALIASES[method]
    except KeyError:
        raise ValueError(f"unknown solver {method!r}; expected one of {SOLVERS}") from None
    f0 = None if warm_start is None else _check_f(warm_start, prob.grams.n)

    if method == "newton":
        f, iters, grad_norm = _solve_newton(prob, tol, max_iter or NEWTON_MAX_ITER, f0)
    elif method == "coordinate_descent":
        f, iters, grad_norm = _solve_coordinate_descent(prob, tol, max_iter or CD_MAX_SWEEPS, f0)
    else:
        f, iters, grad_norm = _solve_gradient_descent(prob, tol, max_iter or GD_MAX_ITER, f0)

    return DualSolution(
        f=f,
        objective=dual_objective(prob, f),
        grad_norm=grad_norm,
        iterations=iters,
        solver=method,
        converged=grad_norm <= tol,
    )


def witness_from_solution(prob: DualProblem, sol: DualSolution) -> WitnessFunction:
    """Witness h*(z) = (1/lam) [sum_j p_j k(Y_j, z) - sum_i q_i f*_i k(X_i, z)].

    This is the sign and scale fixed by stationarity of the primal objective,
    mu_P - integral of k e^{h} dQ - lambda h = 0, and is verified downstream
    through the identity log f*_i = h*(X_i).
    """
    g = prob.grams
    return WitnessFunction(
        lam=prob.lam,
        sigma=g.sigma,
        x_atoms=g.x_points,
        x_coeffs=prob.q_weights * sol.f,
        y_atoms=g.y_points,
        y_coeffs=prob.p_weights.copy(),
    )


def witness_eval(w: WitnessFunction, z: np.ndarray) -> float:
    """Evaluate the witness kernel expansion at a single point."""
    z = np.asarray(z, dtype=float)
    if z.shape != (w.x_atoms.shape[1],):
        raise ValueError(f"z must be a vector of length {w.x_atoms.shape[1]}, got {z.shape}")
    Z = z[None, :]
    ky = gram(w.spec, Z, w.y_atoms)[0]
    kx = gram(w.spec, Z, w.x_atoms)[0]
    return float(ky @ w.y_coeffs - kx @ w.x_coeffs) / w.lam


def witness_grad(w: WitnessFunction, z: np.ndarray) -> np.ndarray:
    """Spatial gradient of the witness at a single point."""
    z = np.asarray(z, dtype=float)
    if z.shape != (w.x_atoms.shape[1],):
        raise ValueError(f"z must be a vector of length {w.x_atoms.shape[1]}, got {z.shape}")
    return witness_grad_batch(w, z[None, :])[0]


def witness_grad_batch(w: WitnessFunction, Z: np.ndarray) -> np.ndarray:
    """Witness gradient at each row of Z (m x d), vectorized over rows.

    grad h(z) = (1/lam) sum_j c_j ((atom_j - z)/sigma^2) k(atom_j, z) with the
    signed coefficients of the expansion.
    """
    Z = np.asarray(Z, dtype=float)
    s2 = w.sigma**2
    gy = gram(w.spec, Z, w.y_atoms)
    gx = gram(w.spec, Z, w.x_atoms)
    term_y = (gy * w.y_coeffs) @ w.y_atoms - (gy @ w.y_coeffs)[:, None] * Z
    term_x = (gx * w.x_coeffs) @ w.x_atoms - (gx @ w.x_coeffs)[:, None] * Z
    return (term_y - term_x) / (w.lam * s2)


def witness_norm2(w: WitnessFunction, grams: GramBundle | None = None) -> float:
    """Squared RKHS norm of the witness, in closed form from Gram matrices."""
    if grams is None:
        spec = w.spec
        k_xx = gram(spec, w.x_atoms, w.x_atoms)
        k_xy = gram(spec, w.x_atoms, w.y_atoms)
        k_yy = gram(spec, w.y_atoms, w.y_atoms)
    else:
        k_xx, k_xy, k_yy = grams.k_xx, grams.k_xy, grams.k_yy
    a, c = w.x_coeffs, w.y_coeffs
    val = a @ k_xx @ a - 2.0 * a @ k_xy @ c + c @ k_yy @ c
    return max(float(val), 0.0) / w.lam**2


def kale_value(prob: DualProblem, sol: DualSolution) -> float:
    """Divergence value (1 + lambda) * J(f*); equals (1 + lambda) * K(h*) at optimum."""
    return (1.0 + prob.lam) * sol.objective


def kale_divergence(
    source: ParticleCloud,
    target: ParticleCloud,
    kernel: KernelSpec,
    lam: float,
    method: str = "newton",
    tol: float = DEFAULT_TOL,
) -> tuple[float, DualSolution, DualProblem]:
    """One-call divergence between clouds: build, solve, and scale."""
    prob = build_dual_problem(kernel, target, source, lam)
    sol = solve_dual(prob, method=method, tol=tol)
    return kale_value(prob, sol), sol, prob
