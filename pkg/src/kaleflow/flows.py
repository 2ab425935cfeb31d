"""Time-discretized particle flows and their diagnostics.

The main loop alternates a dual solve against the current source positions
with a forward-Euler particle update along -(1 + lambda) grad h*.  A noise
schedule beta_n >= 0 evaluates the velocity field at Gaussian-perturbed
positions (one d-dimensional draw per particle per step, consumed only when
beta_n > 0); beta_n = 0 reproduces the plain descent update exactly, with no
RNG consumption.  MMD descent and the unadjusted Langevin algorithm are
provided as reference dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kernel import KernelBounds, KernelSpec, gram
from .metrics import ParticleCloud, wasserstein2_exact
from .solver import (
    DEFAULT_TOL,
    DualProblem,
    DualSolution,
    GramBundle,
    WitnessFunction,
    compute_grams,
    kale_value,
    solve_dual,
    witness_from_solution,
    witness_grad_batch,
    witness_norm2,
)


def default_step_size(lam: float) -> float:
    """Step-size rule gamma = min(0.1, lambda / 10)."""
    return min(0.1, lam / 10.0)


@dataclass(frozen=True)
class FlowConfig:
    """Configuration of a particle-flow run.

    ``gamma=None`` selects the default rule min(0.1, lambda/10).  ``beta`` is
    either a constant noise level or an explicit per-step sequence of length
    >= steps.  The seed drives all noise draws through per-(step, particle)
    substreams, so changing the particle count never reshuffles the draws of
    other particles.
    """

    lam: float
    gamma: float | None = None
    steps: int = 100
    beta: float | Sequence[float] = 0.0
    solver: str = "newton"
    tol: float = DEFAULT_TOL
    seed: int = 0
    snapshot_every: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if np.isscalar(self.beta):
            if self.beta < 0:
                raise ValueError(f"beta must be >= 0, got {self.beta}")
        else:
            arr = np.asarray(self.beta, dtype=float)
            if (arr < 0).any():
                raise ValueError("all beta_n must be >= 0")
            if arr.size < self.steps:
                raise ValueError(f"beta schedule has {arr.size} entries for {self.steps} steps")
            object.__setattr__(self, "beta", tuple(float(b) for b in arr))

    @property
    def step_size(self) -> float:
        return self.gamma if self.gamma is not None else default_step_size(self.lam)

    def beta_at(self, n: int) -> float:
        if np.isscalar(self.beta):
            return float(self.beta)
        return self.beta[n]


@dataclass(frozen=True)
class FlowRecord:
    step: int
    kale: float
    mmd2: float
    witness_norm2: float
    mean_sq_velocity: float
    solver_iters: int
    beta: float
    w2_to_reference: float | None = None
    solver_converged: bool = True


@dataclass(frozen=True)
class FlowTrace:
    """Per-iteration records of a flow run; exactly steps + 1 entries."""

    records: tuple[FlowRecord, ...]

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]


@dataclass(frozen=True)
class FlowResult:
    trace: FlowTrace
    snapshots: dict[int, np.ndarray]
    final: ParticleCloud
    positions: list[np.ndarray] | None = None


def noise_draws(seed: int, step: int, n: int, d: int) -> np.ndarray:
    """Standard-normal draws for step ``step``, one substream per particle."""
    out = np.empty((n, d))
    for i in range(n):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(step, i))
        out[i] = np.random.Generator(np.random.PCG64(ss)).standard_normal(d)
    return out


@dataclass(frozen=True)
class StepDiagnostics:
    solution: DualSolution
    witness: WitnessFunction
    kale: float
    mmd2: float
    witness_norm2: float
    mean_sq_velocity: float
    beta: float


def _solve_state(source, target, grams, cfg, warm_start):
    prob = DualProblem(grams=grams, q_weights=target.w, p_weights=source.w, lam=cfg.lam)
    sol = solve_dual(prob, method=cfg.solver, tol=cfg.tol, warm_start=warm_start)
    return prob, sol


def _state_diagnostics(prob, sol, grams):
    q, p = prob.q_weights, prob.p_weights
    mmd2 = q @ grams.k_xx @ q - 2.0 * q @ grams.k_xy @ p + p @ grams.k_yy @ p
    w = witness_from_solution(prob, sol)
    return w, kale_value(prob, sol), max(float(mmd2), 0.0), witness_norm2(w, grams)


def kale_descent_step(
    source: ParticleCloud,
    target: ParticleCloud,
    grams: GramBundle,
    cfg: FlowConfig,
    step: int,
    warm_start: np.ndarray | None = None,
) -> tuple[ParticleCloud, StepDiagnostics]:
    """One particle update Y_i <- Y_i - gamma (1+lam) grad h*(Y_i + beta_n U_i).

    ``grams`` must hold the Gram bundle of the current (target, source) pair.
    Solver non-convergence is surfaced through the diagnostics; the step still
    executes with the best iterate.
    """
    prob, sol = _solve_state(source, target, grams, cfg, warm_start)
    w, kale, mmd2, wn2 = _state_diagnostics(prob, sol, grams)
    beta = cfg.beta_at(step)
    Y = source.points
    if beta > 0:
        Z = Y + beta * noise_draws(cfg.seed, step, Y.shape[0], Y.shape[1])
    else:
        Z = Y
    velocity = (1.0 + cfg.lam) * witness_grad_batch(w, Z)
    new_points = Y - cfg.step_size * velocity
    diag = StepDiagnostics(
        solution=sol,
        witness=w,
        kale=kale,
        mmd2=mmd2,
        witness_norm2=wn2,
        mean_sq_velocity=float((velocity**2).sum(axis=1).mean()),
        beta=beta,
    )
    return ParticleCloud(new_points, source.weights), diag


def run_kale_flow(
    init: ParticleCloud,
    target: ParticleCloud,
    kernel: KernelSpec,
    cfg: FlowConfig,
    reference: Sequence[np.ndarray] | None = None,
    record_positions: bool = False,
) -> FlowResult:
    """Iterate the descent for cfg.steps steps, recording a full trace.

    When ``reference`` supplies per-step clouds of matching size (e.g. from a
    ULA or MMD run), each record carries the exact W2 distance to the
    reference at the same iteration; otherwise the field stays absent.
    Snapshots are stored at step 0, multiples of ``snapshot_every``, and the
    final step.
    """
    if init.dim != target.dim:
        raise ValueError(f"dimension mismatch: init d={init.dim}, target d={target.dim}")
    if reference is not None and len(reference) < cfg.steps + 1:
        raise ValueError(
            f"reference must provide {cfg.steps + 1} per-step clouds, got {len(reference)}"
        )
    source = init
    k_xx = gram(kernel, target.points, target.points)
    records = []
    snapshots: dict[int, np.ndarray] = {}
    positions = [init.points.copy()] if record_positions else None
    warm = None
    for n in range(cfg.steps + 1):
        X, Y = target.points, source.points
        grams = GramBundle(
            k_xx=k_xx,
            k_xy=gram(kernel, X, Y),
            k_yy=gram(kernel, Y, Y),
            x_points=X,
            y_points=Y,
            sigma=kernel.sigma,
        )
        last = n == cfg.steps
        if last:
            prob, sol = _solve_state(source, target, grams, cfg, warm)
            w, kale, mmd2, wn2 = _state_diagnostics(prob, sol, grams)
            velocity = (1.0 + cfg.lam) * witness_grad_batch(w, Y)
            msv = float((velocity**2).sum(axis=1).mean())
            beta = 0.0
            iters, conv = sol.iterations, sol.converged
        else:
            new_source, diag = kale_descent_step(source, target, grams, cfg, n, warm)
            kale, mmd2, wn2 = diag.kale, diag.mmd2, diag.witness_norm2
            msv, beta = diag.mean_sq_velocity, diag.beta
            iters, conv = diag.solution.iterations, diag.solution.converged
            warm = diag.solution.f
        w2 = None
        if reference is not None:
            ref = np.asarray(reference[n], dtype=float)
            if ref.shape == source.points.shape and source.is_uniform():
                w2 = wasserstein2_exact(source, ParticleCloud(ref))
        records.append(
            FlowRecord(
                step=n,
                kale=kale,
                mmd2=mmd2,
                witness_norm2=wn2,
                mean_sq_velocity=msv,
                solver_iters=iters,
                beta=beta,
                w2_to_reference=w2,
                solver_converged=conv,
            )
        )
        if n % cfg.snapshot_every == 0 or last:
            snapshots[n] = source.points.copy()
        if not last:
            source = new_source
            if record_positions:
                positions.append(source.points.copy())
    return FlowResult(
        trace=FlowTrace(tuple(records)),
        snapshots=snapshots,
        final=source,
        positions=positions,
    )


def mmd_descent_step(
    source: ParticleCloud, target: ParticleCloud, grams: GramBundle, gamma: float
) -> ParticleCloud:
    """One MMD-flow update Y_i <- Y_i - gamma grad f_{P,Q}(Y_i).

    The witness f_{P,Q} = mu_P - mu_Q is the difference of mean embeddings;
    ``grams`` must match the current pair.
    """
    Y, X = source.points, target.points
    p, q = source.w, target.w
    s2 = grams.sigma**2
    g_yy = grams.k_yy
    g_yx = grams.k_xy.T
    term_p = (g_yy * p) @ Y - (g_yy @ p)[:, None] * Y
    term_q = (g_yx * q) @ X - (g_yx @ q)[:, None] * Y
    velocity = (term_p - term_q) / s2
    return ParticleCloud(Y - gamma * velocity, source.weights)


def run_mmd_flow(
    init: ParticleCloud,
    target: ParticleCloud,
    kernel: KernelSpec,
    gamma: float,
    steps: int,
) -> list[np.ndarray]:
    """MMD descent reference run; returns positions at every step (steps + 1 entries)."""
    source = init
    positions = [init.points.copy()]
    for _ in range(steps):
        grams = compute_grams(kernel, target.points, source.points)
        source = mmd_descent_step(source, target, grams, gamma)
        positions.append(source.points.copy())
    return positions


def ula_step(
    particles: np.ndarray,
    grad_log_target: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Unadjusted Langevin update Y <- Y + gamma grad log pi(Y) + sqrt(2 gamma) xi."""
    noise = rng.standard_normal(particles.shape)
    return particles + gamma * grad_log_target(particles) + math.sqrt(2.0 * gamma) * noise


def run_ula_flow(
    init: ParticleCloud,
    grad_log_target: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    steps: int,
    seed: int,
) -> list[np.ndarray]:
    """ULA reference run; returns positions at every step (steps + 1 entries)."""
    rng = np.random.default_rng(seed)
    Y = init.points.copy()
    positions = [Y.copy()]
    for _ in range(steps):
        Y = ula_step(Y, grad_log_target, gamma, rng)
        positions.append(Y.copy())
    return positions


@dataclass(frozen=True)
class NoiseCondition:
    lhs: float
    rhs: float
    satisfied: bool


def noise_condition_diagnostic(
    source: ParticleCloud,
    witness: WitnessFunction,
    kale: float,
    beta: float,
    bounds: KernelBounds,
    mc_samples: int,
    rng: np.random.Generator,
) -> NoiseCondition:
    """Check (8 K2d beta^2 / lambda^2) KALE <= E ||grad h*(y + beta u)||^2.

    The right-hand side is a Monte-Carlo average over the source particles and
    ``mc_samples`` Gaussian draws each.  Diagnostic only; the schedule is
    never adjusted from it.
    """
    Y = source.points
    lhs = 8.0 * bounds.K2d * beta**2 / witness.lam**2 * kale
    total = 0.0
    for _ in range(mc_samples):
        Z = Y if beta == 0 else Y + beta * rng.standard_normal(Y.shape)
        g = witness_grad_batch(witness, Z)
        total += float((g**2).sum(axis=1).mean())
    rhs = total / mc_samples
    # absolute slack so the analytically-degenerate case (h* = 0, both sides
    # zero) is not tipped by round-off in the divergence value
    return NoiseCondition(lhs=lhs, rhs=rhs, satisfied=lhs <= rhs + 1e-12)


def consistency_bound(
    n_max: int, gamma: float, lam: float, N: int, bounds: KernelBounds
) -> float:
    """Closed-form W2 bound (A / (B sqrt(N))) (exp(gamma B n_max) - 1) between
    the particle-descent iterates and the exact space-discretized flow."""
    if n_max < 0 or N < 1 or not gamma > 0 or not lam > 0:
        raise ValueError("n_max >= 0, N >= 1, gamma > 0 and lam > 0 required")
    K, K1d, K2d = bounds.K, bounds.K1d, bounds.K2d
    root = math.sqrt(K * K1d)
    A = math.sqrt(2.0 * K * K1d * (1.0 + math.exp(8.0 * K / lam))) / (4.0 * root + K2d)
    B = (1.0 + lam) * (4.0 * root + math.sqrt(K2d)) / lam
    return A / (B * math.sqrt(N)) * math.expm1(gamma * B * n_max)
