"""KALE divergence (regularized KL Fenchel dual over a Gaussian RKHS) between
weighted point clouds, its Wasserstein particle gradient flow, and MMD-flow /
Langevin baselines."""

from .flows import (
    FlowConfig,
    FlowRecord,
    FlowResult,
    FlowTrace,
    consistency_bound,
    default_step_size,
    kale_descent_step,
    mmd_descent_step,
    noise_condition_diagnostic,
    run_kale_flow,
    run_mmd_flow,
    run_ula_flow,
    ula_step,
)
from .kernel import KernelBounds, KernelSpec, gram, kernel_bounds, kernel_grad
from .metrics import ParticleCloud, discrete_kl, mmd_squared, wasserstein2_exact
from .scenarios import gaussian_pair, mog_4corners, shape_transfer, three_rings
from .solver import (
    DualProblem,
    DualSolution,
    GramBundle,
    WitnessFunction,
    build_dual_problem,
    compute_grams,
    dual_gradient,
    dual_hessian,
    dual_objective,
    kale_divergence,
    kale_value,
    solve_dual,
    witness_eval,
    witness_from_solution,
    witness_grad,
    witness_grad_batch,
    witness_norm2,
)

__version__ = "0.1.0"

__all__ = [
    "KernelSpec", "KernelBounds", "gram", "kernel_grad", "kernel_bounds",
    "ParticleCloud", "mmd_squared", "wasserstein2_exact", "discrete_kl",
    "GramBundle", "DualProblem", "DualSolution", "WitnessFunction",
    "compute_grams", "build_dual_problem", "dual_objective", "dual_gradient",
    "dual_hessian", "solve_dual", "witness_from_solution", "witness_eval",
    "witness_grad", "witness_grad_batch", "witness_norm2", "kale_value",
    "kale_divergence",
    "FlowConfig", "FlowRecord", "FlowTrace", "FlowResult", "default_step_size",
    "kale_descent_step", "run_kale_flow", "mmd_descent_step", "run_mmd_flow",
    "ula_step", "run_ula_flow", "noise_condition_diagnostic", "consistency_bound",
    "three_rings", "shape_transfer", "mog_4corners", "gaussian_pair",
    "__version__",
]
