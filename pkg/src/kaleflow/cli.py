"""Command-line entry point.

Subcommands: ``divergence`` (one-shot divergence between two CSV clouds),
``flow`` (run a configured particle flow, writing trace and snapshots),
``compare`` (per-step W2 between the snapshots of two completed runs) and
``scenario`` (dump generated clouds to CSV).

Exit codes: 0 success, 2 config error, 3 I/O error, 4 solver non-convergence
(divergence command only).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .flows import FlowConfig, run_kale_flow, run_mmd_flow, run_ula_flow
from .io import (
    CloudCsvError,
    ConfigError,
    RunConfig,
    _fmt,
    format_run_config,
    parse_run_config,
    read_cloud_csv,
    snapshot_steps,
    write_cloud_csv,
    write_trace_csv,
)
from .kernel import KernelSpec
from .metrics import ParticleCloud, mmd_squared, wasserstein2_exact
from .scenarios import gaussian_pair, mog_4corners, shape_transfer, three_rings
from .solver import (
    build_dual_problem,
    kale_value,
    solve_dual,
    witness_from_solution,
    witness_norm2,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4


def _generate(scenario: str, n: int, seed: int, mean_gap: float | None):
    """Returns (source, target, grad_log_target or None)."""
    if scenario == "three_rings":
        src, tgt = three_rings(n, seed)
        return src, tgt, None
    if scenario == "shape_transfer":
        src, tgt = shape_transfer(n, seed)
        return src, tgt, None
    if scenario == "mog_4corners":
        src, tgt, grad = mog_4corners(n, seed)
        return src, tgt, grad
    if scenario == "gaussian_pair":
        src, tgt = gaussian_pair(n, 1.0 if mean_gap is None else mean_gap, seed)
        return src, tgt, None
    raise ConfigError(f"unknown scenario {scenario!r}")


def cmd_divergence(args) -> int:
    try:
        source = read_cloud_csv(args.source)
        target = read_cloud_csv(args.target)
    except CloudCsvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        kernel = KernelSpec(args.sigma)
        prob = build_dual_problem(kernel, target, source, args.lam)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sol = solve_dual(prob, method=args.solver, tol=args.tol)
    w = witness_from_solution(prob, sol)
    print(f"kale={_fmt(kale_value(prob, sol))}")
    print(f"mmd2={_fmt(mmd_squared(target, source, kernel))}")
    print(f"witness_norm={_fmt(math.sqrt(witness_norm2(w, prob.grams)))}")
    print(f"solver_iters={sol.iterations}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_flow(args) -> int:
    cfg_path = Path(args.config)
    try:
        text = cfg_path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {cfg_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_run_config(text, origin=str(cfg_path))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    grad_log = None
    if cfg.scenario is not None:
        source, target, grad_log = _generate(cfg.scenario, cfg.n, cfg.seed, cfg.mean_gap)
    else:
        try:
            source = read_cloud_csv(cfg.source_csv)
            target = read_cloud_csv(cfg.target_csv)
        except CloudCsvError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        if source.dim != target.dim:
            print(
                f"error: dimension mismatch between {cfg.source_csv} (d={source.dim}) "
                f"and {cfg.target_csv} (d={target.dim})",
                file=sys.stderr,
            )
            return EXIT_CONFIG

    kernel = KernelSpec(cfg.sigma)
    flow_cfg = FlowConfig(
        lam=cfg.lam,
        gamma=cfg.gamma,
        steps=cfg.steps,
        beta=cfg.beta,
        solver=cfg.solver,
        tol=cfg.tol,
        seed=cfg.seed,
        snapshot_every=cfg.snapshot_every,
    )
    reference = None
    if cfg.reference == "mmd":
        reference = run_mmd_flow(source, target, kernel, cfg.reference_gamma, cfg.steps)
    elif cfg.reference == "ula":
        reference = run_ula_flow(source, grad_log, cfg.reference_gamma, cfg.steps, cfg.seed + 1)

    result = run_kale_flow(source, target, kernel, flow_cfg, reference=reference)

    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace_csv(out_dir / "trace.csv", result.trace)
        for step, pts in sorted(result.snapshots.items()):
            write_cloud_csv(out_dir / f"particles_{step}.csv", ParticleCloud(pts))
        write_cloud_csv(out_dir / "target.csv", target)
        (out_dir / "config_echo.txt").write_text(format_run_config(cfg), encoding="utf-8")
    except OSError as exc:
        print(f"error: {out_dir}: {exc}", file=sys.stderr)
        return EXIT_IO

    bad = [r.step for r in result.trace.records if not r.solver_converged]
    if bad:
        print(f"warning: solver did not converge at steps {bad[:10]}"
              f"{' ...' if len(bad) > 10 else ''}", file=sys.stderr)
    print(f"wrote {out_dir / 'trace.csv'} ({len(result.trace.records)} records, "
          f"{len(result.snapshots)} snapshots)")
    return EXIT_OK


def cmd_compare(args) -> int:
    snaps_a = snapshot_steps(args.run_a)
    snaps_b = snapshot_steps(args.run_b)
    if not snaps_a or not snaps_b:
        missing = args.run_a if not snaps_a else args.run_b
        print(f"error: no particles_*.csv snapshots in {missing}", file=sys.stderr)
        return EXIT_IO
    if set(snaps_a) != set(snaps_b):
        only_a = sorted(set(snaps_a) - set(snaps_b))
        only_b = sorted(set(snaps_b) - set(snaps_a))
        print(
            f"error: snapshot schedules differ (only in {args.run_a}: {only_a[:5]}, "
            f"only in {args.run_b}: {only_b[:5]})",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    rows = []
    try:
        for step in sorted(snaps_a):
            a = read_cloud_csv(snaps_a[step])
            b = read_cloud_csv(snaps_b[step])
            rows.append((step, wasserstein2_exact(a, b)))
    except (CloudCsvError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("step,w2\n")
            for step, val in rows:
                fh.write(f"{step},{_fmt(val)}\n")
    except OSError as exc:
        print(f"error: {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_scenario(args) -> int:
    try:
        source, target, _ = _generate(args.name, args.n, args.seed, args.mean_gap)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_cloud_csv(args.out_source, source)
        write_cloud_csv(args.out_target, target)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out_source} and {args.out_target} ({args.n} points each)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kaleflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("divergence", help="divergence between two point-cloud CSVs")
    p.add_argument("source", help="source cloud CSV (P side)")
    p.add_argument("target", help="target cloud CSV (Q side)")
    p.add_argument("--sigma", type=float, required=True, help="kernel bandwidth")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="regularization")
    p.add_argument("--solver", default="newton", choices=["newton", "cd", "gd"])
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("flow", help="run a particle flow from a config file")
    p.add_argument("config", help="flat key = value config file")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("compare", help="per-step W2 between two completed runs")
    p.add_argument("run_a", help="first run output directory")
    p.add_argument("run_b", help="second run output directory")
    p.add_argument("--out", required=True, help="output CSV path (step,w2)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("scenario", help="dump generated scenario clouds to CSV")
    p.add_argument("name", choices=["three_rings", "shape_transfer", "mog_4corners", "gaussian_pair"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-gap", dest="mean_gap", type=float, default=None,
                   help="gaussian_pair separation")
    p.add_argument("--out-source", required=True)
    p.add_argument("--out-target", required=True)
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
