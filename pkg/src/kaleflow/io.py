"""CSV and config file formats used by the command-line tools.

Point clouds: header ``x0,...,x{d-1}[,w]``, comma-separated, UTF-8, no index
column.  Traces: the fixed header ``step,kale,mmd2,witness_norm2,
mean_sq_velocity,solver_iters,beta,w2_to_reference`` with the last column left
empty when no reference was supplied.  Floats are printed with 17 significant
digits so that reruns are byte-identical.

Run configs are flat ``key = value`` documents; unknown keys are hard errors
so typos in experiment sweeps fail loudly.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flows import FlowTrace
from .metrics import ParticleCloud
from .scenarios import SCENARIOS
from .solver import SOLVER_ALIASES


class ConfigError(ValueError):
    """Invalid run configuration; carries a field-level message."""


class CloudCsvError(ValueError):
    """Malformed point-cloud CSV; names the file and line."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_cloud_csv(path: str | Path, cloud: ParticleCloud) -> None:
    header = [f"x{j}" for j in range(cloud.dim)]
    if cloud.weights is not None:
        header.append("w")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i in range(cloud.n):
            row = [_fmt(v) for v in cloud.points[i]]
            if cloud.weights is not None:
                row.append(_fmt(cloud.weights[i]))
            out.writerow(row)


def read_cloud_csv(path: str | Path) -> ParticleCloud:
    path = Path(path)
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise CloudCsvError(f"{path}: cannot open: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CloudCsvError(f"{path}, line 1: empty file") from None
        header = [h.strip() for h in header]
        has_w = header and header[-1] == "w"
        coord_names = header[:-1] if has_w else header
        if coord_names != [f"x{j}" for j in range(len(coord_names))] or not coord_names:
            raise CloudCsvError(f"{path}, line 1: expected header x0,...,x{{d-1}}[,w]")
        ncol = len(header)
        rows, weights = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise CloudCsvError(f"{path}, line {lineno}: expected {ncol} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise CloudCsvError(f"{path}, line {lineno}: {exc}") from None
            if has_w:
                rows.append(vals[:-1])
                weights.append(vals[-1])
            else:
                rows.append(vals)
        if not rows:
            raise CloudCsvError(f"{path}: no data rows")
    try:
        return ParticleCloud(np.array(rows), np.array(weights) if has_w else None)
    except ValueError as exc:
        raise CloudCsvError(f"{path}: {exc}") from None


TRACE_HEADER = "step,kale,mmd2,witness_norm2,mean_sq_velocity,solver_iters,beta,w2_to_reference"


def write_trace_csv(path: str | Path, trace: FlowTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in trace.records:
            w2 = "" if r.w2_to_reference is None else _fmt(r.w2_to_reference)
            fh.write(
                f"{r.step},{_fmt(r.kale)},{_fmt(r.mmd2)},{_fmt(r.witness_norm2)},"
                f"{_fmt(r.mean_sq_velocity)},{r.solver_iters},{_fmt(r.beta)},{w2}\n"
            )


def read_trace_columns(path: str | Path) -> dict[str, list[float | None]]:
    """Trace CSV as named columns; empty w2 cells become None."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {name: [] for name in header}
        for row in reader:
            for name, val in zip(header, row):
                cols[name].append(None if val == "" else float(val))
    return cols


@dataclass(frozen=True)
class RunConfig:
    """Validated flow-run configuration (see the config-file key list below)."""

    sigma: float
    lam: float
    steps: int
    output_dir: str
    scenario: str | None = None
    n: int | None = None
    mean_gap: float | None = None
    source_csv: str | None = None
    target_csv: str | None = None
    gamma: float | None = None  # None = auto rule min(0.1, lambda/10)
    beta: float = 0.0
    solver: str = "newton"
    tol: float = 1e-9
    seed: int = 0
    snapshot_every: int = 100
    reference: str = "none"
    reference_gamma: float = 0.001


_CONFIG_KEYS = {
    "scenario": str,
    "n": int,
    "mean_gap": float,
    "source_csv": str,
    "target_csv": str,
    "sigma": float,
    "lambda": float,
    "gamma": str,
    "steps": int,
    "beta": float,
    "solver": str,
    "tol": float,
    "seed": int,
    "output_dir": str,
    "snapshot_every": int,
    "reference": str,
    "reference_gamma": float,
}
_REQUIRED_KEYS = ("sigma", "lambda", "steps", "output_dir")


def parse_run_config(text: str, origin: str = "<config>") -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)", stripped)
        if not m:
            raise ConfigError(f"{origin}, line {lineno}: expected 'key = value'")
        key, value = m.group(1), m.group(2).strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{origin}, line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{origin}, line {lineno}: duplicate key {key!r}")
        raw[key] = value

    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"{origin}: missing required key {key!r}")

    vals: dict[str, object] = {}
    for key, value in raw.items():
        typ = _CONFIG_KEYS[key]
        if typ is str:
            vals[key] = value
        else:
            try:
                vals[key] = typ(value)
            except ValueError:
                raise ConfigError(
                    f"{origin}: key {key!r}: cannot parse {value!r} as {typ.__name__}"
                ) from None

    gamma_raw = vals.pop("gamma", "auto")
    if gamma_raw == "auto":
        gamma = None
    else:
        try:
            gamma = float(gamma_raw)
        except ValueError:
            raise ConfigError(f"{origin}: key 'gamma': expected a number or 'auto'") from None

    cfg = RunConfig(
        sigma=vals["sigma"],
        lam=vals.pop("lambda"),
        steps=vals["steps"],
        output_dir=vals["output_dir"],
        scenario=vals.get("scenario"),
        n=vals.get("n"),
        mean_gap=vals.get("mean_gap"),
        source_csv=vals.get("source_csv"),
        target_csv=vals.get("target_csv"),
        gamma=gamma,
        beta=vals.get("beta", 0.0),
        solver=vals.get("solver", "newton"),
        tol=vals.get("tol", 1e-9),
        seed=vals.get("seed", 0),
        snapshot_every=vals.get("snapshot_every", 100),
        reference=vals.get("reference", "none"),
        reference_gamma=vals.get("reference_gamma", 0.001),
    )
    validate_run_config(cfg, origin)
    return cfg


def validate_run_config(cfg: RunConfig, origin: str = "<config>") -> None:
    def bad(field_name, msg):
        raise ConfigError(f"{origin}: key {field_name!r}: {msg}")

    if not cfg.sigma > 0:
        bad("sigma", f"must be positive, got {cfg.sigma}")
    if not cfg.lam > 0:
        bad("lambda", f"must be positive, got {cfg.lam}")
    if cfg.gamma is not None and not cfg.gamma > 0:
        bad("gamma", f"must be positive, got {cfg.gamma}")
    if cfg.steps < 0:
        bad("steps", f"must be >= 0, got {cfg.steps}")
    if cfg.beta < 0:
        bad("beta", f"must be >= 0, got {cfg.beta}")
    if cfg.solver not in SOLVER_ALIASES:
        bad("solver", f"must be one of {sorted(SOLVER_ALIASES)}, got {cfg.solver!r}")
    if not cfg.tol > 0:
        bad("tol", f"must be positive, got {cfg.tol}")
    if cfg.snapshot_every < 1:
        bad("snapshot_every", f"must be >= 1, got {cfg.snapshot_every}")
    if cfg.reference not in ("none", "ula", "mmd"):
        bad("reference", f"must be none, ula or mmd, got {cfg.reference!r}")
    if not cfg.reference_gamma > 0:
        bad("reference_gamma", f"must be positive, got {cfg.reference_gamma}")

    from_files = cfg.source_csv is not None or cfg.target_csv is not None
    if cfg.scenario is not None and from_files:
        bad("scenario", "give either a scenario or source_csv/target_csv, not both")
    if cfg.scenario is None and not from_files:
        bad("scenario", "either a scenario or source_csv/target_csv is required")
    if from_files and (cfg.source_csv is None or cfg.target_csv is None):
        bad("source_csv", "source_csv and target_csv must be given together")
    if cfg.scenario is not None:
        if cfg.scenario not in SCENARIOS:
            bad("scenario", f"must be one of {SCENARIOS}, got {cfg.scenario!r}")
        if cfg.n is None or cfg.n < 1:
            bad("n", "a positive particle count is required with a scenario")
    if cfg.mean_gap is not None and cfg.scenario != "gaussian_pair":
        bad("mean_gap", "only valid with scenario = gaussian_pair")
    if cfg.reference == "ula" and cfg.scenario != "mog_4corners":
        bad("reference", "ula needs the target's log-density gradient; use scenario = mog_4corners")


def format_run_config(cfg: RunConfig) -> str:
    """Canonical key = value text; re-parsing yields an identical RunConfig."""
    lines = []
    if cfg.scenario is not None:
        lines.append(f"scenario = {cfg.scenario}")
        lines.append(f"n = {cfg.n}")
        if cfg.mean_gap is not None:
            lines.append(f"mean_gap = {_fmt(cfg.mean_gap)}")
    else:
        lines.append(f"source_csv = {cfg.source_csv}")
        lines.append(f"target_csv = {cfg.target_csv}")
    lines.append(f"sigma = {_fmt(cfg.sigma)}")
    lines.append(f"lambda = {_fmt(cfg.lam)}")
    lines.append("gamma = auto" if cfg.gamma is None else f"gamma = {_fmt(cfg.gamma)}")
    lines.append(f"steps = {cfg.steps}")
    lines.append(f"beta = {_fmt(cfg.beta)}")
    lines.append(f"solver = {cfg.solver}")
    lines.append(f"tol = {_fmt(cfg.tol)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"output_dir = {cfg.output_dir}")
    lines.append(f"snapshot_every = {cfg.snapshot_every}")
    lines.append(f"reference = {cfg.reference}")
    lines.append(f"reference_gamma = {_fmt(cfg.reference_gamma)}")
    return "\n".join(lines) + "\n"


def snapshot_steps(run_dir: str | Path) -> dict[int, Path]:
    """Map snapshot step -> particles_{step}.csv path found in a run directory."""
    out = {}
    for p in Path(run_dir).glob("particles_*.csv"):
        m = re.fullmatch(r"particles_(\d+)\.csv", p.name)
        if m:
            out[int(m.group(1))] = p
    return out
