"""End-to-end rate experiments: simulate, fit, measure, summarize.

A run sweeps sample sizes, simulating y = X beta* + sigma xi per
replicate with a fresh design and a uniform (s, s0)-sparse signal whose
nonzero entries are +-1/sqrt(s0) (unit group norms; the simulation
signal convention is fixed here since nothing upstream pins it).
Artifacts: results.csv (full 17-digit precision, deterministic bytes
under a fixed config), summary.json, and whitespace-separated
plotdata/*.dat files.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from .conditions import check_sgnorm
from .errors import ConfigInvalid, MissingArtifact, ParseError
from .groups import GroupLayout, SparsityBudget
from .packing import gap_report, lower_bound_value
from .randomdesign import DesignEnsemble, generate
from .solver import (
    RegressionProblem,
    SolverConfig,
    fit,
    rate_quantity,
    theoretical_tuning,
)

CONFIG_VERSION = 1

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version", "n_grid", "m", "d", "s", "s0", "sigma", "estimator", "replicates", "seed"],
    "properties": {
        "version": {"type": "integer", "minimum": 1, "maximum": CONFIG_VERSION},
        "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "m": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "s": {"type": "integer", "minimum": 1},
        "s0": {"type": "integer", "minimum": 1},
        "sigma": {"type": "number", "minimum": 0},
        "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "delta0": {"type": ["number", "null"], "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "estimator": {"enum": ["sglasso", "sgslope"]},
        "design": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["gaussian", "rademacher", "subgaussian_cov", "weak_moment"]},
                "alpha": {"type": ["number", "null"]},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
        "solver_tol": {"type": "number", "exclusiveMinimum": 0},
        "solver_max_iters": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
    },
}


@dataclass
class ExperimentConfig:
    n_grid: list
    m: int
    d: int
    s: int
    s0: int
    sigma: float
    estimator: str = "sglasso"
    gamma: float = 0.5
    delta0: float | None = None
    design: dict = field(default_factory=lambda: {"kind": "gaussian", "scale": 1.0})
    replicates: int = 10
    seed: int = 0
    jobs: int = 1
    solver_tol: float = 1e-6
    solver_max_iters: int = 20000
    output_dir: str = "experiment-out"
    version: int = CONFIG_VERSION

    def validate(self) -> "ExperimentConfig":
        payload = self.to_dict()
        if jsonschema is not None:
            try:
                jsonschema.validate(payload, CONFIG_SCHEMA)
            except jsonschema.ValidationError as exc:
                raise ConfigInvalid(str(exc)) from None
        layout = GroupLayout(m=self.m, d=self.d)
        try:
            SparsityBudget(s=self.s, s0=self.s0).validate(layout)
        except Exception as exc:
            raise ConfigInvalid(str(exc)) from None
        if self.estimator not in ("sglasso", "sgslope"):
            raise ConfigInvalid(f"unknown estimator {self.estimator!r}")
        kind = self.design.get("kind", "gaussian")
        if kind == "weak_moment" and not self.design.get("alpha"):
            raise ConfigInvalid("weak_moment design needs alpha")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigInvalid("config must be a JSON object")
        if int(obj.get("version", 0)) > CONFIG_VERSION:
            raise ConfigInvalid(f"config version {obj.get('version')} is newer than {CONFIG_VERSION}")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ConfigInvalid(f"unknown config fields: {sorted(extra)}")
        try:
            config = cls(**obj)
        except TypeError as exc:
            raise ConfigInvalid(f"incomplete config: {exc}") from None
        return config.validate()


def make_signal(layout: GroupLayout, budget: SparsityBudget, rng) -> np.ndarray:
    """Uniform (s, s0)-support, Rademacher entries scaled to unit group norms."""
    beta = np.zeros(layout.p)
    groups = rng.choice(layout.m, size=budget.s, replace=False)
    for g in groups:
        idx = g * layout.d + rng.choice(layout.d, size=budget.s0, replace=False)
        beta[idx] = rng.choice([-1.0, 1.0], size=budget.s0) / math.sqrt(budget.s0)
    return beta


def _run_cell(args) -> dict:
    config, n, rep, child = args
    layout = GroupLayout(m=config.m, d=config.d)
    budget = SparsityBudget(s=config.s, s0=config.s0)
    rng = np.random.default_rng(child)
    design_seed, noise_seed, signal_seed = rng.spawn(3)
    ens = DesignEnsemble(
        kind=config.design.get("kind", "gaussian"),
        n=n,
        layout=layout,
        seed=design_seed,
        scale=config.design.get("scale", 1.0),
        alpha=config.design.get("alpha"),
    )
    X = generate(ens)
    beta_star = make_signal(layout, budget, np.random.default_rng(signal_seed))
    xi = np.random.default_rng(noise_seed).standard_normal(n)
    y = X @ beta_star + config.sigma * xi
    problem = RegressionProblem(y=y, X=X, layout=layout, sigma=config.sigma)
    plan = theoretical_tuning(problem, budget, gamma=config.gamma, delta0=config.delta0)
    penalty = plan.sglasso_penalty(layout) if config.estimator == "sglasso" else plan.sgslope_penalty()
    result = fit(
        problem,
        penalty,
        SolverConfig(tol=config.solver_tol, max_iters=config.solver_max_iters),
    )
    err = float(np.linalg.norm(result.beta_hat - beta_star))
    theta_max = check_sgnorm(X, layout, budget.s0, mode="exact").value
    return {
        "n": n,
        "replicate": rep,
        "error": err,
        "sq_error": err**2,
        "kkt_residual": result.kkt_residual,
        "iterations": result.iterations,
        "converged": int(result.converged),
        "theta_max": theta_max,
    }


RESULT_COLUMNS = ["n", "replicate", "error", "sq_error", "kkt_residual", "iterations", "converged", "theta_max"]


def run_experiment(config: ExperimentConfig, output_dir=None) -> Path:
    """Run the sweep and write results.csv, summary.json, plotdata/."""
    config.validate()
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plotdata").mkdir(exist_ok=True)

    n_grid = [int(n) for n in config.n_grid]
    cells = []
    streams = np.random.SeedSequence(config.seed).spawn(len(n_grid) * config.replicates)
    for i, n in enumerate(n_grid):
        for rep in range(config.replicates):
            cells.append((config, n, rep, streams[i * config.replicates + rep]))

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["n"], r["replicate"]))

    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in RESULT_COLUMNS))
    (out / "results.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = summarize(config, rows)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    (out / "config.json").write_text(config.to_json())

    med = summary["per_n"]
    with open(out / "plotdata" / "error_vs_n.dat", "w") as fh:
        for row in med:
            fh.write(f"{row['n']} {_fmt(row['median_error'])}\n")
    with open(out / "plotdata" / "ratio_vs_n.dat", "w") as fh:
        for row in med:
            if row["lb_ratio"] is not None:
                fh.write(f"{row['n']} {_fmt(row['lb_ratio'])}\n")
    return out


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def summarize(config: ExperimentConfig, rows: list) -> dict:
    rq = rate_quantity(config.m, config.d, config.s, config.s0)
    per_n = []
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        med = float(np.median([r["error"] for r in sub]))
        med_sq = float(np.median([r["sq_error"] for r in sub]))
        theta = float(np.median([r["theta_max"] for r in sub]))
        fitted_c = med * math.sqrt(n) / math.sqrt(rq)
        if config.sigma > 0:
            lb = lower_bound_value(n, config.sigma, theta, config.m, config.d, config.s, config.s0)
            ratio = med_sq / lb
        else:
            ratio = None
        per_n.append(
            {
                "n": n,
                "median_error": med,
                "median_sq_error": med_sq,
                "fitted_C": fitted_c,
                "theta_max_median": theta,
                "lb_ratio": ratio,
                "converged_frac": float(np.mean([r["converged"] for r in sub])),
            }
        )
    slope = None
    if len(per_n) >= 2:
        ns = np.array([row["n"] for row in per_n], dtype=float)
        errs = np.array([row["median_error"] for row in per_n])
        if np.all(errs > 0):
            slope = float(np.polyfit(np.log(ns), np.log(errs), 1)[0])
    gap = None
    if config.sigma > 0:
        gr = gap_report(
            {row["n"]: row["median_sq_error"] for row in per_n},
            config.sigma,
            {row["n"]: row["theta_max_median"] for row in per_n},
            config.m,
            config.d,
            config.s,
            config.s0,
        )
        gap = {"ratios": {str(k): v for k, v in gr.ratios.items()}, "log_slope": gr.log_slope}
    return {
        "config": config.to_dict(),
        "rate_quantity": rq,
        "per_n": per_n,
        "loglog_slope": slope,
        "fitted_C": float(np.median([row["fitted_C"] for row in per_n])),
        "gap": gap,
    }


def emit_report(artifact_dir) -> tuple[str, bool]:
    """Human-readable summary with pass/fail gates.

    Gates (only when the sweep has >= 3 sample sizes): log-log slope of
    the median error within -0.5 +- 0.1, and every lower-bound ratio
    >= 1.  Returns (text, all_gates_ok).
    """
    out = Path(artifact_dir)
    summary_path = out / "summary.json"
    results_path = out / "results.csv"
    if not summary_path.exists() or not results_path.exists():
        raise MissingArtifact(f"missing summary.json or results.csv under {out}")
    summary = json.loads(summary_path.read_text())
    _validate_results_csv(results_path)

    lines = []
    cfg = summary["config"]
    lines.append(
        f"experiment: estimator={cfg['estimator']} (m,d,s,s0)=({cfg['m']},{cfg['d']},{cfg['s']},{cfg['s0']})"
        f" sigma={cfg['sigma']} reps={cfg['replicates']}"
    )
    lines.append(f"rate quantity s*s0*log(2ed/s0) + 2s*log(4em/s) = {summary['rate_quantity']:.4f}")
    for row in summary["per_n"]:
        ratio = "-" if row["lb_ratio"] is None else f"{row['lb_ratio']:.3g}"
        lines.append(
            f"  n={row['n']:>6}  median error={row['median_error']:.6g}  fitted C={row['fitted_C']:.4g}"
            f"  lb ratio={ratio}  converged={row['converged_frac']:.2f}"
        )
    ok = True
    if summary["loglog_slope"] is not None:
        lines.append(f"log-log slope of median error vs n: {summary['loglog_slope']:.4f}")
    lines.append(f"fitted rate constant C (median over n): {summary['fitted_C']:.5g}")
    if len(summary["per_n"]) >= 3 and summary["loglog_slope"] is not None:
        slope_ok = abs(summary["loglog_slope"] + 0.5) <= 0.1
        ok &= slope_ok
        lines.append(f"gate slope in [-0.6, -0.4]: {'PASS' if slope_ok else 'FAIL'}")
        if summary["gap"] is not None:
            ratios_ok = all(v >= 1.0 for v in summary["gap"]["ratios"].values())
            ok &= ratios_ok
            lines.append(f"gate lower-bound ratios >= 1: {'PASS' if ratios_ok else 'FAIL'}")
            if summary["gap"]["log_slope"] is not None:
                lines.append(f"gap ratio log-slope: {summary['gap']['log_slope']:.4f}")
    return "\n".join(lines), bool(ok)


def _validate_results_csv(path: Path) -> None:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != RESULT_COLUMNS:
            raise ParseError(f"unexpected results.csv header {header}", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(RESULT_COLUMNS):
                raise ParseError("wrong column count", line=lineno)
            try:
                [float(v) for v in parts]
            except ValueError:
                raise ParseError("non-numeric value", line=lineno) from None
