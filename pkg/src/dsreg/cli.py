"""Command-line interface.

Subcommands: fit, check-conditions, simulate-stochastic, packing,
random-design, experiment, report.  Every subcommand honors --seed for
bitwise reproducibility; machine outputs carry full (17 significant
digit) precision, human summaries round.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance-gate failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .conditions import ConeSearchConfig, ConeSpec, check_sgnorm, estimate_cone_eigenvalue
from .errors import (
    CapExceeded,
    ConditionViolated,
    ConfigInvalid,
    DsregError,
    DimensionMismatch,
    MissingArtifact,
    NoConvergence,
    ParseError,
)
from .experiment import ExperimentConfig, emit_report, run_experiment
from .groups import GroupLayout, SparsityBudget
from .packing import build_packing, lower_bound_value, packing_bound, sign_packing
from .randomdesign import orthonormal_design, phase_diagram, rate_quantity_sample
from .solver import SolverConfig, fit, theoretical_tuning
from .stochastic import gauss_bound_suite, tail_suite
from .penalties import make_weights

CONFIG_ERRORS = (ConfigInvalid, DimensionMismatch, ParseError, MissingArtifact, ValueError)
NUMERIC_ERRORS = (NoConvergence, ConditionViolated, CapExceeded)


def _layout_from_args(args) -> GroupLayout:
    if getattr(args, "layout", None):
        m, d = (int(v) for v in args.layout.split(","))
        return GroupLayout(m=m, d=d)
    return GroupLayout(m=args.m, d=args.d)


def _write_or_print(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        print(text)


def cmd_fit(args) -> int:
    layout = _layout_from_args(args)
    problem = dio.load_problem(args.problem, layout=layout, sigma=args.sigma)
    budget = SparsityBudget(s=args.s, s0=args.s0).validate(layout)
    config = SolverConfig(tol=args.tol, max_iters=args.max_iters, seed=args.seed)
    if args.lam is not None:
        from .penalties import SparseGroupPenalty

        penalty = SparseGroupPenalty(lam=args.lam, lam_g=args.lam_g or 0.0, layout=layout)
    else:
        plan = theoretical_tuning(problem, budget, gamma=args.gamma)
        penalty = plan.sglasso_penalty(layout) if args.estimator == "sglasso" else plan.sgslope_penalty()
    result = fit(problem, penalty, config)
    _write_or_print(dio.fit_result_to_json(result), args.output)
    return 0 if result.converged else 2


def cmd_check_conditions(args) -> int:
    layout = _layout_from_args(args)
    X = dio.load_matrix(args.matrix)
    budget = SparsityBudget(s=args.s, s0=args.s0).validate(layout)
    if args.condition == "sgnorm":
        report = check_sgnorm(X, layout, args.s0, mode=args.mode, seed=args.seed)
    else:
        cone = {"ssgre": "SSGRE", "wsgre": "WSGRE", "dsre": "DS", "sre": "SRE", "sgre": "SGRE"}[
            args.condition
        ]
        spec = ConeSpec(cone=cone, budget=budget, c0=args.c0, layout=layout)
        report = estimate_cone_eigenvalue(X, spec, ConeSearchConfig(seed=args.seed))
    _write_or_print(report.to_json(), args.output)
    return 0


def cmd_simulate_stochastic(args) -> int:
    layout = _layout_from_args(args)
    budget = SparsityBudget(s=args.s, s0=args.s0).validate(layout)
    if args.matrix:
        X = dio.load_matrix(args.matrix)
    else:
        X = orthonormal_design(args.n, layout, seed=args.seed)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    tails = tail_suite(X, layout, budget, sigma=args.sigma, trials=args.trials, seed=args.seed)
    weights = make_weights(layout, budget.s0, args.sigma)
    gauss = gauss_bound_suite(
        X, weights, budget, draws=args.draws, n_directions=args.n_directions, seed=args.seed + 1
    )

    rows = ["trial,psi1,psi2,omega,sup_value"]
    for t in range(gauss.draws):
        rows.append(
            f"{t},{gauss.psi1[t]:.17g},{gauss.psi2[t]:.17g},{int(gauss.omega_flags[t])},"
            f"{gauss.sup_values[t]:.17g}"
        )
    (out / "trials.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    summary = {
        "tails": {
            fam: {
                "threshold": r.threshold,
                "trials": r.trials,
                "exceed_count": r.exceed_count,
                "empirical": r.empirical,
                "ci": [r.ci_low, r.ci_high],
                "target": r.target,
                "tight_threshold": r.tight_threshold,
                "tight_exceed_count": r.tight_exceed_count,
            }
            for fam, r in tails.items()
        },
        "omega_rate": gauss.omega_rate,
        "theorem1_violations": gauss.theorem1_violations,
        "sup_max_on_omega": float(np.max(gauss.sup_values[gauss.omega_flags]))
        if gauss.omega_count
        else None,
        "theorem2": {str(k): v for k, v in gauss.theorem2.items()},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=list))
    print(f"wrote {out}/trials.csv and {out}/summary.json")
    return 0


def cmd_packing(args) -> int:
    layout = _layout_from_args(args)
    budget = SparsityBudget(s=args.s, s0=args.s0).validate(layout)
    packing = build_packing(layout, budget, seed=args.seed, target=args.target)
    if args.matrix:
        X = dio.load_matrix(args.matrix)
        packing = sign_packing(packing, X)
    bound = packing_bound(layout.m, layout.d, budget.s, budget.s0)
    sys.stderr.write(
        f"cardinality {packing.cardinality} (bound {bound:.2f}), min Hamming {packing.min_hamming}\n"
    )
    _write_or_print(packing.to_json(), args.output)
    return 0


def cmd_random_design(args) -> int:
    layout = _layout_from_args(args)
    budget = SparsityBudget(s=args.s, s0=args.s0).validate(layout)
    n_grid = [int(v) for v in args.n_grid.split(",")]
    curve = phase_diagram(
        args.ensemble,
        layout,
        budget,
        n_grid,
        args.reps,
        condition=args.condition,
        alpha=args.alpha,
        scale=args.scale,
        success_threshold=args.threshold,
        seed=args.seed,
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["n,reps,successes,probability,ci_low,ci_high,mean_value"]
    for pt in curve.points:
        rows.append(
            f"{pt.n},{pt.reps},{pt.successes},{pt.probability:.17g},"
            f"{pt.ci_low:.17g},{pt.ci_high:.17g},{pt.mean_value:.17g}"
        )
    (out / f"phase_{args.condition}_{args.ensemble}.csv").write_text("\n".join(rows) + "\n")
    summary = {
        "condition": args.condition,
        "ensemble": args.ensemble,
        "rate_quantity": rate_quantity_sample(layout.m, layout.d, budget.s, budget.s0),
        "monotone_within_ci": curve.monotone_within_ci(),
        "points": [pt.__dict__ for pt in curve.points],
    }
    (out / f"phase_{args.condition}_{args.ensemble}.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True)
    )
    print(f"wrote phase table under {out}")
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig.from_json(Path(args.config).read_text())
    out = run_experiment(config, output_dir=args.output_dir)
    print(f"artifacts in {out}")
    return 0


def cmd_report(args) -> int:
    text, ok = emit_report(args.dir)
    print(text)
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_layout(p):
        p.add_argument("--layout", help="m,d (alternative to --m/--d)")
        p.add_argument("--m", type=int)
        p.add_argument("--d", type=int)

    p = sub.add_parser("fit", help="fit sparse group Lasso or Slope to a problem file")
    p.add_argument("--problem", required=True)
    add_layout(p)
    p.add_argument("--estimator", choices=["sglasso", "sgslope"], default="sglasso")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--lam", type=float, help="manual l1 level (skips theoretical tuning)")
    p.add_argument("--lam-g", type=float, dest="lam_g")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=20000, dest="max_iters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("check-conditions", help="certify or estimate design conditions")
    p.add_argument("--matrix", required=True)
    add_layout(p)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--condition", choices=["sgnorm", "ssgre", "wsgre", "dsre", "sre", "sgre"], default="sgnorm")
    p.add_argument("--mode", choices=["exact", "sampled", "frobenius_bound"], default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_check_conditions)

    p = sub.add_parser("simulate-stochastic", help="tail bounds and Gaussian-process suites")
    add_layout(p)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--matrix", help="design file; default is a seeded orthonormal design")
    p.add_argument("--n", type=int, default=64, help="rows of the default orthonormal design")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--n-directions", type=int, default=1000, dest="n_directions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default="stochastic-out", dest="output_dir")
    p.set_defaults(func=cmd_simulate_stochastic)

    p = sub.add_parser("packing", help="build (and optionally sign) a double-sparse packing")
    add_layout(p)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=int)
    p.add_argument("--matrix", help="design file for the signed variant")
    p.add_argument("--output")
    p.set_defaults(func=cmd_packing)

    p = sub.add_parser("random-design", help="phase diagrams for design conditions")
    add_layout(p)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--ensemble", choices=["gaussian", "rademacher", "weak_moment"], default="gaussian")
    p.add_argument("--alpha", type=float)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--condition", choices=["sgnorm", "ssgre", "wsgre", "dsre"], default="sgnorm")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--n-grid", required=True, dest="n_grid", help="comma-separated sample sizes")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default="phase-out", dest="output_dir")
    p.set_defaults(func=cmd_random_design)

    p = sub.add_parser("experiment", help="run a rate-reproduction sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="summarize an experiment artifact directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except DsregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
