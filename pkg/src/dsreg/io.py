"""File formats: regression problems, fit results, matrices.

Problem input is either a CSV whose first column is y and remaining
columns are X, or a raw float64 little-endian binary holding y followed
by X in column-major order, described by a JSON sidecar
``<file>.json`` with fields {n, p, m, d} (optional ``sigma``).

Index sets and group indices are 0-based in every external file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError
from .groups import GroupLayout
from .solver import FitResult, RegressionProblem


def load_matrix(path) -> np.ndarray:
    """Plain matrix from .npy or CSV."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=","))
    except ValueError as exc:
        raise ParseError(f"cannot parse matrix file {path}: {exc}") from None


def save_problem_csv(path, problem: RegressionProblem) -> None:
    data = np.column_stack([problem.y, problem.X])
    np.savetxt(path, data, delimiter=",", fmt="%.17g")


def load_problem_csv(path, layout: GroupLayout, sigma=None) -> RegressionProblem:
    try:
        data = np.atleast_2d(np.loadtxt(path, delimiter=","))
    except ValueError as exc:
        raise ParseError(f"cannot parse problem file {path}: {exc}") from None
    if data.shape[1] != layout.p + 1:
        raise DimensionMismatch(
            f"problem file has {data.shape[1]} columns, expected 1 + p = {layout.p + 1}"
        )
    return RegressionProblem(y=data[:, 0], X=data[:, 1:], layout=layout, sigma=sigma)


def save_problem_binary(path, problem: RegressionProblem) -> None:
    """y then X column-major, float64 LE, with a JSON sidecar."""
    path = Path(path)
    n, p = problem.X.shape
    buf = np.concatenate([problem.y, problem.X.flatten(order="F")]).astype("<f8")
    buf.tofile(path)
    sidecar = {"n": n, "p": p, "m": problem.layout.m, "d": problem.layout.d}
    if problem.sigma is not None:
        sidecar["sigma"] = problem.sigma
    Path(str(path) + ".json").write_text(json.dumps(sidecar))


def load_problem_binary(path) -> RegressionProblem:
    path = Path(path)
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise ParseError(f"missing JSON sidecar {sidecar_path}")
    meta = json.loads(sidecar_path.read_text())
    n, p = int(meta["n"]), int(meta["p"])
    layout = GroupLayout(m=int(meta["m"]), d=int(meta["d"]))
    buf = np.fromfile(path, dtype="<f8")
    if buf.size != n + n * p:
        raise ParseError(f"binary file holds {buf.size} floats, expected {n + n * p}")
    y = buf[:n]
    X = buf[n:].reshape((n, p), order="F")
    return RegressionProblem(y=y, X=X, layout=layout, sigma=meta.get("sigma"))


def load_problem(path, layout: GroupLayout | None = None, sigma=None) -> RegressionProblem:
    path = Path(path)
    if path.suffix == ".bin":
        return load_problem_binary(path)
    if layout is None:
        raise DimensionMismatch("CSV problems need an explicit layout (m, d)")
    return load_problem_csv(path, layout, sigma=sigma)


def fit_result_to_json(result: FitResult) -> str:
    return json.dumps(
        {
            "beta_hat": [float(v) for v in result.beta_hat],
            "objective_trace": [float(v) for v in result.objective_trace],
            "iterations": result.iterations,
            "converged": bool(result.converged),
            "kkt_residual": float(result.kkt_residual),
            "elapsed": float(result.elapsed),
        }
    )
