"""Certify or estimate design-matrix conditions.

* sparse group normalization: theta_max = (1/sqrt n) sup ||X_S||_op over
  within-group subsets of size s0 (exact, sampled, or Frobenius bound);
* restricted-eigenvalue constants theta = min ||X delta||_n / ||delta||_2
  over the SSGRE / WSGRE / SRE / SGRE norm cones (upper-bounded by
  projected minimization plus Monte Carlo) and over exact double-sparse
  supports (enumerated exactly at desk scale);
* cone membership and the inclusion facts between the cones.

Cone minimization over a norm cone intersected with the sphere is
nonconvex; the estimator reports the best of many restarts and is
documented as an upper bound on theta.  Exact values come only from the
support-enumeration path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from .errors import CapExceeded, DimensionMismatch
from .groups import GroupLayout, SparsityBudget, enumerate_family, family_count
from .penalties import (
    WeightSequences,
    make_weights,
    norm_combined_star,
    norm_l1,
    norm_l12,
)
from . import proxops

SGNORM_CAP = 10**5
DSRE_CAP = 10**5


@dataclass
class ConditionReport:
    condition: str  # SGNorm | SSGRE | WSGRE | SRE | SGRE | DSRE
    value: float
    method: str  # ExactEnumeration | MonteCarlo | ProjectedMinimization | FrobeniusBound
    examined: int
    note: str = ""
    witness: Optional[np.ndarray] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "condition": self.condition,
                "value": self.value,
                "method": self.method,
                "examined": self.examined,
                "note": self.note,
                "witness": None if self.witness is None else self.witness.tolist(),
            }
        )


@dataclass(frozen=True)
class ConeSpec:
    """A restricted-eigenvalue cone with its opening constant c0."""

    cone: str  # SSGRE | WSGRE | SRE | SGRE | DS
    budget: SparsityBudget
    c0: float
    layout: GroupLayout
    weights: Optional[WeightSequences] = None  # WSGRE only

    def __post_init__(self):
        if self.cone not in ("SSGRE", "WSGRE", "SRE", "SGRE", "DS"):
            raise DimensionMismatch(f"unknown cone {self.cone!r}")
        if self.c0 <= 0:
            raise DimensionMismatch("c0 must be > 0")
        self.budget.validate(self.layout)
        if self.cone == "WSGRE" and self.weights is None:
            object.__setattr__(self, "weights", make_weights(self.layout, self.budget.s0, 1.0))


def cone_membership(delta, spec: ConeSpec, rtol: float = 1e-12) -> bool:
    """Evaluate the cone's defining inequality; 0 is always a member."""
    delta = np.asarray(delta, dtype=float)
    l2 = float(np.linalg.norm(delta))
    if l2 == 0.0:
        return True
    s, s0 = spec.budget.s, spec.budget.s0
    if spec.cone == "DS":
        norms = spec.layout.group_norms(delta)
        return int(np.count_nonzero(norms)) <= s and int(np.count_nonzero(delta)) <= s * s0
    lhs, rhs = _cone_sides(delta, spec, l2)
    return lhs <= rhs * (1.0 + rtol)


def _cone_sides(delta, spec: ConeSpec, l2: float) -> tuple[float, float]:
    s, s0 = spec.budget.s, spec.budget.s0
    if spec.cone == "SSGRE":
        lhs = norm_l1(delta) + math.sqrt(s0) * norm_l12(delta, spec.layout)
        rhs = (2.0 + spec.c0) * math.sqrt(s * s0) * l2
    elif spec.cone == "WSGRE":
        lhs = norm_combined_star(delta, spec.weights)
        rhs = (2.0 + spec.c0) * spec.weights.head_norm(s) * l2
    elif spec.cone == "SRE":
        lhs = norm_l1(delta)
        rhs = (1.0 + spec.c0) * math.sqrt(s * s0) * l2
    elif spec.cone == "SGRE":
        lhs = norm_l12(delta, spec.layout)
        rhs = (1.0 + spec.c0) * math.sqrt(s) * l2
    else:
        raise DimensionMismatch(f"no inequality form for cone {spec.cone!r}")
    return lhs, rhs


# ---------------------------------------------------------------------------
# sparse group normalization


def _within_group_subsets(layout: GroupLayout, s0: int):
    for j in range(layout.m):
        base = j * layout.d
        for sub in combinations(range(layout.d), s0):
            yield base + np.asarray(sub)


def check_sgnorm(
    X: np.ndarray,
    layout: GroupLayout,
    s0: int,
    mode: str = "exact",
    cap: int = SGNORM_CAP,
    samples: int = 2000,
    seed: int = 0,
) -> ConditionReport:
    """theta_max = (1/sqrt n) sup over within-group s0-subsets of ||X_S||_op.

    ``exact`` enumerates all m * C(d, s0) subsets (top eigenvalue of each
    s0 x s0 Gram block), ``sampled`` lower-bounds the sup from random
    subsets, ``frobenius_bound`` upper-bounds it by the l2 norm of the
    top-s0 column norms per group.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if X.shape[1] != layout.p:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, layout.p = {layout.p}")
    SparsityBudget(s=1, s0=s0).validate(layout)

    if mode == "frobenius_bound":
        col_sq = np.sum(X**2, axis=0) / n
        per_group = col_sq.reshape(layout.m, layout.d)
        top = -np.sort(-per_group, axis=1)[:, :s0]
        value = float(np.sqrt(np.max(np.sum(top, axis=1))))
        return ConditionReport(
            condition="SGNorm",
            value=value,
            method="FrobeniusBound",
            examined=layout.m,
            note="upper bound; not attained, no witness",
        )

    if mode == "exact":
        count = layout.m * comb(layout.d, s0)
        if count > cap:
            raise CapExceeded(count, cap, what="SGNorm subsets")
        subsets = np.array(list(_within_group_subsets(layout, s0)))
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        groups = rng.integers(0, layout.m, size=samples)
        subs = np.array([np.sort(rng.choice(layout.d, size=s0, replace=False)) for _ in range(samples)])
        subsets = groups[:, None] * layout.d + subs
    else:
        raise DimensionMismatch(f"unknown mode {mode!r}")

    G = X.T @ X / n
    blocks = G[subsets[:, :, None], subsets[:, None, :]]
    eigvals, eigvecs = np.linalg.eigh(blocks)
    top = eigvals[:, -1]
    k = int(np.argmax(top))
    value = float(np.sqrt(max(top[k], 0.0)))
    witness = np.zeros(layout.p)
    witness[subsets[k]] = eigvecs[k][:, -1]
    return ConditionReport(
        condition="SGNorm",
        value=value,
        method="ExactEnumeration" if mode == "exact" else "MonteCarlo",
        examined=len(subsets),
        note="" if mode == "exact" else "lower bound from sampled subsets",
        witness=witness,
    )


def witness_ratio(X: np.ndarray, witness: np.ndarray) -> float:
    """||X w||_n / ||w||_2 for a reported witness."""
    nw = float(np.linalg.norm(witness))
    if nw == 0.0:
        return 0.0
    return float(np.linalg.norm(X @ witness)) / math.sqrt(X.shape[0]) / nw


# ---------------------------------------------------------------------------
# restricted eigenvalues


@dataclass(frozen=True)
class ConeSearchConfig:
    restarts: int = 32
    iters: int = 300
    mc_samples: int = 2000
    seed: int = 0
    cap: int = DSRE_CAP
    bisection_steps: int = 40
    extra_starts: tuple = ()  # warm starts, e.g. witnesses from a smaller cone


def _shrink_toward_cone(v: np.ndarray, spec: ConeSpec, t: float) -> np.ndarray:
    # any path that drives the cone ratio down works here; membership is
    # always re-checked exactly, so SSGRE and WSGRE can share the cheap
    # sparse-group shrinkage (1-sparse limits lie in both cones)
    s0 = spec.budget.s0
    if spec.cone in ("SSGRE", "WSGRE"):
        return proxops.prox_sparse_group(v, t, t * math.sqrt(s0), spec.layout)
    if spec.cone == "SRE":
        return proxops.prox_l1(v, t)
    if spec.cone == "SGRE":
        return proxops.prox_group_l2(v, t, spec.layout)
    raise DimensionMismatch(f"no shrinkage path for cone {spec.cone!r}")


def project_to_cone(v: np.ndarray, spec: ConeSpec, steps: int = 40) -> np.ndarray:
    """Approximate projection: bisection on the shrinkage path.

    Walks the penalty's prox path v(t) and bisects on the smallest t
    whose output satisfies the cone inequality; result is normalized to
    the unit sphere.  Exactness is not required (the output is only used
    to produce feasible points, hence valid upper bounds on theta).
    """
    v = np.asarray(v, dtype=float)
    if cone_membership(v, spec):
        nv = np.linalg.norm(v)
        return v / nv if nv > 0 else v
    if spec.cone == "DS":
        return _project_to_ds(v, spec)
    hi = float(np.max(np.abs(v)))
    lo = 0.0
    for _ in range(20):  # ensure the bracket's upper end is feasible
        if cone_membership(_shrink_toward_cone(v, spec, hi), spec):
            break
        hi *= 2.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if cone_membership(_shrink_toward_cone(v, spec, mid), spec):
            hi = mid
        else:
            lo = mid
    out = _shrink_toward_cone(v, spec, hi)
    norm = np.linalg.norm(out)
    if norm == 0.0:  # fully shrunk; fall back to the dominant coordinate
        out = np.zeros_like(v)
        out[int(np.argmax(np.abs(v)))] = 1.0
        return out
    return out / norm


def _project_to_ds(v: np.ndarray, spec: ConeSpec) -> np.ndarray:
    """Keep the best s groups and the top s*s0 magnitudes within them."""
    layout, s, s0 = spec.layout, spec.budget.s, spec.budget.s0
    mags = np.abs(v).reshape(layout.m, layout.d)
    scores = np.sum(-np.sort(-(mags**2), axis=1)[:, :s0], axis=1)
    keep_groups = np.argsort(-scores, kind="stable")[:s]
    mask = np.zeros(layout.p, dtype=bool)
    for g in keep_groups:
        mask[g * layout.d : (g + 1) * layout.d] = True
    out = np.where(mask, v, 0.0)
    order = np.argsort(-np.abs(out), kind="stable")
    out[order[s * s0 :]] = 0.0
    norm = np.linalg.norm(out)
    return out / norm if norm > 0 else out


def _ds_exact_minimum(X: np.ndarray, spec: ConeSpec, cap: int) -> tuple[float, np.ndarray, int]:
    layout, budget = spec.layout, spec.budget
    count = family_count("S1", budget, layout)
    if count > cap:
        raise CapExceeded(count, cap, what="DS support enumeration")
    n = X.shape[0]
    G = X.T @ X / n
    supports = np.array([s for s in enumerate_family("S1", budget, layout, cap=cap)])
    blocks = G[supports[:, :, None], supports[:, None, :]]
    eigvals, eigvecs = np.linalg.eigh(blocks)
    small = eigvals[:, 0]
    k = int(np.argmin(small))
    witness = np.zeros(layout.p)
    witness[supports[k]] = eigvecs[k][:, 0]
    return float(math.sqrt(max(small[k], 0.0))), witness, len(supports)


def _sparse_start(rng, layout: GroupLayout, budget: SparsityBudget) -> np.ndarray:
    from .groups import sample_support

    v = np.zeros(layout.p)
    idx = sample_support(budget, layout, rng)
    v[idx] = rng.standard_normal(len(idx))
    return v


def estimate_cone_eigenvalue(
    X: np.ndarray, spec: ConeSpec, config: ConeSearchConfig = ConeSearchConfig()
) -> ConditionReport:
    """Estimate theta = min over the cone of ||X delta||_n / ||delta||_2.

    For DS cones with a feasible support count the minimum is exact
    (smallest singular value over enumerated supports).  Otherwise the
    report is the min of projected-gradient descent from many restarts
    and Monte Carlo cone sampling: an upper bound on theta, with the
    witness achieving the reported value.
    """
    X = np.asarray(X, dtype=float)
    if not np.any(X):
        raise DimensionMismatch("X must be nonzero")
    n = X.shape[0]
    if X.shape[1] != spec.layout.p:
        raise DimensionMismatch("X does not match layout")

    if spec.cone == "DS":
        value, witness, examined = _ds_exact_minimum(X, spec, config.cap)
        return ConditionReport(
            condition="DSRE",
            value=value,
            method="ExactEnumeration",
            examined=examined,
            witness=witness,
        )

    rng = np.random.default_rng(config.seed)
    G = X.T @ X / n
    lam_max = float(np.linalg.eigvalsh(G)[-1])
    step = 0.45 / lam_max if lam_max > 0 else 1.0

    def ratio(delta):
        return math.sqrt(max(float(delta @ (G @ delta)), 0.0)) / float(np.linalg.norm(delta))

    best_val, best_wit = math.inf, None

    def consider(delta):
        nonlocal best_val, best_wit
        if not np.any(delta):
            return math.inf
        val = ratio(delta)
        if val < best_val:
            best_val, best_wit = val, delta.copy()
        return val

    # projected-gradient descent from random, sparse-seeded, and warm starts;
    # every iterate is a feasible cone point, so the best ratio seen is a
    # valid upper bound on theta
    eigvec_small = np.linalg.eigh(G)[1][:, 0]
    starts = [eigvec_small] + [np.asarray(v, dtype=float) for v in config.extra_starts]
    for r in range(config.restarts - 1):
        if r % 2 == 0:
            starts.append(_sparse_start(rng, spec.layout, spec.budget))
        else:
            starts.append(rng.standard_normal(spec.layout.p))
    for v0 in starts:
        delta = project_to_cone(v0, spec, steps=config.bisection_steps)
        consider(delta)
        for _ in range(config.iters):
            delta = project_to_cone(delta - step * 2.0 * (G @ delta), spec, steps=20)
            consider(delta)

    # Monte Carlo cone sampling
    examined = len(starts) * (config.iters + 1)
    for _ in range(config.mc_samples):
        base = _sparse_start(rng, spec.layout, spec.budget)
        mix = rng.uniform()
        cand = base / max(np.linalg.norm(base), 1e-300) + mix * rng.standard_normal(spec.layout.p) * 0.3
        consider(project_to_cone(cand, spec, steps=20))
    examined += config.mc_samples

    return ConditionReport(
        condition=spec.cone,
        value=best_val,
        method="ProjectedMinimization",
        examined=examined,
        note="upper bound on theta (nonconvex minimization)",
        witness=best_wit,
    )


# ---------------------------------------------------------------------------
# cone inclusions


@dataclass
class InclusionReport:
    samples: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def sample_cone_point(
    rng: np.random.Generator, spec: ConeSpec, max_tries: int = 50
) -> np.ndarray:
    """Random point of the cone: sparse seed blended with dense noise."""
    for _ in range(max_tries):
        base = _sparse_start(rng, spec.layout, spec.budget)
        base /= np.linalg.norm(base)
        noise = rng.standard_normal(spec.layout.p)
        noise /= np.linalg.norm(noise)
        # largest feasible blend, then a uniform pullback
        lo, hi = 0.0, 1.0
        if cone_membership(base + hi * noise, spec):
            lo = hi
        else:
            for _ in range(30):
                mid = 0.5 * (lo + hi)
                if cone_membership(base + mid * noise, spec):
                    lo = mid
                else:
                    hi = mid
        point = base + rng.uniform(0.0, 1.0) * lo * noise
        if np.any(point) and cone_membership(point, spec):
            return point
    raise DimensionMismatch("could not sample a cone point")


def cone_inclusion_check(
    samples: int,
    s: int,
    s0: int,
    c0: float,
    layout: GroupLayout,
    weights: Optional[WeightSequences] = None,
    seed: int = 0,
) -> InclusionReport:
    """Sampled verification of the cone inclusion facts.

    Every delta in C_SSGRE(s, s0, c0) must lie in C_SRE(s*s0, 1+c0),
    C_SGRE(s, 1+c0), and C_WSGRE(s, s0, 2+c0).  Violations are returned
    with their witnesses (an empty list is the expected outcome).
    """
    budget = SparsityBudget(s=s, s0=s0).validate(layout)
    if weights is None:
        weights = make_weights(layout, s0, 1.0)
    ssgre = ConeSpec(cone="SSGRE", budget=budget, c0=c0, layout=layout)
    targets = [
        ConeSpec(cone="SRE", budget=budget, c0=1.0 + c0, layout=layout),
        ConeSpec(cone="SGRE", budget=budget, c0=1.0 + c0, layout=layout),
        ConeSpec(cone="WSGRE", budget=budget, c0=2.0 + c0, layout=layout, weights=weights),
    ]
    rng = np.random.default_rng(seed)
    report = InclusionReport(samples=samples)
    for _ in range(samples):
        delta = sample_cone_point(rng, ssgre)
        for target in targets:
            if not cone_membership(delta, target):
                report.violations.append((target.cone, delta.copy()))
    return report
