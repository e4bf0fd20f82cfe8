"""Double-sparse packing sets and the minimax lower-bound value.

A packing vector has exactly s active groups with exactly s0 active
coordinates each; pairwise Hamming distance (sign-sensitive coordinate
disagreement count) is at least ceil(s*s0/4).  The greedy construction
draws candidate supports (exhaustive shuffled order at desk scale,
rejection sampling beyond the cap) and keeps those far from everything
kept so far; its cardinality is compared against

    exp{ (1/4) (s log(em/s) + s*s0 log(ed/s0)) }.

The signed variant assigns one sign per active group by induction,
always keeping the variant with the smaller ||X theta||_n, which
guarantees ||X beta||_n^2 <= theta_max^2 * s * s0 for the {-1,0,1}
vectors (entries are +-1/sqrt(s*s0) during the construction).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import Optional

import numpy as np

from .conditions import check_sgnorm
from .errors import BudgetInvalid, DimensionMismatch
from .groups import GroupLayout, SparsityBudget, sample_support

SUPPORT_CAP = 10**5


@dataclass
class PackingSet:
    vectors: np.ndarray  # (count, p), entries in {-1, 0, 1} (or {0, 1} unsigned)
    layout: GroupLayout
    budget: SparsityBudget
    min_hamming: int
    scaling_note: str = "vectors scale to entries +-1/sqrt(s*s0) in the signed construction"

    @property
    def cardinality(self) -> int:
        return self.vectors.shape[0]

    def to_json(self) -> str:
        """Sparse triplet encoding: (group, offset, sign) per nonzero."""
        d = self.layout.d
        items = []
        for v in self.vectors:
            nz = np.flatnonzero(v)
            items.append([[int(i // d), int(i % d), int(v[i])] for i in nz])
        return json.dumps(
            {
                "m": self.layout.m,
                "d": self.layout.d,
                "s": self.budget.s,
                "s0": self.budget.s0,
                "min_hamming": self.min_hamming,
                "vectors": items,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PackingSet":
        obj = json.loads(text)
        layout = GroupLayout(m=int(obj["m"]), d=int(obj["d"]))
        vectors = np.zeros((len(obj["vectors"]), layout.p))
        for k, items in enumerate(obj["vectors"]):
            for g, off, sign in items:
                vectors[k, g * layout.d + off] = sign
        return cls(
            vectors=vectors,
            layout=layout,
            budget=SparsityBudget(s=int(obj["s"]), s0=int(obj["s0"])),
            min_hamming=int(obj["min_hamming"]),
        )


def packing_bound(m: int, d: int, s: int, s0: int) -> float:
    """The packing-number lower bound exp{(1/4)(s log(em/s) + s s0 log(ed/s0))}."""
    return math.exp(0.25 * (s * math.log(math.e * m / s) + s * s0 * math.log(math.e * d / s0)))


def packing_radius(s: int, s0: int) -> int:
    """Integer packing radius ceil(s*s0/4)."""
    return math.ceil(s * s0 / 4)


def min_pairwise_hamming(vectors: np.ndarray) -> int:
    """Exhaustive all-pairs sign-sensitive Hamming minimum."""
    k = vectors.shape[0]
    if k < 2:
        return 0
    best = vectors.shape[1]
    for i in range(k - 1):
        dists = np.count_nonzero(vectors[i + 1 :] != vectors[i], axis=1)
        best = min(best, int(dists.min()))
    return best


def _support_vector(layout: GroupLayout, groups, per_group) -> np.ndarray:
    v = np.zeros(layout.p)
    for g, sub in zip(groups, per_group):
        v[g * layout.d + np.asarray(sub)] = 1.0
    return v


def build_packing(
    layout: GroupLayout,
    budget: SparsityBudget,
    seed: int = 0,
    target: Optional[int] = None,
    support_cap: int = SUPPORT_CAP,
    max_candidates: Optional[int] = None,
) -> PackingSet:
    """Greedy Gilbert-Varshamov construction of an unsigned {0,1} packing.

    Candidates are exact (s, s0)-supports; a candidate is kept when its
    Hamming distance to every kept vector is at least ceil(s*s0/4).
    When the total support count is within ``support_cap`` the
    candidates are the full support family in seeded-shuffled order,
    otherwise uniform random supports.  Stops once ``target`` vectors
    (default: the ceiling of the packing bound) are kept or candidates
    run out.  Deterministic under a fixed seed.
    """
    try:
        budget.validate(layout)
    except BudgetInvalid:
        raise
    s, s0, m, d = budget.s, budget.s0, layout.m, layout.d
    radius = packing_radius(s, s0)
    if target is None:
        target = math.ceil(packing_bound(m, d, s, s0))
    rng = np.random.default_rng(seed)

    total = comb(m, s) * comb(d, s0) ** s
    kept: list[np.ndarray] = []
    kept_arr = np.zeros((0, layout.p))

    def try_accept(v: np.ndarray) -> bool:
        nonlocal kept_arr
        if kept_arr.shape[0]:
            dists = np.count_nonzero(kept_arr != v, axis=1)
            if int(dists.min()) < radius:
                return False
        kept.append(v)
        kept_arr = np.vstack([kept_arr, v])
        return True

    if total <= support_cap:
        group_choices = list(combinations(range(m), s))
        sub_choices = list(combinations(range(d), s0))
        all_supports = [
            (g, pg) for g in group_choices for pg in product(sub_choices, repeat=s)
        ]
        order = rng.permutation(len(all_supports))
        for idx in order:
            g, pg = all_supports[idx]
            if try_accept(_support_vector(layout, g, pg)) and len(kept) >= target:
                break
    else:
        budget_candidates = max_candidates if max_candidates is not None else 200 * target
        for _ in range(budget_candidates):
            v = np.zeros(layout.p)
            v[sample_support(budget, layout, rng)] = 1.0
            if try_accept(v) and len(kept) >= target:
                break

    vectors = np.asarray(kept)
    return PackingSet(
        vectors=vectors,
        layout=layout,
        budget=budget,
        min_hamming=min_pairwise_hamming(vectors),
        scaling_note="unsigned {0,1} supports",
    )


def sign_packing(
    packing: PackingSet, X: np.ndarray, theta_max: Optional[float] = None
) -> PackingSet:
    """Assign one sign per active group so that ||X beta||_n stays bounded.

    Groups are added in index order; of the two sign variants of the
    incoming group the one with smaller ||X theta||_n is kept, which by
    the parallelogram identity keeps ||X theta||_n <= theta_max after
    all s groups (theta has entries +-1/sqrt(s*s0)).  The returned
    vectors are the {-1, 0, 1} versions; Hamming distances are unchanged
    since no entry is zeroed.
    """
    X = np.asarray(X, dtype=float)
    layout, budget = packing.layout, packing.budget
    if X.shape[1] != layout.p:
        raise DimensionMismatch("X does not match the packing layout")
    n = X.shape[0]
    if theta_max is None:
        theta_max = check_sgnorm(X, layout, budget.s0, mode="frobenius_bound").value

    scale = 1.0 / math.sqrt(budget.s * budget.s0)
    signed = np.zeros_like(packing.vectors)
    for k, v in enumerate(packing.vectors):
        x_theta = np.zeros(n)
        out = np.zeros(layout.p)
        active = np.flatnonzero(layout.group_norms(v))
        for g in active:
            idx = g * layout.d + np.flatnonzero(v[g * layout.d : (g + 1) * layout.d])
            xb = scale * np.sum(X[:, idx], axis=1)
            if np.sum((x_theta + xb) ** 2) <= np.sum((x_theta - xb) ** 2):
                sign = 1.0
                x_theta = x_theta + xb
            else:
                sign = -1.0
                x_theta = x_theta - xb
            out[idx] = sign
        signed[k] = out
    return PackingSet(
        vectors=signed,
        layout=layout,
        budget=budget,
        min_hamming=min_pairwise_hamming(signed),
        scaling_note=f"signs chosen under theta_max = {theta_max}; entries were +-{scale} during construction",
    )


def lower_bound_value(n: int, sigma: float, theta_max: float, m: int, d: int, s: int, s0: int) -> float:
    """(sigma^2 / (256 n theta_max^2)) (s log(em/s) + s s0 log(ed/s0))."""
    if n < 1 or theta_max <= 0:
        raise DimensionMismatch("need n >= 1 and theta_max > 0")
    if sigma < 0:
        raise DimensionMismatch("sigma must be >= 0")
    rate = s * math.log(math.e * m / s) + s * s0 * math.log(math.e * d / s0)
    return sigma**2 / (256.0 * n * theta_max**2) * rate


@dataclass
class GapReport:
    ratios: dict  # n -> observed squared error / lower bound
    log_slope: Optional[float]  # slope of log ratio vs log n (None if < 2 points)
    skipped: bool = False
    note: str = ""


def gap_report(
    squared_errors: dict,
    sigma: float,
    theta_max,
    m: int,
    d: int,
    s: int,
    s0: int,
) -> GapReport:
    """Ratio of observed squared errors to the lower-bound value per n.

    ``theta_max`` may be a scalar or a dict keyed like
    ``squared_errors``.  With sigma = 0 the report is skipped (the bound
    degenerates to zero).
    """
    if sigma == 0:
        return GapReport(ratios={}, log_slope=None, skipped=True, note="sigma = 0: lower bound is 0")
    ratios = {}
    for n, err2 in squared_errors.items():
        th = theta_max[n] if isinstance(theta_max, dict) else theta_max
        ratios[int(n)] = float(err2) / lower_bound_value(int(n), sigma, th, m, d, s, s0)
    slope = None
    if len(ratios) >= 2:
        ns = np.array(sorted(ratios))
        logs = np.log(np.array([ratios[int(v)] for v in ns]))
        slope = float(np.polyfit(np.log(ns), logs, 1)[0])
    return GapReport(ratios=ratios, log_slope=slope)
