"""Weight sequences, norms, the noise envelope, and penalty objects.

The group-level weights are

    lambda_j = sigma * sqrt(log(2*e*d/s0) + (2/s0) * log(4*e*m/j)),   j = 1..m,

non-increasing in j.  Their element-wise extension replicates each
lambda_j s0 times and pads with lambda_m:

    lambda~_i = lambda_{ceil(i/s0)} for i <= s0*m,   lambda_m afterwards,

so that lambda~_{s*s0} = lambda_s and
sum_{i<=s*s0} lambda~_i^2 = s0 * sum_{j<=s} lambda_j^2 exactly.

``sigma = 0`` is allowed and produces all-zero weights (degenerate
penalty) for noiseless tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GammaRange, WeightOrder
from .groups import GroupLayout, SparsityBudget, sort_elementwise, sort_groups
from . import proxops

SLOPE_CONST = 4.0 + math.sqrt(2.0)


def log_factor(m: int, d: int, s: int, s0: int) -> float:
    """The per-coordinate log factor log(2ed/s0) + (2/s0) log(4em/s)."""
    return math.log(2.0 * math.e * d / s0) + (2.0 / s0) * math.log(4.0 * math.e * m / s)


@dataclass(frozen=True)
class WeightSequences:
    """Non-increasing group weights and their element-wise extension."""

    layout: GroupLayout
    s0: int
    sigma: float
    lambda_group: np.ndarray
    lambda_elem: np.ndarray

    def __post_init__(self):
        lg = proxops.check_weights(self.lambda_group)
        le = proxops.check_weights(self.lambda_elem)
        if lg.shape != (self.layout.m,) or le.shape != (self.layout.p,):
            raise DimensionMismatch("weight lengths do not match layout")
        if self.sigma < 0:
            raise WeightOrder("sigma must be >= 0")
        if self.sigma > 0 and (lg[-1] <= 0 or le[-1] <= 0):
            raise WeightOrder("weights must be strictly positive when sigma > 0")
        expected = _extend(lg, self.s0, self.layout.p)
        if not np.array_equal(le, expected):
            raise WeightOrder("element weights do not follow the replication rule")

    def head_norm(self, s: int) -> float:
        """sqrt(sum of the first s*s0 squared element weights)."""
        return float(np.sqrt(np.sum(self.lambda_elem[: s * self.s0] ** 2)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.layout.m,
                "d": self.layout.d,
                "s0": self.s0,
                "sigma": self.sigma,
                "lambda_group": self.lambda_group.tolist(),
                "lambda_elem": self.lambda_elem.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "WeightSequences":
        obj = json.loads(text)
        return cls(
            layout=GroupLayout(m=int(obj["m"]), d=int(obj["d"])),
            s0=int(obj["s0"]),
            sigma=float(obj["sigma"]),
            lambda_group=np.asarray(obj["lambda_group"], dtype=float),
            lambda_elem=np.asarray(obj["lambda_elem"], dtype=float),
        )


def _extend(lambda_group: np.ndarray, s0: int, p: int) -> np.ndarray:
    m = lambda_group.shape[0]
    elem = np.full(p, lambda_group[-1])
    head = np.repeat(lambda_group, s0)
    elem[: min(s0 * m, p)] = head[: min(s0 * m, p)]
    return elem


def make_weights(layout: GroupLayout, s0: int, sigma: float) -> WeightSequences:
    """Build the theoretical weight sequences for noise scale sigma."""
    SparsityBudget(s=1, s0=s0).validate(layout)
    j = np.arange(1, layout.m + 1, dtype=float)
    lam = sigma * np.sqrt(
        math.log(2.0 * math.e * layout.d / s0) + (2.0 / s0) * np.log(4.0 * math.e * layout.m / j)
    )
    return WeightSequences(
        layout=layout,
        s0=s0,
        sigma=float(sigma),
        lambda_group=lam,
        lambda_elem=_extend(lam, s0, layout.p),
    )


def lambda_sharp(gamma: float, sigma: float, n: int, s: int, s0: int, m: int, d: int) -> float:
    """Scalar tuning level ((4+sqrt(2)) * sigma / (gamma * sqrt(n))) * sqrt(log factor)."""
    if not 0.0 < gamma < 1.0:
        raise GammaRange(f"gamma must be in (0, 1), got {gamma}")
    if n < 1:
        raise DimensionMismatch(f"n must be >= 1, got {n}")
    return SLOPE_CONST * sigma / (gamma * math.sqrt(n)) * math.sqrt(log_factor(m, d, s, s0))


# ---------------------------------------------------------------------------
# norms


def norm_l1(u) -> float:
    return float(np.sum(np.abs(u)))


def norm_l12(u, layout: GroupLayout) -> float:
    """Sum of group l2 norms."""
    return float(np.sum(layout.group_norms(u)))


def norm_sorted_l1(u, lam) -> float:
    """Sorted weighted l1 norm: sum_i lam_i |u|_(i), lam non-increasing."""
    lam = proxops.check_weights(lam)
    mags, _ = sort_elementwise(u)
    if mags.shape != lam.shape:
        raise DimensionMismatch(f"u shape {mags.shape} != weights shape {lam.shape}")
    return float(mags @ lam)


def norm_group_sorted(u, lam, layout: GroupLayout) -> float:
    """Sorted weighted sum of group norms: sum_j lam_j ||u_G||_2,(j)."""
    lam = proxops.check_weights(lam)
    if lam.shape != (layout.m,):
        raise DimensionMismatch(f"need {layout.m} group weights, got {lam.shape}")
    norms, _ = sort_groups(u, layout)
    return float(norms @ lam)


def norm_combined_star(u, weights: WeightSequences) -> float:
    """||u||_* = sorted-l1 part + sqrt(s0) * group-sorted part."""
    return norm_sorted_l1(u, weights.lambda_elem) + math.sqrt(weights.s0) * norm_group_sorted(
        u, weights.lambda_group, weights.layout
    )


def envelope_N(u, weights: WeightSequences, n: int) -> float:
    """Positive homogeneous noise envelope N(u).

    N(u) = (1/sqrt(n)) * { sum_j ||U_(j)||_2 sqrt(s0) lambda_j
                           + sum_i |u|_(i) lambda~_i },
    which equals ||u||_* / sqrt(n).
    """
    return norm_combined_star(u, weights) / math.sqrt(n)


# ---------------------------------------------------------------------------
# penalty objects used by the solver (value + prox protocol)


class ZeroPenalty:
    """No penalty; prox is the identity."""

    def value(self, beta) -> float:
        return 0.0

    def prox(self, v, t: float) -> np.ndarray:
        return np.asarray(v, dtype=float).copy()


@dataclass(frozen=True)
class L1Penalty:
    lam: float

    def value(self, beta) -> float:
        return self.lam * norm_l1(beta)

    def prox(self, v, t: float) -> np.ndarray:
        return proxops.prox_l1(v, t * self.lam)


@dataclass(frozen=True)
class GroupL2Penalty:
    lam_g: float
    layout: GroupLayout

    def value(self, beta) -> float:
        return self.lam_g * norm_l12(beta, self.layout)

    def prox(self, v, t: float) -> np.ndarray:
        return proxops.prox_group_l2(v, t * self.lam_g, self.layout)


@dataclass(frozen=True)
class SparseGroupPenalty:
    """lam * ||.||_1 + lam_g * ||.||_{1,2}; the sparse group Lasso penalty."""

    lam: float
    lam_g: float
    layout: GroupLayout

    def __post_init__(self):
        if self.lam < 0 or self.lam_g < 0:
            raise WeightOrder("penalty levels must be >= 0")

    def value(self, beta) -> float:
        return self.lam * norm_l1(beta) + self.lam_g * norm_l12(beta, self.layout)

    def prox(self, v, t: float) -> np.ndarray:
        return proxops.prox_sparse_group(v, t * self.lam, t * self.lam_g, self.layout)


@dataclass(frozen=True)
class SortedL1Penalty:
    lam: np.ndarray  # length p, non-increasing

    def value(self, beta) -> float:
        return norm_sorted_l1(beta, self.lam)

    def prox(self, v, t: float) -> np.ndarray:
        return proxops.prox_sorted_l1(v, t * self.lam)


@dataclass(frozen=True)
class GroupSortedPenalty:
    lam: np.ndarray  # length m, non-increasing
    layout: GroupLayout

    def value(self, beta) -> float:
        return norm_group_sorted(beta, self.lam, self.layout)

    def prox(self, v, t: float) -> np.ndarray:
        return proxops.prox_group_sorted(v, t * self.lam, self.layout)


@dataclass(frozen=True)
class CombinedStarPenalty:
    """multiplier * ||.||_*; the sparse group Slope penalty."""

    weights: WeightSequences
    multiplier: float = 1.0
    tol: float = 1e-10
    max_iters: int = 10**4

    def value(self, beta) -> float:
        return self.multiplier * norm_combined_star(beta, self.weights)

    def prox(self, v, t: float) -> np.ndarray:
        c = t * self.multiplier
        return proxops.prox_combined_star(
            v,
            c * self.weights.lambda_elem,
            c * math.sqrt(self.weights.s0) * self.weights.lambda_group,
            self.weights.layout,
            tol=self.tol,
            max_iters=self.max_iters,
        )
