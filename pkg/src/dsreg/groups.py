"""Group structure, magnitude sorting rules, and index-set families.

A length-p vector is split into m contiguous groups of equal size d
(p = m * d).  Group j (0-based) owns the coordinates [j*d, (j+1)*d).
The equivalent d x m matrix view places group j in column j.

Three sorting rules are used throughout the package:

* element-wise: all |u_i| in descending order,
* group-wise: each column of the matrix view sorted by |.| descending,
* group: the m group l2-norms in descending order.

All ties are broken by ascending original index (stable sorts), so every
operation here is deterministic.  All returned arrays are fresh; inputs
are never mutated, and instances are safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product
from math import comb

import numpy as np

from .errors import BudgetInvalid, CapExceeded, DimensionMismatch

DEFAULT_ENUM_CAP = 10**6


@dataclass(frozen=True)
class GroupLayout:
    """Partition of [p] into m contiguous groups of size d."""

    m: int
    d: int

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise DimensionMismatch(f"need m >= 1 and d >= 1, got m={self.m}, d={self.d}")

    @property
    def p(self) -> int:
        return self.m * self.d

    def group_indices(self, j: int) -> np.ndarray:
        """Coordinate indices of group j (0-based)."""
        if not 0 <= j < self.m:
            raise DimensionMismatch(f"group index {j} out of range [0, {self.m})")
        return np.arange(j * self.d, (j + 1) * self.d)

    def to_matrix(self, u: np.ndarray) -> np.ndarray:
        """d x m matrix view with column j = group j.  Pure reindexing."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.p,):
            raise DimensionMismatch(f"expected shape ({self.p},), got {u.shape}")
        return u.reshape(self.m, self.d).T

    def to_vector(self, U: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_matrix`; round-trips losslessly."""
        U = np.asarray(U, dtype=float)
        if U.shape != (self.d, self.m):
            raise DimensionMismatch(f"expected shape ({self.d}, {self.m}), got {U.shape}")
        return U.T.reshape(self.p)

    def group_norms(self, u: np.ndarray) -> np.ndarray:
        """l2 norm of each group, in group order."""
        U = self.to_matrix(u)
        return np.linalg.norm(U, axis=0)

    def to_json(self) -> str:
        return json.dumps({"m": self.m, "d": self.d})

    @classmethod
    def from_json(cls, text: str) -> "GroupLayout":
        obj = json.loads(text)
        return cls(m=int(obj["m"]), d=int(obj["d"]))


@dataclass(frozen=True)
class SparsityBudget:
    """Group sparsity s and within-group sparsity s0."""

    s: int
    s0: int

    def validate(self, layout: GroupLayout) -> "SparsityBudget":
        if not 1 <= self.s <= layout.m:
            raise BudgetInvalid(f"need 1 <= s <= m={layout.m}, got s={self.s}")
        if not 1 <= self.s0 <= layout.d:
            raise BudgetInvalid(f"need 1 <= s0 <= d={layout.d}, got s0={self.s0}")
        return self

    @property
    def total(self) -> int:
        """Total element budget s * s0."""
        return self.s * self.s0


def sort_elementwise(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort |u| in descending order.

    Returns ``(magnitudes, perm)`` where ``magnitudes = |u|[perm]`` is
    non-increasing and ties keep ascending original index.
    """
    mags = np.abs(np.asarray(u, dtype=float))
    perm = np.argsort(-mags, kind="stable")
    return mags[perm], perm


def sort_groupwise(u: np.ndarray, layout: GroupLayout) -> tuple[np.ndarray, np.ndarray]:
    """Per-column descending magnitude sort of the matrix view.

    Returns ``(U_star, perms)``: ``U_star[i, j]`` is the (i+1)-th largest
    magnitude in group j and ``perms[:, j]`` the within-group ordering.
    """
    U = np.abs(layout.to_matrix(u))
    perms = np.argsort(-U, axis=0, kind="stable")
    return np.take_along_axis(U, perms, axis=0), perms


def sort_groups(u: np.ndarray, layout: GroupLayout) -> tuple[np.ndarray, np.ndarray]:
    """Group l2 norms in descending order with the group permutation."""
    norms = layout.group_norms(u)
    perm = np.argsort(-norms, kind="stable")
    return norms[perm], perm


def family_count(family: str, budget: SparsityBudget, layout: GroupLayout) -> int:
    """Number of index sets the enumerator for the given family yields.

    S2 picks s groups and an s0-subset inside each: C(m,s) * C(d,s0)**s.
    S1 picks s groups and any s*s0 elements from their union:
    C(m,s) * C(s*d, s*s0).  S1 counts (group choice, element choice)
    pairs; an element set touching fewer than s groups is yielded once
    per compatible group choice.
    """
    budget.validate(layout)
    s, s0 = budget.s, budget.s0
    if family == "S2":
        return comb(layout.m, s) * comb(layout.d, s0) ** s
    if family == "S1":
        return comb(layout.m, s) * comb(s * layout.d, s * s0)
    raise ValueError(f"unknown family {family!r}; expected 'S1' or 'S2'")


def enumerate_family(
    family: str,
    budget: SparsityBudget,
    layout: GroupLayout,
    cap: int = DEFAULT_ENUM_CAP,
):
    """Yield the index sets of the family as sorted int arrays (0-based).

    Raises :class:`CapExceeded` up front when the count passes ``cap``;
    callers must then switch to a sampling path.
    """
    count = family_count(family, budget, layout)
    if count > cap:
        raise CapExceeded(count, cap, what=f"{family} family")
    s, s0, d = budget.s, budget.s0, layout.d
    if family == "S2":
        per_group = list(combinations(range(d), s0))
        for groups in combinations(range(layout.m), s):
            for choice in product(per_group, repeat=s):
                idx = np.sort(
                    np.concatenate([g * d + np.asarray(c) for g, c in zip(groups, choice)])
                )
                yield idx
    else:
        for groups in combinations(range(layout.m), s):
            pool = np.concatenate([layout.group_indices(g) for g in groups])
            for choice in combinations(range(s * d), s * s0):
                yield np.sort(pool[list(choice)])


def sample_support(
    budget: SparsityBudget, layout: GroupLayout, rng: np.random.Generator
) -> np.ndarray:
    """Draw one S2-style support uniformly: s groups, s0 elements each."""
    budget.validate(layout)
    groups = rng.choice(layout.m, size=budget.s, replace=False)
    cols = [g * layout.d + rng.choice(layout.d, size=budget.s0, replace=False) for g in groups]
    return np.sort(np.concatenate(cols))
