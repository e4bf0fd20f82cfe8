"""Random design ensembles and empirical sample-complexity maps.

Ensembles: isotropic Gaussian, Rademacher, covariance-shaped
sub-Gaussian (X = Z Sigma^(1/2)), and a weak-moment family with
symmetrized Weibull coordinates of shape 1/alpha, scaled to unit L2, so
the L_q norms grow like q^alpha (alpha = 1/2 recovers sub-Gaussian-like
growth, alpha = 1 sub-exponential).

Phase diagrams re-draw a design per replicate, run the desk-scale
condition check, and track the success frequency against the sample
size; the sample-size axis is compared to the rate quantity
s log(4em/s) + s s0 log(2ed/s0).  Success for the restricted-eigenvalue
conditions is measured through the exact double-sparse support
enumeration (the only certified statistic at this scale), with a
configurable threshold.

Replicates use spawned generator streams, so results are reproducible
and independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from math import comb
from typing import Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from .conditions import ConeSearchConfig, ConeSpec, check_sgnorm, estimate_cone_eigenvalue
from .errors import CapExceeded, ConditionViolated, DimensionMismatch, EpsRange
from .groups import GroupLayout, SparsityBudget, sample_support
from .stochastic import clopper_pearson

ENSEMBLE_KINDS = ("gaussian", "rademacher", "subgaussian_cov", "weak_moment")


@dataclass(frozen=True)
class DesignEnsemble:
    kind: str
    n: int
    layout: GroupLayout
    seed: int = 0
    scale: float = 1.0  # multiplies every entry; use 1/(1+theta) margins here
    sigma_half: Optional[np.ndarray] = None  # p x p factor for subgaussian_cov
    alpha: Optional[float] = None  # weak-moment growth exponent, >= 1/2
    kappa1: Optional[float] = None  # informational growth constant

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise DimensionMismatch(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "subgaussian_cov":
            if self.sigma_half is None or np.shape(self.sigma_half) != (self.layout.p, self.layout.p):
                raise DimensionMismatch("subgaussian_cov needs a p x p sigma_half factor")
        if self.kind == "weak_moment":
            if self.alpha is None or self.alpha < 0.5:
                raise DimensionMismatch("weak_moment needs alpha >= 1/2")
            if self.kappa1 is not None and self.kappa1 <= 0:
                raise DimensionMismatch("kappa1 must be > 0")


def weak_moment_scale(alpha: float) -> float:
    """Normalizer c with E (W/c)^2 = 1 for W ~ Weibull(1/alpha)."""
    return math.sqrt(gamma_fn(1.0 + 2.0 * alpha))


def weak_moment_kappa1(alpha: float, q_max: float = 64.0) -> float:
    """Smallest kappa1 with ||coordinate||_{L_q} <= kappa1 q^alpha for q in [2, q_max]."""
    qs = np.linspace(2.0, q_max, 512)
    lq = gamma_fn(1.0 + qs * alpha) ** (1.0 / qs) / weak_moment_scale(alpha)
    return float(np.max(lq / qs**alpha))


def orthonormal_design(n: int, layout: GroupLayout, seed: int = 0) -> np.ndarray:
    """sqrt(n) times an orthonormal n x p frame: normalization holds exactly."""
    if n < layout.p:
        raise DimensionMismatch(f"need n >= p = {layout.p} for an orthonormal design")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, layout.p)))
    return math.sqrt(n) * Q


def generate(ensemble: DesignEnsemble) -> np.ndarray:
    """Draw the n x p design with i.i.d. rows.  Bitwise reproducible."""
    rng = np.random.default_rng(ensemble.seed)
    n, p = ensemble.n, ensemble.layout.p
    if ensemble.kind == "gaussian":
        X = rng.standard_normal((n, p))
    elif ensemble.kind == "rademacher":
        X = 2.0 * rng.integers(0, 2, size=(n, p)).astype(float) - 1.0
    elif ensemble.kind == "subgaussian_cov":
        X = rng.standard_normal((n, p)) @ np.asarray(ensemble.sigma_half, dtype=float)
    else:  # weak_moment
        shape = 1.0 / ensemble.alpha
        W = rng.weibull(shape, size=(n, p))
        signs = 2.0 * rng.integers(0, 2, size=(n, p)).astype(float) - 1.0
        X = signs * W / weak_moment_scale(ensemble.alpha)
    return ensemble.scale * X


# ---------------------------------------------------------------------------
# phase diagrams


def rate_quantity_sample(m: int, d: int, s: int, s0: int) -> float:
    """s log(4em/s) + s s0 log(2ed/s0): the sample-size rate quantity."""
    return s * math.log(4 * math.e * m / s) + s * s0 * math.log(2 * math.e * d / s0)


@dataclass
class PhasePoint:
    n: int
    reps: int
    successes: int
    probability: float
    ci_low: float
    ci_high: float
    condition: str
    rate_quantity: float
    mean_value: float  # mean of the checked statistic (theta hats / theta_max)


@dataclass
class PhaseCurve:
    condition: str
    kind: str
    points: list

    def monotone_within_ci(self) -> bool:
        """No consecutive pair proves a decrease (CI overlap allowed)."""
        for a, b in zip(self.points, self.points[1:]):
            if b.ci_high < a.ci_low:
                return False
        return True


def _condition_statistic(
    X: np.ndarray,
    layout: GroupLayout,
    budget: SparsityBudget,
    condition: str,
    c0: float,
    cap: int,
) -> float:
    if condition == "sgnorm":
        return check_sgnorm(X, layout, budget.s0, mode="exact", cap=cap).value
    if condition in ("ssgre", "wsgre", "dsre"):
        spec = ConeSpec(cone="DS", budget=budget, c0=c0, layout=layout)
        return estimate_cone_eigenvalue(X, spec, ConeSearchConfig(cap=cap)).value
    raise DimensionMismatch(f"unknown condition {condition!r}")


def phase_diagram(
    kind: str,
    layout: GroupLayout,
    budget: SparsityBudget,
    n_grid,
    reps: int,
    condition: str = "sgnorm",
    c0: float = 1.0,
    success_threshold: float = 0.5,
    scale: float = 1.0,
    alpha: Optional[float] = None,
    sigma_half: Optional[np.ndarray] = None,
    seed: int = 0,
    cap: int = 10**5,
) -> PhaseCurve:
    """Success frequency of a design condition across sample sizes.

    Success means theta_max <= 1 for ``sgnorm`` and, for the
    restricted-eigenvalue conditions, that the exact double-sparse
    support minimum reaches ``success_threshold``.  Every (n, replicate)
    cell re-draws the design from its own generator stream.
    """
    budget.validate(layout)
    n_grid = [int(n) for n in n_grid]
    rq = rate_quantity_sample(layout.m, layout.d, budget.s, budget.s0)
    streams = np.random.SeedSequence(seed).spawn(len(n_grid) * reps)
    points = []
    for i, n in enumerate(n_grid):
        successes = 0
        values = []
        for r in range(reps):
            child_seed = streams[i * reps + r]
            ens = DesignEnsemble(
                kind=kind,
                n=int(n),
                layout=layout,
                seed=child_seed,
                scale=scale,
                alpha=alpha,
                sigma_half=sigma_half,
            )
            X = generate(ens)
            value = _condition_statistic(X, layout, budget, condition, c0, cap)
            values.append(value)
            if condition == "sgnorm":
                successes += value <= 1.0 + 1e-12
            else:
                successes += value >= success_threshold
        lo, hi = clopper_pearson(successes, reps)
        points.append(
            PhasePoint(
                n=int(n),
                reps=reps,
                successes=successes,
                probability=successes / reps,
                ci_low=lo,
                ci_high=hi,
                condition=condition,
                rate_quantity=rq,
                mean_value=float(np.mean(values)),
            )
        )
    return PhaseCurve(condition=condition, kind=kind, points=points)


# ---------------------------------------------------------------------------
# closed-form complexity bounds


@dataclass(frozen=True)
class ComplexityBounds:
    covering: float  # m C(d, s0) (5/(2 eps))^{s0}
    gaussian: float  # 6 sqrt(log m + s0 log(5ed/s0))
    gaussian_alt: float  # variant with ed/s0 inside the log (both displays exist)
    vc: float  # 2 (s log(em/s) + s s0 log(ed/s0))


def complexity_bounds(m: int, d: int, s: int, s0: int, eps: float) -> ComplexityBounds:
    if not 0.0 < eps < 0.5:
        raise EpsRange(f"eps must be in (0, 1/2), got {eps}")
    return ComplexityBounds(
        covering=m * comb(d, s0) * (5.0 / (2.0 * eps)) ** s0,
        gaussian=6.0 * math.sqrt(math.log(m) + s0 * math.log(5 * math.e * d / s0)),
        gaussian_alt=6.0 * math.sqrt(math.log(m) + s0 * math.log(math.e * d / s0)),
        vc=2.0 * (s * math.log(math.e * m / s) + s * s0 * math.log(math.e * d / s0)),
    )


@dataclass
class GaussianComplexityEstimate:
    mean: float
    stderr: float
    trials: int


def gaussian_complexity_mc(
    trials: int,
    seed: int = 0,
    layout: Optional[GroupLayout] = None,
    s0: Optional[int] = None,
    sigma_half: Optional[np.ndarray] = None,
    directions: Optional[np.ndarray] = None,
    cap: int = 10**9,
) -> GaussianComplexityEstimate:
    """Monte Carlo mean of the per-draw supremum of the Gaussian process.

    Support-constrained mode (``layout`` + ``s0``): the supremum over
    unit vectors supported on a within-group s0-subset equals, per draw,
    the largest l2 norm of the top-s0 entries of Sigma^(1/2) g inside
    any single group, so no subset enumeration is needed.  With
    ``directions`` the supremum is max_i |<v_i, Sigma^(1/2) g>|.
    """
    if trials < 1:
        raise DimensionMismatch("trials must be >= 1")
    rng = np.random.default_rng(seed)
    if directions is None:
        if layout is None or s0 is None:
            raise DimensionMismatch("need layout and s0 (or explicit directions)")
        if layout.m * comb(layout.d, s0) > cap:
            raise CapExceeded(layout.m * comb(layout.d, s0), cap, what="subset family")
        p = layout.p
    else:
        directions = np.asarray(directions, dtype=float)
        p = directions.shape[1]

    sups = np.empty(trials)
    for t in range(trials):
        g = rng.standard_normal(p)
        w = g if sigma_half is None else np.asarray(sigma_half) @ g
        if directions is None:
            mags = np.abs(w).reshape(layout.m, layout.d)
            top = -np.sort(-mags, axis=1)[:, :s0]
            sups[t] = float(np.max(np.sqrt(np.sum(top**2, axis=1))))
        else:
            sups[t] = float(np.max(np.abs(directions @ w)))
    return GaussianComplexityEstimate(
        mean=float(np.mean(sups)),
        stderr=float(np.std(sups, ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf,
        trials=trials,
    )


# ---------------------------------------------------------------------------
# small-ball probing


@dataclass
class SmallBallReport:
    tau: float
    worst_direction: np.ndarray
    per_direction: np.ndarray
    theta_min: float


def _ds_directions(layout: GroupLayout, budget: SparsityBudget, count: int, rng) -> np.ndarray:
    dirs = []
    # deterministic extremes: single coordinates and a flat (s, s0) pattern
    e = np.zeros(layout.p)
    e[0] = 1.0
    dirs.append(e)
    flat = np.zeros(layout.p)
    for k in range(budget.s):
        flat[k * layout.d : k * layout.d + budget.s0] = 1.0
    dirs.append(flat / np.linalg.norm(flat))
    while len(dirs) < count:
        v = np.zeros(layout.p)
        idx = sample_support(budget, layout, rng)
        v[idx] = rng.standard_normal(len(idx))
        dirs.append(v / np.linalg.norm(v))
    return np.asarray(dirs)


def small_ball_probe(
    rows,
    layout: GroupLayout,
    budget: SparsityBudget,
    theta_min: float,
    n_directions: int = 200,
    seed: int = 0,
) -> SmallBallReport:
    """Estimate tau = inf over sampled unit beta in DS(s, s0) of
    P(|<beta, x>| >= theta_min) from i.i.d. rows.

    ``rows`` is either an (n, p) array of design rows or a
    DesignEnsemble to draw them from.
    """
    if isinstance(rows, DesignEnsemble):
        rows = generate(rows)
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != layout.p:
        raise DimensionMismatch("rows must be (n, p) for the layout")
    rng = np.random.default_rng(seed)
    dirs = _ds_directions(layout, budget, n_directions, rng)
    hits = np.abs(rows @ dirs.T) >= theta_min  # (n, n_directions)
    per_dir = np.mean(hits, axis=0)
    k = int(np.argmin(per_dir))
    return SmallBallReport(
        tau=float(per_dir[k]),
        worst_direction=dirs[k],
        per_direction=per_dir,
        theta_min=theta_min,
    )


# ---------------------------------------------------------------------------
# Maurey empirical sampler


@dataclass
class MaureyReport:
    trials: int
    lhs_mean: float  # MC mean of ||X Z||_2^2 (normalized design)
    lhs_se: float
    rhs_bound: float  # (1 - 1/s) ||X beta||^2 + W^2 / (s s0)
    ez2_mean: float
    ez2_se: float
    ez2_exact: float
    all_in_ds: bool
    theta: float  # exact double-sparse eigenvalue of the design
    theta_tilde: float  # theta / sqrt(2)
    s_tilde: float  # (s - 1) theta^2 / (2 (2 + c0)^2)
    weight_total: float  # W

    @property
    def inequality_ok(self) -> bool:
        return self.lhs_mean <= self.rhs_bound + 3.0 * self.lhs_se

    @property
    def ez2_ok(self) -> bool:
        return abs(self.ez2_mean - self.ez2_exact) <= 3.0 * self.ez2_se


def maurey_check(
    X: np.ndarray,
    beta: np.ndarray,
    layout: GroupLayout,
    budget: SparsityBudget,
    trials: int = 10**4,
    seed: int = 0,
    c0: float = 1.0,
    cap: int = 10**5,
) -> MaureyReport:
    """Empirical check of the random-discretization argument.

    Draws the two-stage sparse average Z (group index proportional to
    w_j = sqrt(s0) ||beta_g||_2 + ||beta_g||_1, element index
    proportional to |beta_i| within the group, values signed to keep
    E Z = beta) and verifies, against the normalized design A = X/sqrt(n):

        mean ||A Z||^2  <=  (1 - 1/s) ||A beta||^2 + W^2/(s s0) + 3 SE,
        mean ||Z||^2 matches its closed form within 3 SE,
        every Z lies in DS(s, s0).

    Requires the normalization condition and a positive double-sparse
    eigenvalue; reports the parameter map theta/sqrt(2), (s-1) theta^2 /
    (2 (2+c0)^2).
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    budget.validate(layout)
    if beta.shape != (layout.p,):
        raise DimensionMismatch("beta does not match layout")
    n = X.shape[0]
    A = X / math.sqrt(n)

    norm_report = check_sgnorm(X, layout, budget.s0, mode="exact", cap=cap)
    if norm_report.value > 1.0 + 1e-9:
        raise ConditionViolated(f"normalization fails: theta_max = {norm_report.value}")
    ds = estimate_cone_eigenvalue(
        X, ConeSpec(cone="DS", budget=budget, c0=c0, layout=layout), ConeSearchConfig(cap=cap)
    )
    if ds.value <= 0:
        raise ConditionViolated("double-sparse eigenvalue is zero")

    s, s0 = budget.s, budget.s0
    B = beta.reshape(layout.m, layout.d)
    l2 = np.linalg.norm(B, axis=1)
    l1 = np.sum(np.abs(B), axis=1)
    w = math.sqrt(s0) * l2 + l1
    active = np.flatnonzero(w)
    W = float(np.sum(w))
    probs = w[active] / W

    rng = np.random.default_rng(seed)
    Z = np.zeros((trials, layout.p))
    group_draws = rng.choice(active, size=(trials, s), p=probs)
    u = rng.uniform(size=(trials, s, s0))
    cum = np.cumsum(np.abs(B), axis=1)
    cum = cum / cum[:, -1:].clip(min=1e-300)
    elements = np.sum(u[..., None] > cum[group_draws][:, :, None, :], axis=-1)  # (T, s, s0)
    flat_idx = group_draws[:, :, None] * layout.d + elements
    vals = (W / w[group_draws])[:, :, None] * l1[group_draws][:, :, None]
    vals = vals * np.sign(beta[flat_idx]) / (s * s0)
    rows = np.repeat(np.arange(trials), s * s0)
    np.add.at(Z, (rows, flat_idx.ravel()), vals.ravel())

    AZ = Z @ A.T
    lhs = np.sum(AZ**2, axis=1)
    z2 = np.sum(Z**2, axis=1)
    Abeta = A @ beta
    rhs = (1.0 - 1.0 / s) * float(Abeta @ Abeta) + W**2 / (s * s0)
    ez2_exact = (1.0 - 1.0 / s) * float(beta @ beta) + (W / (s * s0)) * float(
        np.sum(((s0 - 1) * l2[active] ** 2 + l1[active] ** 2) / w[active])
    )

    in_ds = True
    gcounts = np.linalg.norm(Z.reshape(trials, layout.m, layout.d), axis=2)
    if np.any(np.count_nonzero(gcounts, axis=1) > s):
        in_ds = False
    if np.any(np.count_nonzero(Z, axis=1) > s * s0):
        in_ds = False

    return MaureyReport(
        trials=trials,
        lhs_mean=float(np.mean(lhs)),
        lhs_se=float(np.std(lhs, ddof=1) / math.sqrt(trials)),
        rhs_bound=rhs,
        ez2_mean=float(np.mean(z2)),
        ez2_se=float(np.std(z2, ddof=1) / math.sqrt(trials)),
        ez2_exact=ez2_exact,
        all_in_ds=in_ds,
        theta=ds.value,
        theta_tilde=ds.value / math.sqrt(2.0),
        s_tilde=(s - 1) * ds.value**2 / (2.0 * (2.0 + c0) ** 2),
        weight_total=W,
    )
