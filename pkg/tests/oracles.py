"""Independent brute-force oracles.

These deliberately avoid the package's own algorithms: penalties are
evaluated from their definitions (sorting, norms), and minimizers are
located by a coarse product grid followed by local polish (Nelder-Mead
plus a multi-scale shrinking grid).  They are the arbiters for the prox
operators and the KKT machinery.
"""

import numpy as np
from itertools import product
from scipy.optimize import minimize


def sorted_l1_value(U, lam):
    """Row-wise sum_i lam_i |u|_(i) evaluated from the definition."""
    mags = np.sort(np.abs(U), axis=-1)[..., ::-1]
    return mags @ lam


def group_norms_batch(U, m, d):
    k = U.shape[0]
    return np.linalg.norm(U.reshape(k, m, d), axis=2)


def group_sorted_value(U, lam, m, d):
    norms = np.sort(group_norms_batch(U, m, d), axis=1)[:, ::-1]
    return norms @ lam


def prox_objective_factory(x, penalty_batch):
    """0.5 ||u - x||^2 + h(u) as a batched callable."""

    def objective(U):
        U = np.atleast_2d(U)
        return 0.5 * np.sum((U - x) ** 2, axis=1) + penalty_batch(U)

    return objective


def _grid_descend(objective, start, width, rounds, points=5, shrink=0.6):
    """Pattern search on the full {-1..1}^p product grid with shrinking width.

    The full product grid contains every diagonal direction, so tied
    coordinates (the ridges of sorted penalties) can move jointly; the
    width only shrinks, and the incumbent only improves.
    """
    p = start.shape[0]
    offsets = np.linspace(-1.0, 1.0, points)
    grid = np.array(list(product(offsets, repeat=p)))
    best = start
    best_val = float(objective(start[None, :])[0])
    for _ in range(rounds):
        cand = best + width * grid
        vals = objective(cand)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best, best_val = cand[k], float(vals[k])
        width *= shrink
    return best


def _line_minimize(objective, u, v, t_max):
    """Batched search for min_t f(u + t v) of a convex section.

    One coarse signed log-spaced sweep brackets the 1-d minimizer, then
    shrinking linear sweeps refine it.
    """
    mags = np.geomspace(1e-12, t_max, 40)
    ts = np.concatenate([-mags[::-1], [0.0], mags])
    vals = objective(u[None, :] + ts[:, None] * v[None, :])
    k = int(np.argmin(vals))
    t0, width = ts[k], (ts[min(k + 1, len(ts) - 1)] - ts[max(k - 1, 0)])
    for _ in range(12):
        ts = t0 + np.linspace(-width, width, 17)
        vals = objective(u[None, :] + ts[:, None] * v[None, :])
        k = int(np.argmin(vals))
        t0 = ts[k]
        width /= 6.0
    return u + t0 * v


def _tie_projected_direction(u, m, d, rng):
    """Random direction projected onto the kink manifold at u.

    Sorted penalties are nonsmooth where element magnitudes or group
    norms tie; descent directions there form a thin cone that isotropic
    directions miss.  Projecting onto the subspace that keeps tied
    magnitudes and tied group norms equal (to first order), with zero
    entries frozen, exposes those directions.
    """
    p = u.shape[0]
    mags = np.abs(u)
    scale = max(1.0, float(mags.max()))
    tol = 1e-6 * scale
    rows = []
    order = np.argsort(-mags)
    for i, j in zip(order[:-1], order[1:]):
        if mags[i] > tol and abs(mags[i] - mags[j]) < tol:
            r = np.zeros(p)
            r[i] = np.sign(u[i])
            r[j] = -np.sign(u[j])
            rows.append(r)
    gnorms = np.linalg.norm(u.reshape(m, d), axis=1)
    gorder = np.argsort(-gnorms)
    for a, b in zip(gorder[:-1], gorder[1:]):
        if gnorms[b] > tol and abs(gnorms[a] - gnorms[b]) < tol:
            r = np.zeros(p)
            r[a * d : (a + 1) * d] = u[a * d : (a + 1) * d] / gnorms[a]
            r[b * d : (b + 1) * d] = -u[b * d : (b + 1) * d] / gnorms[b]
            rows.append(r)
    v = rng.standard_normal(p)
    v[mags <= tol] = 0.0
    if rows:
        A = np.array(rows)
        v = v - A.T @ np.linalg.lstsq(A.T, v, rcond=None)[0]
    nv = np.linalg.norm(v)
    return v / nv if nv > 1e-12 else None


def _random_direction_polish(objective, u, rng, m, d, max_rounds=600, patience=80):
    """Line-search polish along random, axis, and tie-projected directions.

    Stops after ``patience`` consecutive non-improving directions.
    """
    p = u.shape[0]
    fu = float(objective(u[None, :])[0])
    stall = 0
    axes = np.eye(p)
    for it in range(max_rounds):
        mode = it % 3
        if mode == 0:
            v = rng.standard_normal(p)
            v /= np.linalg.norm(v)
        elif mode == 1:
            v = _tie_projected_direction(u, m, d, rng)
            if v is None:
                v = axes[it % p]
        else:
            v = axes[(it // 3) % p]
        cand = _line_minimize(objective, u, v, t_max=1.0 + np.linalg.norm(u))
        fc = float(objective(cand[None, :])[0])
        if fc < fu - 1e-15 * max(1.0, abs(fu)):
            u, fu = cand, fc
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                break
    return u


def brute_force_prox(x, penalty_batch, rng=None):
    """Grid + local polish minimizer of 0.5||u - x||^2 + h(u).

    A coarse product grid over [-r, r]^p localizes the basin; the local
    polish chains a shrinking full-grid pattern search with a
    random-direction line-search stage that handles the sorted-penalty
    ridges.  Accurate to ~1e-7 for p <= 6.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[0]
    objective = prox_objective_factory(x, penalty_batch)
    radius = float(np.max(np.abs(x))) + 1.0
    rng = np.random.default_rng(12345) if rng is None else rng

    offsets = np.linspace(-radius, radius, 7 if p <= 4 else 5)
    grid = np.array(list(product(offsets, repeat=p)))
    vals = objective(grid)
    best = grid[np.argmin(vals)]
    spacing = offsets[1] - offsets[0]

    def value(u):
        return float(objective(u[None, :])[0])

    best = _grid_descend(objective, best, spacing, rounds=30)
    polished = _random_direction_polish(objective, best, rng)
    final = _grid_descend(objective, polished, 1e-6, rounds=16)
    return final if value(final) < value(polished) else polished


def sparse_group_penalty_batch(lam, lam_g, m, d):
    def h(U):
        return lam * np.sum(np.abs(U), axis=1) + lam_g * np.sum(group_norms_batch(U, m, d), axis=1)

    return h


def sorted_l1_penalty_batch(lam):
    def h(U):
        return sorted_l1_value(U, lam)

    return h


def combined_star_penalty_batch(lam_elem, lam_group, m, d):
    def h(U):
        return sorted_l1_value(U, lam_elem) + group_sorted_value(U, lam_group, m, d)

    return h
