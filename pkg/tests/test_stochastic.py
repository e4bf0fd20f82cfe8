import math
from itertools import combinations

import numpy as np
import pytest
from scipy.stats import ortho_group

from dsreg.errors import CapExceeded, ConditionViolated, DimensionMismatch
from dsreg.groups import GroupLayout, SparsityBudget
from dsreg.penalties import make_weights
from dsreg.stochastic import (
    adversarial_directions,
    clopper_pearson,
    compute_noise_functionals,
    compute_phi,
    envelope_values,
    event_omega,
    gauss_bound_suite,
    psi1,
    psi2,
    tail_suite,
    upsilons,
)

PHI_EXAMPLE = np.array([[3.0, 1.0], [0.0, 2.0]])  # columns (3,0) and (1,2)


def _orthonormal_design(n, p, seed=0):
    Q = ortho_group.rvs(dim=n, random_state=seed)[:, :p]
    return math.sqrt(n) * Q


def _psi1_oracle(Phi, s, s0):
    d, m = Phi.shape
    best = 0.0
    for groups in combinations(range(m), s):
        union = np.abs(Phi[:, groups]).ravel() ** 2
        union.sort()
        best = max(best, float(np.sum(union[-s * s0 :])))
    return best / (s * s0)


def _upsilon_small_oracle(Phi, s, s0):
    d, m = Phi.shape
    best = 0.0
    for groups in combinations(range(m), s):
        union = np.sort(np.abs(Phi[:, groups]).ravel())[::-1]
        best = max(best, union[s * s0 - 1])
    return best


def test_compute_phi_examples():
    layout = GroupLayout(m=2, d=1)
    X = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert not compute_phi(X, np.zeros(2), layout).any()
    layout1 = GroupLayout(m=1, d=1)
    X1 = np.array([[1.0]])
    xi = np.array([0.7])
    assert compute_phi(X1, xi, layout1)[0, 0] == pytest.approx(0.7)
    rng = np.random.default_rng(0)
    layout = GroupLayout(m=3, d=2)
    X = rng.standard_normal((9, layout.p))
    xi = rng.standard_normal(9)
    Phi = compute_phi(X, xi, layout)
    direct = (xi @ X) / 3.0  # independent dense product, sqrt(9) = 3
    assert np.allclose(Phi, direct.reshape(3, 2).T)


def test_psi2_examples():
    assert psi2(PHI_EXAMPLE, s=1, s0=2) == pytest.approx(4.5)
    assert psi2(PHI_EXAMPLE, s=2, s0=1) == pytest.approx(6.5)
    assert psi2(np.zeros((3, 4)), 2, 2) == 0.0


def test_psi1_examples():
    assert psi1(PHI_EXAMPLE, s=2, s0=1) == pytest.approx(6.5)
    rng = np.random.default_rng(1)
    # Psi_1 = Psi_2 when s0 = d
    for _ in range(20):
        Phi = rng.standard_normal((3, 4))
        assert psi1(Phi, 2, 3) == pytest.approx(psi2(Phi, 2, 3))
    with pytest.raises(CapExceeded):
        psi1(rng.standard_normal((2, 30)), 15, 1, cap=10)
    with pytest.raises(DimensionMismatch):
        psi1(PHI_EXAMPLE, 1, 1, mode="nope")


def test_psi1_matches_enumeration_oracle():
    rng = np.random.default_rng(2)
    for _ in range(30):
        Phi = rng.standard_normal((3, 4))
        for s, s0 in [(1, 1), (2, 2), (3, 1), (2, 3)]:
            assert psi1(Phi, s, s0) == pytest.approx(_psi1_oracle(Phi, s, s0))
            assert psi1(Phi, s, s0, mode="greedy") <= psi1(Phi, s, s0) + 1e-12


def test_psi_ordering_random():
    rng = np.random.default_rng(3)
    for _ in range(300):
        Phi = rng.standard_normal((4, 5))
        for s, s0 in [(1, 2), (2, 2), (3, 1)]:
            assert psi2(Phi, s, s0) <= psi1(Phi, s, s0) + 1e-12


def test_upsilons_examples():
    ups, upss = upsilons(PHI_EXAMPLE, s0=2)
    assert ups[0] == pytest.approx(3.0)
    assert ups[1] == pytest.approx(math.sqrt(5.0))
    assert upss[0] == pytest.approx(1.0)  # best group's 2nd largest magnitude
    ups0, upss0 = upsilons(np.zeros((2, 3)), s0=1)
    assert not ups0.any() and not upss0.any()


def test_upsilon_small_matches_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(30):
        Phi = rng.standard_normal((3, 4))
        for s0 in (1, 2, 3):
            _, upss = upsilons(Phi, s0)
            for s in range(1, 5):
                assert upss[s - 1] == pytest.approx(_upsilon_small_oracle(Phi, s, s0))


def test_upsilon_monotone_and_envelopes():
    rng = np.random.default_rng(5)
    for _ in range(200):
        Phi = rng.standard_normal((4, 6))
        for s0 in (1, 2, 4):
            ups, upss = upsilons(Phi, s0)
            assert np.all(np.diff(upss) <= 1e-12)  # upsilon_s non-increasing
            for s in range(1, 7):
                assert ups[s - 1] ** 2 <= s0 * psi2(Phi, s, s0) + 1e-9
                assert upss[s - 1] ** 2 <= psi1(Phi, s, s0) + 1e-9


def test_psi_invariance_under_permutations():
    rng = np.random.default_rng(6)
    Phi = rng.standard_normal((4, 5))
    s, s0 = 2, 2
    base1, base2 = psi1(Phi, s, s0), psi2(Phi, s, s0)
    # within-group row permutation (per column) and group reordering
    Phi_rows = Phi.copy()
    for j in range(5):
        Phi_rows[:, j] = rng.permutation(Phi_rows[:, j])
    assert psi1(Phi_rows, s, s0) == pytest.approx(base1)
    assert psi2(Phi_rows, s, s0) == pytest.approx(base2)
    Phi_cols = Phi[:, rng.permutation(5)]
    assert psi1(Phi_cols, s, s0) == pytest.approx(base1)
    assert psi2(Phi_cols, s, s0) == pytest.approx(base2)


def test_noise_functionals_bundle():
    rng = np.random.default_rng(7)
    layout = GroupLayout(m=4, d=3)
    X = rng.standard_normal((20, layout.p))
    xi = rng.standard_normal(20)
    nf = compute_noise_functionals(X, xi, layout, s0=2)
    assert nf.psi1.shape == (4,)
    assert np.all(nf.psi2 <= nf.psi1 + 1e-12)
    assert np.all(np.diff(nf.upsilon_small) <= 1e-12)


def test_event_omega():
    layout = GroupLayout(m=3, d=2)
    w = make_weights(layout, s0=2, sigma=1.0)
    assert event_omega(np.zeros((2, 3)), w)
    Phi = np.zeros((2, 3))
    Phi[0, 0] = 10.0 * math.sqrt(2) * w.lambda_group[0]
    assert not event_omega(Phi, w)


def test_event_omega_monte_carlo():
    layout = GroupLayout(m=6, d=4)
    w = make_weights(layout, s0=2, sigma=1.0)
    n = 32
    X = _orthonormal_design(n, layout.p, seed=1)
    rng = np.random.default_rng(8)
    hits = 0
    trials = 300
    for _ in range(trials):
        xi = rng.standard_normal(n)
        hits += event_omega(compute_phi(X, xi, layout), w)
    lo, _ = clopper_pearson(hits, trials)
    assert lo >= 0.5  # the bound P(Omega) >= 1/2 holds with slack here


def test_tail_suite_basics():
    layout = GroupLayout(m=4, d=3)
    budget = SparsityBudget(2, 2)
    n = 16
    X = _orthonormal_design(n, layout.p, seed=2)
    reports = tail_suite(X, layout, budget, sigma=1.0, trials=50, seed=9)
    r3 = tail_suite(X, layout, budget, sigma=3.0, trials=50, seed=9)
    for fam in ("S1", "S2"):
        assert reports[fam].trials == 50
        # sigma invariance, bitwise
        assert np.array_equal(reports[fam].values, r3[fam].values)
        assert reports[fam].exceed_count == r3[fam].exceed_count
        assert reports[fam].tight_threshold <= reports[fam].threshold
    with pytest.raises(DimensionMismatch):
        tail_suite(X, layout, budget, 1.0, trials=0)
    bad = 3.0 * X
    with pytest.raises(ConditionViolated):
        tail_suite(bad, layout, budget, 1.0, trials=5)


def test_envelope_values_batches():
    layout = GroupLayout(m=3, d=2)
    w = make_weights(layout, s0=2, sigma=1.0)
    rng = np.random.default_rng(10)
    U = rng.standard_normal((50, layout.p))
    from dsreg.penalties import envelope_N

    vals = envelope_values(U, w, n=25)
    for i in range(0, 50, 7):
        assert vals[i] == pytest.approx(envelope_N(U[i], w, n=25))


def test_adversarial_directions_contains_phi():
    layout = GroupLayout(m=3, d=2)
    rng = np.random.default_rng(11)
    Phi = rng.standard_normal((2, 3))
    cands = adversarial_directions(Phi, layout)
    phi_vec = layout.to_vector(Phi)
    assert any(np.allclose(c, phi_vec) for c in cands)
    assert cands.shape[1] == layout.p


def test_gauss_bound_suite_small():
    layout = GroupLayout(m=6, d=4)
    budget = SparsityBudget(2, 2)
    w = make_weights(layout, s0=2, sigma=1.0)
    n = 32
    X = _orthonormal_design(n, layout.p, seed=3)
    report = gauss_bound_suite(
        X, w, budget, draws=25, n_directions=500, delta0s=(0.1,), seed=12
    )
    assert report.draws == 25
    assert report.theorem1_violations == 0
    assert np.all(report.sup_values[report.omega_flags] <= 4.0)
    assert report.theorem2[0.1]["rate"] <= 0.1 / 2 + 0.2
    # reproducibility
    again = gauss_bound_suite(X, w, budget, draws=25, n_directions=500, delta0s=(0.1,), seed=12)
    assert np.array_equal(report.sup_values, again.sup_values)
