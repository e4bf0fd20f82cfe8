import numpy as np
import pytest

from dsreg.errors import DimensionMismatch, WeightOrder
from dsreg.groups import GroupLayout
from dsreg.proxops import (
    dual_group_sorted,
    dual_sorted_l1,
    prox_combined_star,
    prox_group_l2,
    prox_group_sorted,
    prox_l1,
    prox_sorted_l1,
    prox_sparse_group,
)

from oracles import (
    brute_force_prox,
    combined_star_penalty_batch,
    sorted_l1_penalty_batch,
    sparse_group_penalty_batch,
)


def test_prox_l1_examples():
    assert prox_l1(np.array([3.0, -1.0]), 1.0).tolist() == [2.0, 0.0]
    x = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(prox_l1(x, 0.0), x)


def test_prox_l1_matches_oracle():
    rng = np.random.default_rng(0)
    layout = GroupLayout(m=1, d=2)
    for _ in range(5):
        x = 3 * rng.standard_normal(2)
        got = prox_l1(x, 0.7)
        expected = brute_force_prox(x, sparse_group_penalty_batch(0.7, 0.0, 1, 2))
        assert np.allclose(got, expected, atol=1e-7)


def test_prox_group_l2_boundary():
    layout = GroupLayout(m=1, d=2)
    assert prox_group_l2(np.array([3.0, 4.0]), 5.0, layout).tolist() == [0.0, 0.0]
    out = prox_group_l2(np.array([3.0, 4.0]), 2.5, layout)
    assert np.allclose(out, [1.5, 2.0])


def test_prox_sparse_group_example():
    layout = GroupLayout(m=1, d=2)
    out = prox_sparse_group(np.array([3.0, 1.0]), 1.0, 1.0, layout)
    assert np.allclose(out, [1.0, 0.0])
    x = np.array([0.5, -2.0])
    assert np.array_equal(prox_sparse_group(x, 0.0, 0.0, layout), x)
    assert not prox_sparse_group(np.zeros(2), 1.0, 1.0, layout).any()


def test_prox_sorted_l1_examples():
    out = prox_sorted_l1(np.array([3.0, 3.0]), np.array([2.0, 1.0]))
    assert np.allclose(out, [1.5, 1.5])
    # constant weights reduce to plain soft thresholding
    rng = np.random.default_rng(1)
    x = rng.standard_normal(6)
    assert np.allclose(prox_sorted_l1(x, np.full(6, 0.4)), prox_l1(x, 0.4))
    assert not prox_sorted_l1(np.zeros(4), np.array([2.0, 1.5, 1.0, 0.5])).any()
    with pytest.raises(WeightOrder):
        prox_sorted_l1(x, np.arange(6.0))


def test_prox_sorted_l1_order_and_sign_preserving():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = 7
        lam = np.sort(rng.uniform(0, 1, p))[::-1]
        x = rng.standard_normal(p) * 3
        out = prox_sorted_l1(x, lam)
        assert np.all(out * np.sign(x) >= -1e-12)
        # if |x_i| >= |x_j| then |out_i| >= |out_j|
        order = np.argsort(-np.abs(x), kind="stable")
        sorted_out = np.abs(out)[order]
        assert np.all(np.diff(sorted_out) <= 1e-12)


def test_prox_sorted_l1_matches_oracle():
    rng = np.random.default_rng(3)
    for p in (2, 4):
        for _ in range(10):
            lam = np.sort(rng.uniform(0.1, 1.5, p))[::-1]
            x = 3 * rng.standard_normal(p)
            got = prox_sorted_l1(x, lam)
            expected = brute_force_prox(x, sorted_l1_penalty_batch(lam), rng=rng)
            assert np.allclose(got, expected, atol=2e-7), (x, lam)


def test_prox_group_sorted_matches_oracle():
    rng = np.random.default_rng(4)
    layout = GroupLayout(m=2, d=2)
    for _ in range(10):
        lam = np.sort(rng.uniform(0.1, 1.0, 2))[::-1]
        x = 2 * rng.standard_normal(4)
        got = prox_group_sorted(x, lam, layout)
        expected = brute_force_prox(
            x, combined_star_penalty_batch(np.zeros(4), lam, 2, 2), rng=rng
        )
        assert np.allclose(got, expected, atol=2e-7)


def test_prox_combined_star_trivial_cases():
    layout = GroupLayout(m=2, d=2)
    lam_e = np.array([2.0, 1.5, 1.0, 0.5])
    lam_g = np.array([1.0, 0.5])
    x = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.array_equal(prox_combined_star(x, np.zeros(4), np.zeros(2), layout), x)
    assert not prox_combined_star(np.zeros(4), lam_e, lam_g, layout).any()


def test_prox_combined_star_matches_oracle():
    rng = np.random.default_rng(5)
    layout = GroupLayout(m=2, d=2)
    for _ in range(10):
        lam_g0 = np.sort(rng.uniform(0.1, 1.0, 2))[::-1]
        lam_e = np.sort(rng.uniform(0.1, 1.5, 4))[::-1]
        x = 2.5 * rng.standard_normal(4)
        got = prox_combined_star(x, lam_e, lam_g0, layout, tol=1e-13)
        expected = brute_force_prox(
            x, combined_star_penalty_batch(lam_e, lam_g0, 2, 2), rng=rng
        )
        assert np.allclose(got, expected, atol=1e-6), (x, lam_e, lam_g0)


def test_firm_nonexpansiveness():
    rng = np.random.default_rng(6)
    layout = GroupLayout(m=3, d=2)
    lam_e = np.sort(rng.uniform(0.1, 1.0, 6))[::-1]
    lam_g = np.sort(rng.uniform(0.1, 1.0, 3))[::-1]
    operators = [
        lambda v: prox_l1(v, 0.5),
        lambda v: prox_group_l2(v, 0.5, layout),
        lambda v: prox_sparse_group(v, 0.3, 0.4, layout),
        lambda v: prox_sorted_l1(v, lam_e),
        lambda v: prox_group_sorted(v, lam_g, layout),
        lambda v: prox_combined_star(v, lam_e, lam_g, layout),
    ]
    for _ in range(30):
        x = rng.standard_normal(6) * 2
        y = rng.standard_normal(6) * 2
        for op in operators:
            assert np.linalg.norm(op(x) - op(y)) <= np.linalg.norm(x - y) + 1e-9


def test_dual_norms():
    lam = np.array([2.0, 1.0, 0.5])
    # dual norm is 1 exactly on subgradients of the primal norm at generic points
    g = np.array([2.0, -1.0, 0.5])  # aligned with sorted weights
    assert dual_sorted_l1(g, lam) == pytest.approx(1.0)
    assert dual_sorted_l1(np.zeros(3), lam) == 0.0
    layout = GroupLayout(m=3, d=1)
    assert dual_group_sorted(g, lam, layout) == pytest.approx(1.0)
    # generalized Hoelder: <g, u> <= dual(g) * norm(u)
    rng = np.random.default_rng(7)
    from dsreg.penalties import norm_sorted_l1

    for _ in range(100):
        g = rng.standard_normal(3)
        u = rng.standard_normal(3)
        assert abs(g @ u) <= dual_sorted_l1(g, lam) * norm_sorted_l1(u, lam) + 1e-12
