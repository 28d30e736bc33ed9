import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from unifgamma import GaussianDrawConfig, SpaceSpec
from unifgamma.errors import DomainError, UnsupportedStructureError
from unifgamma.families import (CONVERGENT, NOT_UNIF, OperatorFamily, block_index, default_cuts,
                                dominated_check, fatou_union_bound, gamma_bound_vs_unif,
                                permanence_convex, shift_functional, shift_orbit_divergence,
                                shift_witness_powers, unif_gamma_lower)
from unifgamma.gamma_norm import ColumnOperator, mixed_gaussian_sum_sq


def diag_family(rows):
    return OperatorFamily([ColumnOperator.diagonal(r) for r in rows])


def test_projection_family_bound_and_tails():
    rep = unif_gamma_lower(OperatorFamily.projection_family(100))
    assert rep.lower_bound == rep.upper_bound == 100.0
    assert rep.verdict == NOT_UNIF
    assert rep.tail_values == [100 - c + 1 for c in rep.cuts]


def test_rank_one_family_value():
    h = 2.0 ** (-np.arange(20) / 2)
    rep = unif_gamma_lower(OperatorFamily.rank_one_family(h, 4))
    assert rep.standard_lower == pytest.approx(2 * (1 - 2.0**-20), rel=1e-12)


def test_single_operator_family_is_its_gamma_norm():
    V = np.random.default_rng(1).standard_normal((5, 7))
    rep = unif_gamma_lower(OperatorFamily([ColumnOperator(V)]))
    assert rep.standard_lower == pytest.approx(np.sum(V**2), rel=1e-12)
    assert rep.lower_bound <= rep.upper_bound * (1 + 1e-12)


def test_summable_diagonal_family_converges():
    a = 1 / np.arange(1, 65)
    rep = unif_gamma_lower(diag_family([a, a / 2]), n_rotations=0)
    assert rep.lower_bound == pytest.approx(math.fsum(a**2), rel=1e-12)
    assert rep.verdict == CONVERGENT


def test_rotation_witness_reproducible():
    F = OperatorFamily.projection_family(16)
    rep = unif_gamma_lower(F, cfg=GaussianDrawConfig(4), n_rotations=4)
    B = rep.witness.basis_matrix(16, False)
    seq = [F[i] for i in rep.witness.members]
    again = mixed_gaussian_sum_sq(seq, None if rep.witness.basis == "standard" else B)
    assert again.mean == pytest.approx(rep.lower_bound, rel=1e-10)


def test_default_cuts():
    assert default_cuts(100) == [1, 2, 4, 8, 16, 32, 64, 100]
    assert default_cuts(64) == [1, 2, 4, 8, 16, 32, 64]


def test_c0_family_uses_monte_carlo():
    F = OperatorFamily([ColumnOperator.diagonal([1.0, 1.0], SpaceSpec.c0("real"))])
    rep = unif_gamma_lower(F, cfg=GaussianDrawConfig(2, 100_000, 20), cuts=[])
    assert abs(rep.lower_bound - (1 + 2 / math.pi)) <= 4 * rep.lower_std_error
    assert math.isinf(rep.upper_bound)


# -- shift orbit ---------------------------------------------------------------

def brute_block_moment(n):
    m = 2**n
    coef = shift_functional(n)
    start = block_index(m)
    return sum(coef.get(start + j + (m - j), 0.0) ** 2 for j in range(1, m + 1))


def test_block_index_recursion():
    M = [block_index(n) for n in range(1, 10)]
    assert M[0] == 1 and all(M[i + 1] == M[i] + i + 1 for i in range(8))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_shift_blocks_match_brute_force(n):
    b = shift_orbit_divergence(n)[-1]
    assert b.block_second_moment == pytest.approx(brute_block_moment(n), rel=1e-15)
    assert b.block_value == pytest.approx(n**-2 * 2 ** (n / 2), rel=1e-12)


def test_shift_powers_and_bounds():
    assert list(shift_witness_powers(4)) == [3, 2, 1, 0]
    with pytest.raises(DomainError):
        shift_orbit_divergence(25)


def test_shift_orbit_family_on_dense_operator():
    # the materialized orbit of a rank-one functional has the same block value
    n = 2
    coef = shift_functional(n)
    dim_in = max(coef) + 8
    row = np.zeros(dim_in)
    for i, c in coef.items():
        row[i - 1] = c
    F = OperatorFamily.shift_orbit(ColumnOperator(row.reshape(1, -1)), 2**n)
    m, start = 2**n, block_index(2**n)
    seq = [F[int(p)] for p in shift_witness_powers(m)]
    V = np.array([seq[j - 1].toarray()[0, start + j - 1] for j in range(1, m + 1)])
    assert math.sqrt(np.sum(V**2)) == pytest.approx(shift_orbit_divergence(n)[-1].block_value)


# -- permanence properties ------------------------------------------------------

small_diag = st.lists(st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6),
                      min_size=1, max_size=4)


@settings(max_examples=25, deadline=None)
@given(small_diag, st.integers(0, 10**6))
def test_convex_hull_does_not_increase_bound(rows, seed):
    F = diag_family([np.array(r) for r in rows])
    w = np.random.default_rng(seed).dirichlet(np.ones(len(F)), size=3)
    rep = permanence_convex(F, w, N=6)
    assert rep.holds and rep.hull_bound <= rep.family_bound * (1 + 1e-12) + 1e-12


@settings(max_examples=25, deadline=None)
@given(small_diag, small_diag)
def test_union_bound_at_least_each_part(a, b):
    F, G = diag_family([np.array(r) for r in a]), diag_family([np.array(r) for r in b])
    u = unif_gamma_lower(F.union(G), n_rotations=0).lower_bound
    assert u >= unif_gamma_lower(F, n_rotations=0).lower_bound * (1 - 1e-12)
    assert u >= unif_gamma_lower(G, n_rotations=0).lower_bound * (1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(small_diag)
def test_fatou_nested_chain(rows):
    members = [ColumnOperator.diagonal(np.array(r)) for r in rows]
    chain = [OperatorFamily(members[: i + 1]) for i in range(len(members))]
    rep = fatou_union_bound(chain)
    assert rep.holds
    assert rep.member_bounds == sorted(rep.member_bounds)


def test_fatou_rejects_non_nested():
    A = OperatorFamily([ColumnOperator.diagonal([1.0, 0.0])])
    B = OperatorFamily([ColumnOperator.diagonal([0.0, 1.0])])
    with pytest.raises(DomainError):
        fatou_union_bound([A, B])


def test_fatou_c0_reports_no_verdict():
    chain = [OperatorFamily.projection_family(8, SpaceSpec.c0("real"))]
    rep = fatou_union_bound(chain, GaussianDrawConfig(0, 2_000, 20), cuts=[1, 8])
    assert rep.holds is None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 2), min_size=5, max_size=5), st.floats(0, 1))
def test_domination(s, shrink):
    S = ColumnOperator.diagonal(np.array(s))
    F = OperatorFamily([ColumnOperator.diagonal(shrink * np.array(s)), ColumnOperator.diagonal(-np.array(s))])
    rep = dominated_check(F, S)
    assert rep.dominated
    if max(s) > 0:
        bigger = OperatorFamily([ColumnOperator.diagonal(2 * np.array(s))])
        assert not dominated_check(bigger, S).dominated


def test_domination_needs_monomial_structure():
    S = ColumnOperator(np.ones((2, 2)))
    with pytest.raises(UnsupportedStructureError):
        dominated_check(OperatorFamily([S]), S)


def test_rademacher_ratio_below_uniform_bound():
    F = OperatorFamily([ColumnOperator(np.random.default_rng(i).standard_normal((4, 4))) for i in range(3)])
    rep = gamma_bound_vs_unif(F, GaussianDrawConfig(0, 2_000, 20), n_trials=5)
    assert rep.R_lower <= math.sqrt(math.pi / 2) * rep.unif_upper + 4 * rep.std_error
    assert rep.R_lower >= max(np.linalg.norm(T.toarray(), 2) for T in F) * (1 - 1e-9)


def test_dedupe_by_fingerprint():
    T = ColumnOperator(sparse.eye_array(3))
    assert len(OperatorFamily([T, T.scaled(1.0), T.scaled(2.0)])) == 2
