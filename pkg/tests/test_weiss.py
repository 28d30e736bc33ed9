import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from unifgamma import GaussianDrawConfig
from unifgamma.errors import DomainError, StabilityError, UnsupportedStructureError
from unifgamma.series import (CONVERGENT, DIVERGENT, FINITE, SmoothSum, classify, em_sum, evaluate_series,
                              first_crossing)
from unifgamma.weiss import (CONSISTENT, NOT_APPLICABLE, WITNESS_FOUND, DiagonalSystem, OffDiagonalSystem,
                             chain_constants, factor_four_identity, half_power_gamma,
                             invariant_measure_quantity, off_diagonal_conditions,
                             off_diagonal_contrapositive_run, ou_simulate, resolvent_family_bounds,
                             resolvent_sup_quantity, weiss_equivalence_report)


# -- series helpers --------------------------------------------------------------

def test_classify_harmonic_and_basel():
    sched = [2**j for j in range(10, 18)]
    harm = evaluate_series(lambda k: 1 / k, sched[-1], sched)
    basel = evaluate_series(lambda k: 1 / k**2, sched[-1], sched)
    assert harm.trend == DIVERGENT and basel.trend == CONVERGENT
    assert basel.value == pytest.approx(math.pi**2 / 6 - 1 / sched[-1], abs=1e-9)


def test_finite_support_reported_as_finite():
    r = evaluate_series(lambda k: np.ones_like(k), 100, max_terms=10)
    assert r.trend == FINITE and r.value == 10.0


def test_classify_needs_persistent_growth():
    assert classify([0, 1, 2, 3, 4, 5]) == DIVERGENT
    assert classify([0, 1, 2, 2.5, 2.75, 2.875]) == CONVERGENT


def test_smooth_sum_matches_direct_sum():
    g = lambda k: 1 / (k * np.log(k + 1) ** 2)
    S = SmoothSum(g, direct=2**12)
    K = 2**20 + 12345
    direct = math.fsum(g(np.arange(1, K + 1, dtype=float)))
    assert S(K) == pytest.approx(direct, rel=1e-12)
    assert em_sum(g, 100) == pytest.approx(math.fsum(g(np.arange(1, 101.0))), rel=1e-15)


@given(st.floats(1.0, 50.0))
def test_first_crossing_is_least(target):
    S = lambda K: float(K)
    K = first_crossing(S, target)
    assert S(K) >= target and (K == 1 or S(K - 1) < target)


# -- the three quantities ------------------------------------------------------------

SQUARES = DiagonalSystem(lambda k: k**2, 1.0, truncation=10_000)


def test_basel_partial_sums():
    N = 10_000
    assert half_power_gamma(SQUARES).value == pytest.approx(math.fsum(1 / np.arange(1, N + 1.0) ** 2), rel=1e-15)
    assert math.pi**2 / 6 - half_power_gamma(SQUARES).value == pytest.approx(1 / N, rel=1e-3)
    assert math.pi**2 / 12 - invariant_measure_quantity(SQUARES).value == pytest.approx(1 / (2 * N), rel=1e-3)


def test_resolvent_sup_closed_form_for_real_eigenvalues():
    # sup_t t / (t + l)^2 = 1 / (4 l)
    r = resolvent_sup_quantity(SQUARES)
    assert r.value == pytest.approx(half_power_gamma(SQUARES).value / 4, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 100), st.floats(-0.2, 0.2))
def test_resolvent_sup_by_grid_search(lam_abs, phase):
    lam = lam_abs * np.exp(1j * phase)
    sys_ = DiagonalSystem(np.array([lam]), np.array([1.0]))
    t = np.geomspace(lam_abs * 1e-3, lam_abs * 1e3, 200_001)
    brute = np.max(t / np.abs(t + lam) ** 2)
    assert resolvent_sup_quantity(sys_).value == pytest.approx(brute, rel=1e-6)


def test_factor_four():
    r = factor_four_identity(SQUARES)
    assert r.relative_gap <= 1e-12
    with pytest.raises(UnsupportedStructureError):
        factor_four_identity(DiagonalSystem(lambda k: k + 1j, 1.0, truncation=10))


@pytest.mark.parametrize("lam,beta,trend", [
    (lambda k: k, 1.0, DIVERGENT),
    (lambda k: k**2, 1.0, CONVERGENT),
    (lambda k: k * np.log(k + 1) ** 2, 1.0, CONVERGENT),
    (lambda k: k + 1j * k**2, lambda k: np.sqrt(k), None),
])
def test_equivalence_report(lam, beta, trend):
    rep = weiss_equivalence_report(DiagonalSystem(lam, beta))
    if trend is not None:
        assert rep.verdict == CONSISTENT and rep.invariant.trend == trend


def test_resolvent_bounds_bracket():
    rb = resolvent_family_bounds(DiagonalSystem(lambda k: k**2, 1.0, truncation=1000))
    assert rb.lower <= rb.upper
    assert rb.lower == pytest.approx(math.pi**2 / 24, rel=0.05)
    assert math.isinf(resolvent_family_bounds(DiagonalSystem(lambda k: k, 1.0, truncation=1000)).upper)


def test_domain_errors():
    with pytest.raises(DomainError):
        DiagonalSystem(lambda k: -k, 1.0)


# -- off-diagonal chain -------------------------------------------------------------

def test_chain_constants():
    c = chain_constants(1.0)
    assert c == {"C_delta": 2.0, "c_split": 0.5, "C_prime": 2.0}
    c = chain_constants(0.25)
    assert c["C_delta"] == 3.0 and c["C_prime"] == 6.0


def test_functional_and_array_paths_agree():
    f = off_diagonal_contrapositive_run(OffDiagonalSystem.diagonal_functional(DiagonalSystem(lambda k: k, 1.0)), [2])[0]
    k = np.arange(1, 64, dtype=float)
    a = off_diagonal_contrapositive_run(OffDiagonalSystem.from_diagonal(k, 1.0), [2])[0]
    assert f.verdict == a.verdict == WITNESS_FOUND
    assert f.K == a.K == 31
    assert f.witness_value == pytest.approx(a.witness_value, rel=1e-12)


def test_chain_not_applicable_for_convergent_series():
    tr = off_diagonal_contrapositive_run(OffDiagonalSystem.diagonal_functional(DiagonalSystem(lambda k: k**2, 1.0)), [2])
    assert tr[0].verdict == NOT_APPLICABLE


def test_genuinely_off_diagonal_system():
    n = 60
    lam = np.arange(1, n + 1, dtype=float)
    B = sparse.lil_array((n + 1, n))
    for k in range(n):
        B[k, k] = 1.0
        B[k + 1, k] = 0.5
    sets = [[k, k + 1] for k in range(1, n + 1)]
    sys_ = OffDiagonalSystem(B, lam, sets, delta=0.5, J=2)
    cond = off_diagonal_conditions(sys_)
    assert cond.delta_i_max == pytest.approx(0.5) and cond.worst_pair == (1, 2)
    tr = off_diagonal_contrapositive_run(sys_, [0.5])[0]
    assert tr.verdict == WITNESS_FOUND and tr.all_hold
    assert tr.witness_value >= tr.witness_target
    with pytest.raises(DomainError):
        off_diagonal_contrapositive_run(OffDiagonalSystem(B, lam, sets, delta=0.9, J=2), [0.5])


# -- Ornstein-Uhlenbeck ---------------------------------------------------------------

def test_ou_matches_exact_variance_before_stationarity():
    sys_ = DiagonalSystem(np.array([1.0, 4.0]), np.array([1.0, 2.0]))
    r = ou_simulate(sys_, 0.05, 0.3, 40_000, GaussianDrawConfig(3, 40_000, 20), check_fidelity=False)
    assert np.all(np.abs(r.variances - r.exact_at_T) <= 4 * r.std_errors)
    assert r.exact_at_T == pytest.approx([(1 - math.exp(-0.6)) / 2, 4 * (1 - math.exp(-2.4)) / 8])


def test_ou_step_size_irrelevant_for_exact_transition():
    sys_ = DiagonalSystem(np.array([2.0]), np.array([1.0]))
    coarse = ou_simulate(sys_, 1.0, 1.0, 40_000, GaussianDrawConfig(0, 40_000, 20), check_fidelity=False)
    assert abs(coarse.variances[0] - coarse.exact_at_T[0]) <= 4 * coarse.std_errors[0]


def test_ou_fidelity_guard_and_determinism():
    sys_ = DiagonalSystem(lambda k: k**2, 1.0, truncation=5)
    with pytest.raises(StabilityError):
        ou_simulate(sys_, 0.1, 1.0, 100)
    a = ou_simulate(sys_, 0.1, 1.0, 100, check_fidelity=False)
    b = ou_simulate(sys_, 0.1, 1.0, 100, check_fidelity=False)
    assert np.array_equal(a.variances, b.variances)
