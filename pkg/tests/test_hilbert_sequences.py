import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from unifgamma.errors import DomainError
from unifgamma.hilbert_sequences import (HilbertSequenceSpec, QuadratureAccuracyWarning, geometric_phi, gram,
                                         gram_matrix, hilbert_sequence_gaussian_transfer, line_constant,
                                         modulated_bound, phi_bound, phi_majorizes, power_scaled_phi,
                                         properly_spaced_margin, ray_grid_hilbert_bound)


def quad_inner(spec, i, j):
    """``int_0^inf f_i conj(f_j)`` by adaptive quadrature on a truncated range."""
    top = 60.0 / min(spec.rates().real)
    f = lambda t, part: part(spec.evaluate([t])[i, 0] * np.conj(spec.evaluate([t])[j, 0]))
    pts = np.geomspace(top * 1e-9, top, 40)
    re = integrate.quad(f, 0, top, args=(np.real,), points=pts[:-1], limit=400, epsabs=1e-13)[0]
    im = integrate.quad(f, 0, top, args=(np.imag,), points=pts[:-1], limit=400, epsabs=1e-13)[0]
    return re + 1j * im


@pytest.mark.parametrize("spec", [
    HilbertSequenceSpec.pure_exp([1.0, 2.0 + 1j, 3.5], normalized=True),
    HilbertSequenceSpec.modulated(1.0, 0.25, -2, 2),
    HilbertSequenceSpec.power_scaled(0.5, 1.0, 0.4, -2, 2),
    HilbertSequenceSpec.power_scaled(0.3, 2.0, 0.0, -1, 3),
])
def test_gram_entries_match_quadrature(spec):
    G = gram_matrix(spec)
    for i, j in [(0, 0), (0, 1), (1, 2), (2, 0)]:
        assert G[i, j] == pytest.approx(quad_inner(spec, i, j), rel=1e-7, abs=1e-10)


def test_pure_exp_two_point_norm():
    # G = [[1/2, 1/3], [1/3, 1/4]]: trace 3/4, determinant 1/72
    top = (0.75 + math.sqrt(0.75**2 - 4 / 72)) / 2
    assert gram(HilbertSequenceSpec.pure_exp([1, 2])).op_norm_sqrt == pytest.approx(math.sqrt(top), rel=1e-14)


def test_modulated_bound_value():
    assert modulated_bound(1.0) == pytest.approx(1.0754150, rel=1e-7)
    assert gram(HilbertSequenceSpec.modulated(1.0, 0.9, -128, 128)).op_norm_sqrt <= modulated_bound(1.0)


def test_phi_bound_arithmetic():
    assert phi_bound([1.0, 0.5]) == pytest.approx(math.sqrt(2.0))
    assert phi_bound([1.0], tail=math.inf) == math.inf
    with pytest.raises(DomainError):
        phi_bound([-1.0])
    _, b = geometric_phi(1.0, 0.5)
    assert b == pytest.approx(math.sqrt(3.0))


def test_power_scaled_phi_is_one_plus_sqrt2_at_half():
    assert power_scaled_phi(HilbertSequenceSpec.power_scaled(0.5, 1, 0, 0, 8))[1] == pytest.approx(1 + math.sqrt(2))


def test_ray_grid_and_line_constants():
    assert ray_grid_hilbert_bound(4.0) == pytest.approx(math.sqrt(3.0))
    assert ray_grid_hilbert_bound(4.0, 0.3, 2) == pytest.approx(math.sqrt(2 * 3.0 / math.cos(0.3)))
    assert line_constant(1.0) == pytest.approx(math.sqrt(2 * math.pi / (1 - math.exp(-2 * math.pi))))


def test_properly_spaced_margins():
    assert properly_spaced_margin(2.0 ** np.arange(1, 20)).margin == pytest.approx(1 / 3)
    assert properly_spaced_margin(np.arange(1, 51)).margin == pytest.approx(1 / 99)
    assert properly_spaced_margin([1.0, 1.0]).degenerate


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.1, 10), st.floats(-1.4, 1.4), st.integers(-6, 4), st.integers(1, 40))
def test_power_scaled_majorant_holds(alpha, r, theta, n_min, width):
    spec = HilbertSequenceSpec.power_scaled(alpha, r, theta, n_min, n_min + width)
    phi, bound = power_scaled_phi(spec)
    assert phi_majorizes(spec, phi)
    assert gram(spec).op_norm_sqrt <= bound * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3), st.floats(0, 0.99), st.integers(0, 30), st.integers(1, 30))
def test_gram_psd_and_monotone_in_window(b, rho, half, extra):
    small = gram(HilbertSequenceSpec.modulated(b, rho, -half, half))
    big = gram(HilbertSequenceSpec.modulated(b, rho, -half - extra, half + extra))
    assert small.min_eigenvalue >= -1e-10 and big.min_eigenvalue >= -1e-10
    assert big.op_norm_sqrt >= small.op_norm_sqrt * (1 - 1e-12)
    assert big.op_norm_sqrt <= modulated_bound(b) * (1 + 1e-9)


def test_transfer_matches_closed_form():
    lam = np.array([0.5, 1.0, 2.0, 4.0])
    spec = HilbertSequenceSpec.pure_exp(lam, normalized=True)
    kernel = lambda t: np.vstack([np.exp(-t), np.exp(-3 * t)])
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuadratureAccuracyWarning)
        rep = hilbert_sequence_gaussian_transfer(kernel, spec, decay=1.0)
    # T f_n = (w_n / (1 + l_n), w_n / (3 + l_n)); ||T||_gamma^2 = 1/2 + 1/6
    exact = math.fsum(lam * (1 / (1 + lam) ** 2 + 1 / (3 + lam) ** 2))
    assert rep.estimate.mean == pytest.approx(exact, rel=1e-10)
    assert rep.gamma_norm_sq == pytest.approx(2 / 3, rel=1e-10)
    assert rep.estimate.mean <= rep.bound


def test_window_limit():
    with pytest.raises(DomainError):
        gram(HilbertSequenceSpec.modulated(1.0, 0.0, 0, 5000))
