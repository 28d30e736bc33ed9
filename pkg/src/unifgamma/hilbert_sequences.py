"""Hilbert sequences of exponentials in L^2(R_+).

A Hilbert sequence ``(f_n)`` satisfies ``||sum a_n f_n||^2 <= C^2 sum |a_n|^2``;
on a finite window the least such ``C`` is the square root of the largest
Gram eigenvalue.  All Gram entries here come from closed-form integrals of
exponentials, so no quadrature enters the constants.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, InvalidInputError, InvariantViolation
from .gamma_norm import GaussianSumEstimate

MAX_WINDOW = 4096


class QuadratureAccuracyWarning(UserWarning):
    """Refining the time grid changed the result more than expected."""


@dataclass(frozen=True)
class HilbertSequenceSpec:
    """Parametric exponential system with an index window ``[n_min, n_max]``.

    ``pure_exp``: ``f_n(t) = w_n e^{-lambda_n t}`` with ``w_n = sqrt(Re lambda_n)``
    when ``normalized`` else 1 (indices ``1..len(lambdas)``).
    ``modulated``: ``f_n(t) = e^{-bt + 2 pi i (n + rho) t}``.
    ``power_scaled``: ``f_n(t) = mu_n^alpha e^{-mu_n t}``, ``mu_n = r 2^n e^{i theta}``.
    """

    kind: str
    n_min: int = 1
    n_max: int = 1
    lambdas: tuple = ()
    normalized: bool = False
    b: float = 1.0
    rho: float = 0.0
    alpha: float = 0.5
    r: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pure_exp", "modulated", "power_scaled"):
            raise InvalidInputError(f"unknown sequence kind {self.kind!r}")
        if self.n_max < self.n_min:
            raise DomainError("empty index window")
        if self.kind == "pure_exp":
            lam = np.asarray(self.lambdas, dtype=complex)
            if lam.size == 0 or np.any(lam.real <= 0):
                raise DomainError("pure exponentials need Re lambda > 0")
        elif self.kind == "modulated":
            if not self.b > 0 or not 0 <= self.rho < 1:
                raise DomainError("modulated sequence needs b > 0 and rho in [0, 1)")
        else:
            if not 0 < self.alpha <= 0.5 or not self.r > 0 or not abs(self.theta) < math.pi / 2:
                raise DomainError("power-scaled sequence needs alpha in (0, 1/2], r > 0, |theta| < pi/2")

    @classmethod
    def pure_exp(cls, lambdas, normalized=False) -> "HilbertSequenceSpec":
        lam = tuple(complex(x) for x in np.atleast_1d(lambdas))
        return cls("pure_exp", 1, len(lam), lambdas=lam, normalized=normalized)

    @classmethod
    def modulated(cls, b, rho=0.0, n_min=0, n_max=0) -> "HilbertSequenceSpec":
        return cls("modulated", n_min, n_max, b=float(b), rho=float(rho))

    @classmethod
    def power_scaled(cls, alpha=0.5, r=1.0, theta=0.0, n_min=0, n_max=0) -> "HilbertSequenceSpec":
        return cls("power_scaled", n_min, n_max, alpha=float(alpha), r=float(r), theta=float(theta))

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def rates(self) -> np.ndarray:
        """Complex exponents ``lambda_n`` with ``f_n = w_n e^{-lambda_n t}``."""
        if self.kind == "pure_exp":
            return np.asarray(self.lambdas, dtype=complex)
        n = self.indices()
        if self.kind == "modulated":
            return self.b - 2j * np.pi * (n + self.rho)
        return self.r * 2.0 ** n.astype(float) * np.exp(1j * self.theta)

    def weights(self) -> np.ndarray:
        lam = self.rates()
        if self.kind == "pure_exp":
            return np.sqrt(lam.real) if self.normalized else np.ones(lam.size)
        if self.kind == "modulated":
            return np.ones(lam.size)
        return lam ** self.alpha

    def evaluate(self, t) -> np.ndarray:
        """``f_n(t)`` as an array of shape (size, len(t))."""
        t = np.asarray(t, dtype=float)
        return self.weights()[:, None] * np.exp(-np.outer(self.rates(), t))


@dataclass
class GramSummary:
    dim: int
    entries: np.ndarray
    op_norm_sqrt: float
    min_eigenvalue: float

    def to_csv(self, path) -> None:
        """Row-major export; complex entries as ``re,im`` pairs."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.entries:
                w.writerow([f"{x:.17g}" for z in row for x in (z.real, z.imag)])


def gram_matrix(spec: HilbertSequenceSpec) -> np.ndarray:
    """``G[n, m] = [f_n, f_m] = int f_n conj(f_m)`` by closed forms."""
    if spec.size > MAX_WINDOW:
        raise DomainError(f"window of {spec.size} exceeds {MAX_WINDOW}")
    if spec.kind == "power_scaled":
        n = spec.indices().astype(float)
        d = n[:, None] - n[None, :]
        s = n[:, None] + n[None, :]
        e = np.exp(1j * spec.theta)
        # 2^{(d)/2} e^{i theta} + 2^{-d/2} e^{-i theta}, scaled so no power overflows
        denom = np.where(d >= 0,
                         2.0 ** (d / 2) * (e + 2.0 ** (-d) * np.conj(e)),
                         2.0 ** (-d / 2) * (2.0 ** d * e + np.conj(e)))
        return spec.r ** (2 * spec.alpha - 1) * 2.0 ** ((spec.alpha - 0.5) * s) / denom
    lam = spec.rates()
    w = spec.weights()
    return np.outer(w, np.conj(w)) / (lam[:, None] + np.conj(lam)[None, :])


def gram(spec: HilbertSequenceSpec) -> GramSummary:
    G = gram_matrix(spec)
    G = (G + G.conj().T) / 2
    ev = linalg.eigvalsh(G)
    top = float(ev[-1])
    if ev[0] < -1e-10 * max(1.0, top):
        raise InvariantViolation(f"Gram matrix not PSD: min eigenvalue {ev[0]}", witness=spec)
    return GramSummary(spec.size, G, math.sqrt(max(top, 0.0)), float(ev[0]))


def phi_bound(phi, tail: float = 0.0) -> float:
    """``sqrt(phi(0) + 2 sum_{j>=1} phi(j))`` with ``tail`` bounding ``sum_{j>J} phi(j)``.

    Returns ``inf`` when the declared tail is infinite (divergent majorant).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise DomainError("phi must be a nonempty array of finite nonnegative values")
    if tail < 0 or math.isnan(tail):
        raise DomainError("tail bound must be nonnegative")
    if math.isinf(tail):
        return math.inf
    return math.sqrt(phi[0] + 2 * (math.fsum(phi[1:]) + tail))


def geometric_phi(scale: float, q: float):
    """Majorant ``phi(j) = scale * q^j`` (``0 < q < 1``) and its bound."""
    if not 0 < q < 1:
        raise DomainError("geometric ratio must be in (0, 1)")
    phi = lambda j: scale * q ** np.asarray(j, dtype=float)
    return phi, math.sqrt(scale * (1 + 2 * q / (1 - q)))


def power_scaled_phi(spec: HilbertSequenceSpec):
    """Majorant ``phi(j) = kappa r^{2a-1} / cos(theta) * 2^{-a j}`` for ``power_scaled``.

    ``kappa = max(1, 2^{(2a-1) n_min})`` absorbs the growth of
    ``2^{(a-1/2)(n+m)}`` for negative indices when ``a < 1/2``.  Only the
    window's lowest index matters, so the bound stays valid on nested
    windows sharing ``n_min``.
    """
    if spec.kind != "power_scaled":
        raise InvalidInputError("power_scaled_phi needs a power_scaled spec")
    a = spec.alpha
    kappa = max(1.0, 2.0 ** ((2 * a - 1) * spec.n_min))
    scale = kappa * spec.r ** (2 * a - 1) / math.cos(spec.theta)
    return geometric_phi(scale, 2.0 ** (-a))


def ray_grid_hilbert_bound(q: float, theta: float = 0.0, rays: int = 1) -> float:
    """Hilbert-constant bound for ``sqrt(lambda_n) e^{-lambda_n t}``, ``lambda_n = r q^n e^{+-i theta}``.

    On one ray ``|[f_n, f_m]| <= q^{-|n-m|/2} / cos(theta)``; a union of
    ``rays`` sequences multiplies the squared constant by at most ``rays``.
    """
    if not q > 1:
        raise DomainError("grid ratio must exceed 1")
    if not abs(theta) < math.pi / 2:
        raise DomainError("|theta| must be below pi/2")
    _, b = geometric_phi(1 / math.cos(theta), q ** -0.5)
    return math.sqrt(rays) * b


def modulated_bound(b: float) -> float:
    """Closed-form Hilbert constant bound ``1/sqrt(1 - e^{-2b})`` (any rho)."""
    if not b > 0:
        raise DomainError("b must be positive")
    return 1.0 / math.sqrt(-math.expm1(-2 * b))


def line_constant(b: float) -> float:
    """``sqrt(2 pi e^{2 pi} / (e^{2 pi} - 1)) / sqrt(b)`` for the lattice with spacing ``b``."""
    if not b > 0:
        raise DomainError("b must be positive")
    return math.sqrt(2 * math.pi / -math.expm1(-2 * math.pi)) / math.sqrt(b)


def phi_majorizes(spec: HilbertSequenceSpec, phi: Callable, rtol: float = 1e-12) -> bool:
    """Entrywise check ``|G[n, m]| <= phi(|n - m|)`` on the window."""
    G = np.abs(gram_matrix(spec))
    n = spec.indices()
    return bool(np.all(G <= phi(np.abs(n[:, None] - n[None, :])) * (1 + rtol)))


@dataclass(frozen=True)
class PropSpacing:
    margin: float
    pair: tuple
    degenerate: bool


def properly_spaced_margin(lambdas) -> PropSpacing:
    """``min_{m != n} |(l_m - l_n) / (l_m + conj(l_n))|`` by exhaustive pair scan."""
    lam = np.asarray(lambdas, dtype=complex).ravel()
    if lam.size < 2:
        raise DomainError("need at least two points")
    if np.any(lam.real <= 0):
        raise DomainError("points must lie in the open right half-plane")
    best, pair = math.inf, (0, 1)
    for i in range(lam.size - 1):
        q = np.abs((lam[i + 1:] - lam[i]) / (lam[i + 1:] + np.conj(lam[i])))
        j = int(np.argmin(q))
        if q[j] < best:
            best, pair = float(q[j]), (i, i + 1 + j)
    return PropSpacing(best, pair, best == 0.0)


# -- Gaussian sums over Hilbert-sequence images ------------------------------

@dataclass
class TransferReport:
    estimate: GaussianSumEstimate   # E||sum_n g_n T f_n||^2
    gamma_norm_sq: float            # ||T||^2_gamma
    hilbert_constant: float         # window Gram bound used in the check
    bound: float                    # C^2 ||T||^2_gamma
    closed_form_constant: float     # analytic bound for the infinite sequence (inf if none)
    refinement_changes: tuple       # |Q_n - Q_2n|, |Q_2n - Q_4n|
    tail_bound: float


def _panel_edges(spec: HilbertSequenceSpec, decay: float, t_cut: float, panels_per_unit: float) -> np.ndarray:
    lam = spec.rates()
    fast = float(np.max(np.abs(lam)))
    slow = float(np.min(lam.real)) + decay
    t0 = min(t_cut, 1e-3 / fast)
    geo = np.geomspace(t0, t_cut, max(2, int(math.ceil(math.log2(t_cut / t0))) + 1))
    osc = float(np.max(np.abs(lam.imag)))
    n_lin = int(math.ceil(t_cut * max(osc / math.pi, 1.0, slow) * panels_per_unit)) + 1
    return np.unique(np.concatenate([[0.0], geo, np.linspace(0.0, t_cut, n_lin)]))


def _gauss_legendre(edges, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    t = ((b - a) / 2 * x + (a + b) / 2).ravel()
    wt = ((b - a) / 2 * w).ravel()
    return t, wt


def _refine(edges, factor):
    parts = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate(parts + [edges[-1:]])


def hilbert_sequence_gaussian_transfer(kernel: Callable[[np.ndarray], np.ndarray],
                                       spec: HilbertSequenceSpec, decay: float,
                                       kernel_bound: float = 1.0, t_cut: float | None = None,
                                       panels_per_unit: float = 2.0,
                                       rtol_check: float = 0.1) -> TransferReport:
    """Check ``E||sum_n g_n T f_n||^2 <= C^2 ||T||^2_gamma`` for ``T: L^2(R_+) -> l^2``.

    ``T f = (int k_i(t) f(t) dt)_i`` with ``kernel(t)`` returning the rows
    ``k_i(t)`` (shape (dim, len t)) and ``|k_i(t)| <= kernel_bound e^{-decay t}``.
    Both sides are integrated by composite Gauss-Legendre on graded panels
    over ``[0, t_cut]``; the omitted tail is bounded analytically.  The sum
    over the Hilbert-sequence window is exact on l^2, so ``std_error`` is 0.
    """
    if not decay > 0:
        raise DomainError("kernel decay rate must be positive")
    lam = spec.rates()
    w = np.abs(spec.weights())
    c = float(np.min(lam.real))
    if t_cut is None:
        t_cut = 40.0 / (decay + c)
    edges = _panel_edges(spec, decay, t_cut, panels_per_unit)

    def evaluate(ed):
        t, wt = _gauss_legendre(ed)
        K = np.asarray(kernel(t))
        F = spec.evaluate(t)
        images = (K * wt) @ F.T    # column n is T f_n
        lhs = math.fsum((np.abs(images) ** 2).ravel())
        gam = math.fsum((np.abs(K) ** 2 @ wt).ravel())
        return lhs, gam

    q = [evaluate(_refine(edges, f)) for f in (1, 2, 4)]
    d1 = abs(q[0][0] - q[1][0]) + abs(q[0][1] - q[1][1])
    d2 = abs(q[1][0] - q[2][0]) + abs(q[1][1] - q[2][1])
    floor = 1e-13 * (abs(q[2][0]) + abs(q[2][1]) + 1e-300)
    if d2 > floor and d2 > rtol_check * d1:
        warnings.warn(f"quadrature refinement not converging (changes {d1:.3g}, {d2:.3g})",
                      QuadratureAccuracyWarning, stacklevel=2)
    lhs, gam = q[2]
    dim = np.asarray(kernel(np.zeros(1))).shape[0]
    wmax = float(np.max(w))
    tail = dim * spec.size * (kernel_bound * wmax * math.exp(-(decay + c) * t_cut) / (decay + c)) ** 2

    C = gram(spec).op_norm_sqrt
    bound = C * C * gam
    closed = {"modulated": lambda: modulated_bound(spec.b),
              "power_scaled": lambda: power_scaled_phi(spec)[1]}.get(spec.kind, lambda: math.inf)()
    est = GaussianSumEstimate(lhs, 0.0, 0, spec.size, exact=True)
    if lhs > bound * (1 + 1e-9) + tail:
        raise InvariantViolation(f"Gaussian sum {lhs} exceeds C^2 ||T||^2 = {bound}", witness=spec)
    return TransferReport(est, gam, C, bound, closed, (d1, d2), tail)
