"""Laplace transforms of exponential-profile operators and their families.

An operator ``Phi: L^2(R_+; H) -> E`` is described column by column: basis
vector ``h_k`` carries the profile ``t -> c_k e^{-mu_k t}`` placed on target
coordinate ``sigma(k)``.  For a diagonal semigroup this is ``S(.)B`` with
``c_k = beta_k``, ``mu_k = lambda_k``.  Every transform is a closed form:

    Phi^(lambda) h_k = c_k / (lambda + mu_k) e_{sigma(k)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, sparse

from .errors import DomainError, InvalidInputError, InvariantViolation
from .families import OperatorFamily, UnifGammaBoundReport, unif_gamma_lower
from .gamma_norm import ColumnOperator
from .hilbert_sequences import line_constant, ray_grid_hilbert_bound
from .reports import ReportRow
from .spaces import L2, SpaceSpec


@dataclass
class RepresentableOperator:
    coef: np.ndarray
    mu: np.ndarray
    rows: np.ndarray | None = None
    dim: int | None = None
    space: SpaceSpec = L2

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=complex).ravel()
        self.mu = np.asarray(self.mu, dtype=complex).ravel()
        if self.coef.size != self.mu.size:
            raise InvalidInputError("coef and mu must have equal length")
        if np.any(self.mu.real <= 0):
            raise DomainError("profiles need Re mu > 0")
        if not (np.all(np.isfinite(self.coef)) and np.all(np.isfinite(self.mu))):
            raise InvalidInputError("non-finite profile data")
        self.rows = np.arange(self.coef.size) if self.rows is None else np.asarray(self.rows, dtype=int)
        self.dim = int(self.rows.max()) + 1 if self.dim is None and self.rows.size else (self.dim or 0)

    @classmethod
    def diagonal(cls, coef, mu) -> "RepresentableOperator":
        return cls(coef, mu)

    @property
    def truncation(self) -> int:
        return self.coef.size

    def is_real(self) -> bool:
        return bool(np.all(self.coef.imag == 0) and np.all(self.mu.imag == 0))

    def gamma_norm_sq(self) -> float:
        """``||Phi||^2_gamma = sum_k |c_k|^2 / (2 Re mu_k)`` (Hilbert target)."""
        return math.fsum(np.abs(self.coef) ** 2 / (2 * self.mu.real))

    def column_profiles(self, t) -> np.ndarray:
        """Scalar profiles ``c_k e^{-mu_k t}``, shape (N, len(t))."""
        return self.coef[:, None] * np.exp(-np.outer(self.mu, np.asarray(t, dtype=float)))


def _check_lambda(lam):
    lam = complex(lam)
    if not lam.real > 0:
        raise DomainError(f"Re lambda must be positive, got {lam}")
    return lam


def hat_values(Phi: RepresentableOperator, lam) -> np.ndarray:
    """Column coefficients ``c_k / (lambda + mu_k)``."""
    return Phi.coef / (_check_lambda(lam) + Phi.mu)


def laplace_hat(Phi: RepresentableOperator, lam, scale: complex = 1.0) -> ColumnOperator:
    """``scale * Phi^(lambda)`` as a column operator."""
    vals = scale * hat_values(Phi, lam)
    n = Phi.truncation
    m = sparse.coo_array((vals, (Phi.rows, np.arange(n))), shape=(Phi.dim, n))
    return ColumnOperator(m, Phi.space)


def hat_gamma_sq(Phi: RepresentableOperator, lam) -> float:
    """``||Phi^(lambda)||^2_gamma`` (distinct target rows, Hilbert target)."""
    return math.fsum(np.abs(hat_values(Phi, lam)) ** 2)


def cauchy_riemann_defect(Phi: RepresentableOperator, lam, h: float) -> float:
    """Max over columns of ``|d/dy - i d/dx|`` by central differences (``O(h^2)``)."""
    lam = _check_lambda(lam)
    if not lam.real > h:
        raise DomainError("step leaves the half-plane")
    fx = (hat_values(Phi, lam + h) - hat_values(Phi, lam - h)) / (2 * h)
    fy = (hat_values(Phi, lam + 1j * h) - hat_values(Phi, lam - 1j * h)) / (2 * h)
    return float(np.max(np.abs(fy - 1j * fx)))


@dataclass
class DecayTable:
    b: float
    s: np.ndarray
    values: np.ndarray          # ||Phi^(b + is)||^2_gamma
    truncation: int
    tail_bound: float = math.nan

    def rows(self, experiment_id="rl-decay", seed=0) -> list[ReportRow]:
        return [ReportRow(experiment_id, f"b={self.b!r};s={float(si)!r}", float(v), 0.0,
                          self.truncation, seed) for si, v in zip(self.s, self.values)]


def gamma_rl_decay(Phi: RepresentableOperator, b: float, s_grid, tail_bound: float = math.nan) -> DecayTable:
    """Exact ``||Phi^(b+is)||^2_gamma = sum |c_k|^2 / |b + is + mu_k|^2`` on ``s_grid``.

    For real profiles the values must decrease strictly in ``|s|``; a
    violation raises :class:`InvariantViolation`.
    """
    if not b > 0:
        raise DomainError("b must be positive")
    s = np.asarray(s_grid, dtype=float)
    vals = np.array([hat_gamma_sq(Phi, b + 1j * si) for si in s])
    if Phi.is_real():
        order = np.argsort(np.abs(s), kind="stable")
        a, v = np.abs(s)[order], vals[order]
        bad = (np.diff(a) > 0) & (np.diff(v) >= 0)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvariantViolation("decay curve not strictly decreasing in |s|",
                                     witness={"s": (a[i], a[i + 1]), "values": (v[i], v[i + 1])})
    return DecayTable(b, s, vals, Phi.truncation, tail_bound)


# -- half-planes and sectors ------------------------------------------------

def halfplane_lattice(b: float, n_re: int = 3, n_im: int = 4, rhos=(0.0, 0.5)) -> np.ndarray:
    """Points ``sigma + i (n + rho) b`` with ``sigma in {b, 3b/2, 5b/2, ...}``, ``|n| <= n_im``."""
    if not b > 0:
        raise DomainError("b must be positive")
    if n_re < 0 or n_im < 0 or not rhos:
        raise DomainError("empty lattice")
    sig = np.concatenate([[b], b * (0.5 + np.arange(1, n_re + 1))])
    im = np.array([(n + r) * b for n in range(-n_im, n_im + 1) for r in rhos])
    return (sig[:, None] + 1j * im[None, :]).ravel()


@dataclass
class LaplaceFamilyReport:
    bound: UnifGammaBoundReport
    phi_gamma_sq: float
    parameter: float             # b for half-planes, theta for sectors
    ratio: float                 # norm-level lower bound scaled by the parameter law
    theorem_upper: float         # squared; inf when the theorem's constant is unspecified
    orthogonal_upper: float      # squared: sup_lambda ||f_lambda||^2 * ||Phi||^2
    notes: dict = field(default_factory=dict)

    @property
    def lower(self) -> float:
        return self.bound.lower_bound

    @property
    def norm_lower(self) -> float:
        return self.bound.norm_lower


def _check_upper(rep: LaplaceFamilyReport):
    for name in ("theorem_upper", "orthogonal_upper"):
        u = getattr(rep, name)
        if rep.lower > u * (1 + 1e-12) + 1e-300:
            raise InvariantViolation(f"lower bound {rep.lower} exceeds {name} {u}", witness=rep.bound.witness)


def halfplane_family(Phi: RepresentableOperator, b: float, n_re: int = 3, n_im: int = 4,
                     rhos=(0.0, 0.5), **kw) -> tuple[OperatorFamily, LaplaceFamilyReport]:
    """Family ``{Phi^(lambda)}`` on a lattice in ``Re lambda >= b`` with its bound report.

    ``ratio = sqrt(lower) * sqrt(b) / ||Phi||`` should stay bounded in ``b``.
    ``orthogonal_upper = ||Phi||^2 / (2b)``: the functions ``e_lambda (x) h_k``
    are orthogonal for orthonormal ``h_k`` with norms at most ``(2b)^{-1/2}``.
    ``notes['line_constant']`` is the Hilbert constant of one lattice line.
    """
    lat = halfplane_lattice(b, n_re, n_im, rhos)
    fam = OperatorFamily([laplace_hat(Phi, lam) for lam in lat], "halfplane",
                         {"b": b, "lattice": lat})
    rep = unif_gamma_lower(fam, **kw)
    g = Phi.gamma_norm_sq()
    ratio = rep.norm_lower * math.sqrt(b) / math.sqrt(g) if g > 0 else 0.0
    out = LaplaceFamilyReport(rep, g, b, ratio, math.inf, g / (2 * b),
                              {"line_constant": line_constant(b), "lattice_size": lat.size})
    _check_upper(out)
    return fam, out


def halfplane_scaling(Phi: RepresentableOperator, b_grid, **kw) -> dict:
    """Lower bounds ``L(b)`` (norm level) across ``b_grid`` with the fitted log-log slope."""
    b = np.asarray(b_grid, dtype=float)
    reps = [halfplane_family(Phi, bi, **kw)[1] for bi in b]
    L = np.array([r.norm_lower for r in reps])
    slope = float(np.polyfit(np.log(b), np.log(L), 1)[0]) if np.all(L > 0) else math.nan
    return {"b": b, "L": L, "slope": slope, "fitted_constant": max(r.ratio for r in reps),
            "reports": reps}


def sector_grid(theta: float, n_min: int, n_max: int, r: float = 1.0, q: float = 2.0) -> np.ndarray:
    """``r q^n e^{+-i theta}`` for ``n_min <= n <= n_max`` (one ray when ``theta == 0``)."""
    if not abs(theta) < math.pi / 2:
        raise DomainError("|theta| must be below pi/2")
    rad = r * q ** np.arange(n_min, n_max + 1, dtype=float)
    if theta == 0:
        return rad.astype(complex)
    return np.concatenate([rad * np.exp(1j * theta), rad * np.exp(-1j * theta)])


def sector_family(Phi: RepresentableOperator, theta: float, n_min: int = -8, n_max: int = 30,
                  r: float = 1.0, q: float = 2.0, **kw) -> tuple[OperatorFamily, LaplaceFamilyReport]:
    """Family ``{sqrt(lambda) Phi^(lambda)}`` on the ray grid with its bounds.

    ``theorem_upper`` is the squared product of the grid's Hilbert-constant
    bound (geometric off-diagonal majorant) and ``||Phi||``.
    ``orthogonal_upper = ||Phi||^2 / (2 cos theta)``.
    """
    grid = sector_grid(theta, n_min, n_max, r, q)
    fam = OperatorFamily([laplace_hat(Phi, lam, np.sqrt(lam)) for lam in grid], "sector",
                         {"theta": theta, "q": q, "grid": grid})
    rep = unif_gamma_lower(fam, **kw)
    g = Phi.gamma_norm_sq()
    rays = 1 if theta == 0 else 2
    C = ray_grid_hilbert_bound(q, theta, rays)
    out = LaplaceFamilyReport(rep, g, theta, rep.norm_lower / math.sqrt(g) if g > 0 else 0.0,
                              C * C * g, g / (2 * math.cos(theta)), {"hilbert_bound": C, "q": q})
    _check_upper(out)
    return fam, out


# -- Poisson kernel of the strip --------------------------------------------

@dataclass(frozen=True)
class PoissonKernelParams:
    j: int
    alpha: float
    s: float

    def __post_init__(self):
        if self.j not in (0, 1):
            raise DomainError("j must be 0 or 1")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")


def poisson_kernel(params: PoissonKernelParams | None = None, *, j=None, alpha=None, s=None):
    """Harmonic-measure kernel of the strip ``0 < Re z < 1``.

    ``P_j(alpha, s) = sin(pi alpha) / (2 (cosh(pi s) - (-1)^j cos(pi alpha)))``;
    ``int P_0 ds = 1 - alpha`` and ``int P_1 ds = alpha``.  This is ``pi``
    times :func:`poisson_kernel_displayed`.  ``s`` may be an array.
    """
    if params is None:
        params = PoissonKernelParams(j, alpha, 0.0)
        s_val = np.asarray(s, dtype=float)
    else:
        s_val = np.asarray(params.s, dtype=float)
    a = params.alpha
    sign = 1.0 if params.j == 0 else -1.0
    with np.errstate(over="ignore"):
        den = 2 * (np.cosh(np.pi * s_val) - sign * math.cos(math.pi * a))
    out = math.sin(math.pi * a) / den
    return float(out) if out.ndim == 0 else out


def poisson_kernel_displayed(j: int, alpha: float, s):
    """``e^{pi s} sin(pi alpha) / (pi (sin^2(pi alpha) + (cos(pi alpha) - (-1)^j e^{pi s})^2))``.

    Literal ``e^{pi s}`` form with the ``1/pi`` prefactor; its total mass is
    ``1/pi``.  Overflows for large ``|s|``.
    """
    PoissonKernelParams(j, alpha, 0.0)
    s = np.asarray(s, dtype=float)
    e = np.exp(np.pi * s)
    sa, ca = math.sin(math.pi * alpha), math.cos(math.pi * alpha)
    return e * sa / (math.pi * (sa ** 2 + (ca - (-1) ** j * e) ** 2))


def poisson_mass_split(alpha: float, half_width: float = 40.0) -> tuple[float, float]:
    """``(int P_0, int P_1)`` over ``[-w, w]`` by adaptive quadrature."""
    edges = np.linspace(-half_width, half_width, 17)
    out = []
    for j in (0, 1):
        f = lambda s: poisson_kernel(j=j, alpha=alpha, s=s)
        out.append(math.fsum(integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
                             for a, b in zip(edges[:-1], edges[1:])))
    return out[0], out[1]


def poisson_mass(alpha: float, half_width: float = 40.0) -> float:
    """``int_{-w}^{w} (P_0 + P_1)(alpha, s) ds``."""
    return sum(poisson_mass_split(alpha, half_width))
