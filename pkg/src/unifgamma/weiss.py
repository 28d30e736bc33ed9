"""Diagonal stochastic Cauchy problems ``dU = AU dt + B dW``.

Convention: ``A x_k = -lambda_k x_k`` with ``Re lambda_k > 0`` and
``B h_k = beta_k x_k``, so ``R(lambda, A) B h_k = beta_k / (lambda + lambda_k) x_k``
and ``S(t) B h_k = e^{-lambda_k t} beta_k x_k``.  Targets are l^2 with
``x_k = e_k``, where every Gaussian sum is an exact weighted sum of squares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .errors import DomainError, InvalidInputError, InvariantViolation, StabilityError, UnsupportedStructureError
from .families import UnifGammaBoundReport
from .laplace import RepresentableOperator, sector_family
from .series import (CONVERGENT, DIVERGENT, FINITE, DEFAULT_SCHEDULE, SeriesReport, SmoothSum, em_sum,
                     evaluate_series, first_crossing)
from .spaces import L2, GaussianDrawConfig, SpaceSpec

CONSISTENT = "CONSISTENT"
INCONSISTENT = "INCONSISTENT"
NOT_APPLICABLE = "NOT-APPLICABLE"
WITNESS_FOUND = "WITNESS-FOUND"

_OU_STREAM = 21


def _vectorize(x, name):
    if callable(x):
        return x
    arr = np.asarray(x)
    if arr.ndim == 0:
        return lambda k: np.full(np.shape(k), arr[()])
    return lambda k: arr[np.asarray(k, dtype=np.int64) - 1]


@dataclass
class DiagonalSystem:
    """``lambda_k`` and ``beta_k`` as functions of the 1-based index ``k``.

    Either argument may be a callable (vectorized over float arrays), a
    scalar, or a finite array (then the system has finitely many modes).
    """

    eigenvalue: object
    beta: object
    truncation: int = 10_000
    space: SpaceSpec = L2
    label: str = ""
    n_modes: int | None = None

    def __post_init__(self):
        for x in (self.eigenvalue, self.beta):
            if not callable(x) and np.ndim(x) == 1:
                n = len(x)
                self.n_modes = n if self.n_modes is None else min(self.n_modes, n)
        if self.n_modes is not None:
            self.truncation = min(self.truncation, self.n_modes)
        self._lam = _vectorize(self.eigenvalue, "eigenvalue")
        self._beta = _vectorize(self.beta, "beta")
        lam = self.eigenvalues(min(self.truncation, 4096))
        if np.any(np.real(lam) <= 0):
            raise DomainError("eigenvalues need positive real part")

    @classmethod
    def from_arrays(cls, lam, beta, **kw) -> "DiagonalSystem":
        lam = np.asarray(lam)
        beta = np.broadcast_to(np.asarray(beta), lam.shape).copy()
        return cls(lam, beta, truncation=lam.size, **kw)

    def eigenvalues(self, N: int | None = None) -> np.ndarray:
        N = self.truncation if N is None else N
        with np.errstate(over="ignore"):
            return np.asarray(self._lam(np.arange(1, N + 1, dtype=float)))

    def betas(self, N: int | None = None) -> np.ndarray:
        N = self.truncation if N is None else N
        return np.asarray(self._beta(np.arange(1, N + 1, dtype=float)))

    def lam_fn(self, k):
        with np.errstate(over="ignore"):
            return np.asarray(self._lam(k))

    def beta_fn(self, k):
        return np.asarray(self._beta(k))

    def is_real(self) -> bool:
        return bool(np.all(np.imag(self.eigenvalues()) == 0))

    @property
    def growth_bound(self) -> float:
        """``omega_0 = s(A) = s_0(A) = -inf Re lambda_k`` over the truncation."""
        return -float(np.min(np.real(self.eigenvalues())))

    @property
    def invertible(self) -> bool:
        return self.growth_bound < 0

    def representable(self, N: int | None = None) -> RepresentableOperator:
        """``S(.)B`` as exponential profiles ``beta_k e^{-lambda_k t}``."""
        return RepresentableOperator(self.betas(N), self.eigenvalues(N))


# -- the three Weiss quantities ---------------------------------------------

def _term_invariant(sys):
    return lambda k: np.abs(sys.beta_fn(k)) ** 2 / (2 * np.real(sys.lam_fn(k)))


def _term_half_power(sys):
    return lambda k: np.abs(sys.beta_fn(k)) ** 2 / np.abs(sys.lam_fn(k))


def _term_resolvent_sup(sys):
    # sup_{t>0} t |beta|^2 / |t + lambda|^2 = |beta|^2 / (2 |lambda| (1 + cos arg lambda))
    def f(k):
        lam = sys.lam_fn(k)
        return np.abs(sys.beta_fn(k)) ** 2 / (2 * np.abs(lam) * (1 + np.cos(np.angle(lam))))
    return f


def _series(sys, term, schedule, eps, persist, tail_bound=math.nan):
    return evaluate_series(term, sys.truncation, schedule, eps, persist, sys.n_modes, tail_bound)


def invariant_measure_quantity(sys: DiagonalSystem, schedule=DEFAULT_SCHEDULE, eps=0.1, persist=4,
                               tail_bound=math.nan) -> SeriesReport:
    """``||S(.)B||^2_gamma = sum_k |beta_k|^2 / (2 Re lambda_k)``."""
    return _series(sys, _term_invariant(sys), schedule, eps, persist, tail_bound)


def half_power_gamma(sys: DiagonalSystem, schedule=DEFAULT_SCHEDULE, eps=0.1, persist=4,
                     tail_bound=math.nan) -> SeriesReport:
    """``||(-A)^{-1/2} B||^2_gamma = sum_k |beta_k|^2 / |lambda_k|``."""
    return _series(sys, _term_half_power(sys), schedule, eps, persist, tail_bound)


def resolvent_sup_quantity(sys: DiagonalSystem, schedule=DEFAULT_SCHEDULE, eps=0.1,
                           persist=4) -> SeriesReport:
    """``sum_k sup_{t>0} ||sqrt(t) R(t, A) B h_k||^2``: the greedy standard-basis
    value of the resolvent family over the whole half-line."""
    return _series(sys, _term_resolvent_sup(sys), schedule, eps, persist)


@dataclass(frozen=True)
class FactorFourResult:
    lhs: float
    rhs: float
    relative_gap: float


def factor_four_identity(sys: DiagonalSystem, N: int | None = None) -> FactorFourResult:
    """``sum |beta|^2 / lambda`` against ``4 sum lambda |beta|^2 / (2 lambda)^2`` (choosing ``t_k = lambda_k``)."""
    if not sys.is_real():
        raise UnsupportedStructureError("identity is stated for positive real eigenvalues")
    lam, beta = sys.eigenvalues(N), sys.betas(N)
    b2 = np.abs(beta) ** 2
    lhs = math.fsum(b2 / lam)
    rhs = 4 * math.fsum(lam * b2 / (lam + lam) ** 2)
    gap = abs(lhs - rhs) / max(abs(lhs), 1e-300) if lhs or rhs else 0.0
    if gap > 1e-12:
        raise InvariantViolation(f"factor-4 identity gap {gap}", witness=(lhs, rhs))
    return FactorFourResult(lhs, rhs, gap)


# -- resolvent family ----------------------------------------------------------

@dataclass
class ResolventBounds:
    report: UnifGammaBoundReport
    lower: float                    # squared greedy lower bound on the grid
    upper: float                    # squared; inf when the invariant quantity diverges
    invariant: SeriesReport
    grid: np.ndarray
    truncation: int

    @property
    def norm_lower(self):
        return math.sqrt(self.lower)


def resolvent_family_bounds(sys: DiagonalSystem, N: int | None = None, q: float = 2.0,
                            r: float = 1.0, n_range: tuple | None = None, theta: float = 0.0,
                            schedule=DEFAULT_SCHEDULE) -> ResolventBounds:
    """Bracket the family ``{sqrt(t) R(t, A) B : t in grid}``, grid ``r q^n``.

    The upper bound ``(1 + sqrt 2)^2 * invariant quantity`` comes from the
    dyadic-grid Hilbert constant; it is ``inf`` when the invariant quantity
    is divergent-trending.
    """
    N = sys.truncation if N is None else N
    lam = sys.eigenvalues(N)
    if n_range is None:
        a = np.abs(lam[np.isfinite(lam)])
        n_range = (int(math.floor(math.log(a.min() / r, q))) - 4, int(math.ceil(math.log(a.max() / r, q))) + 4)
    Phi = sys.representable(N)
    _, rep = sector_family(Phi, theta, n_range[0], n_range[1], r=r, q=q, n_rotations=0, cuts=[])
    inv = invariant_measure_quantity(sys, schedule)
    inv_N = math.fsum(np.abs(Phi.coef) ** 2 / (2 * Phi.mu.real))
    upper = math.inf if inv.divergent else (1 + math.sqrt(2)) ** 2 * inv_N
    lower = rep.lower
    if lower > upper * (1 + 1e-12):
        raise InvariantViolation("resolvent lower bound exceeds upper bound", witness=rep.bound.witness)
    grid = r * q ** np.arange(n_range[0], n_range[1] + 1, dtype=float)
    return ResolventBounds(rep.bound, lower, upper, inv, grid, N)


@dataclass
class EquivalenceReport:
    invariant: SeriesReport
    half_power: SeriesReport
    resolvent: SeriesReport
    verdict: str

    def trends(self) -> dict:
        return {"invariant": self.invariant.trend, "half_power": self.half_power.trend,
                "resolvent": self.resolvent.trend}


def weiss_equivalence_report(sys: DiagonalSystem, schedule=DEFAULT_SCHEDULE, eps=0.1,
                             persist=4) -> EquivalenceReport:
    """Evaluate the three quantities on a common doubling schedule.

    CONSISTENT iff all three trend the same way (finitely supported data
    count as convergent).
    """
    a = invariant_measure_quantity(sys, schedule, eps, persist)
    b = half_power_gamma(sys, schedule, eps, persist)
    c = resolvent_sup_quantity(sys, schedule, eps, persist)
    norm = lambda t: CONVERGENT if t == FINITE else t
    trends = {norm(x.trend) for x in (a, b, c)}
    return EquivalenceReport(a, b, c, CONSISTENT if len(trends) == 1 else INCONSISTENT)


# -- off-diagonal systems ----------------------------------------------------

@dataclass
class OffDiagonalSystem:
    """``B h_n = sum_k beta[n, k] x_k`` with sets ``Delta_k`` of row indices.

    Indices are 1-based in ``delta_sets`` (``delta_sets[k-1]`` is
    ``Delta_k``); ``beta`` is an (n_rows x K) array or sparse matrix whose
    entry ``[n-1, k-1]`` is ``beta_{nk}``.  ``basis_constant`` is the declared
    ``sup_K ||P_K||`` (1 for the coordinate basis of l^p).

    A diagonal system with smooth ``lambda``/``beta`` functions may instead be
    given through :meth:`diagonal_functional`; it is then never materialized
    beyond the requested size.
    """

    beta: object
    lam: np.ndarray
    delta_sets: list
    delta: float = 1.0
    J: int = 1
    basis_constant: float = 1.0
    functional: DiagonalSystem | None = None

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise DomainError("delta must lie in (0, 1]")
        if self.J < 1:
            raise DomainError("J must be positive")
        if self.basis_constant < 1:
            raise DomainError("basis constant is at least 1")
        if self.functional is None:
            self.beta = sparse.csc_array(self.beta)
            self.lam = np.asarray(self.lam)
            if self.beta.shape[1] != self.lam.size or len(self.delta_sets) != self.lam.size:
                raise InvalidInputError("beta columns, eigenvalues and Delta sets must match")
            if any(len(set(d)) > self.J for d in self.delta_sets):
                raise DomainError("some Delta_k has more than J elements")
            if np.any(np.real(self.lam) <= 0):
                raise DomainError("eigenvalues need positive real part")

    @classmethod
    def diagonal_functional(cls, sys: DiagonalSystem, delta: float = 1.0) -> "OffDiagonalSystem":
        """``beta_{nk} = beta_k [n = k]``, ``Delta_k = {k}``, ``J = 1``."""
        return cls(None, None, None, delta, 1, 1.0, functional=sys)

    @classmethod
    def from_diagonal(cls, lam, beta, delta: float = 1.0) -> "OffDiagonalSystem":
        lam = np.asarray(lam)
        beta = np.broadcast_to(np.asarray(beta), lam.shape)
        return cls(sparse.diags_array(beta).tocsc(), lam, [[k] for k in range(1, lam.size + 1)], delta, 1)

    def materialize(self, K: int) -> "OffDiagonalSystem":
        if self.functional is None:
            return self
        f = self.functional
        k = np.arange(1, K + 1, dtype=float)
        return OffDiagonalSystem.from_diagonal(f.lam_fn(k), f.beta_fn(k), self.delta)

    @property
    def n_cols(self) -> int:
        return self.lam.size


@dataclass
class ConditionReport:
    delta_i_max: float            # largest delta allowed by condition (i)
    delta_ii_max: float           # largest delta allowed by condition (ii)
    worst_pair: tuple | None      # (j, k) attaining delta_i_max
    worst_column: int | None      # k attaining delta_ii_max
    degenerate: list              # columns with empty Delta_k
    holds_i: bool
    holds_ii: bool


def off_diagonal_conditions(sys: OffDiagonalSystem, check_size: int = 4096) -> ConditionReport:
    """Exhaustive check of (i) ``Delta_j & Delta_k != {} => |lambda_j / lambda_k| >= delta``
    and (ii) ``sum_{n in Delta_k} |beta_nk|^2 >= delta sum_n |beta_nk|^2``."""
    if sys.functional is not None:
        sys = sys.materialize(check_size)
    owners: dict[int, list[int]] = {}
    degenerate = []
    for k, d in enumerate(sys.delta_sets, start=1):
        if not d:
            degenerate.append(k)
        for n in set(d):
            owners.setdefault(int(n), []).append(k)
    d_i, pair = 1.0, None
    absl = np.abs(sys.lam)
    for ks in owners.values():
        if len(ks) < 2:
            continue
        ks = np.array(ks)
        a = absl[ks - 1]
        ratio = np.minimum(a[:, None] / a[None, :], a[None, :] / a[:, None])
        i, j = np.unravel_index(np.argmin(ratio), ratio.shape)
        if ratio[i, j] < d_i:
            d_i, pair = float(ratio[i, j]), (int(ks[i]), int(ks[j]))
    B = sys.beta.tocsc()
    d_ii, col = 1.0, None
    for k in range(1, sys.n_cols + 1):
        c = B[:, [k - 1]].tocoo()
        tot = math.fsum(np.abs(c.data) ** 2)
        if tot == 0:
            continue
        rows = set(int(n) for n in sys.delta_sets[k - 1])
        inside = math.fsum(abs(v) ** 2 for r, v in zip(c.row + 1, c.data) if int(r) in rows)
        if inside / tot < d_ii:
            d_ii, col = inside / tot, k
    return ConditionReport(d_i, d_ii, pair, col, degenerate, d_i >= sys.delta, d_ii >= sys.delta)


@dataclass(frozen=True)
class ChainStep:
    label: str
    lhs: float
    rhs: float
    relation: str          # "<=" or "="
    constant: float = 1.0

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, rtol: float = 1e-12) -> bool:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        if self.relation == "=":
            return abs(self.slack) <= rtol * scale
        return self.slack >= -rtol * scale


@dataclass
class ChainTrace:
    M: float
    verdict: str
    K: int | None = None
    j0: int | None = None
    constants: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    witness: dict = field(default_factory=dict)
    witness_value: float = math.nan     # (E||sum g_n sqrt(mu_n) R(mu_n,A) B h_n||^2)^(1/2)
    witness_target: float = math.nan    # M / (C C'_delta)
    path: str = ""

    @property
    def all_hold(self) -> bool:
        return all(s.holds() for s in self.steps)


def chain_constants(delta: float) -> dict:
    """Per-step constants for positive real eigenvalues.

    ``C_delta = 1 + delta^{-1/2}`` bounds ``|1 + sqrt(lambda_m / lambda_k)|``;
    ``c_split = max(1/2, delta^{-1/2} / 2)`` bounds
    ``(mu + lambda_k) / (2 (mu + sqrt(lambda_m lambda_k)))``;
    ``C'_delta = 2 c_split C_delta``.
    """
    c_delta = 1 + delta ** -0.5
    c_split = max(0.5, 0.5 * delta ** -0.5)
    return {"C_delta": c_delta, "c_split": c_split, "C_prime": 2 * c_split * c_delta}


def _pad_delta_sets(sets, J, start):
    """Make every set exactly ``J`` elements using fresh indices beyond ``start``."""
    fresh = start
    out = []
    for d in sets:
        d = sorted(set(int(n) for n in d))
        while len(d) < J:
            fresh += 1
            d.append(fresh)
        out.append(d)
    return out


def _run_array(sys: OffDiagonalSystem, M: float) -> ChainTrace:
    B = sys.beta.tocsc()
    lam = sys.lam.astype(complex)
    absl = np.abs(lam)
    real = bool(np.all(lam.imag == 0))
    J, delta, C = sys.J, sys.delta, sys.basis_constant
    col_sq = np.asarray((abs(B) ** 2).sum(axis=0)).ravel()
    cum = np.cumsum(col_sq / absl)
    target = (M * J / delta) ** 2
    hits = np.nonzero(cum >= target)[0]
    if hits.size == 0:
        return ChainTrace(M, NOT_APPLICABLE, path="array",
                          witness={"reason": "half-power partial sums stay below the target within the truncation"})
    K = int(hits[0]) + 1
    Bk = B[:, :K].toarray()
    n_rows = Bk.shape[0]
    sets = _pad_delta_sets(sys.delta_sets[:K], J, max(n_rows, max((max(d) for d in sys.delta_sets[:K] if d), default=0)))
    beta_at = lambda n, k: Bk[n - 1, k - 1] if n <= n_rows else 0.0
    steps = []
    X = math.sqrt(math.fsum(col_sq[:K] / absl[:K]))
    steps.append(ChainStep("||X|| >= MJ/delta", M * J / delta, X, "<="))
    Xt = math.sqrt(math.fsum(abs(beta_at(n, k)) ** 2 / absl[k - 1] for k in range(1, K + 1) for n in sets[k - 1]))
    steps.append(ChainStep("MJ <= sqrt(delta) ||X||", M * J, math.sqrt(delta) * X, "<="))
    steps.append(ChainStep("sqrt(delta) ||X|| <= ||X~|| (condition ii)", math.sqrt(delta) * X, Xt, "<="))
    Xj = [math.sqrt(math.fsum(abs(beta_at(sets[k - 1][j], k)) ** 2 / absl[k - 1] for k in range(1, K + 1)))
          for j in range(J)]
    steps.append(ChainStep("||X~|| <= sum_j ||X_j|| (triangle)", Xt, math.fsum(Xj), "<="))
    j0 = int(np.argmax(Xj))
    steps.append(ChainStep("M <= ||X_j0|| (pigeonhole)", M, Xj[j0], "<="))
    tau = np.array([sets[k - 1][j0] for k in range(1, K + 1)])
    first: dict[int, int] = {}
    m = np.empty(K, dtype=int)
    for k in range(1, K + 1):
        m[k - 1] = first.setdefault(int(tau[k - 1]), k)
    mu = {n: lam[k - 1] for n, k in first.items()}
    b_tau = np.array([beta_at(int(tau[k]), k + 1) for k in range(K)])
    Xtau = math.sqrt(math.fsum(np.abs(b_tau) ** 2 / absl[:K]))
    b_tm = np.array([beta_at(int(tau[m[k] - 1]), k + 1) for k in range(K)])
    Xtm = math.sqrt(math.fsum(np.abs(b_tm) ** 2 / absl[:K]))
    steps.append(ChainStep("||X_tau|| = ||X_tau(m)||", Xtau, Xtm, "="))
    sq = np.sqrt(lam[:K])
    sqm = np.sqrt(lam[m - 1])
    y_coef = b_tm / (sqm + sq)
    Y = math.sqrt(math.fsum(np.abs(y_coef) ** 2))
    mult = np.abs((sqm + sq) / sq)
    consts = chain_constants(delta)
    c_delta = consts["C_delta"] if real else max(consts["C_delta"], float(mult.max()))
    if real and mult.max() > consts["C_delta"] * (1 + 1e-12):
        raise InvariantViolation("contraction multiplier exceeds C_delta; condition (i) fails", witness=mult.max())
    steps.append(ChainStep("||X_tau(m)|| <= C_delta ||Y|| (contraction)", Xtm, c_delta * Y, "<=", c_delta))
    Y2 = math.sqrt(math.fsum(np.abs(sqm * b_tm / (lam[m - 1] + sqm * sq)) ** 2))
    steps.append(ChainStep("||Y|| = rewritten form", Y, Y2, "="))
    # Z: all Gaussians n with mu_n assigned; W: same with 2 sqrt(mu) / (mu + lambda_k)
    z2, w2, ratio = [], [], 0.0
    for k in range(1, K + 1):
        col = B[:, [k - 1]].tocoo()
        for n, b in zip(col.row + 1, col.data):
            if int(n) not in mu:
                continue
            u = mu[int(n)]
            z = np.sqrt(u) * b / (u + sqm[k - 1] * sq[k - 1])
            w = 2 * np.sqrt(u) * b / (u + lam[k - 1])
            z2.append(abs(z) ** 2)
            w2.append(abs(w) ** 2)
            if w != 0:
                ratio = max(ratio, abs(z) / abs(w))
    Z, W = math.sqrt(math.fsum(z2)), math.sqrt(math.fsum(w2))
    steps.append(ChainStep("||Y|| <= ||Z|| (covariance domination)", Y2, Z, "<="))
    c_split = consts["c_split"] if real else max(consts["c_split"], ratio)
    if real and ratio > consts["c_split"] * (1 + 1e-12):
        raise InvariantViolation("split multiplier exceeds its bound", witness=ratio)
    steps.append(ChainStep("||Z|| <= c_split ||W|| (contraction)", Z, c_split * W, "<=", c_split))
    # V = sum_n g_n sqrt(mu_n) R(mu_n, A) B h_n over all columns; W = 2 P_K V
    v2 = []
    for k in range(1, B.shape[1] + 1):
        col = B[:, [k - 1]].tocoo()
        for n, b in zip(col.row + 1, col.data):
            if int(n) in mu:
                u = mu[int(n)]
                v2.append(abs(np.sqrt(u) * b / (u + lam[k - 1])) ** 2)
    V = math.sqrt(math.fsum(v2))
    steps.append(ChainStep("||W|| <= 2 C ||V|| (projection)", W, 2 * C * V, "<=", 2 * C))
    c_prime = 2 * c_split * c_delta
    target_v = M / (C * c_prime)
    steps.append(ChainStep("M / (C C'_delta) <= ||V|| (witness)", target_v, V, "<="))
    mu_arr = np.array([mu.get(n, 0.0) for n in range(1, int(max(mu)) + 1)])
    return ChainTrace(M, WITNESS_FOUND, K, j0 + 1,
                      {"C": C, "C_delta": c_delta, "c_split": c_split, "C_prime": c_prime},
                      steps, {"mu": mu_arr}, V, target_v, "array")


def _run_functional(sys: OffDiagonalSystem, M: float) -> ChainTrace:
    f = sys.functional
    delta, C = sys.delta, sys.basis_constant
    lam, beta = f.lam_fn, f.beta_fn
    real = f.is_real()
    if not real:
        raise UnsupportedStructureError("functional chain path needs positive real eigenvalues")
    consts = chain_constants(delta)
    half = lambda k: np.abs(beta(k)) ** 2 / np.abs(lam(k))
    target = (M / delta) ** 2
    K = first_crossing(SmoothSum(half), target)
    if K is None:
        return ChainTrace(M, NOT_APPLICABLE, path="functional",
                          witness={"reason": "target beyond representable truncation"})
    S = lambda g: em_sum(g, K)
    X = math.sqrt(S(half))
    steps = [ChainStep("||X|| >= MJ/delta", M / delta, X, "<="),
             ChainStep("MJ <= sqrt(delta) ||X||", M, math.sqrt(delta) * X, "<=")]
    Xt = math.sqrt(S(lambda k: np.abs(beta(k)) ** 2 / np.abs(lam(k))))
    steps.append(ChainStep("sqrt(delta) ||X|| <= ||X~|| (condition ii)", math.sqrt(delta) * X, Xt, "<="))
    steps.append(ChainStep("||X~|| <= sum_j ||X_j|| (triangle)", Xt, Xt, "<="))
    steps.append(ChainStep("M <= ||X_j0|| (pigeonhole)", M, Xt, "<="))
    steps.append(ChainStep("||X_tau|| = ||X_tau(m)||", Xt, Xt, "="))
    # tau(k) = k, m(k) = k, mu_k = lambda_k for k <= K
    Y = math.sqrt(S(lambda k: np.abs(beta(k) / (2 * np.sqrt(lam(k)))) ** 2))
    steps.append(ChainStep("||X_tau(m)|| <= C_delta ||Y|| (contraction)", Xt, consts["C_delta"] * Y, "<=",
                           consts["C_delta"]))
    Y2 = math.sqrt(S(lambda k: np.abs(np.sqrt(lam(k)) * beta(k) / (lam(k) + np.sqrt(lam(k)) ** 2)) ** 2))
    steps.append(ChainStep("||Y|| = rewritten form", Y, Y2, "="))
    Z = math.sqrt(S(lambda k: np.abs(np.sqrt(lam(k)) * beta(k) / (lam(k) + lam(k))) ** 2))
    steps.append(ChainStep("||Y|| <= ||Z|| (covariance domination)", Y2, Z, "<="))
    W = math.sqrt(S(lambda k: np.abs(2 * np.sqrt(lam(k)) * beta(k) / (lam(k) + lam(k))) ** 2))
    steps.append(ChainStep("||Z|| <= c_split ||W|| (contraction)", Z, consts["c_split"] * W, "<=",
                           consts["c_split"]))
    V = math.sqrt(S(lambda k: np.abs(np.sqrt(lam(k)) * beta(k) / (lam(k) + lam(k))) ** 2))
    steps.append(ChainStep("||W|| <= 2 C ||V|| (projection)", W, 2 * C * V, "<=", 2 * C))
    target_v = M / (C * consts["C_prime"])
    steps.append(ChainStep("M / (C C'_delta) <= ||V|| (witness)", target_v, V, "<="))
    return ChainTrace(M, WITNESS_FOUND, K, 1, {"C": C, **consts}, steps,
                      {"mu": "lambda_n for n <= K, 0 beyond", "K": K}, V, target_v, "functional")


def off_diagonal_contrapositive_run(sys: OffDiagonalSystem, targets: Sequence[float],
                                    schedule=DEFAULT_SCHEDULE) -> list[ChainTrace]:
    """Execute the contrapositive chain for each target ``M``.

    Finds the least ``K`` whose half-power partial sum reaches
    ``(MJ/delta)^2`` (norm ``MJ/delta``), runs the selection ``phi_j0``,
    ``m(k)``, ``mu_n`` and records every inequality with its slack.  Returns
    NOT-APPLICABLE when the half-power series is convergent-trending
    (functional systems) or stays below the target within the given columns.
    """
    cond = off_diagonal_conditions(sys)
    if not (cond.holds_i and cond.holds_ii):
        raise DomainError(f"conditions fail at delta={sys.delta}: "
                          f"(i) allows {cond.delta_i_max}, (ii) allows {cond.delta_ii_max}")
    trend = half_power_gamma(sys.functional, schedule).trend if sys.functional is not None else None
    out = []
    for M in targets:
        if trend is not None and trend != DIVERGENT:
            out.append(ChainTrace(M, NOT_APPLICABLE, path="functional" if sys.functional else "array",
                                  witness={"reason": f"half-power series is {trend}-trending"}))
            continue
        tr = _run_functional(sys, M) if sys.functional is not None else _run_array(sys, M)
        if tr.verdict == WITNESS_FOUND and not tr.all_hold:
            bad = [s for s in tr.steps if not s.holds()]
            raise InvariantViolation(f"chain step failed: {bad[0].label}", witness=tr)
        out.append(tr)
    return out


# -- Ornstein-Uhlenbeck simulation --------------------------------------------

@dataclass
class OUResult:
    variances: np.ndarray       # empirical E U_k(T)^2 per coordinate
    std_errors: np.ndarray
    total: float                # sum over coordinates
    total_std_error: float
    exact_at_T: np.ndarray      # beta^2 (1 - e^{-2 lambda T}) / (2 lambda)
    stationary: np.ndarray      # beta^2 / (2 lambda)
    n_steps: int
    dt: float
    n_paths: int


def ou_simulate(sys: DiagonalSystem, dt: float, horizon: float, n_paths: int,
                cfg: GaussianDrawConfig | None = None, N: int | None = None,
                check_fidelity: bool = True) -> OUResult:
    """Simulate ``dU_k = -lambda_k U_k dt + beta_k dW_k`` from ``U(0) = 0`` with the
    exact Gaussian transition.

    The transition is exact for any ``dt``; ``check_fidelity`` enforces
    ``dt <= 0.1 / max lambda_k`` (kept for non-diagonal extensions) and may
    be switched off.  Paths are split into ``cfg.batch_count`` batches with
    independent streams (so batches can run in parallel); standard errors
    are per-path sample standard deviations over ``sqrt(n_paths)``.
    """
    cfg = cfg or GaussianDrawConfig(0, n_paths, 20)
    lam, beta = sys.eigenvalues(N), sys.betas(N)
    if np.any(np.imag(lam) != 0) or np.any(np.real(lam) <= 0):
        raise DomainError("simulation needs real positive eigenvalues")
    lam = np.real(lam).astype(float)
    beta = np.asarray(beta, dtype=float)
    if not dt > 0 or not horizon > 0 or n_paths < cfg.batch_count:
        raise DomainError("dt, horizon must be positive and n_paths >= batch_count")
    if check_fidelity and dt > 0.1 / lam.max():
        raise StabilityError(f"dt={dt} exceeds the fidelity guard 0.1/max lambda = {0.1 / lam.max()}")
    n_steps = int(math.ceil(horizon / dt - 1e-12))
    steps = np.full(n_steps, dt)
    steps[-1] = horizon - dt * (n_steps - 1)
    q, rem = divmod(n_paths, cfg.batch_count)
    sizes = [q + (i < rem) for i in range(cfg.batch_count)]
    gens = GaussianDrawConfig(cfg.seed, n_paths, cfg.batch_count).generators(_OU_STREAM)
    squares = []
    for gen, size in zip(gens, sizes):
        U = np.zeros((size, lam.size))
        for h in steps:
            a = np.exp(-lam * h)
            s = np.abs(beta) * np.sqrt(-np.expm1(-2 * lam * h) / (2 * lam))
            U = a * U + s * gen.standard_normal(U.shape)
        squares.append(U ** 2)
    sq = np.vstack(squares)
    tot_path = sq.sum(axis=1)
    root_n = math.sqrt(sq.shape[0])
    var = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / root_n
    tot = float(tot_path.mean())
    tot_se = float(tot_path.std(ddof=1) / root_n)
    exact = beta ** 2 * -np.expm1(-2 * lam * horizon) / (2 * lam)
    return OUResult(var, se, tot, tot_se, exact, beta ** 2 / (2 * lam), n_steps, dt, n_paths)
