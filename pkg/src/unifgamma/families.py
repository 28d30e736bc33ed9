"""Operator families and bounds on their uniform gamma-radonifying norm.

The supremum over all orthonormal bases cannot be computed, so every
report is a bracket: a lower bound achieved by a recorded witness (basis +
member sequence) and an upper bound when one is available analytically
(``inf`` otherwise).  All bounds are on the *second-moment* scale,
``E||sum_k g_k T_k h_k||^2``; use ``norm_lower``/``norm_upper`` for the
square roots.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.stats import ortho_group, unitary_group

from .errors import DomainError, InvalidInputError, InvariantViolation, UnsupportedStructureError
from .gamma_norm import (ColumnOperator, GaussianSumEstimate, cauchy_tail_profile,
                         gaussian_sum_sq)
from .spaces import L2, GaussianDrawConfig, SpaceSpec, column_norms

NOT_UNIF = "not-uniformly-gamma-radonifying"
CONVERGENT = "convergent-evidence"
INCONCLUSIVE = "inconclusive"

_ROTATION_STREAM = 7
_SIGN_STREAM = 11


def _pad(T: ColumnOperator, dim: int, n_cols: int) -> ColumnOperator:
    if T.matrix.shape == (dim, n_cols):
        return T
    m = T.matrix.tocoo()
    return ColumnOperator(sparse.coo_array((m.data, (m.row, m.col)), shape=(dim, n_cols)), T.space)


class OperatorFamily:
    """A finite family of column operators sharing one shape and target.

    Members are deduplicated by fingerprint; ``kind`` and ``params`` record
    how the family was generated (for reports only).
    """

    def __init__(self, members: Sequence[ColumnOperator], kind: str = "explicit",
                 params: dict | None = None, dedupe: bool = True):
        members = list(members)
        if not members:
            raise DomainError("operator family must be nonempty")
        space = members[0].space
        if any(T.space != space for T in members):
            raise InvalidInputError("family members must share a target space")
        dim = max(T.dim for T in members)
        n_cols = max(T.n_cols for T in members)
        members = [_pad(T, dim, n_cols) for T in members]
        if dedupe:
            seen, unique = set(), []
            for T in members:
                fp = T.fingerprint()
                if fp not in seen:
                    seen.add(fp)
                    unique.append(T)
            members = unique
        self.members = members
        self.kind = kind
        self.params = dict(params or {})
        self.space = space

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def dim(self) -> int:
        return self.members[0].dim

    @property
    def n_cols(self) -> int:
        return self.members[0].n_cols

    def fingerprints(self) -> set[str]:
        return {T.fingerprint() for T in self.members}

    def union(self, other: "OperatorFamily") -> "OperatorFamily":
        return OperatorFamily(self.members + other.members, "union")

    def column_sq_matrix(self, n_cols: int | None = None) -> np.ndarray:
        """``[i, k] -> ||T_i h_{k+1}||^2`` (Hilbert norm of the column)."""
        n = self.n_cols if n_cols is None else n_cols
        return np.vstack([T.column_norms_sq()[:n] for T in self.members])

    def column_norm_matrix(self, n_cols: int | None = None) -> np.ndarray:
        """``[i, k] -> ||T_i h_{k+1}||_E`` in the target norm."""
        n = self.n_cols if n_cols is None else n_cols
        return np.vstack([column_norms(self.space, T.matrix[:, :n].toarray()) for T in self.members])

    def all_diagonal(self) -> bool:
        return all(T.is_diagonal() for T in self.members)

    # -- generators -------------------------------------------------------

    @classmethod
    def explicit(cls, members, **kw) -> "OperatorFamily":
        return cls(members, "explicit", **kw)

    @classmethod
    def projection_family(cls, N: int, space: SpaceSpec = L2) -> "OperatorFamily":
        """``{P_k = e_k (x) e_k : k = 1..N}`` on the first ``N`` coordinates."""
        members = [ColumnOperator(sparse.coo_array(([1.0], ([k], [k])), shape=(N, N)), space)
                   for k in range(N)]
        return cls(members, "projection_family", {"N": N}, dedupe=False)

    @classmethod
    def rank_one_family(cls, h, n_targets: int, space: SpaceSpec = L2) -> "OperatorFamily":
        """``{h (x) e_j : j = 1..n_targets}``; column ``k`` of member ``j`` is ``h_k e_j``."""
        h = np.asarray(h)
        members = []
        for j in range(n_targets):
            m = sparse.coo_array((h, (np.full(h.size, j), np.arange(h.size))),
                                 shape=(n_targets, h.size))
            members.append(ColumnOperator(m, space))
        return cls(members, "rank_one_family", {"n_targets": n_targets}, dedupe=False)

    @classmethod
    def shift_orbit(cls, T: ColumnOperator, n_max: int) -> "OperatorFamily":
        """``{T S^m : m = 0..n_max}`` with ``S`` the right shift on ``H``.

        Column ``k`` of ``T S^m`` is ``T h_{k+m}``; columns shifted past the
        truncation are zero.
        """
        members = []
        for m in range(n_max + 1):
            shifted = T.matrix[:, m:]
            pad = sparse.csc_array((T.dim, min(m, T.n_cols)))
            members.append(ColumnOperator(sparse.hstack([shifted, pad], format="csc"), T.space))
        return cls(members, "shift_orbit", {"n_max": n_max}, dedupe=False)


@dataclass
class Witness:
    """Reproducible choice of basis and member sequence."""

    basis: str                 # "standard" or "rotation"
    members: np.ndarray        # member index for each k (0-based)
    rotation_dim: int = 0
    rotation_seed: tuple = ()  # (cfg seed, probe index) for re-generation

    def basis_matrix(self, n_cols: int, complex_field: bool) -> np.ndarray:
        if self.basis == "standard":
            return np.eye(n_cols)
        seed, r = self.rotation_seed
        return _rotation_basis(n_cols, self.rotation_dim, seed, r, complex_field)


@dataclass
class UnifGammaBoundReport:
    lower_bound: float
    upper_bound: float
    truncation: int
    witness: Witness
    lower_std_error: float = 0.0
    upper_source: str = "none"
    standard_lower: float = 0.0
    rotation_values: list = field(default_factory=list)
    cuts: list = field(default_factory=list)
    tail_profile: list = field(default_factory=list)
    delta_sq: float = 0.0
    verdict: str = INCONCLUSIVE

    @property
    def norm_lower(self) -> float:
        return math.sqrt(self.lower_bound)

    @property
    def norm_upper(self) -> float:
        return math.sqrt(self.upper_bound)

    @property
    def tail_values(self) -> list[float]:
        return [e.mean for e in self.tail_profile]


def _rotation_basis(n_cols, d, seed, r, complex_field) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(_ROTATION_STREAM, r))))
    group = unitary_group if complex_field else ortho_group
    U = group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    B = np.eye(n_cols, dtype=U.dtype)
    B[:d, :d] = U
    return B


def default_cuts(N: int) -> list[int]:
    cuts = [1]
    while cuts[-1] * 2 <= N:
        cuts.append(cuts[-1] * 2)
    if cuts[-1] != N:
        cuts.append(N)
    return cuts


def _verdict(tails: list[float], delta_sq: float) -> str:
    if tails and min(tails) >= delta_sq > 0:
        return NOT_UNIF
    if len(tails) > 1 and all(b <= a * (1 + 1e-12) for a, b in zip(tails, tails[1:])) \
            and tails[-1] <= 1e-2 * max(tails[0], 1e-300):
        return CONVERGENT
    return INCONCLUSIVE


def _analytic_upper(F: OperatorFamily, N: int) -> tuple[float, str]:
    if not F.space.is_hilbert:
        return math.inf, "none"
    if F.all_diagonal():
        # Parseval over any basis: sum_k ||T_k g_k||^2 <= sum_i max_T |T_ii|^2
        C = F.column_sq_matrix(N)
        return math.fsum(C.max(axis=0)), "diagonal-parseval"
    return math.fsum(F.column_sq_matrix(N).ravel()), "hilbert-schmidt-sum"


def unif_gamma_lower(F: OperatorFamily, N: int | None = None,
                     cfg: GaussianDrawConfig | None = None, n_rotations: int = 8,
                     rotation_dim: int = 64, cuts: Sequence[int] | None = None,
                     delta_sq: float | None = None) -> UnifGammaBoundReport:
    """Bracket ``||F||^2_unif-gamma`` over the first ``N`` basis vectors of ``H``.

    Greedy over the standard basis: each ``k`` takes the member with the
    largest increment ``||T h_k||^2`` (Hilbert targets, exact) or the largest
    column norm (other targets, then estimated by Monte Carlo).  For Hilbert
    targets ``n_rotations`` random unitary bases acting on the first
    ``rotation_dim`` coordinates are probed as well and the best is kept.

    ``delta_sq`` sets the threshold for the NOT-uniformly verdict; by default
    it is ``1e-3`` times the lower bound.
    """
    if len(F) == 0:
        raise DomainError("empty family")
    N = F.n_cols if N is None else min(N, F.n_cols)
    hilbert = F.space.is_hilbert
    if hilbert:
        C = F.column_sq_matrix(N)
    else:
        if cfg is None:
            raise InvalidInputError("non-Hilbert targets need a GaussianDrawConfig")
        C = F.column_norm_matrix(N)
    choice = np.argmax(C, axis=0)
    witness = Witness("standard", choice)
    seq = [F[i] for i in choice]
    if hilbert:
        standard = math.fsum(C[choice, np.arange(N)])
        best, best_se = standard, 0.0
    else:
        est = _witness_estimate(seq, None, N, cfg)
        standard, best, best_se = est.mean, est.mean, est.std_error

    rotation_values = []
    if hilbert and n_rotations > 0 and N > 1:
        seed = cfg.seed if cfg is not None else 0
        d = min(N, rotation_dim)
        complex_field = F.space.scalar == "complex"
        for r in range(n_rotations):
            U = _rotation_basis(d, d, seed, r, complex_field)
            inc = np.vstack([np.sum(np.abs(T.matrix[:, :d] @ U) ** 2, axis=0) for T in F.members])
            ch = np.argmax(inc, axis=0)
            val = math.fsum(inc[ch, np.arange(d)]) + math.fsum(C[choice[d:], np.arange(d, N)])
            rotation_values.append(val)
            if val > best * (1 + 1e-12):
                best = val
                witness = Witness("rotation", np.concatenate([ch, choice[d:]]), d, (seed, r))
                seq = [F[i] for i in witness.members]

    upper, source = _analytic_upper(F, N)
    if best > upper * (1 + 1e-9) + 4 * best_se + 1e-300:
        raise InvariantViolation(f"lower bound {best} exceeds analytic upper bound {upper}",
                                 witness={"family": F.kind, "witness": witness})

    cuts = default_cuts(N) if cuts is None else [c for c in cuts if c <= N]
    basis = None if witness.basis == "standard" else witness.basis_matrix(F.n_cols, F.space.scalar == "complex")
    profile = cauchy_tail_profile(seq, basis, cuts, N, cfg)
    delta_sq = 1e-3 * best if delta_sq is None else delta_sq
    return UnifGammaBoundReport(
        lower_bound=best, upper_bound=upper, truncation=N, witness=witness,
        lower_std_error=best_se, upper_source=source, standard_lower=standard,
        rotation_values=rotation_values, cuts=list(cuts), tail_profile=profile,
        delta_sq=delta_sq, verdict=_verdict([e.mean for e in profile], delta_sq))


def _witness_estimate(seq, basis, N, cfg) -> GaussianSumEstimate:
    from .gamma_norm import mixed_gaussian_sum_sq
    return mixed_gaussian_sum_sq(seq, basis, (1, N), cfg)


# -- shift orbit counterexample ---------------------------------------------

@dataclass(frozen=True)
class ShiftBlock:
    n: int
    block_value: float          # (E|block sum|^2)^(1/2)
    block_second_moment: float
    partial_sum: float          # second moment of the witness sum up to the block end
    block_start: int            # first k of the block (1-based)
    block_end: int


def block_index(n: int) -> int:
    """``M_n`` with ``M_1 = 1`` and ``M_{n+1} = M_n + n``."""
    return 1 + n * (n - 1) // 2


def shift_functional(n_max: int) -> dict[int, float]:
    """Coefficients of ``T = sum_n n^-2 T_{2^n}`` on ``l^2 -> K``: ``{index: T h_index}``."""
    return {block_index(2**n + 1): 1.0 / n**2 for n in range(1, n_max + 1)}


def shift_witness_powers(m: int) -> np.ndarray:
    """Shift powers ``m_k = m - j`` for ``k = M_m + j``, ``j = 1..m``."""
    return m - np.arange(1, m + 1, dtype=np.int64)


def shift_orbit_divergence(n_max: int, coefficients: dict[int, float] | None = None,
                           chunk: int = 1 << 20) -> list[ShiftBlock]:
    """Exact block second moments of the shift-orbit witness for ``n = 1..n_max``.

    ``coefficients`` maps the 1-based index ``i`` to ``T h_i`` for the scalar
    functional ``T``; it defaults to ``sum_n n^-2 T_{2^n}``.  Outside the
    blocks the witness uses powers landing on a zero coefficient, so the
    partial sums are exactly the cumulative block moments.
    """
    if n_max > 24:
        raise DomainError("n_max above 24 exceeds the supported index arithmetic")
    if n_max < 1:
        raise DomainError("n_max must be positive")
    coef = shift_functional(n_max) if coefficients is None else dict(coefficients)
    keys = np.array(sorted(coef), dtype=np.int64)
    vals = np.array([coef[k] for k in keys], dtype=np.complex128)
    rows, running = [], 0.0
    for n in range(1, n_max + 1):
        m = 2**n
        start = block_index(m)
        total = 0.0
        for j0 in range(1, m + 1, chunk):
            j = np.arange(j0, min(j0 + chunk, m + 1), dtype=np.int64)
            k = start + j
            target = k + (m - j)              # index hit by T S^{m_k} h_k
            pos = np.searchsorted(keys, target)
            pos = np.minimum(pos, len(keys) - 1)
            hit = keys[pos] == target
            total += float(np.sum(np.abs(vals[pos][hit]) ** 2))
        running += total
        rows.append(ShiftBlock(n, math.sqrt(total), total, running, start + 1, start + m))
    return rows


# -- permanence and comparison checks ---------------------------------------

@dataclass
class ConvexHullReport:
    family_bound: float
    hull_bound: float
    combinations_bound: float
    factor: float
    holds: bool
    n_combinations: int


def permanence_convex(F: OperatorFamily, weights, cfg: GaussianDrawConfig | None = None,
                      N: int | None = None) -> ConvexHullReport:
    """Compare the bound of ``F`` with ``F`` plus convex combinations of it.

    ``weights`` is one weight vector or a 2-D array of them (one per row).
    Checks ``norm(hull) <= factor * norm(F) + 4 sigma`` with factor 1 for
    real scalars and 2 for complex scalars.
    """
    if len(F) > 16:
        raise DomainError("convex-hull check supports at most 16 members")
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.shape[1] != len(F) or np.any(W < 0) or not np.allclose(W.sum(axis=1), 1.0, atol=1e-12):
        raise DomainError("weights must be nonnegative rows summing to 1, one entry per member")
    combos = []
    for w in W:
        m = sum((wi * T.matrix for wi, T in zip(w, F.members)), sparse.csc_array(F[0].matrix.shape))
        combos.append(ColumnOperator(m, F.space))
    fam = unif_gamma_lower(F, N, cfg, n_rotations=0)
    hull = unif_gamma_lower(OperatorFamily(F.members + combos, "convex_hull_sample"), N, cfg, n_rotations=0)
    comb = unif_gamma_lower(OperatorFamily(combos, "combinations"), N, cfg, n_rotations=0)
    factor = 1.0 if F.space.scalar == "real" else 2.0
    sigma = _norm_sigma(hull) + factor * _norm_sigma(fam)
    holds = hull.norm_lower <= factor * fam.norm_lower + 4 * sigma + 1e-12 * max(1.0, fam.norm_lower)
    rep = ConvexHullReport(fam.lower_bound, hull.lower_bound, comb.lower_bound, factor, holds, len(combos))
    if not holds:
        raise InvariantViolation("convex hull bound exceeds family bound", witness=rep)
    return rep


def _norm_sigma(rep: UnifGammaBoundReport) -> float:
    if rep.lower_std_error == 0 or rep.lower_bound <= 0:
        return 0.0
    return rep.lower_std_error / (2 * math.sqrt(rep.lower_bound))


@dataclass
class RBoundComparison:
    R_lower: float
    unif_upper: float
    ratio: float
    std_error: float
    best_selection: dict


def _rademacher_second_moment(Y, space, max_exact=12, cfg=None) -> tuple[float, float]:
    """``E||sum_k r_k y_k||^2`` for columns of ``Y`` (exact up to 12 terms)."""
    n = Y.shape[1]
    if n <= max_exact:
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
        vals = column_norms(space, Y @ signs.T) ** 2
        return float(np.mean(vals)), 0.0
    cfg = cfg or GaussianDrawConfig(0, 20_000, 20)
    means = []
    for gen, size in zip(cfg.generators(_SIGN_STREAM), cfg.batch_sizes()):
        s = gen.choice((1.0, -1.0), size=(size, n))
        means.append(float(np.mean(column_norms(space, Y @ s.T) ** 2)))
    return float(np.mean(means)), float(np.std(means, ddof=1) / math.sqrt(len(means)))


def gamma_bound_vs_unif(F: OperatorFamily, cfg: GaussianDrawConfig | None = None,
                        n_trials: int = 20, sizes: Sequence[int] = (1, 2, 4, 8, 12)) -> RBoundComparison:
    """Search for a large Rademacher ratio and compare with the uniform bound.

    ``R_lower`` is the best ratio ``(E||sum r_k S_k x_k||^2 / E||sum r_k x_k||^2)^(1/2)``
    found over top singular vectors of the members and random selections.
    Asserts ``R_lower <= sqrt(pi/2) * unif_upper + 4 sigma``.
    """
    seed = cfg.seed if cfg is not None else 0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(13,))))
    dense = [T.toarray() for T in F.members]
    best, best_se, best_sel = 0.0, 0.0, {}
    for i, A in enumerate(dense):
        if not np.any(A):
            continue
        _, s, vh = np.linalg.svd(A, full_matrices=False)
        x = vh[0].conj()
        r = float(column_norms(F.space, (A @ x).reshape(-1, 1))[0] / np.linalg.norm(x))
        if r > best:
            best, best_se, best_sel = r, 0.0, {"n": 1, "members": [i]}
    for n in sizes:
        for _ in range(n_trials):
            X = rng.standard_normal((F.n_cols, n))
            if F.space.scalar == "complex":
                X = X + 1j * rng.standard_normal((F.n_cols, n))
            picks = [int(np.argmax([np.linalg.norm(A @ X[:, k]) for A in dense])) for k in range(n)]
            Y = np.column_stack([dense[p] @ X[:, k] for k, p in enumerate(picks)])
            num, num_se = _rademacher_second_moment(Y, F.space, cfg=cfg)
            den, _ = _rademacher_second_moment(X, L2)
            r = math.sqrt(num / den)
            if r > best:
                best, best_se, best_sel = r, num_se / (2 * math.sqrt(num * den)) if num > 0 else 0.0, \
                    {"n": n, "members": picks}
    rep = unif_gamma_lower(F, cfg=cfg, n_rotations=0)
    upper = rep.norm_upper
    ratio = best / upper if upper > 0 else math.inf
    if best > math.sqrt(math.pi / 2) * upper + 4 * best_se + 1e-12:
        raise InvariantViolation(f"R lower bound {best} exceeds sqrt(pi/2) * {upper}", witness=best_sel)
    return RBoundComparison(best, upper, ratio, best_se, best_sel)


@dataclass
class DominationReport:
    dominated: bool
    worst_ratio: float
    worst_member: int
    relatively_compact_guaranteed: bool


def _row_norms_monomial(T: ColumnOperator) -> np.ndarray:
    m = T.matrix.tocoo()
    if len(np.unique(m.col)) != m.nnz or len(np.unique(m.row)) != m.nnz:
        raise UnsupportedStructureError("domination check needs columns supported on distinct coordinates")
    out = np.zeros(T.dim)
    out[m.row] = np.abs(m.data)
    return out


def dominated_check(F: OperatorFamily, S: ColumnOperator, rtol: float = 1e-12) -> DominationReport:
    """Check ``||T* x*|| <= ||S* x*||`` for all members of a diagonal-type family.

    Every member and ``S`` must map distinct basis vectors to multiples of
    distinct coordinates; then the condition reduces to comparing
    ``||T* e_i||`` with ``||S* e_i||`` coordinatewise.
    """
    s = _row_norms_monomial(S)
    worst, worst_i = 0.0, -1
    for i, T in enumerate(F.members):
        t = _row_norms_monomial(T)
        n = max(t.size, s.size)
        t = np.pad(t, (0, n - t.size))
        ss = np.pad(s, (0, n - s.size))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(t > 0, t / np.where(ss > 0, ss, 0.0), 0.0)
        r = float(np.max(ratio)) if ratio.size else 0.0
        if r > worst:
            worst, worst_i = r, i
    ok = worst <= 1 + rtol
    return DominationReport(ok, worst, worst_i, ok)


@dataclass
class FatouReport:
    member_bounds: list
    union_bound: float
    holds: bool | None
    union_report: UnifGammaBoundReport


def fatou_union_bound(chain: Sequence[OperatorFamily], cfg: GaussianDrawConfig | None = None,
                      N: int | None = None, cuts: Sequence[int] | None = None) -> FatouReport:
    """Bounds of a nested chain ``F_1 subset F_2 subset ...`` and of its union.

    On ``l^p`` with ``p < inf`` asserts that the union's lower bound stays
    below the largest chain bound (+4 sigma).  On ``c0`` nothing is asserted;
    the union's tail profile is the evidence (it need not vanish there).
    """
    chain = list(chain)
    for a, b in zip(chain, chain[1:]):
        if not a.fingerprints() <= b.fingerprints():
            raise DomainError("families are not nested")
    reps = [unif_gamma_lower(F, N, cfg, n_rotations=0, cuts=cuts) for F in chain]
    union = reps[-1]
    holds = None
    if chain[-1].space.kind == "ellp":
        top = max(r.lower_bound + 4 * r.lower_std_error for r in reps)
        holds = union.lower_bound <= top + 1e-12 * max(1.0, top)
        if not holds:
            raise InvariantViolation("union bound exceeds chain supremum", witness=union.witness)
    return FatouReport([r.lower_bound for r in reps], union.lower_bound, holds, union)
