"""gamma-radonifying norms of column operators.

An operator ``T: H -> E`` is stored through its images ``T h_k`` of the
standard basis of ``H`` as the columns of a sparse matrix.  Index arguments
that refer to the mathematical sequence (``k_range``, cut points) are
1-based and inclusive, matching ``sum_{k=M}^N``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import InvalidBasisError, InvalidInputError, NumericRangeError, UnsupportedSpaceError
from .spaces import L2, GaussianDrawConfig, SpaceSpec, column_norms

ORTHONORMAL_TOL = 1e-10
_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class GaussianSumEstimate:
    """Estimate of ``E||sum_k g_k v_k||^2``.

    ``std_error`` is the standard deviation of the batch means divided by
    ``sqrt(batch_count)``; exact evaluations carry ``std_error == 0``.
    """

    mean: float
    std_error: float
    n_samples: int
    truncation: int
    exact: bool = False

    def within(self, value: float, n_sigma: float = 4.0, atol: float = 1e-12) -> bool:
        return abs(self.mean - value) <= n_sigma * self.std_error + atol * max(1.0, abs(value))

    @property
    def norm(self) -> float:
        """Square root of the mean (the L^2(Omega; E) norm)."""
        return math.sqrt(self.mean)


class ColumnOperator:
    """Finite section of an operator ``H -> E`` given by its columns.

    Parameters
    ----------
    matrix : array_like or scipy sparse
        Shape ``(dim, n_cols)``; column ``k`` (0-based) is ``T h_{k+1}``.
    space : SpaceSpec
        Target space ``E`` (its first ``dim`` coordinates).
    """

    def __init__(self, matrix, space: SpaceSpec = L2):
        m = sparse.csc_array(matrix)
        if m.dtype.kind not in "fc":
            m = m.astype(np.float64)
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise InvalidInputError("operator has non-finite entries")
        m.eliminate_zeros()
        self.matrix = m
        self.space = space

    @classmethod
    def from_columns(cls, columns: dict, dim: int, n_cols: int | None = None,
                     space: SpaceSpec = L2) -> "ColumnOperator":
        """Build from ``{k: (indices, values)}`` or ``{k: dense_vector}``, 0-based."""
        if n_cols is None:
            n_cols = max(columns, default=-1) + 1
        rows, cols, vals = [], [], []
        for k, col in columns.items():
            if not 0 <= k < n_cols:
                raise InvalidInputError(f"column index {k} outside [0, {n_cols})")
            if isinstance(col, tuple):
                idx, v = np.asarray(col[0], dtype=np.int64), np.asarray(col[1])
            else:
                v = np.asarray(col)
                idx = np.arange(v.size)
            if idx.size and (idx.min() < 0 or idx.max() >= dim):
                raise InvalidInputError(f"column {k} exceeds declared truncation {dim}")
            rows.append(idx)
            cols.append(np.full(idx.size, k))
            vals.append(v)
        if rows:
            data = np.concatenate(vals)
            m = sparse.coo_array((data, (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(dim, n_cols))
        else:
            m = sparse.csc_array((dim, n_cols))
        return cls(m, space)

    @classmethod
    def diagonal(cls, values, space: SpaceSpec = L2) -> "ColumnOperator":
        values = np.asarray(values)
        return cls(sparse.diags_array(values, format="csc"), space)

    @classmethod
    def zero(cls, dim: int, n_cols: int, space: SpaceSpec = L2) -> "ColumnOperator":
        return cls(sparse.csc_array((dim, n_cols)), space)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def declared_trunc(self) -> int:
        return self.dim

    def column(self, k: int) -> np.ndarray:
        return self.matrix[:, [k]].toarray().ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def column_norms_sq(self) -> np.ndarray:
        """``||T h_k||^2`` in the Hilbert norm, for every column."""
        return np.asarray(abs(self.matrix).power(2).sum(axis=0)).ravel()

    def apply(self, h) -> np.ndarray:
        return self.matrix @ np.asarray(h)

    def compose(self, left=None, right=None) -> "ColumnOperator":
        """``left @ T @ right`` with dense or sparse factors."""
        m = self.matrix
        if right is not None:
            m = m @ sparse.csc_array(right)
        if left is not None:
            m = sparse.csc_array(left) @ m
        return ColumnOperator(m, self.space)

    def scaled(self, c) -> "ColumnOperator":
        return ColumnOperator(self.matrix * c, self.space)

    def is_diagonal(self) -> bool:
        coo = self.matrix.tocoo()
        return bool(np.all(coo.row == coo.col))

    def fingerprint(self) -> str:
        m = self.matrix.tocsc()
        m.sort_indices()
        h = hashlib.sha1()
        h.update(repr(m.shape).encode())
        h.update(np.ascontiguousarray(m.indptr).tobytes())
        h.update(np.ascontiguousarray(m.indices).tobytes())
        h.update(np.round(m.data.astype(np.complex128), 14).tobytes())
        return h.hexdigest()

    def __add__(self, other: "ColumnOperator") -> "ColumnOperator":
        return ColumnOperator(self.matrix + other.matrix, self.space)

    def __neg__(self) -> "ColumnOperator":
        return self.scaled(-1)

    def __repr__(self):
        return f"ColumnOperator(dim={self.dim}, n_cols={self.n_cols}, nnz={self.matrix.nnz}, space={self.space})"


def _as_matrix(vectors):
    if sparse.issparse(vectors):
        return sparse.csc_array(vectors)
    return np.asarray(vectors)


def gaussian_sum_sq(vectors, space: SpaceSpec, cfg: GaussianDrawConfig | None = None,
                    method: str = "auto") -> GaussianSumEstimate:
    """``E||sum_k g_k v_k||^2`` for the columns ``v_k`` of ``vectors``.

    ``method`` is ``"exact"`` (Hilbert targets only), ``"mc"`` or ``"auto"``
    (exact whenever the target is ``l^2``).
    """
    V = _as_matrix(vectors)
    dim, n = V.shape
    nnz = V.nnz if sparse.issparse(V) else np.count_nonzero(V)
    if n == 0 or nnz == 0:
        return GaussianSumEstimate(0.0, 0.0, 0, dim, exact=True)
    if method == "exact" or (method == "auto" and space.is_hilbert):
        if not space.is_hilbert:
            raise UnsupportedSpaceError(f"exact second moment needs l^2, not {space}")
        data = V.data if sparse.issparse(V) else V
        val = math.fsum((np.abs(data) ** 2).ravel())
        if not math.isfinite(val):
            raise NumericRangeError("second moment overflowed")
        return GaussianSumEstimate(val, 0.0, 0, dim, exact=True)
    if method not in ("mc", "auto"):
        raise InvalidInputError(f"unknown method {method!r}")
    if cfg is None:
        raise InvalidInputError("Monte Carlo evaluation needs a GaussianDrawConfig")
    return _monte_carlo(V, space, cfg)


def _monte_carlo(V, space: SpaceSpec, cfg: GaussianDrawConfig) -> GaussianSumEstimate:
    dim, n = V.shape
    chunk = max(1, _CHUNK_ENTRIES // max(n, dim))
    means = []
    for gen, size in zip(cfg.generators(), cfg.batch_sizes()):
        total = 0.0
        done = 0
        while done < size:
            m = min(chunk, size - done)
            G = gen.standard_normal((m, n))
            X = V @ G.T
            nrm = column_norms(space, X)
            if not np.all(np.isfinite(nrm)):
                raise NumericRangeError("norm overflow in Monte Carlo sample")
            total += float(np.sum(nrm**2))
            done += m
        means.append(total / size)
    means = np.asarray(means)
    sizes = np.asarray(cfg.batch_sizes(), dtype=float)
    mean = float(np.sum(means * sizes) / sizes.sum())
    se = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    return GaussianSumEstimate(mean, se, cfg.n_samples, dim)


def gamma_norm_sq(T: ColumnOperator, cfg: GaussianDrawConfig | None = None,
                  method: str = "auto") -> GaussianSumEstimate:
    """``||T||^2_gamma = E||sum_k g_k T h_k||^2`` over the declared truncation."""
    if cfg is not None and method != "exact" and cfg.n_samples < 10 * cfg.batch_count:
        raise InvalidInputError("n_samples must be at least 10 * batch_count")
    return gaussian_sum_sq(T.matrix, T.space, cfg, method)


def check_orthonormal(basis, tol: float = ORTHONORMAL_TOL) -> float:
    """Return the worst Gram defect; raise ``InvalidBasisError`` above ``tol``."""
    U = np.asarray(basis)
    gram = U.conj().T @ U
    defect = float(np.max(np.abs(gram - np.eye(U.shape[1])))) if U.size else 0.0
    if defect > tol:
        raise InvalidBasisError(f"basis Gram defect {defect:.3e} exceeds {tol:g}", defect)
    return defect


def _images(T_seq: Sequence[ColumnOperator], basis, M: int, N: int):
    """Sparse matrix whose columns are ``T_k h_k`` for ``k = M..N``."""
    if M < 1 or N < M - 1:
        raise InvalidInputError(f"bad index range [{M}, {N}]")
    if len(T_seq) < N:
        raise InvalidInputError(f"need at least {N} operators, got {len(T_seq)}")
    if N < M:
        return sparse.csc_array((T_seq[0].dim if T_seq else 0, 0)), T_seq[0].space if T_seq else L2
    space = T_seq[0].space
    dim = max(T.dim for T in T_seq[M - 1:N])
    cols = []
    for k in range(M, N + 1):
        T = T_seq[k - 1]
        if basis is None:
            c = T.matrix[:, [k - 1]] if k - 1 < T.n_cols else sparse.csc_array((T.dim, 1))
        else:
            h = np.asarray(basis)[:, k - 1]
            if h.size < T.n_cols:
                h = np.pad(h, (0, T.n_cols - h.size))
            c = sparse.csc_array((T.matrix @ h[:T.n_cols]).reshape(-1, 1))
        if c.shape[0] < dim:
            c = sparse.vstack([c, sparse.csc_array((dim - c.shape[0], 1))])
        cols.append(c)
    return sparse.hstack(cols, format="csc"), space


def mixed_gaussian_sum_sq(T_seq: Sequence[ColumnOperator], basis=None,
                          k_range: tuple[int, int] | None = None,
                          cfg: GaussianDrawConfig | None = None,
                          method: str = "auto") -> GaussianSumEstimate:
    """``E||sum_{k=M}^N g_k T_k h_k||^2`` for an operator sequence.

    ``basis`` is a 2-D array with orthonormal columns ``h_k`` (``None`` means
    the standard basis).  ``k_range`` is 1-based inclusive and defaults to
    the whole sequence.
    """
    if basis is not None:
        check_orthonormal(basis)
    M, N = k_range if k_range is not None else (1, len(T_seq))
    V, space = _images(T_seq, basis, M, N)
    return gaussian_sum_sq(V, space, cfg, method)


def cauchy_tail_profile(T_seq: Sequence[ColumnOperator], basis=None, cuts: Sequence[int] = (),
                        N: int | None = None, cfg: GaussianDrawConfig | None = None,
                        method: str = "auto") -> list[GaussianSumEstimate]:
    """Tail second moments ``E||sum_{k=n}^N g_k T_k h_k||^2`` for each cut ``n``."""
    if basis is not None:
        check_orthonormal(basis)
    N = len(T_seq) if N is None else N
    cuts = list(cuts)
    if any(c2 <= c1 for c1, c2 in zip(cuts, cuts[1:])):
        raise InvalidInputError("cut points must be strictly increasing")
    V, space = _images(T_seq, basis, 1, N)
    if method == "exact" or (method == "auto" and space.is_hilbert):
        inc = np.asarray(abs(V).power(2).sum(axis=0)).ravel()
        return [GaussianSumEstimate(math.fsum(inc[n - 1:]), 0.0, 0, V.shape[0], exact=True)
                for n in cuts]
    return [gaussian_sum_sq(V[:, n - 1:], space, cfg, method) for n in cuts]
