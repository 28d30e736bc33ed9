"""Sequence-space targets (l^p and c_0 sections), norms and Gaussian draws.

Vectors are plain 1-D numpy arrays; a truncated element of ``l^p`` or
``c_0`` is just its first ``dim`` coordinates.  Complex coefficients are
allowed everywhere, while the Gaussian weights are always *real* standard
Gaussians (the complexification convention).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special

from .errors import DomainError, InvalidInputError, UnsupportedSpaceError


@dataclass(frozen=True)
class SpaceSpec:
    """Target Banach space ``l^p`` (``p >= 1``) or ``c_0``."""

    kind: Literal["ellp", "c0"] = "ellp"
    p: float = 2.0
    scalar: Literal["real", "complex"] = "complex"

    def __post_init__(self):
        if self.kind not in ("ellp", "c0"):
            raise InvalidInputError(f"unknown space kind {self.kind!r}")
        if self.scalar not in ("real", "complex"):
            raise InvalidInputError(f"unknown scalar field {self.scalar!r}")
        if self.kind == "ellp" and not (self.p >= 1 and math.isfinite(self.p)):
            raise DomainError(f"l^p needs finite p >= 1, got {self.p}")

    @classmethod
    def ell(cls, p: float, scalar="complex") -> "SpaceSpec":
        return cls("ellp", float(p), scalar)

    @classmethod
    def c0(cls, scalar="complex") -> "SpaceSpec":
        return cls("c0", math.inf, scalar)

    @property
    def is_hilbert(self) -> bool:
        return self.kind == "ellp" and self.p == 2.0

    @property
    def dtype(self):
        return np.complex128 if self.scalar == "complex" else np.float64

    def __str__(self):
        return "c0" if self.kind == "c0" else f"l^{self.p:g}"


L2 = SpaceSpec.ell(2)


def _check_finite(v):
    v = np.asarray(v)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite coefficients")
    return v


def norm(space: SpaceSpec, v) -> float:
    """Norm of a finite section ``v`` in ``space``."""
    v = _check_finite(v)
    return float(column_norms(space, v.reshape(-1, 1))[0])


def column_norms(space: SpaceSpec, X) -> np.ndarray:
    """Norms of the columns of a 2-D array ``X`` (one vector per column)."""
    a = np.abs(np.asarray(X))
    if a.size == 0:
        return np.zeros(a.shape[1] if a.ndim == 2 else 0)
    if space.kind == "c0":
        return a.max(axis=0)
    p = space.p
    if p == 2.0:
        # hypot-style scaling keeps huge/small entries from over/underflowing
        return np.linalg.norm(a, axis=0)
    if p == 1.0:
        return a.sum(axis=0)
    scale = a.max(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * ((a / safe) ** p).sum(axis=0) ** (1.0 / p)


def gaussian_abs_moment(p: float) -> float:
    """E|g|^p for a standard real Gaussian g."""
    if not p >= 1:
        raise DomainError(f"moment order must be >= 1, got {p}")
    return float(2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi))


def second_moment_exact_l2(columns, space: SpaceSpec = L2) -> float:
    """Exact ``E||sum_k g_k v_k||^2 = sum_k ||v_k||^2`` in a Hilbert target.

    ``columns`` is a sequence of vectors or a 2-D array whose columns are
    the ``v_k``.  Real Gaussians make the identity hold for complex ``v_k``.
    """
    if not space.is_hilbert:
        raise UnsupportedSpaceError(f"exact second moment needs l^2, not {space}")
    if isinstance(columns, np.ndarray) and columns.ndim == 2:
        X = columns
    else:
        cols = [np.asarray(c).ravel() for c in columns]
        if not cols:
            return 0.0
        X = np.column_stack(cols)
    X = _check_finite(X)
    return float(math.fsum((np.abs(X) ** 2).ravel()))


@dataclass(frozen=True)
class GaussianDrawConfig:
    """Seeded Monte Carlo budget.

    The stream is split into ``batch_count`` independent child streams
    (``numpy.random.SeedSequence.spawn``), so each batch can be evaluated on
    its own without changing any number.
    """

    seed: int = 0
    n_samples: int = 100_000
    batch_count: int = 20

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be positive")
        if self.batch_count < 2:
            raise InvalidInputError("batch_count must be at least 2")

    def batch_sizes(self) -> list[int]:
        q, r = divmod(self.n_samples, self.batch_count)
        return [q + (i < r) for i in range(self.batch_count)]

    def generators(self, stream: int = 0) -> list[np.random.Generator]:
        """One generator per batch; ``stream`` separates unrelated uses."""
        root = np.random.SeedSequence(int(self.seed), spawn_key=(stream,))
        return [np.random.Generator(np.random.PCG64(s)) for s in root.spawn(self.batch_count)]

    def with_seed(self, seed: int) -> "GaussianDrawConfig":
        return GaussianDrawConfig(seed, self.n_samples, self.batch_count)
