"""Probability vectors, column-stochastic matrices, permutations and small
discrete joints used as brute-force oracles.

Conventions
-----------
Classes are labelled ``0..K-1``. A noise matrix stores
``E[y_noisy, y_clean] = P(Y' = y_noisy | Y = y_clean)``, so columns are indexed
by the true class and every column sums to one. A ``DiscreteJoint`` table is
indexed ``q[x, y, y_noisy]``.
"""
from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import (
    MassNotOne,
    NegativeEntry,
    NotConditionallyIndependent,
    SingularMatrix,
    ZeroNoisyClass,
)

SIMPLEX_TOL = 1e-9
CLAMP_TOL = 1e-12
SINGULAR_TOL = 1e-12
MAX_SUPPORT = 64
MAX_CLASSES = 10


def _frozen(array):
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SimplexVector:
    probs: np.ndarray
    tol: float = field(default=SIMPLEX_TOL, compare=False, repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("a simplex vector must be a non-empty 1-d array")
        negative = np.flatnonzero(probs < 0)
        if negative.size:
            i = int(negative[0])
            raise NegativeEntry(i, float(probs[i]))
        deviation = float(probs.sum() - 1.0)
        if abs(deviation) > self.tol:
            raise MassNotOne(deviation)
        object.__setattr__(self, "probs", _frozen(probs))

    @classmethod
    def uniform(cls, k):
        return cls(np.full(k, 1.0 / k))

    @property
    def K(self):
        return self.probs.size

    def is_uniform(self, tol=SIMPLEX_TOL):
        return bool(np.all(np.abs(self.probs - 1.0 / self.K) <= tol))

    def __len__(self):
        return self.K

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def to_list(self):
        return self.probs.tolist()


def validate_simplex(v, tol=SIMPLEX_TOL):
    """Return ``v`` as a SimplexVector, raising NegativeEntry or MassNotOne."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("empty vector")
    return SimplexVector(v, tol=tol)


@dataclass(frozen=True)
class StochasticMatrix:
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("matrix has non-finite entries")
        bad = np.argwhere(e < -CLAMP_TOL)
        if bad.size:
            i, j = (int(t) for t in bad[0])
            raise NegativeEntry((i, j), float(e[i, j]))
        e[e < 0] = 0.0
        deviation = e.sum(axis=0) - 1.0
        worst = int(np.argmax(np.abs(deviation)))
        if abs(deviation[worst]) > SIMPLEX_TOL:
            raise MassNotOne(float(deviation[worst]), where=f"column {worst}")
        object.__setattr__(self, "entries", _frozen(e))

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))

    @property
    def K(self):
        return self.entries.shape[0]

    def push_forward(self, p):
        """Distribution of Y' when Y ~ p."""
        return SimplexVector(self.entries @ np.asarray(p, dtype=float))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def to_list(self):
        return self.entries.tolist()


@dataclass(frozen=True)
class PermutationMatrix:
    """Permutation whose matrix has column ``j`` equal to ``e_{perm[j]}``."""

    perm: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def leading_three_cycle(cls, k):
        """``[e_1, e_2, e_0, e_3, ..., e_{K-1}]``: cycles the first three classes."""
        if k < 3:
            raise ValueError("a 3-cycle needs K >= 3")
        return cls((1, 2, 0) + tuple(range(3, k)))

    @property
    def K(self):
        return len(self.perm)

    @property
    def parity(self):
        """0 for even, 1 for odd (counted from the cycle decomposition)."""
        seen = [False] * self.K
        transpositions = 0
        for start in range(self.K):
            length = 0
            i = start
            while not seen[i]:
                seen[i] = True
                i = self.perm[i]
                length += 1
            if length:
                transpositions += length - 1
        return transpositions % 2

    @property
    def is_even(self):
        return self.parity == 0

    @property
    def sign(self):
        return 1 if self.is_even else -1

    @property
    def matrix(self):
        m = np.zeros((self.K, self.K))
        m[list(self.perm), list(range(self.K))] = 1.0
        return m

    def inverse(self):
        inv = [0] * self.K
        for j, i in enumerate(self.perm):
            inv[i] = j
        return PermutationMatrix(tuple(inv))

    def apply(self, v):
        """Matrix-vector product: ``out[perm[j]] = v[j]``."""
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        out[list(self.perm)] = v
        return out

    def moved(self):
        return [j for j, i in enumerate(self.perm) if i != j]


def _as_square(E):
    a = np.array(E, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def lu_factor(A):
    """Doolittle LU with partial pivoting.

    Returns ``(lu, piv, sign)`` where ``lu`` packs unit-lower L below the
    diagonal and U on and above it, ``piv[i]`` is the original row now at
    position ``i``, and ``sign`` is the parity of the row swaps.
    """
    lu = _as_square(A)
    n = lu.shape[0]
    piv = np.arange(n)
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            piv[[k, p]] = piv[[p, k]]
            sign = -sign
        if lu[k, k] == 0.0:
            continue
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, piv, sign


def matrix_determinant(E):
    lu, _, sign = lu_factor(E)
    return float(sign * np.prod(np.diag(lu)))


def solve_linear(E, b):
    """Solve ``E x = b`` by LU; ``b`` may be a vector or a matrix of columns."""
    lu, piv, sign = lu_factor(E)
    det = sign * np.prod(np.diag(lu))
    if not abs(det) > SINGULAR_TOL:
        raise SingularMatrix(f"|det| = {abs(det):.3e} <= {SINGULAR_TOL:g}")
    n = lu.shape[0]
    b = np.asarray(b, dtype=float)
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {n}")
    x = b[piv].copy()
    for i in range(n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def inverse(E):
    return solve_linear(E, np.eye(np.asarray(E).shape[0]))


@dataclass(frozen=True)
class DiscreteJoint:
    """Finite joint ``q[x, y, y_noisy]`` over ``|X| x K x K`` cells."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 3 or t.shape[1] != t.shape[2]:
            raise ValueError(f"expected shape (|X|, K, K), got {t.shape}")
        if t.shape[0] > MAX_SUPPORT or t.shape[1] > MAX_CLASSES:
            raise ValueError(f"support {t.shape} exceeds |X| <= {MAX_SUPPORT}, K <= {MAX_CLASSES}")
        negative = np.argwhere(t < 0)
        if negative.size:
            idx = tuple(int(i) for i in negative[0])
            raise NegativeEntry(idx, float(t[idx]))
        deviation = float(t.sum() - 1.0)
        if abs(deviation) > SIMPLEX_TOL:
            raise MassNotOne(deviation, where="joint")
        object.__setattr__(self, "table", _frozen(t))

    @classmethod
    def from_channel(cls, x_given_y, p, E):
        """Instance-independent joint ``P(x|y) p(y) E[y', y]``.

        ``x_given_y`` has shape ``(|X|, K)`` with columns summing to one.
        """
        x_given_y = np.asarray(x_given_y, dtype=float)
        p = np.asarray(p, dtype=float)
        E = np.asarray(E, dtype=float)
        return cls(x_given_y[:, :, None] * p[None, :, None] * E.T[None, :, :])

    @property
    def n_x(self):
        return self.table.shape[0]

    @property
    def K(self):
        return self.table.shape[1]

    @property
    def p_x(self):
        return self.table.sum(axis=(1, 2))

    @property
    def p_y(self):
        return self.table.sum(axis=(0, 2))

    @property
    def p_noisy(self):
        return self.table.sum(axis=(0, 1))

    @property
    def xy(self):
        """``q(x, y)`` with shape (|X|, K)."""
        return self.table.sum(axis=2)

    @property
    def x_noisy(self):
        """``q(x, y')`` with shape (|X|, K)."""
        return self.table.sum(axis=1)

    def channel(self):
        """``E[y', y] = q(y' | y)``; columns of classes with no mass are zero."""
        y_ynoisy = self.table.sum(axis=0)
        py = y_ynoisy.sum(axis=1)
        out = np.zeros_like(y_ynoisy)
        mask = py > 0
        out[mask] = y_ynoisy[mask] / py[mask, None]
        return out.T


def check_conditional_independence(j, tol=SIMPLEX_TOL):
    """True iff ``q(y' | y, x)`` does not depend on ``x`` (within ``tol``)."""
    t = j.table
    xy = t.sum(axis=2)
    pooled = j.channel().T  # [y, y']
    for x, y in itertools.product(range(j.n_x), range(j.K)):
        if xy[x, y] > 0:
            cond = t[x, y] / xy[x, y]
            if np.max(np.abs(cond - pooled[y])) > tol:
                return False
    return True


def reweight_to_balanced_noisy(j):
    """Reweight by ``1 / (K q(y'))`` so the noisy labels become uniform.

    The input must have instance-independent noise; the output keeps it.
    """
    if not check_conditional_independence(j):
        raise NotConditionallyIndependent("input joint has instance-dependent noise")
    p_noisy = j.p_noisy
    zero = np.flatnonzero(p_noisy <= 0)
    if zero.size:
        raise ZeroNoisyClass(f"noisy class {int(zero[0])} has zero probability")
    return DiscreteJoint(j.table / (j.K * p_noisy[None, None, :]))
