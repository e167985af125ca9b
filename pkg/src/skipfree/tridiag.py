"""Level-homogeneous block tri-diagonal operators, possibly nested.

A nested operator is either a leaf (a dense nonnegative ``ndarray``) or a
:class:`Triplet` whose three members are themselves congruent nested
operators.  A depth-2 operator therefore describes a block tri-diagonal
matrix whose blocks are block tri-diagonal matrices with countably many
levels.  Finite realizations come from :func:`truncate`, which never repairs
the boundary: the corner block is the plain diagonal member.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import AssumptionError, DomainError, IterationLimitError, ValidationError
from .optimize import coordinate_descent
from .phase import DEFAULT_TOL, as_phase_matrix, spectral_radius

# dense realizations up to this many rows, CSR above
DENSE_MAX_DIM = 4096

LIMIT_SCHEDULE = (8, 16, 32, 64, 128)


@dataclass(frozen=True)
class Triplet:
    """Ordered (lower, diag, upper) = (A_-1, A_0, A_1) of congruent operators."""

    lower: "NestedOperator"
    diag: "NestedOperator"
    upper: "NestedOperator"

    def __post_init__(self):
        members = []
        for name in ("lower", "diag", "upper"):
            op = getattr(self, name)
            if not isinstance(op, Triplet):
                op = as_phase_matrix(op, name)
                object.__setattr__(self, name, op)
            members.append(op)
        shapes = {shape_of(m) for m in members}
        if len(shapes) != 1:
            raise ValidationError(f"triplet members are not congruent: {sorted(shapes)}")

    def __iter__(self):
        return iter((self.lower, self.diag, self.upper))

    @property
    def depth(self) -> int:
        return depth(self)

    @property
    def leaf_dim(self) -> int:
        return leaf_dim(self)

    def nonzero_offdiagonal(self) -> bool:
        """Both A_-1 and A_1 have at least one positive entry."""
        return not is_zero(self.lower) and not is_zero(self.upper)

    def require_nonzero_offdiagonal(self):
        if is_zero(self.lower):
            raise AssumptionError("lower block A_-1 is identically zero")
        if is_zero(self.upper):
            raise AssumptionError("upper block A_1 is identically zero")


NestedOperator = Union[np.ndarray, Triplet]


def leaf(M) -> np.ndarray:
    return as_phase_matrix(M)


def depth(op: NestedOperator) -> int:
    d = 0
    while isinstance(op, Triplet):
        op = op.diag
        d += 1
    return d


def leaf_dim(op: NestedOperator) -> int:
    while isinstance(op, Triplet):
        op = op.diag
    return op.shape[0]


def shape_of(op: NestedOperator) -> tuple:
    """(depth, leaf_dim) signature used for congruence checks."""
    return depth(op), leaf_dim(op)


def is_zero(op: NestedOperator) -> bool:
    if isinstance(op, Triplet):
        return all(is_zero(m) for m in op)
    return not np.any(op > 0)


def combine(ops: Sequence[NestedOperator], weights: Sequence[float]) -> NestedOperator:
    """Elementwise sum of congruent operators with scalar weights."""
    first = ops[0]
    if isinstance(first, Triplet):
        members = [tuple(op) for op in ops]
        return Triplet(*(combine([m[i] for m in members], weights) for i in range(3)))
    out = np.zeros_like(first, dtype=float)
    for op, w in zip(ops, weights):
        out = out + w * op
    return as_phase_matrix(out)


def scale(op: NestedOperator, factor: float) -> NestedOperator:
    return combine([op], [factor])


def map_leaves(op: NestedOperator, fn) -> NestedOperator:
    if isinstance(op, Triplet):
        return Triplet(*(map_leaves(m, fn) for m in op))
    return as_phase_matrix(fn(op))


def a_star(t: Triplet, z: float) -> NestedOperator:
    """z^-1 A_-1 + A_0 + z A_1, applied at the top nesting level only."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    return combine([t.lower, t.diag, t.upper], [1.0 / z, 1.0, z])


def _shift(L, k):
    # block row n holds A_k in block column n + k
    return sp.eye(L, k=k, format="csr")


def _assemble(op: NestedOperator, levels: Sequence[int]) -> sp.csr_matrix:
    if not isinstance(op, Triplet):
        return sp.csr_matrix(op)
    L, rest = levels[0], levels[1:]
    lower, diag, upper = (_assemble(m, rest) for m in op)
    out = sp.kron(_shift(L, 0), diag) + sp.kron(_shift(L, -1), lower) + sp.kron(_shift(L, 1), upper)
    return sp.csr_matrix(out)


@dataclass(frozen=True)
class TruncatedMatrix:
    """Finite realization of a nested operator, corner block unchanged."""

    levels: tuple
    leaf_dim: int
    matrix: Union[np.ndarray, sp.csr_matrix]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def block(self, i: int, j: int):
        """Top-level block (i, j) as a dense array."""
        b = self.dim // self.levels[0]
        sub = self.matrix[i * b:(i + 1) * b, j * b:(j + 1) * b]
        return sub.toarray() if sp.issparse(sub) else np.array(sub)


def truncate(op: NestedOperator, levels_per_depth) -> TruncatedMatrix:
    """Keep the first ``L_d`` levels at each nesting depth."""
    if isinstance(levels_per_depth, (int, np.integer)):
        levels_per_depth = [int(levels_per_depth)] * depth(op)
    levels = tuple(int(L) for L in levels_per_depth)
    if len(levels) != depth(op):
        raise ValidationError(f"need {depth(op)} level counts, got {len(levels)}")
    if any(L < 1 for L in levels):
        raise DomainError(f"level counts must be >= 1, got {levels}")
    M = _assemble(op, levels)
    if M.shape[0] <= DENSE_MAX_DIM:
        M = M.toarray()
    return TruncatedMatrix(levels, leaf_dim(op), M)


def symbol(op: NestedOperator, weights: Sequence[float]) -> np.ndarray:
    """Collapse every nesting level with its weight: sum_k w^k A_k, recursively."""
    if not isinstance(op, Triplet):
        return op
    w, rest = weights[0], weights[1:]
    return (symbol(op.lower, rest) / w + symbol(op.diag, rest) + symbol(op.upper, rest) * w)


def reweight(op: NestedOperator, weights: Sequence[float]) -> NestedOperator:
    """Diagonal similarity scaling level n at depth d by weights[d]**n.

    Truncations of the result have exactly the spectrum of the truncations
    of ``op``; only eigenvector conditioning changes.
    """
    if not isinstance(op, Triplet):
        return op
    w, rest = weights[0], weights[1:]
    return Triplet(scale(reweight(op.lower, rest), 1.0 / w),
                   reweight(op.diag, rest),
                   scale(reweight(op.upper, rest), w))


def balance_weights(op: NestedOperator, tol: float = 1e-9) -> np.ndarray:
    """Weights minimizing spr(symbol(op, w)); flattens the far-field Perron vector."""
    d = depth(op)
    if d == 0:
        return np.ones(0)

    def f(s):
        v = spectral_radius(symbol(op, np.exp(s)), 1e-12)
        return math.log(v) if v > 0 else -math.inf

    try:
        s, _, _ = coordinate_descent(f, np.zeros(d), ftol=1e-10, xtol=tol, limit=30.0)
    except IterationLimitError:
        # unbounded symbol (a one-sided level); leave the operator unscaled
        return np.ones(d)
    return np.exp(s)


def cp_truncated(op: NestedOperator, L: int, tol: float = DEFAULT_TOL,
                 balance: bool = True) -> float:
    """Spectral radius chi_L of the (L, ..., L) truncation.

    Nondecreasing in L, converging from below to the reciprocal of the
    convergence parameter of the countable operator.  With ``balance`` the
    truncation is first rescaled by :func:`balance_weights`; without it the
    eigenproblem of a wide truncation can be too ill-conditioned for
    Krylov methods.
    """
    if balance and depth(op) > 0 and L > 1:
        op = reweight(op, balance_weights(op))
    T = truncate(op, [L] * depth(op))
    return spectral_radius(T.matrix, tol)


@dataclass(frozen=True)
class TruncationSequence:
    levels: tuple
    values: tuple
    converged: bool
    cap_reached: bool

    @property
    def last(self) -> float:
        return self.values[-1]


def cp_sequence(op: NestedOperator, schedule=LIMIT_SCHEDULE, rtol: float = 1e-6,
                tol: float = DEFAULT_TOL, balance: bool = True) -> TruncationSequence:
    """chi_L along ``schedule`` until successive values agree to ``rtol``.

    The sequence is monotone, so every value is a lower bound; the
    ``cap_reached`` flag records that the last value may still be far below
    the limit.
    """
    if balance and depth(op) > 0:
        op = reweight(op, balance_weights(op))
    levels, values = [], []
    converged = False
    for L in schedule:
        v = cp_truncated(op, L, tol, balance=False)
        if values and abs(v - values[-1]) <= rtol * max(abs(v), 1e-300):
            levels.append(L)
            values.append(v)
            converged = True
            break
        levels.append(L)
        values.append(v)
    return TruncationSequence(tuple(levels), tuple(values), converged, not converged)
