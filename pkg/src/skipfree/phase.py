"""Nonnegative matrix algebra over a finite phase set.

Spectral radius, Perron vectors, stationary distributions and irreducibility
for small dense nonnegative matrices.  Large or sparse inputs (truncations of
countable operators) go through a Krylov route in :func:`spectral_radius`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .errors import IterationLimitError, StructureError, ValidationError

DEFAULT_TOL = 1e-10
MAX_ITER = 100_000

# above this dimension the dense squaring route is replaced by ARPACK
DENSE_LIMIT = 64


def as_phase_matrix(M, name="matrix"):
    """Validate ``M`` as a finite nonnegative square matrix; return a read-only copy."""
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(A < 0):
        raise ValidationError(f"{name} has negative entries (min {A.min():.3g})")
    A.setflags(write=False)
    return A


@dataclass(frozen=True)
class PerronData:
    """Perron root with left/right eigenvectors, ``left @ right == 1``."""

    value: float
    left: np.ndarray
    right: np.ndarray
    normalized: bool = True

    def residuals(self, M):
        M = np.asarray(M, dtype=float)
        res_left = np.max(np.abs(self.left @ M - self.value * self.left))
        res_right = np.max(np.abs(M @ self.right - self.value * self.right))
        return float(res_left), float(res_right)


def _strong_components(pattern):
    return connected_components(sp.csr_matrix(pattern), directed=True, connection="strong")


def _reaches_all(pattern):
    # transitive closure by boolean squaring; cheaper than a graph pass for tiny n
    n = pattern.shape[0]
    R = (pattern | np.eye(n, dtype=bool)).astype(float)
    for _ in range(int(np.ceil(np.log2(n)))):
        R = ((R @ R) > 0).astype(float)
    return bool(np.all(R > 0))


def is_irreducible(M) -> bool:
    """True iff the directed graph of positive entries is strongly connected."""
    if sp.issparse(M):
        return _strong_components(M > 0)[0] == 1
    A = np.asarray(M, dtype=float)
    if A.ndim == 0 or A.size == 1:
        return True
    pattern = A > 0
    if pattern.all():
        return True
    if A.shape[0] <= 32:
        return _reaches_all(pattern)
    return _strong_components(pattern)[0] == 1


def _collatz_wielandt(M, x):
    """Lower/upper bounds on spr(M) from a positive vector ``x``."""
    Mx = M @ x
    pos = x > 0
    ratios = Mx[pos] / x[pos]
    return float(ratios.min()), float(ratios.max())


def _shifted_power(M, tol, max_iter):
    """Power iteration on M + cI, accelerated by repeated squaring.

    After k squarings the iterate is (M + cI)^(2^k) e, so ``max_iter`` is
    charged in power steps, not squarings.  Returns (value, vector).
    """
    n = M.shape[0]
    c = float(np.max(np.diag(M))) + 1.0
    P = M + c * np.eye(n)
    P /= P.max()
    ones = np.ones(n)
    steps = 1
    best = None
    while True:
        x = P @ ones
        x /= x.max()
        lo, hi = _collatz_wielandt(M, x)
        best = 0.5 * (lo + hi)
        scale = max(1.0, abs(hi))
        if hi - lo <= tol * scale:
            return best, x
        if 2 * steps > max_iter:
            raise IterationLimitError(
                f"spectral radius not converged after {steps} power steps "
                f"(bounds [{lo:.6g}, {hi:.6g}])",
                best=best,
                iterations=steps,
            )
        P = P @ P
        m = P.max()
        if m > 0:
            P /= m
        steps *= 2


def _spectral_radius_large(M, tol, max_iter):
    A = sp.csr_matrix(M, dtype=float)
    n = A.shape[0]
    v0 = np.ones(n)
    try:
        vals = eigs(A, k=1, which="LR", v0=v0, tol=tol * 1e-2, maxiter=max_iter,
                    return_eigenvectors=False, ncv=min(n - 1, 40))
        return float(np.max(vals.real))
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            best = float(np.max(exc.eigenvalues.real))
        else:
            best = None
        raise IterationLimitError("ARPACK did not converge for spectral radius", best=best) from exc


def spectral_radius(M, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
                    method: str = "power") -> float:
    """Spectral radius of a nonnegative matrix.

    Small dense inputs use shifted power iteration (shift ``max diag + 1``
    removes periodicity) with Collatz-Wielandt bounds as stopping rule, or,
    with ``method="eig"``, the largest real part among the LAPACK
    eigenvalues.  Both are the Perron root of a nonnegative matrix; ``eig``
    is an order of magnitude cheaper for tiny matrices evaluated many times.
    Sparse inputs and anything above ``DENSE_LIMIT`` use ARPACK's largest
    real eigenvalue.  Krylov eigenvalues of strongly non-normal matrices
    (e.g. wide truncations of a drifting tri-diagonal operator) can be off
    well above ``tol``; balance such inputs by a diagonal similarity first,
    as :func:`skipfree.tridiag.cp_truncated` does.
    """
    if method not in ("power", "eig"):
        raise ValueError(f"unknown method {method!r}")
    if sp.issparse(M):
        n = M.shape[0]
        if n > DENSE_LIMIT:
            return _spectral_radius_large(M, tol, max_iter)
        M = M.toarray()
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.shape[0] == 1:
        return float(A[0, 0])
    if A.shape[0] > DENSE_LIMIT:
        return _spectral_radius_large(A, tol, max_iter)
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise ValidationError("spectral_radius expects a finite nonnegative matrix")
    if method == "eig":
        return max(float(np.max(np.linalg.eigvals(A).real)), 0.0)
    if not is_irreducible(A):
        n_comp, labels = _strong_components(A > 0)
        # spr of a reducible matrix is the max over its irreducible classes
        best = 0.0
        for k in range(n_comp):
            idx = np.flatnonzero(labels == k)
            best = max(best, spectral_radius(A[np.ix_(idx, idx)], tol, max_iter))
        return best
    value, _ = _shifted_power(A, tol, max_iter)
    return max(value, 0.0)


def perron_vectors(M, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> PerronData:
    """Perron root and positive left/right eigenvectors of an irreducible matrix.

    ``right`` is scaled to max entry 1 and ``left`` so that ``left @ right == 1``.
    """
    A = as_phase_matrix(M)
    if not is_irreducible(A):
        raise StructureError("perron_vectors requires an irreducible matrix")
    if A.shape[0] == 1:
        return PerronData(float(A[0, 0]), np.ones(1), np.ones(1))
    value, right = _shifted_power(A, tol, max_iter)
    _, left = _shifted_power(A.T, tol, max_iter)
    right = right / right.max()
    left = left / (left @ right)
    return PerronData(float(value), left, right)


def stationary_distribution(M, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Stationary row vector of an irreducible stochastic matrix (direct solve)."""
    A = as_phase_matrix(M)
    rows = A.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > max(tol, 1e-12):
        raise ValidationError(
            f"matrix is not stochastic (max row-sum deviation {np.max(np.abs(rows - 1.0)):.3g})"
        )
    if not is_irreducible(A):
        raise StructureError("stationary_distribution requires an irreducible matrix")
    n = A.shape[0]
    lhs = A.T - np.eye(n)
    lhs[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(lhs, rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()
