"""Rate matrix R, G-matrix and fundamental block N of a skip-free walk.

For a level-homogeneous block tri-diagonal kernel (A_-1, A_0, A_1):

    R = R^2 A_-1 + R A_0 + A_1        G = A_-1 + A_0 G + A_1 G^2
    H = A_0 + A_1 G                   N = (I - H)^-1

Both quadratics are solved by the natural fixed-point iteration from the zero
matrix, which increases monotonically to the minimal nonnegative solution.
Convergence is linear in the transient cases and sublinear (error ~ 1/n)
when the walk is null recurrent in the level direction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import (AssumptionError, DomainError, IterationLimitError, NearSingularError, NoSolutionError,
                     ValidationError)
from .phase import spectral_radius

OVERFLOW_GUARD = 1e12
RG_TOL = 1e-12
RG_MAX_ITER = 1_000_000
# spr(H) must stay at least this far below one
SINGULAR_MARGIN = 1e-10


def _as_blocks(A_m, A_0, A_1):
    mats = []
    for name, M in (("A_-1", A_m), ("A_0", A_0), ("A_1", A_1)):
        if hasattr(M, "toarray"):
            M = M.toarray()
        M = np.array(M, dtype=float)
        if M.ndim == 0:
            M = M.reshape(1, 1)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValidationError(f"{name} must be square, got shape {M.shape}")
        if not np.all(np.isfinite(M)) or np.any(M < 0):
            raise ValidationError(f"{name} must be finite and nonnegative")
        mats.append(M)
    if len({M.shape for M in mats}) != 1:
        raise ValidationError("blocks have different dimensions")
    if not np.any(mats[0] > 0):
        raise AssumptionError("A_-1 is identically zero")
    if not np.any(mats[2] > 0):
        raise AssumptionError("A_1 is identically zero")
    return mats


def iterate_g(A_m, A_0, A_1) -> Iterator[np.ndarray]:
    """X_0 = O, X_n = A_-1 + A_0 X + A_1 X^2 (infinite generator)."""
    A_m, A_0, A_1 = _as_blocks(A_m, A_0, A_1)
    X = np.zeros_like(A_0)
    while True:
        X = A_m + A_0 @ X + A_1 @ (X @ X)
        yield X


def iterate_r(A_m, A_0, A_1) -> Iterator[np.ndarray]:
    """X_0 = O, X_n = X^2 A_-1 + X A_0 + A_1 (infinite generator)."""
    A_m, A_0, A_1 = _as_blocks(A_m, A_0, A_1)
    X = np.zeros_like(A_0)
    while True:
        X = (X @ X) @ A_m + X @ A_0 + A_1
        yield X


def _fixed_point(iterates, tol, max_iter, name):
    prev = None
    for n, X in enumerate(iterates, start=1):
        if not np.all(np.isfinite(X)) or X.max() > OVERFLOW_GUARD:
            raise NoSolutionError(
                f"{name} iterates diverge (entry above {OVERFLOW_GUARD:g} after {n} steps); "
                "no finite minimal solution", iterations=n)
        if prev is not None and np.max(np.abs(X - prev)) < tol:
            return X, n
        if n >= max_iter:
            raise IterationLimitError(f"{name} iteration did not reach tol={tol:g} in {max_iter} steps",
                                      best=X, iterations=n)
        prev = X


def solve_g(A_m, A_0, A_1, tol: float = RG_TOL, max_iter: int = RG_MAX_ITER) -> np.ndarray:
    """Minimal nonnegative solution of G = A_-1 + A_0 G + A_1 G^2."""
    return _fixed_point(iterate_g(A_m, A_0, A_1), tol, max_iter, "G")[0]


def solve_r(A_m, A_0, A_1, tol: float = RG_TOL, max_iter: int = RG_MAX_ITER) -> np.ndarray:
    """Minimal nonnegative solution of R = R^2 A_-1 + R A_0 + A_1."""
    return _fixed_point(iterate_r(A_m, A_0, A_1), tol, max_iter, "R")[0]


def compute_h(A_0, A_1, G) -> np.ndarray:
    return np.asarray(A_0, dtype=float) + np.asarray(A_1, dtype=float) @ np.asarray(G, dtype=float)


def compute_n(A_0, A_1, G, tol: float = RG_TOL) -> np.ndarray:
    """N = sum_k H^k = (I - H)^-1 with H = A_0 + A_1 G."""
    H = compute_h(np.atleast_2d(A_0), np.atleast_2d(A_1), np.atleast_2d(G))
    rho = spectral_radius(H, min(tol, 1e-12))
    if rho >= 1.0 - SINGULAR_MARGIN:
        raise NearSingularError(f"spr(A_0 + A_1 G) = {rho:.15g} is not below 1", spr=rho)
    n = H.shape[0]
    return np.linalg.solve(np.eye(n) - H, np.eye(n))


@dataclass
class RgSolution:
    R: np.ndarray
    G: np.ndarray
    N: np.ndarray
    H: np.ndarray
    iterations: int
    residual_R: float
    residual_G: float
    residual_N: float
    converged: bool = True

    def identity_residuals(self, A_m, A_1):
        """(||R - A_1 N||, ||G - N A_-1||) in the max norm."""
        A_m, A_1 = np.atleast_2d(A_m), np.atleast_2d(A_1)
        return (float(np.max(np.abs(self.R - A_1 @ self.N))),
                float(np.max(np.abs(self.G - self.N @ A_m))))


def _inf_norm(M) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1)))


def solve_rg(A_m, A_0=None, A_1=None, tol: float = RG_TOL, max_iter: int = RG_MAX_ITER,
             allow_slow: bool = False) -> RgSolution:
    """Solve for R, G, H and N; accepts three blocks or a depth-1 Triplet.

    With ``allow_slow`` an exhausted iteration budget is not an error: the
    last iterates (lower bounds of the minimal solutions) are used and the
    result is flagged ``converged=False``.
    """
    if A_0 is None and A_1 is None:
        A_m, A_0, A_1 = tuple(A_m)
    A_m, A_0, A_1 = _as_blocks(A_m, A_0, A_1)
    converged = True
    out = []
    for name, gen in (("G", iterate_g), ("R", iterate_r)):
        try:
            out.append(_fixed_point(gen(A_m, A_0, A_1), tol, max_iter, name))
        except IterationLimitError as exc:
            if not allow_slow:
                raise
            converged = False
            out.append((exc.best, exc.iterations))
    (G, it_g), (R, it_r) = out
    H = compute_h(A_0, A_1, G)
    N = compute_n(A_0, A_1, G, tol)
    I = np.eye(A_0.shape[0])
    return RgSolution(
        R=R, G=G, N=N, H=H, iterations=it_g + it_r,
        residual_R=_inf_norm(R - (R @ R @ A_m + R @ A_0 + A_1)),
        residual_G=_inf_norm(G - (A_m + A_0 @ G + A_1 @ G @ G)),
        residual_N=_inf_norm(N - I - H @ N),
        converged=converged,
    )


def wiener_hopf_residual(A_m, A_0, A_1, sol: RgSolution, z: float) -> float:
    """||(I - A_*(z)) - (I - zR)(I - H)(I - G/z)|| in the max-row-sum norm."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    A_m, A_0, A_1 = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A_m, A_0, A_1))
    I = np.eye(A_0.shape[0])
    lhs = I - (A_m / z + A_0 + z * A_1)
    rhs = (I - z * sol.R) @ (I - sol.H) @ (I - sol.G / z)
    return _inf_norm(lhs - rhs)
