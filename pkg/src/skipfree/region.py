"""Spectral functions of a 3-D walk and the region where they stay below one.

``chi(z) = spr(A_***(z))`` is log-convex in ``s = log z``.  The region
``{s : chi(e^s) <= 1}`` is convex and bounded for irreducible aperiodic
models; its extreme coordinates ``s_max``/``s_min`` give the decay-rate
bounds ``z_max = exp(s_max)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import EmptyRegionError, NoRootError, StructureError
from .models import MmrwModel, direction_operator, drift_vector, marginal, secondary_order
from .optimize import coordinate_descent, line_minimize
from .phase import is_irreducible, spectral_radius
from .rg import solve_r
from .tridiag import cp_truncated, truncate

# log-chi within this of zero at the minimum counts as the degenerate case
DEGENERATE_TOL = 1e-10


def chi(model: MmrwModel, z, tol: float = 1e-13, method: str = "eig") -> float:
    """Perron root of A_***(z)."""
    return spectral_radius(model.a_sum(z), tol, method=method)


def log_chi(model: MmrwModel, s, tol: float = 1e-13, method: str = "eig") -> float:
    """log chi(e^s); the function every optimizer here works on."""
    v = spectral_radius(model.a_sum_log(s), tol, method=method)
    return math.log(v) if v > 0 else -math.inf


def mean_drift(model: MmrwModel) -> np.ndarray:
    """Drift vector pi_*** (A_{up} - A_{down}) e, one entry per coordinate."""
    return drift_vector(model)


def _require_irreducible(model):
    if not is_irreducible(model.a_sum()):
        raise StructureError("A_*** is reducible")


def gamma_star(model: MmrwModel, tol: float = 1e-12):
    """Infimum of chi over z > 0 and its log-scale minimizer."""
    _require_irreducible(model)
    s, f, _ = coordinate_descent(lambda s: log_chi(model, s), np.zeros(3), ftol=tol)
    return math.exp(f), s


def zeta_roots(chi_1d: Callable[[float], float], tol: float = 1e-10, z0: float = 1.0):
    """The two solutions zeta_lower <= zeta_upper of chi_1d(z) = 1.

    ``chi_1d`` must be log-convex in log z.  When the minimum equals one the
    two roots coincide at the minimizer.
    """
    def g(s):
        return math.log(chi_1d(math.exp(s)))

    s_star, g_star = line_minimize(g, math.log(z0), xtol=1e-12)
    if g_star > tol:
        raise NoRootError(f"inf chi = {math.exp(g_star):.12g} > 1; no real roots",
                          gamma_star=math.exp(g_star))
    if g_star >= -DEGENERATE_TOL:
        z = math.exp(s_star)
        return z, z
    upper = _edge(g, s_star, +1, tol)
    lower = _edge(g, s_star, -1, tol)
    return math.exp(lower), math.exp(upper)


def _edge(g, s_in, direction, xtol, step=1.0, limit=60.0):
    """Crossing of the convex ``g`` through zero walking away from ``s_in`` (g(s_in) <= 0)."""
    lo, hi = 0.0, step
    while g(s_in + direction * hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > limit:
            raise EmptyRegionError(f"region unbounded within {limit} in direction {direction}")
    if lo == 0.0 and g(s_in) == 0.0:
        return s_in
    # g is convex past the minimizer, so Brent converges in a handful of steps
    t = brentq(lambda t: g(s_in + direction * t), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return s_in + direction * t


@dataclass
class GammaReport:
    gamma_star: float
    argmin: np.ndarray
    s_max: np.ndarray
    s_min: np.ndarray
    drift: np.ndarray
    boundary_samples: list = field(default_factory=list)
    degenerate: bool = False

    @property
    def z_max(self) -> np.ndarray:
        return np.exp(self.s_max)

    @property
    def z_min(self) -> np.ndarray:
        return np.exp(self.s_min)


class _InnerMin:
    """min over the other two coordinates of log chi with s_i fixed, warm-started."""

    def __init__(self, model, i, start, xtol):
        self.model = model
        self.i = i
        self.others = [d for d in range(3) if d != i]
        self.warm = np.asarray(start, dtype=float)[self.others]
        self.xtol = xtol

    def __call__(self, t):
        def f(u):
            s = np.empty(3)
            s[self.i] = t
            s[self.others] = u
            return log_chi(self.model, s)

        u, val, _ = coordinate_descent(f, self.warm, ftol=1e-13, xtol=self.xtol)
        self.warm = u
        return val


def extreme_coordinate(model: MmrwModel, i: int, direction: int, start, tol: float = 1e-8,
                       inner_xtol: float = 1e-7) -> float:
    """sup (direction=+1) or inf (direction=-1) of s_i over the region."""
    inner = _InnerMin(model, i, start, inner_xtol)
    return _edge(inner, float(start[i]), direction, tol)


def _sphere_directions(n):
    # Fibonacci lattice; deterministic and roughly uniform
    k = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * k / n)
    azim = np.pi * (1 + 5 ** 0.5) * k
    return np.column_stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)])


def boundary_samples(model: MmrwModel, center, n: int, tol: float = 1e-10):
    """Points with chi = 1 along ``n`` rays from an interior point."""
    out = []
    center = np.asarray(center, dtype=float)
    for d in _sphere_directions(n):
        def g(t, d=d):
            return log_chi(model, center + t * d)

        t = _edge(g, 0.0, +1, tol)
        s = center + t * d
        out.append((float(s[0]), float(s[1]), float(s[2]), math.exp(g(t))))
    return out


def gamma_region(model: MmrwModel, tol: float = 1e-8, n_boundary: int = 0,
                 lower: bool = True) -> GammaReport:
    """gamma*, drift, extreme points and optional boundary samples of the region.

    With ``lower=False`` only the upper extremes are computed and ``s_min``
    is left as NaN.
    """
    g_star, s_star = gamma_star(model)
    drift = mean_drift(model) if model.is_stochastic(1e-9) else np.full(3, np.nan)
    log_g = math.log(g_star)
    if log_g > tol:
        raise EmptyRegionError(f"gamma* = {g_star:.12g} > 1: the region is empty",
                               gamma_star=g_star)
    if log_g >= -DEGENERATE_TOL:
        pt = (*map(float, s_star), g_star)
        return GammaReport(g_star, s_star, s_star.copy(), s_star.copy(), drift,
                           [pt] if n_boundary else [], degenerate=True)
    s_max = np.array([extreme_coordinate(model, i, +1, s_star, tol) for i in range(3)])
    if lower:
        s_min = np.array([extreme_coordinate(model, i, -1, s_star, tol) for i in range(3)])
    else:
        s_min = np.full(3, np.nan)
    samples = boundary_samples(model, s_star, n_boundary) if n_boundary else []
    return GammaReport(g_star, s_star, s_max, s_min, drift, samples)


def chi_nested(model: MmrwModel, i: int, z_outer: Sequence[float], L: int,
               tol: float = 1e-12) -> float:
    """Truncated lower bound on chi_*^(i)(z_i) or chi_**^(i)(z_i, z_j).

    With one outer value the operator A_*^(i)(z_i) is block tri-diagonal over
    the two remaining coordinates (depth 2); with two values, A_**^(i) is
    tri-diagonal over the last coordinate (depth 1).  The result is the
    spectral radius of the (L, ...) truncation, nondecreasing in L.
    """
    order = secondary_order(i)
    z_outer = tuple(float(v) for v in z_outer)
    if len(z_outer) not in (1, 2):
        raise ValueError("z_outer must hold one or two values")
    weighted = order[:len(z_outer)]
    kept = order[len(z_outer):]
    op = marginal(model, kept=kept, weights=dict(zip(weighted, z_outer)))
    return cp_truncated(op, L, tol)


def cp_r_truncated(model: MmrwModel, i: int, levels: Sequence[int], tol: float = 1e-12) -> list:
    """Convergence parameter 1/spr(R) of the direction-i QBD, transverse levels cut at L.

    Returns ``[(L, cp), ...]``.  Truncation removes mass, so R grows with L and
    the sequence is nonincreasing; its limit need not equal ``z_max[i]``, which
    is only a lower bound for it.
    """
    op = direction_operator(model.permuted(secondary_order(i)), 0)
    out = []
    for L in levels:
        A_m, A_0, A_1 = (truncate(m, (L, L)).toarray() for m in op)
        rho = spectral_radius(solve_r(A_m, A_0, A_1, tol))
        out.append((int(L), math.inf if rho == 0 else 1.0 / rho))
    return out
