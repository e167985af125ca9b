"""Occupation measures of a 3-D walk killed on leaving the nonnegative orthant.

A row of ``sum_n Q^n`` is computed on a finite box ``[0, L)^3``.  Transitions
that leave the box are dropped, so every value is a lower bound for the
untruncated one and grows with the box.  Directional decay slopes of these
rows are compared against the bounds ``-s_i^max`` from the spectral region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainError, IterationLimitError, UnderflowError, ValidationError
from .models import MmrwModel, box_matrix, direction_operator, secondary_order
from .region import GammaReport, gamma_region
from .phase import spectral_radius
from .rg import solve_r
from .tridiag import truncate

OCC_TOL = 1e-12
OCC_MAX_ITER = 1_000_000
# below this many states "auto" also runs a sparse direct solve as a cross-check;
# LU fill-in on 3-D boxes makes it far slower than the power sum above this
DIRECT_LIMIT = 10_000
DEFAULT_SLACK = 0.15
DEFAULT_AGREEMENT = 0.05


def _box_shape(L):
    if isinstance(L, (int, np.integer)):
        return (int(L),) * 3
    shape = tuple(int(v) for v in L)
    if len(shape) != 3 or min(shape) < 1:
        raise DomainError(f"box shape must be three positive sizes, got {L}")
    return shape


def state_index(shape, s0, x, j) -> int:
    x1, x2, x3 = x
    return ((x1 * shape[1] + x2) * shape[2] + x3) * s0 + j


@dataclass
class BoxOccupation:
    """One row of the box-truncated fundamental matrix, shaped (L1, L2, L3, s0)."""

    shape: tuple
    origin: tuple
    values: np.ndarray
    residual: float
    method: str
    iterations: int = 0
    cross_check: Optional[float] = None

    @property
    def L(self):
        return self.shape[0] if len(set(self.shape)) == 1 else self.shape

    def value(self, x, j) -> float:
        return float(self.values[tuple(x) + (j,)])

    def line(self, direction: int, transverse: Sequence[int]) -> np.ndarray:
        """Values along coordinate ``direction``; ``transverse`` = (other coords..., phase)."""
        others = [d for d in range(3) if d != direction]
        idx = [slice(None)] * 4
        for d, v in zip(others, transverse[:2]):
            idx[d] = int(v)
        idx[3] = int(transverse[2])
        return self.values[tuple(idx)]


def _power_sum(QT, delta, tol, max_iter):
    """v <- delta + v Q until the remaining tail is below ``tol`` relative to v."""
    v = delta.copy()
    prev_change = None
    for n in range(1, max_iter + 1):
        new = delta + QT @ v
        diff = new - v
        v = new
        change = float(np.max(diff))
        if change == 0.0:
            return v, n
        pos = v > 0
        if prev_change is not None and pos.all():
            rho = min(change / prev_change, 1.0 - 1e-15)
            rel = float(np.max(diff[pos] / v[pos]))
            # geometric tail: remaining mass <= change * rho / (1 - rho)
            if rel * rho / (1.0 - rho) < tol:
                return v, n
        prev_change = change
    raise IterationLimitError(f"power sum not converged in {max_iter} steps", best=v, iterations=max_iter)


def _direct_rows(Q, starts):
    n = Q.shape[0]
    lu = splu(sp.csc_matrix(sp.eye(n) - Q).T.tocsc())
    rhs = np.zeros((n, len(starts)))
    rhs[starts, np.arange(len(starts))] = 1.0
    return lu.solve(rhs)


def fundamental_box(model: MmrwModel, y, L=24, tol: float = OCC_TOL, method: str = "auto",
                    max_iter: int = OCC_MAX_ITER) -> BoxOccupation:
    """Row ``y = (x1, x2, x3, j)`` of sum_n Q_box^n.

    ``method`` is ``power-sum`` (iterative summation, nonnegative arithmetic),
    ``linear-solve`` (sparse LU of I - Q_box) or ``auto``: power sum, plus a
    direct-solve cross-check stored in ``cross_check`` for boxes below
    ``DIRECT_LIMIT`` states.
    """
    if method not in ("auto", "power-sum", "linear-solve"):
        raise ValueError(f"unknown method {method!r}")
    shape = _box_shape(L)
    y = tuple(int(v) for v in y)
    if len(y) != 4:
        raise DomainError("state must be (x1, x2, x3, phase)")
    if any(not 0 <= y[d] < shape[d] for d in range(3)) or not 0 <= y[3] < model.s0:
        raise DomainError(f"state {y} lies outside the box {shape} x {model.s0} phases")
    Q = box_matrix(model, shape)
    start = state_index(shape, model.s0, y[:3], y[3])
    delta = np.zeros(Q.shape[0])
    delta[start] = 1.0
    cross = None
    iterations = 0
    if method == "linear-solve":
        v = _direct_rows(Q, [start])[:, 0]
    else:
        v, iterations = _power_sum(sp.csr_matrix(Q.T), delta, tol, max_iter)
        if method == "auto" and Q.shape[0] <= DIRECT_LIMIT:
            w = _direct_rows(Q, [start])[:, 0]
            cross = float(np.max(np.abs(v - w) / np.maximum(np.abs(w), 1e-300)))
    residual = float(np.max(np.abs(v - delta - Q.T @ v)))
    used = "linear-solve" if method == "linear-solve" else "power-sum"
    return BoxOccupation(shape, y, v.reshape(shape + (model.s0,)), residual, used, iterations, cross)


def boundary_margin(L: int) -> int:
    """Cells kept clear of the upper box faces when fitting slopes."""
    if L >= 12:
        return max(4, L // 4)
    # small smoke-test boxes: keep at least a two-point window
    return max(1, L // 4)


def default_window(L: int) -> tuple:
    """Inclusive fit window [L/4, L - margin - 1]."""
    return L // 4, L - boundary_margin(L) - 1


def check_window(L: int, window) -> tuple:
    lo, hi = (int(v) for v in window)
    if lo < 0 or hi <= lo:
        raise ValidationError(f"fit window {window} must satisfy 0 <= n_lo < n_hi")
    if hi >= L - boundary_margin(L):
        raise ValidationError(
            f"fit window {window} reaches the boundary margin: need n_hi < {L - boundary_margin(L)}")
    return lo, hi


@dataclass
class DecaySlopeEstimate:
    direction: int
    transverse: tuple
    slope: float
    fit_window: tuple
    r_squared: float
    intercept: float = 0.0


def fit_log_slope(n, values):
    """Least-squares slope, intercept and r^2 of log(values) against n."""
    values = np.asarray(values, dtype=float)
    n = np.asarray(n, dtype=float)
    if np.any(values <= np.finfo(float).tiny):
        raise UnderflowError("zero or subnormal values in the fit window; use a smaller window")
    logs = np.log(values)
    slope, intercept = np.polyfit(n, logs, 1)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum((logs - (slope * n + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def decay_slope(occ: BoxOccupation, direction: int, transverse, window=None) -> DecaySlopeEstimate:
    """Fitted (1/n) log q along ``direction`` with the other coordinates fixed."""
    L = occ.shape[direction]
    lo, hi = check_window(L, default_window(L) if window is None else window)
    n = np.arange(lo, hi + 1)
    slope, intercept, r2 = fit_log_slope(n, occ.line(direction, transverse)[lo:hi + 1])
    return DecaySlopeEstimate(direction, tuple(int(v) for v in transverse), slope, (lo, hi), r2, intercept)


@dataclass
class BoundCheck:
    kind: str            # "bound" or "agreement"
    direction: int
    transverse: tuple
    measured: float
    limit: float
    passed: bool
    start: Optional[tuple] = None

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        what = f"start {self.start}" if self.kind == "bound" else "|slope difference|"
        return (f"{status}  {self.kind:9s} dir {self.direction + 1} transverse {self.transverse} "
                f"{what}: {self.measured:.6f} <= {self.limit:.6f}")


@dataclass
class BoundCheckReport:
    L: int
    window: tuple
    z_max: np.ndarray
    checks: list = field(default_factory=list)
    slopes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self, kind: str) -> float:
        """Largest measured - limit over checks of one kind (negative means slack to spare)."""
        gaps = [c.measured - c.limit for c in self.checks if c.kind == kind]
        return max(gaps) if gaps else float("nan")

    def summary(self) -> list:
        out = [f"box L={self.L}, window n in [{self.window[0]}, {self.window[1]}]"]
        for i in range(3):
            cs = [c for c in self.checks if c.direction == i]
            bound = [c for c in cs if c.kind == "bound"]
            agree = [c for c in cs if c.kind == "agreement"]
            steepest = max(c.measured for c in bound)
            out.append(
                f"direction {i + 1}: z_max={self.z_max[i]:.4f} bound {-math.log(self.z_max[i]):.4f}; "
                f"max slope {steepest:.4f}; max start disagreement {max(c.measured for c in agree):.4f}; "
                f"{sum(c.passed for c in cs)}/{len(cs)} checks pass")
        out.append("all checks pass" if self.passed else "some checks FAIL")
        return out


def transverse_samples(L: int, s0: int) -> list:
    """Interior transverse states: other coordinates in 1..min(3, L-2), every phase."""
    vals = range(1, max(2, min(3, L - 2) + 1))
    return [(a, b, j) for a in vals for b in vals for j in range(s0)]


def verify_bounds(model: MmrwModel, y=(0, 0, 0, 0), L: int = 24, window=None,
                  slack: float = DEFAULT_SLACK, agreement: float = DEFAULT_AGREEMENT,
                  y2=(1, 1, 0, 1), region: Optional[GammaReport] = None,
                  tol: float = OCC_TOL, occupations=None) -> BoundCheckReport:
    """Check fitted decay slopes against -s_i^max and across two starting states."""
    if region is None:
        region = gamma_region(model, lower=False)
    window = check_window(L, default_window(L) if window is None else window)
    if occupations is None:
        occupations = [fundamental_box(model, y, L, tol, method="power-sum"),
                       fundamental_box(model, y2, L, tol, method="power-sum")]
    report = BoundCheckReport(L, window, region.z_max)
    for i in range(3):
        limit = -float(region.s_max[i]) + slack
        for t in transverse_samples(L, model.s0):
            est = [decay_slope(occ, i, t, window) for occ in occupations]
            report.slopes.extend(est)
            for occ, e in zip(occupations, est):
                report.checks.append(BoundCheck("bound", i, t, e.slope, limit, e.slope <= limit, occ.origin))
            gap = abs(est[0].slope - est[1].slope)
            report.checks.append(BoundCheck("agreement", i, t, gap, agreement, gap <= agreement))
    return report


@dataclass
class N0nReport:
    direction: int
    levels: int
    n_max: int
    relative_residuals: list
    n00_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.relative_residuals)


def n0n_consistency(model: MmrwModel, direction: int, L: int = 8, n_max: int = 4,
                    depth_extent: Optional[int] = None, tol: float = 1e-12) -> N0nReport:
    """Compare N_00 R^n from the direction-i triplet with box occupation blocks.

    The two transverse coordinates are truncated at ``L`` levels each in both
    computations, so they describe the same kernel; the box additionally cuts
    coordinate ``direction`` at ``depth_extent`` levels.
    """
    order = secondary_order(direction)
    pm = model.permuted(order)
    s0 = model.s0
    inner_shape = (L, L)
    op = direction_operator(pm, 0)
    A_m, A_0, A_1 = (truncate(m, inner_shape).toarray() for m in op)
    R = solve_r(A_m, A_0, A_1, tol)
    m = A_0.shape[0]
    n00 = np.linalg.inv(np.eye(m) - A_0 - R @ A_m)
    n00_res = float(np.max(np.abs(n00 - np.eye(m) - n00 @ (A_0 + R @ A_m))))
    if depth_extent is None:
        # deep enough that the cut in the primary direction is invisible at 1e-12
        rho = spectral_radius(R)
        depth_extent = n_max + 16
        if 0 < rho < 1:
            depth_extent = min(max(depth_extent, n_max + math.ceil(math.log(1e-12) / math.log(rho))), 400)
    extent = depth_extent
    Q = box_matrix(pm, (extent, L, L))
    rows = _direct_rows(Q, list(range(m))).T      # row y of sum Q^n for level-0 starts
    rel = []
    Rn = np.eye(m)
    for n in range(n_max + 1):
        box_block = rows[:, n * m:(n + 1) * m]
        pred = n00 @ Rn
        rel.append(float(np.max(np.abs(pred - box_block)) / np.max(np.abs(box_block))))
        Rn = Rn @ R
    return N0nReport(direction, L, n_max, rel, n00_res)
