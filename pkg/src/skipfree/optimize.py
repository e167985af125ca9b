"""Derivative-free minimization for convex functions of a few variables.

Golden-section line search with outward bracket expansion, and cyclic
coordinate descent built on it.  Both rely only on convexity, which is what
the log-spectral-radius functions in this package provide.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import IterationLimitError

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def bracket_minimum(f, x0, step=1.0, limit=60.0, f0=None):
    """Return (a, b) containing a minimizer of convex ``f`` near ``x0``.

    Steps double until the function rises on both sides.  Raises
    IterationLimitError when the walk leaves ``[x0 - limit, x0 + limit]``.
    """
    fx = f(x0) if f0 is None else f0
    fr = f(x0 + step)
    if fr < fx:
        direction = 1.0
    else:
        fl = f(x0 - step)
        if fl >= fx:
            return x0 - step, x0 + step
        direction, fr = -1.0, fl
    a, x, fcur = x0, x0 + direction * step, fr
    while True:
        step *= 2.0
        nxt = x + direction * step
        if abs(nxt - x0) > limit:
            raise IterationLimitError(
                f"no minimum within {limit} of {x0}; function keeps decreasing",
                best=x,
            )
        fn = f(nxt)
        if fn >= fcur:
            lo, hi = sorted((a, nxt))
            return lo, hi
        a, x, fcur = x, nxt, fn


def golden_section(f, a, b, xtol=1e-9, max_iter=200):
    """Minimize convex ``f`` on [a, b]; returns (xmin, fmin)."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def line_minimize(f, x0, step=0.5, xtol=1e-9, limit=60.0, f0=None):
    a, b = bracket_minimum(f, x0, step=step, limit=limit, f0=f0)
    x, fx = golden_section(f, a, b, xtol=xtol)
    if f0 is not None and f0 <= fx:
        return x0, f0
    return x, fx


def coordinate_descent(f, x0, ftol=1e-12, xtol=1e-9, min_sweeps=3, max_sweeps=500,
                       limit=60.0):
    """Cyclic golden-section coordinate descent for a convex function of R^n.

    Stops after at least ``min_sweeps`` once a full sweep lowers ``f`` by less
    than ``ftol``.  Returns (xmin, fmin, sweeps).
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    step = np.full(x.size, 0.5)
    for sweep in range(1, max_sweeps + 1):
        f_start = fx
        for i in range(x.size):
            def g(t, i=i):
                y = x.copy()
                y[i] = t
                return f(y)

            xi, fx_new = line_minimize(g, x[i], step=step[i], xtol=xtol, limit=limit, f0=fx)
            # next bracket scaled to the distance just travelled
            step[i] = min(max(abs(xi - x[i]), 1e-4), 1.0)
            x[i], fx = xi, fx_new
        if sweep >= min_sweeps and f_start - fx < ftol:
            return x, fx, sweep
    raise IterationLimitError(
        f"coordinate descent did not settle in {max_sweeps} sweeps", best=(x, fx),
        iterations=max_sweeps,
    )

