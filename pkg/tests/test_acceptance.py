"""Acceptance checks, one verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are repeated in
the "acceptance criteria" section of the terminal summary.  Running this file
directly with python does the same.
"""
import csv
import math
import time

import numpy as np
import pytest

from conftest import drift_of, random_triplet, random_valid_model
from skipfree.cli import main
from skipfree.models import MmrwModel
from skipfree.occupation import fundamental_box, verify_bounds
from skipfree.phase import is_irreducible, spectral_radius
from skipfree.region import chi_nested, gamma_star, log_chi, mean_drift, zeta_roots
from skipfree.rg import solve_rg, wiener_hopf_residual

REFERENCE = {0.3: (5.53, 2.77, 1.85), 0.6: (7.77, 3.88, 1.29)}


def _chi_1d(A_m, A_0, A_1):
    def chi(z):
        return spectral_radius(A_m / z + A_0 + z * A_1, 1e-14, method="eig")
    return chi


def _negative_drift_suite(seed=7, count=20, n=4):
    rng = np.random.default_rng(seed)
    suite = []
    while len(suite) < count:
        mass = 1.0 if len(suite) % 2 == 0 else rng.uniform(0.9, 0.99)
        A = random_triplet(rng, n, mass=mass, density=0.6)
        if not is_irreducible(sum(A)):
            continue
        if drift_of(*(B / mass for B in A)) >= 0:
            continue
        suite.append(A)
    return suite


def test_c1_reference_decay_rates(tmp_path, acceptance):
    t0 = time.perf_counter()
    code = main(["reproduce-paper", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    with open(tmp_path / "reproduce.csv") as fh:
        rows = list(csv.DictReader(fh))
    worst = max(abs(float(r["z_max"]) - REFERENCE[float(r["lambda3"])][int(r["coordinate"]) - 1])
                for r in rows)
    ok = code == 0 and len(rows) == 6 and worst <= 0.01 and elapsed < 5.0
    acceptance("C1 reference z_max within 0.01, runtime < 5 s", ok,
               f"max |diff| {worst:.4f}, {elapsed:.2f} s")
    assert ok


def test_c2_scalar_oracle(acceptance):
    q, r, p = 0.3, 0.5, 0.2
    disc = math.sqrt((1 - r) ** 2 - 4 * p * q)
    R_exact = min(((1 - r) - disc) / (2 * q), ((1 - r) + disc) / (2 * q))
    G_exact = min(((1 - r) - disc) / (2 * p), ((1 - r) + disc) / (2 * p))
    N_exact = 1.0 / (1.0 - r - p * G_exact)
    z_lo, z_hi = ((1 - r) - disc) / (2 * p), ((1 - r) + disc) / (2 * p)
    gamma_exact = r + 2 * math.sqrt(p * q)

    A = [np.array([[q]]), np.array([[r]]), np.array([[p]])]
    sol = solve_rg(*A)
    lo, hi = zeta_roots(_chi_1d(*A))
    embedded = MmrwModel(1, {(-1, 0, 0): q, (0, 0, 0): r, (1, 0, 0): p})
    g_star, _ = gamma_star(embedded)
    errs = {
        "R": abs(sol.R[0, 0] - R_exact),
        "G": abs(sol.G[0, 0] - G_exact),
        "N": abs(sol.N[0, 0] - N_exact),
        "zeta_lo": abs(lo - z_lo),
        "zeta_hi": abs(hi - z_hi),
        "cp(R)": abs(1.0 / spectral_radius(sol.R) - hi),
        "gamma*": abs(g_star - gamma_exact),
    }
    ok = (max(errs["R"], errs["G"], errs["N"]) <= 1e-9
          and max(errs["zeta_lo"], errs["zeta_hi"], errs["cp(R)"], errs["gamma*"]) <= 1e-8)
    acceptance("C2 scalar QBD oracle", ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_c3_wiener_hopf(acceptance):
    worst = 0.0
    for A in _negative_drift_suite():
        sol = solve_rg(*A)
        _, z_hi = zeta_roots(_chi_1d(*A))
        for z in (0.5, 0.8, 1.0, 1.2, z_hi):
            worst = max(worst, wiener_hopf_residual(*A, sol, z))
    ok = worst <= 1e-8
    acceptance("C3 Wiener-Hopf factorization, 20 random 4x4 triplets", ok, f"max residual {worst:.2e}")
    assert ok


def _power_sum_n(A, L=40, K=4000):
    A_m, A_0, A_1 = A
    m = A_0.shape[0]
    Q = np.zeros((L * m, L * m))
    for n in range(L):
        Q[n * m:(n + 1) * m, n * m:(n + 1) * m] = A_0
        if n > 0:
            Q[n * m:(n + 1) * m, (n - 1) * m:n * m] = A_m
        if n < L - 1:
            Q[n * m:(n + 1) * m, (n + 1) * m:(n + 2) * m] = A_1
    V = np.zeros((m, L * m))
    V[:, :m] = np.eye(m)
    total = V.copy()
    for _ in range(K):
        V = V @ Q
        total += V
    return total[:, :m]


def test_c4_identities_and_power_sum(acceptance):
    worst_id = 0.0
    for A in _negative_drift_suite():
        sol = solve_rg(*A)
        worst_id = max(worst_id, *sol.identity_residuals(A[0], A[2]))
    rng = np.random.default_rng(11)
    worst_ps = 0.0
    for _ in range(5):
        A = random_triplet(rng, 3, mass=rng.uniform(0.9, 0.98))
        sol = solve_rg(*A)
        worst_ps = max(worst_ps, float(np.max(np.abs(_power_sum_n(A) - sol.N))))
    ok = worst_id <= 1e-8 and worst_ps <= 1e-4
    acceptance("C4 R = A1 N, G = N A-1, power-sum oracle", ok,
               f"identities {worst_id:.1e}, power sum {worst_ps:.1e}")
    assert ok


def test_c5_convexity_and_drift(queue_low, acceptance):
    rng = np.random.default_rng(5)
    worst = -np.inf
    for _ in range(200):
        s, t = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        gap = log_chi(queue_low, 0.5 * (s + t)) - 0.5 * (log_chi(queue_low, s) + log_chi(queue_low, t))
        worst = max(worst, gap)
    h = 1e-4
    fd = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd[i] = (math.exp(log_chi(queue_low, e, 1e-14)) - math.exp(log_chi(queue_low, -e, 1e-14))) / (2 * h)
    drift_err = float(np.max(np.abs(fd - mean_drift(queue_low))))
    ok = worst <= 1e-8 and drift_err <= 1e-6
    acceptance("C5 log-convexity (200 midpoints) and drift gradient", ok,
               f"max midpoint excess {worst:.1e}, drift error {drift_err:.1e}")
    assert ok


def test_c6_truncation_monotonicity(queue_low, acceptance):
    levels = (8, 16, 32, 64)
    z2_grid = np.exp(np.linspace(-2.0, 2.0, 21))
    worst_drop = 0.0
    worst_order = -np.inf
    for i in range(3):
        for z in (1.0, 2.0, 4.0):
            star = [chi_nested(queue_low, i, [z], L) for L in levels]
            worst_drop = max(worst_drop, max(a - b for a, b in zip(star, star[1:])))
            double = np.array([[chi_nested(queue_low, i, [z, w], L) for w in z2_grid] for L in levels])
            worst_drop = max(worst_drop, float(np.max(double[:-1] - double[1:])))
            worst_order = max(worst_order, float(np.max(np.array(star) - double.min(axis=1))))
    # chi_L values come from eigen-solvers accurate to ~1e-12
    ok = worst_drop <= 1e-12 and worst_order <= 1e-8
    acceptance("C6 truncation monotonicity and chi* <= min chi**", ok,
               f"largest decrease {worst_drop:.1e}, max chi* - min chi** {worst_order:.1e}")
    assert ok


def test_c7_decay_bounds(queue_low, queue_high, acceptance):
    t0 = time.perf_counter()
    reports = [verify_bounds(model, L=24) for model in (queue_low, queue_high)]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports) and elapsed < 120
    acceptance("C7 decay bounds at L=24 for both rate sets", ok,
               f"worst slope - (bound + 0.15) {max(r.worst('bound') for r in reports):.3f}, "
               f"worst start disagreement - 0.05 {max(r.worst('agreement') for r in reports):.3f}, "
               f"{elapsed:.1f} s")
    assert ok


def test_c8_brute_force_equivalence(acceptance):
    rng = np.random.default_rng(8)
    worst = 0.0
    for k in range(10):
        model = random_valid_model(rng, s0=2 + k % 2)
        it = fundamental_box(model, (0, 0, 0, 0), 4, method="power-sum")
        direct = fundamental_box(model, (0, 0, 0, 0), 4, method="linear-solve")
        worst = max(worst, float(np.max(np.abs(it.values - direct.values))))
    ok = worst <= 1e-10
    acceptance("C8 L=4 iterative summation vs direct solve, 10 models", ok, f"max diff {worst:.1e}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
