import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_triplet
from skipfree.errors import AssumptionError, IterationLimitError, NearSingularError, NoSolutionError
from skipfree.phase import spectral_radius
from skipfree.region import zeta_roots
from skipfree.rg import (compute_n, iterate_g, iterate_r, solve_g, solve_r, solve_rg,
                         wiener_hopf_residual)
from skipfree.tridiag import Triplet


@pytest.mark.parametrize("q,r,p,R,G", [
    (0.3, 0.5, 0.2, 2 / 3, 1.0),
    (0.2, 0.5, 0.3, 1.0, 2 / 3),
])
def test_scalar_minimal_roots(q, r, p, R, G):
    assert solve_r(q, r, p)[0, 0] == pytest.approx(R, abs=1e-10)
    assert solve_g(q, r, p)[0, 0] == pytest.approx(G, abs=1e-10)


def test_null_recurrent_case_converges_slowly():
    # error of the natural iteration decays like 4/n here
    R = solve_r(0.25, 0.5, 0.25, tol=1e-8)[0, 0]
    assert 0.995 < R <= 1.0
    with pytest.raises(IterationLimitError) as info:
        solve_r(0.25, 0.5, 0.25, tol=1e-12, max_iter=1000)
    assert info.value.best[0, 0] < 1.0
    sol = solve_rg(0.25, 0.5, 0.25, tol=1e-12, max_iter=20_000, allow_slow=True)
    assert not sol.converged
    assert sol.R[0, 0] == pytest.approx(1.0, abs=1e-3)


def test_compute_n_scalar_and_identity():
    assert compute_n(0.5, 0.2, 1.0)[0, 0] == pytest.approx(10 / 3)
    np.testing.assert_allclose(compute_n(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2)), np.eye(2))
    with pytest.raises(NearSingularError):
        compute_n(0.5, 0.5, 1.0)


def test_assumption_and_divergence_errors():
    with pytest.raises(AssumptionError):
        solve_g(0.0, 0.5, 0.2)
    with pytest.raises(AssumptionError):
        solve_r(0.3, 0.5, 0.0)
    # inf_z chi(z) = 0.8 + 2 * 0.3 > 1: no finite solution
    with pytest.raises(NoSolutionError):
        solve_r(0.3, 0.8, 0.3)


def test_wiener_hopf_scalar():
    sol = solve_rg(Triplet(0.3, 0.5, 0.2))
    for z in (0.5, 1.0, 1.5):
        assert wiener_hopf_residual(0.3, 0.5, 0.2, sol, z) <= 1e-8
    # the factor I - zR vanishes at the upper root
    assert abs(1 - 1.5 * sol.R[0, 0]) < 1e-9


def test_iterates_are_monotone():
    rng = np.random.default_rng(9)
    A = random_triplet(rng, 3, down=0.3, up=0.4)
    for gen in (iterate_r(*A), iterate_g(*A)):
        prev = np.zeros((3, 3))
        for X in itertools.islice(gen, 300):
            assert np.all(X >= prev - 1e-15)
            prev = X


def test_spr_r_matches_upper_root():
    rng = np.random.default_rng(10)
    for _ in range(5):
        A = random_triplet(rng, 3, mass=0.97)
        R = solve_r(*A)
        _, hi = zeta_roots(lambda z: spectral_radius(A[0] / z + A[1] + z * A[2], method="eig"))
        assert 1.0 / spectral_radius(R, 1e-13) == pytest.approx(hi, rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 0.95))
def test_scaling_decreases_r(seed, beta):
    rng = np.random.default_rng(seed)
    A = random_triplet(rng, 2, mass=0.98)
    R = solve_r(*A)
    R_beta = solve_r(*(beta * B for B in A))
    assert np.all(R_beta <= R + 1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_random_solution_residuals(seed, n):
    rng = np.random.default_rng(seed)
    A = random_triplet(rng, n, mass=rng.uniform(0.9, 1.0))
    sol = solve_rg(*A)
    assert max(sol.residual_R, sol.residual_G, sol.residual_N) <= 1e-9
    assert max(sol.identity_residuals(A[0], A[2])) <= 1e-8
    assert min(sol.R.min(), sol.G.min(), sol.N.min()) >= 0
