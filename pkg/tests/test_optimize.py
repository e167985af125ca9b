import math

import numpy as np
import pytest

from skipfree.errors import IterationLimitError
from skipfree.optimize import coordinate_descent, golden_section, line_minimize


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, -2.0, 2.0, xtol=1e-10)
    assert x == pytest.approx(0.3, abs=1e-9)
    assert fx < 1e-18


def test_line_minimize_expands_bracket():
    x, _ = line_minimize(lambda t: math.cosh(t - 7.5), 0.0, xtol=1e-10)
    assert x == pytest.approx(7.5, abs=1e-6)


def test_unbounded_descent_is_reported():
    with pytest.raises(IterationLimitError):
        line_minimize(lambda t: -t, 0.0, limit=20.0)


def test_coordinate_descent_coupled_quadratic():
    A = np.array([[2.0, 0.8, 0.0], [0.8, 1.5, 0.3], [0.0, 0.3, 1.0]])
    b = np.array([1.0, -2.0, 0.5])
    x, fx, sweeps = coordinate_descent(lambda x: 0.5 * x @ A @ x - b @ x, np.zeros(3), ftol=1e-15)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), atol=1e-5)
    assert sweeps >= 3


def test_flat_coordinate_stays_put():
    x, _, _ = coordinate_descent(lambda x: (x[0] - 1.0) ** 2, np.zeros(2))
    assert x[0] == pytest.approx(1.0, abs=1e-6)
    assert x[1] == 0.0
