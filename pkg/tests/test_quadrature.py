from math import factorial

import numpy as np
import pytest

from crfve.quadrature import QuadratureRule, conical_rule, segment_rule, triangle_rule


def _monomial_integral(a, b):
    """Exact integral of l1^a l2^b over the reference triangle (area 1/2)."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 5, 6, 10, 14])
def test_triangle_rules_are_exact(degree):
    pts, w = triangle_rule(degree)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(pts.sum(axis=1), 1.0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            approx = 0.5 * np.sum(w * pts[:, 1] ** a * pts[:, 2] ** b)
            assert approx == pytest.approx(_monomial_integral(a, b), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("degree", [2, 5, 8, 10])
def test_triangle_points_are_interior(degree):
    pts, _ = triangle_rule(degree)
    assert pts.min() > 0


def test_degree_two_rule_misses_cubics():
    pts, w = triangle_rule(2)
    approx = 0.5 * np.sum(w * pts[:, 1] ** 3)
    assert approx != pytest.approx(_monomial_integral(3, 0), rel=1e-6)


@pytest.mark.parametrize("npts", [1, 2, 3, 8])
def test_segment_rules(npts):
    s, w = segment_rule(npts)
    assert np.all((s > 0) & (s < 1))
    for k in range(2 * npts):
        assert np.sum(w * s ** k) == pytest.approx(1 / (k + 1), rel=1e-12)


def test_segment_rule_rejects_zero_points():
    with pytest.raises(ValueError):
        segment_rule(0)


def test_conical_rule_size():
    pts, w = conical_rule(6)
    assert len(w) == 16


def test_default_rule():
    q = QuadratureRule()
    assert len(q.triangle[1]) == 3 and len(q.segment[1]) == 2
