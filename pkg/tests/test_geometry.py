import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapley3d.errors import DegenerateInput
from shapley3d.geometry import (
    TWO_PI,
    Projection,
    Side,
    check_general_position,
    classify_side,
    polar_order,
    project_along,
    projection_frame,
    require_general_position,
)

from conftest import TETRA, sphere_points

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_project_axis_aligned():
    pts = np.array([[0, 0, 0], [0, 0, 1], [1, 0, 0.3], [0, 2, -1]], dtype=float)
    proj = project_along(pts, 0, 1)
    assert list(proj.index) == [2, 3]
    np.testing.assert_allclose(proj.coords[0], [1, 0], atol=1e-15)
    np.testing.assert_allclose(proj.coords[1], [0, 2], atol=1e-15)
    assert proj.theta[0] == pytest.approx(0.0, abs=1e-15)
    assert proj.theta[1] == pytest.approx(math.pi / 2)


def test_project_rejects_coincident_line_points():
    with pytest.raises(DegenerateInput):
        project_along(np.array([[1.0, 2, 3], [1, 2, 3], [0, 0, 0]]), 0, 1)
    with pytest.raises(ValueError):
        project_along(TETRA, 1, 1)


def test_point_on_line_is_degenerate():
    pts = np.array([[0, 0, 0], [0, 0, 1], [0, 0, 2.5], [1, 0, 0]], dtype=float)
    with pytest.raises(DegenerateInput):
        project_along(pts, 0, 1)


@given(arrays(np.float64, (3, 3), elements=coords))
def test_frame_is_orthonormal(p):
    d = p[1] - p[0]
    if np.linalg.norm(d) < 1e-6:
        return
    fr = projection_frame(p[0], p[1])
    basis = np.array([fr.u, fr.v, fr.direction])
    np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)
    # right handed
    assert np.linalg.det(basis) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(5, 20))
def test_projection_is_isometric_to_line_distance(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    proj = project_along(pts, 0, 1)
    d = pts[1] - pts[0]
    rel = pts[proj.index] - pts[0]
    dist = np.linalg.norm(np.cross(rel, d), axis=1) / np.linalg.norm(d)
    planar = np.hypot(proj.coords[:, 0], proj.coords[:, 1])
    np.testing.assert_allclose(planar, dist, rtol=1e-12)
    assert np.all((proj.theta >= 0) & (proj.theta < TWO_PI))


def _projection(theta):
    theta = np.asarray(theta, dtype=float)
    return Projection(np.arange(len(theta)), np.column_stack((np.cos(theta), np.sin(theta))), theta)


def test_polar_order_sorts_and_lifts():
    order = polar_order(_projection([3.1, 0.2, 1.5]))
    np.testing.assert_array_equal(order.theta, [0.2, 1.5, 3.1])
    assert list(order.index) == [1, 2, 0]
    assert order.lifted(3) == pytest.approx(0.2 + TWO_PI)
    assert order.point(4) == 2


def test_polar_order_rejects_ties():
    with pytest.raises(DegenerateInput):
        polar_order(_projection([0.5, 1.0, 0.5]))


def test_polar_order_rejects_origin():
    proj = Projection(np.arange(2), np.array([[0.0, 0.0], [1.0, 0.0]]), np.zeros(2))
    with pytest.raises(DegenerateInput):
        polar_order(proj)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_lifted_order_is_strictly_increasing(seed):
    pts = sphere_points(9, seed)
    order = polar_order(project_along(pts, 2, 5))
    m = len(order)
    lifted = [order.lifted(i) for i in range(3 * m)]
    assert all(b > a for a, b in zip(lifted, lifted[1:]))


def test_classify_side_examples():
    order = polar_order(_projection([0.0, math.pi / 2, 3 * math.pi / 2]))
    assert classify_side(order, 0, 1) is Side.LEFT
    assert classify_side(order, 0, 2) is Side.RIGHT
    with pytest.raises(ValueError):
        classify_side(order, 1, 1)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_classify_side_antisymmetric(seed):
    order = polar_order(project_along(sphere_points(10, seed), 0, 1))
    for i in range(len(order)):
        for j in range(len(order)):
            if i != j:
                a = classify_side(order, i, j)
                b = classify_side(order, j, i)
                assert a is not b


def test_classify_side_collinear_is_degenerate():
    proj = Projection(np.arange(2), np.array([[1.0, 0.0], [-2.0, 0.0]]), np.array([0.0, math.pi]))
    order = polar_order(proj)
    with pytest.raises(DegenerateInput):
        classify_side(order, 0, 1)


def test_general_position_examples():
    assert check_general_position(TETRA) is None
    v = check_general_position(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 3]], dtype=float))
    assert v.kind == "collinear" and v.indices == (0, 1, 2)
    v = check_general_position(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float))
    assert v.kind == "coplanar" and v.indices == (0, 1, 2, 3)
    assert v.measure == 0.0
    v = check_general_position(np.array([[0, 0, 0], [1, 2, 3], [0, 0, 0]], dtype=float))
    assert v.kind == "duplicate" and v.indices == (0, 2)
    with pytest.raises(DegenerateInput):
        require_general_position(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float))


def test_general_position_is_scale_free():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.3, 0.3, 2e-10]])
    assert check_general_position(pts).kind == "coplanar"
    assert check_general_position(pts * 1e6).kind == "coplanar"
    pts[3, 2] = 1e-6
    assert check_general_position(pts) is None
    assert check_general_position(pts * 1e-6) is None


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12))
def test_general_position_matches_determinants(seed, n):
    # brute force over all quadruples with the same scaled measure
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    scale = max(np.linalg.norm(a - b) for a in pts for b in pts)
    worst = min(
        abs(np.linalg.det(np.array([pts[j] - pts[i], pts[k] - pts[i], pts[l] - pts[i]]))) / scale**3
        for i in range(n) for j in range(i + 1, n) for k in range(j + 1, n) for l in range(k + 1, n)
    )
    ok = check_general_position(pts, eps=1e-3)
    if worst > 2e-3:
        assert ok is None or ok.kind != "coplanar"
    if worst < 0.5e-3:
        assert ok is not None
