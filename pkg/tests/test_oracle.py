import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapley3d.errors import DegenerateInput, SizeLimitError
from shapley3d.oracle import (
    EXACT_MAX_N,
    directional_width,
    edge_records,
    exact_shapley,
    exterior_angle,
    hull3d,
    interior_angle,
    mc_mean_width,
    mc_shapley,
    mean_width_exact,
    perm_probability,
)

from conftest import TETRA, TETRA_MW, TRIANGLE, sphere_points

seeds = st.integers(0, 2**32 - 1)
CUBE = np.array(list(itertools.product([0.0, 1.0], repeat=3)))


def test_hull_examples():
    h = hull3d(TETRA)
    assert h.kind == "polyhedron"
    assert len(h.faces) == 4 and len(h.edges) == 6
    assert hull3d(TETRA[:2]).kind == "segment"
    assert hull3d(TETRA[:1]).kind == "point"
    tri = hull3d(TRIANGLE)
    assert tri.kind == "triangle"
    assert all(t1 == t2 for t1, t2 in tri.edges.values())
    inner = np.vstack((TETRA, TETRA.mean(axis=0) + [0.01, -0.02, 0.005]))
    assert sorted(hull3d(inner).vertices) == [0, 1, 2, 3]


def test_hull_degenerate():
    with pytest.raises(DegenerateInput):
        hull3d(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.0]]))
    with pytest.raises(DegenerateInput):
        hull3d(np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]]))
    with pytest.raises(DegenerateInput):
        hull3d(np.zeros((0, 3)))


@settings(max_examples=40)
@given(seeds, st.integers(4, 40))
def test_hull_euler_and_outward(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    h = hull3d(pts)
    assert len(h.vertices) - len(h.edges) + len(h.faces) == 2
    for f, normal in zip(h.faces, h.normals):
        offsets = (pts - pts[f[0]]) @ normal
        assert offsets.max() <= 1e-9 * np.ptp(pts, axis=0).max()


def test_exterior_angle_tetrahedron():
    h = hull3d(TETRA)
    for e in h.edges:
        assert exterior_angle(h, e) == pytest.approx(math.acos(-1 / 3) / (2 * math.pi), rel=1e-13)
        assert exterior_angle(h, e) == pytest.approx(0.3041, abs=5e-5)
    with pytest.raises(ValueError):
        exterior_angle(hull3d(TRIANGLE), (0, 1))


@settings(max_examples=40)
@given(seeds, st.integers(4, 30))
def test_exterior_plus_interior_is_half(seed, n):
    h = hull3d(np.random.default_rng(seed).normal(size=(n, 3)))
    for e in h.edges:
        psi = exterior_angle(h, e)
        assert 0 <= psi <= 0.5
        assert psi + interior_angle(h, e) == pytest.approx(0.5, abs=1e-12)


def test_near_flat_edge():
    for eps in (1e-2, 1e-4, 1e-6):
        pts = np.array([[0, 0, 0], [1, 0, 0], [0.5, 1, -eps], [0.5, -1, -eps], [0.5, 0, -1.0]])
        h = hull3d(pts)
        assert exterior_angle(h, (0, 1)) < eps


def test_mean_width_examples():
    assert mean_width_exact(np.zeros((0, 3))) == 0.0
    assert mean_width_exact([[1.0, 2.0, 3.0]]) == 0.0
    assert mean_width_exact([[0, 0, 0], [0, 2.0, 0]]) == pytest.approx(1.0, rel=1e-15)
    assert mean_width_exact(TRIANGLE) == pytest.approx(0.75, rel=1e-14)
    assert mean_width_exact(TETRA) == pytest.approx(TETRA_MW, rel=1e-14)
    assert TETRA_MW == pytest.approx(0.91226, abs=5e-6)
    # cube: twelve edges at right angles
    assert mean_width_exact(CUBE) == pytest.approx(1.5, rel=1e-12)


def test_edge_records_sum_to_mean_width():
    pts = sphere_points(12, 1)
    rec = edge_records(hull3d(pts))
    assert math.fsum(rec.values()) == mean_width_exact(pts)
    assert all(v > 0 for v in rec.values())


@settings(max_examples=30)
@given(seeds, st.integers(4, 15))
def test_mean_width_is_monotone(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3))
    extra = rng.normal(size=(1, 3)) * 2
    assert mean_width_exact(np.vstack((pts, extra))) >= mean_width_exact(pts) - 1e-12


def test_directional_width_examples():
    assert directional_width(CUBE, [0, 0, 1]) == 1.0
    u = np.array([1.0, 2.0, 2.0]) / 3
    assert directional_width([[1.0, -2.0, 5.0]], u) == 0.0


@pytest.mark.parametrize(
    "pts, exact",
    [
        (np.array([[0, 0, 0], [0, 2.0, 0]]), 1.0),
        (TRIANGLE, 0.75),
        (TETRA, TETRA_MW),
    ],
)
def test_mc_mean_width_within_three_sigma(pts, exact):
    est = mc_mean_width(pts, 200_000, seed=3)
    assert abs(est.value - exact) <= 3 * est.stderr
    assert est.seed == 3 and est.samples == 200_000


def test_mc_mean_width_deterministic():
    a = mc_mean_width(TETRA, 5000, seed=7)
    b = mc_mean_width(TETRA, 5000, seed=7)
    assert a == b
    assert mc_mean_width([[1.0, 1.0, 1.0]], 10, seed=1).value == 0.0
    with pytest.raises(ValueError):
        mc_mean_width(TETRA, 0, seed=1)


def test_perm_probability_examples():
    assert perm_probability(1, 0) == 0.5
    assert perm_probability(0, 0) == 1.0
    assert perm_probability(2, 1) == pytest.approx(1 / 12)
    # by enumeration: x after {a, b} and before {c}
    hits = sum(
        1 for p in itertools.permutations("abcx") if p.index("x") > max(p.index("a"), p.index("b")) and p.index("x") < p.index("c")
    )
    assert perm_probability(2, 1) == pytest.approx(hits / 24)
    with pytest.raises(ValueError):
        perm_probability(-1, 0)


@pytest.mark.parametrize("m", range(7))
def test_perm_probability_sums_to_one(m):
    total = math.fsum(math.comb(m, k) * perm_probability(k, m - k) for k in range(m + 1))
    assert total == pytest.approx(1.0, rel=1e-14)


def brute_shapley(pts):
    """Average marginals over all n! orders."""
    n = len(pts)
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        before = []
        for p in perm:
            phi[p] += mean_width_exact(pts[before + [p]]) - mean_width_exact(pts[before]) if before else 0.0
            before.append(p)
    return phi / len(perms)


def test_exact_examples():
    np.testing.assert_allclose(exact_shapley([[0, 0, 0], [1.0, 0, 0]]).phi, [0.25, 0.25], rtol=1e-15)
    np.testing.assert_allclose(exact_shapley(TRIANGLE).phi, [0.25] * 3, rtol=1e-14)
    res = exact_shapley(TETRA)
    np.testing.assert_allclose(res.phi, TETRA_MW / 4, rtol=1e-13)
    np.testing.assert_allclose(res.phi, brute_shapley(TETRA), rtol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_exact_matches_all_orders(seed):
    pts = sphere_points(6, seed)
    np.testing.assert_allclose(exact_shapley(pts).phi, brute_shapley(pts), rtol=1e-11)


def test_exact_size_limit():
    with pytest.raises(SizeLimitError):
        exact_shapley(sphere_points(EXACT_MAX_N + 1, 0))


@settings(max_examples=20)
@given(seeds, st.integers(2, 9))
def test_single_order_telescopes(seed, n):
    pts = sphere_points(n, seed)
    res = mc_shapley(pts, 1, seed)
    assert res.total == pytest.approx(mean_width_exact(pts), abs=1e-12)
    assert np.all(np.isnan(res.stderr))


def test_mc_shapley_tetrahedron():
    res = mc_shapley(TETRA, 100_000, seed=5)
    exact = exact_shapley(TETRA).phi
    assert np.all(np.abs(res.phi - exact) <= 3 * res.stderr)
    assert res.seed == 5 and res.extra["samples"] == 100_000


def test_mc_shapley_deterministic():
    pts = sphere_points(7, 2)
    a = mc_shapley(pts, 300, seed=9)
    b = mc_shapley(pts, 300, seed=9)
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.stderr, b.stderr)
    parts = sum(a.breakdown().values())
    np.testing.assert_allclose(parts, a.phi, rtol=1e-12, atol=1e-15)
