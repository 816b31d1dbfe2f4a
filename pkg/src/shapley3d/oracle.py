"""
Ground truth for the fast algorithm.

Nothing here shares code with the sweep: hulls come from Qhull, mean width
from the edge formula (or by averaging directional widths), and Shapley
values from the definition. Exact Shapley values group the n! orders by
predecessor set, so every coalition's hull is built once.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateInput, SizeLimitError
from .geometry import EPS_GP, TWO_PI, as_points
from .shapley import ShapleyResult

#: exact_shapley enumerates 2**n coalitions
EXACT_MAX_N = 9

POINT, SEGMENT, TRIANGLE, POLYHEDRON = "point", "segment", "triangle", "polyhedron"


@dataclass(frozen=True)
class ConvexHull3:
    """
    Hull of a small point set. ``faces`` are vertex triples (input indices)
    with unit outward ``normals``; ``edges`` maps (a, b), a < b, to the third
    vertices (t1, t2) of its two faces. A flat triangle has a single face
    and t1 == t2 on every edge.
    """

    points: np.ndarray
    kind: str
    vertices: tuple
    faces: tuple = ()
    normals: Optional[np.ndarray] = None
    edges: Optional[dict] = None

    def edge_length(self, edge):
        a, b = edge
        return float(np.linalg.norm(self.points[a] - self.points[b]))


def _flat(points, idx):
    a, b, c = (points[i] for i in idx)
    return np.linalg.norm(np.cross(b - a, c - a))


def hull3d(points) -> ConvexHull3:
    """Convex hull of up to a few hundred points in general position."""
    pts = as_points(points)
    n = len(pts)
    if n == 0:
        raise DegenerateInput("hull of an empty set")
    if n == 1:
        return ConvexHull3(pts, POINT, (0,))
    scale = float(np.ptp(pts, axis=0).max())
    if n == 2:
        if not np.linalg.norm(pts[1] - pts[0]) > EPS_GP * max(scale, 1e-300):
            raise DegenerateInput("coincident points")
        return ConvexHull3(pts, SEGMENT, (0, 1))
    if n == 3:
        if not _flat(pts, (0, 1, 2)) > EPS_GP * scale ** 2:
            raise DegenerateInput("collinear points")
        normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        edges = {(0, 1): (2, 2), (0, 2): (1, 1), (1, 2): (0, 0)}
        return ConvexHull3(pts, TRIANGLE, (0, 1, 2), ((0, 1, 2),), (normal / np.linalg.norm(normal))[None], edges)
    try:
        qh = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(f"hull failed: {str(exc).splitlines()[0]}") from None
    if not qh.volume > EPS_GP * scale ** 3:
        raise DegenerateInput("coplanar points")
    faces = tuple(tuple(int(v) for v in f) for f in qh.simplices)
    normals = qh.equations[:, :3] / np.linalg.norm(qh.equations[:, :3], axis=1)[:, None]
    edges = {}
    for f in faces:
        for k in range(3):
            a, b = sorted((f[k], f[(k + 1) % 3]))
            edges.setdefault((a, b), []).append(f[(k + 2) % 3])
    bad = [e for e, t in edges.items() if len(t) != 2]
    if bad:
        raise DegenerateInput(f"hull edge {bad[0]} is not shared by exactly two faces")
    edges = {e: tuple(sorted(t)) for e, t in edges.items()}
    return ConvexHull3(pts, POLYHEDRON, tuple(int(v) for v in qh.vertices), faces, normals, edges)


def _face_of(hull, edge, third):
    key = frozenset((*edge, third))
    for i, f in enumerate(hull.faces):
        if frozenset(f) == key:
            return i
    raise RuntimeError(f"no face {sorted(key)} on the hull")


def exterior_angle(hull: ConvexHull3, edge) -> float:
    """Angle between the outward normals of the two faces at ``edge``, over 2 pi."""
    if hull.kind != POLYHEDRON:
        raise ValueError("exterior angles are defined here for polyhedron edges only")
    t1, t2 = hull.edges[tuple(sorted(edge))]
    n1 = hull.normals[_face_of(hull, edge, t1)]
    n2 = hull.normals[_face_of(hull, edge, t2)]
    return math.atan2(np.linalg.norm(np.cross(n1, n2)), float(n1 @ n2)) / TWO_PI


def interior_angle(hull: ConvexHull3, edge) -> float:
    """Dihedral angle inside the body at ``edge``, over 2 pi, from the two faces themselves."""
    a, b = sorted(edge)
    t1, t2 = hull.edges[(a, b)]
    p = hull.points
    d = p[b] - p[a]
    d = d / np.linalg.norm(d)
    # in-face directions perpendicular to the edge
    w1 = p[t1] - p[a]
    w1 = w1 - (w1 @ d) * d
    w2 = p[t2] - p[a]
    w2 = w2 - (w2 @ d) * d
    return math.atan2(np.linalg.norm(np.cross(w1, w2)), float(w1 @ w2)) / TWO_PI


def edge_records(hull: ConvexHull3) -> dict:
    """
    (a, b, t1, t2) -> l(e) psi(e) / 2 for every edge with its two faces; the
    values sum to the mean width. Flat triangle edges carry psi = 1/2.
    """
    if hull.kind in (POINT, SEGMENT):
        raise ValueError("points and segments have no edge/face pairs")
    out = {}
    for (a, b), (t1, t2) in hull.edges.items():
        psi = 0.5 if hull.kind == TRIANGLE else exterior_angle(hull, (a, b))
        out[(a, b, t1, t2)] = 0.5 * hull.edge_length((a, b)) * psi
    return out


def mean_width_exact(points) -> float:
    pts = as_points(points)
    n = len(pts)
    if n <= 1:
        return 0.0
    hull = hull3d(pts)
    if hull.kind == SEGMENT:
        return 0.5 * hull.edge_length((0, 1))
    return math.fsum(edge_records(hull).values())


def directional_width(points, u) -> float:
    pts = as_points(points)
    if len(pts) == 0:
        return 0.0
    proj = pts @ np.asarray(u, dtype=np.float64)
    return float(proj.max() - proj.min())


def sphere_directions(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform unit vectors: normalized triples of standard normals."""
    z = rng.standard_normal((k, 3))
    return z / np.linalg.norm(z, axis=1)[:, None]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int
    seed: int


def mc_mean_width(points, samples: int, seed: int, batch: int = 1 << 16) -> Estimate:
    """Average width over uniformly random directions."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pts = as_points(points)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        if len(pts):
            proj = sphere_directions(rng, k) @ pts.T
            w = proj.max(axis=1) - proj.min(axis=1)
        else:
            w = np.zeros(k)
        total += math.fsum(w)
        total_sq += math.fsum(w * w)
        done += k
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1) if samples > 1 else math.nan
    return Estimate(mean, math.sqrt(var / samples), samples, seed)


def perm_probability(a: int, b: int) -> float:
    """Chance that a given point x comes after a fixed a-set and before a fixed b-set: a! b! / (a+b+1)!."""
    if a < 0 or b < 0:
        raise ValueError("counts must be non-negative")
    return 1.0 / ((a + b + 1) * math.comb(a + b, a))


class _Coalitions:
    """Memoized hull data per coalition bitmask."""

    def __init__(self, pts):
        self.pts = pts
        self._cache = {}

    def members(self, mask):
        return [i for i in range(len(self.pts)) if mask >> i & 1]

    def get(self, mask):
        hit = self._cache.get(mask)
        if hit is None:
            idx = self.members(mask)
            if len(idx) <= 1:
                hit = (0.0, {})
            elif len(idx) == 2:
                hit = (0.5 * float(np.linalg.norm(self.pts[idx[0]] - self.pts[idx[1]])), {})
            else:
                hull = hull3d(self.pts[idx])
                rec = {
                    (idx[a], idx[b], idx[t1], idx[t2]): v
                    for (a, b, t1, t2), v in edge_records(hull).items()
                }
                rec = {(a, b, *sorted((t1, t2))): v for (a, b, t1, t2), v in rec.items()}
                hit = (math.fsum(rec.values()), rec)
            self._cache[mask] = hit
        return hit

    def value(self, mask):
        return self.get(mask)[0]


def _marginal_parts(coal, mask, p):
    """Split v(S + p) - v(S) into (case1, case2, removal, apex, endpoint)."""
    size = bin(mask).count("1")
    new_v, new_rec = coal.get(mask | 1 << p)
    old_v, old_rec = coal.get(mask)
    if size == 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    if size == 1:
        return new_v - old_v, 0.0, 0.0, 0.0, 0.0
    if size == 2:
        return 0.0, new_v - old_v, 0.0, 0.0, 0.0
    removal = -math.fsum(v for k, v in old_rec.items() if k not in new_rec)
    apex = math.fsum(v for k, v in new_rec.items() if k not in old_rec and p not in k[:2])
    endpoint = math.fsum(v for k, v in new_rec.items() if p in k[:2])
    return 0.0, 0.0, removal, apex, endpoint


def exact_shapley(points) -> ShapleyResult:
    """
    Shapley values from the definition. The n! arrival orders are grouped by
    the set S arriving before p, each group having weight |S|! (n-|S|-1)! / n!.
    The marginal is split the same way as the fast algorithm: by predecessor
    count, and for three or more predecessors into the (edge, face pair)
    records the hull loses (removal), gains with p as a face apex (apex) and
    gains as edges at p (endpoint).
    """
    pts = as_points(points)
    n = len(pts)
    if n > EXACT_MAX_N:
        raise SizeLimitError(f"exact Shapley values enumerate 2^n coalitions; n={n} exceeds {EXACT_MAX_N}")
    coal = _Coalitions(pts)
    parts = np.zeros((5, n))
    for p in range(n):
        acc = [[] for _ in range(5)]
        others = [i for i in range(n) if i != p]
        for sub in range(1 << (n - 1)):
            mask = 0
            for k, i in enumerate(others):
                if sub >> k & 1:
                    mask |= 1 << i
            size = bin(sub).count("1")
            weight = perm_probability(size, n - size - 1)
            for row, val in enumerate(_marginal_parts(coal, mask, p)):
                if val:
                    acc[row].append(weight * val)
        parts[:, p] = [math.fsum(a) for a in acc]
    return ShapleyResult.from_parts("exact", **dict(zip(ShapleyResult.BREAKDOWN, parts)))


def mc_shapley(points, samples: int, seed: int) -> ShapleyResult:
    """
    Average marginals over ``samples`` uniformly random arrival orders.
    Coalition values are memoized by bitmask. ``stderr`` is the sample
    standard deviation over sqrt(samples) (NaN for one sample).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pts = as_points(points)
    n = len(pts)
    rng = np.random.default_rng(seed)
    coal = _Coalitions(pts)
    marg = np.zeros((samples, n))
    parts = np.zeros((5, n))
    for s in range(samples):
        order = rng.permutation(n)
        mask = 0
        for p in order:
            p = int(p)
            split = _marginal_parts(coal, mask, p)
            marg[s, p] = coal.value(mask | 1 << p) - coal.value(mask)
            parts[:, p] += split
            mask |= 1 << p
    parts /= samples
    stderr = marg.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.full(n, math.nan)
    res = ShapleyResult.from_parts("mc", **dict(zip(ShapleyResult.BREAKDOWN, parts)))
    res.phi = marg.mean(axis=0)
    res.seed = seed
    res.stderr = stderr
    res.extra["samples"] = samples
    return res
