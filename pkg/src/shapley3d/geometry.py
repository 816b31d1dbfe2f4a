"""
Projection of a point set along a line, polar ordering around that line,
and general-position validation.

Every sweep in the Shapley computation looks at the point set "down" a
segment qr: the remaining points are projected onto the plane orthogonal
to r - q, the line itself collapses to the planar origin, and the points
are visited in counterclockwise polar order.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateInput

TWO_PI = 2.0 * np.pi

#: relative tolerance for general-position tests (scaled by the input diameter)
EPS_GP = 1e-9

#: two polar angles closer than this are treated as a tie
ANGLE_TIE_TOL = 1e-12


def as_points(points) -> np.ndarray:
    """Coerce to a float64 array of shape (n, 3) with finite entries."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array of points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    return pts


def diameter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


@dataclass(frozen=True)
class ProjectionFrame:
    origin: np.ndarray
    direction: np.ndarray
    u: np.ndarray
    v: np.ndarray


def projection_frame(q, r, tol: float = 1e-300) -> ProjectionFrame:
    """
    Orthonormal frame (u, v, d) with d along r - q.

    u = e_k x d for the coordinate axis e_k least aligned with d (the last
    such axis on ties), which keeps the construction deterministic and well
    conditioned; v = d x u so that (u, v, d) is right handed. A line along
    +z gets u = +x and v = +y.
    """
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    d = r - q
    length = np.linalg.norm(d)
    if not length > tol:
        raise DegenerateInput("projection line through coincident points")
    d = d / length
    axis = np.zeros(3)
    axis[2 - np.argmin(np.abs(d)[::-1])] = 1.0
    u = np.cross(axis, d)
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    return ProjectionFrame(q, d, u, v)


@dataclass(frozen=True)
class Projection:
    """Points projected along a line: source indices, planar coordinates, polar angles."""

    index: np.ndarray
    coords: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return len(self.index)


def project_along(points, q: int, r: int) -> Projection:
    """
    Project every point except ``q`` and ``r`` onto the plane orthogonal to
    the line qr. The line maps to the planar origin, so the planar norm of a
    projected point equals its distance to the line.
    """
    pts = as_points(points)
    if q == r:
        raise ValueError("q and r must be distinct")
    frame = projection_frame(pts[q], pts[r])
    keep = np.ones(len(pts), dtype=bool)
    keep[[q, r]] = False
    index = np.flatnonzero(keep)
    rel = pts[index] - frame.origin
    coords = np.column_stack((rel @ frame.u, rel @ frame.v))
    if len(index) and np.any(np.hypot(coords[:, 0], coords[:, 1]) == 0.0):
        raise DegenerateInput(f"a point lies on the line through points {q} and {r}")
    theta = np.mod(np.arctan2(coords[:, 1], coords[:, 0]), TWO_PI)
    # mod can round 2pi - tiny up to exactly 2pi
    theta[theta >= TWO_PI] = 0.0
    return Projection(index, coords, theta)


@dataclass(frozen=True)
class PolarSweepOrder:
    """
    Projected points sorted by polar angle, viewed as a cyclic sequence.

    Position ``i + m`` refers to the same point as ``i`` but with its angle
    lifted by 2*pi, so angles along the cyclic walk keep increasing.
    """

    index: np.ndarray
    coords: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return len(self.index)

    def point(self, i: int) -> int:
        return int(self.index[i % len(self)])

    def lifted(self, i: int) -> float:
        m = len(self)
        turns, pos = divmod(i, m)
        return float(self.theta[pos] + TWO_PI * turns)


def polar_order(projected: Projection, tol: float = ANGLE_TIE_TOL) -> PolarSweepOrder:
    if len(projected) and np.any(np.hypot(*projected.coords.T) == 0.0):
        raise DegenerateInput("projected point at the origin")
    perm = np.argsort(projected.theta, kind="stable")
    theta = projected.theta[perm]
    if len(theta) > 1:
        gaps = np.diff(np.append(theta, theta[0] + TWO_PI))
        bad = np.flatnonzero(gaps <= tol)
        if len(bad):
            j = bad[0]
            a, b = projected.index[perm[j]], projected.index[perm[(j + 1) % len(theta)]]
            raise DegenerateInput(f"points {a} and {b} share a polar angle around the sweep line")
    return PolarSweepOrder(projected.index[perm], projected.coords[perm], theta)


class Side(Enum):
    LEFT = 1
    RIGHT = -1


def classify_side(order: PolarSweepOrder, i: int, j: int) -> Side:
    """Which side of the ray origin -> p_i the point p_j falls on (counterclockwise = LEFT)."""
    if i == j:
        raise ValueError("a point has no side relative to itself")
    a = order.coords[i]
    b = order.coords[j]
    cross = a[0] * b[1] - a[1] * b[0]
    if cross > 0:
        return Side.LEFT
    if cross < 0:
        return Side.RIGHT
    raise DegenerateInput(f"sweep positions {i} and {j} are collinear with the sweep line")


class Violation(NamedTuple):
    kind: str  # "duplicate", "collinear" or "coplanar"
    indices: tuple
    measure: float  # the scaled determinant that fell below tolerance

    def __str__(self):
        return f"{self.kind} points {self.indices} (scaled measure {self.measure:.3g})"


def check_general_position(points, eps: float = EPS_GP) -> Optional[Violation]:
    """
    Return the first violation of general position, or None.

    Duplicates, collinear triples and coplanar quadruples are detected by
    distances, cross products and orientation determinants scaled by the
    diameter (to the first, second and third power respectively), and
    reported in lexicographic order of indices within each kind.
    """
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        return None
    scale = diameter(pts)
    if scale == 0.0:
        return Violation("duplicate", (0, 1), 0.0)

    for i in range(n - 1):
        dist = np.linalg.norm(pts[i + 1:] - pts[i], axis=1) / scale
        hit = np.flatnonzero(dist < eps)
        if len(hit):
            return Violation("duplicate", (i, i + 1 + int(hit[0])), float(dist[hit[0]]))

    for i in range(n - 2):
        rel = pts[i + 1:] - pts[i]
        cr = np.cross(rel[:, None, :], rel[None, :, :])
        area = np.linalg.norm(cr, axis=-1) / scale ** 2
        area[np.tril_indices(len(rel))] = np.inf
        hit = np.argwhere(area < eps)
        if len(hit):
            j, k = hit[0]
            return Violation("collinear", (i, i + 1 + int(j), i + 1 + int(k)), float(area[j, k]))

    for i in range(n - 3):
        rel = pts[i + 1:] - pts[i]
        m = len(rel)
        jj, kk = np.triu_indices(m, 1)
        normals = np.cross(rel[jj], rel[kk])
        det = np.abs(normals @ rel.T) / scale ** 3
        det[np.arange(m)[None, :] <= kk[:, None]] = np.inf
        hit = np.argwhere(det < eps)
        if len(hit):
            # triu order is already lexicographic in (j, k); pick the smallest l
            first = hit[np.lexsort((hit[:, 1], hit[:, 0]))[0]]
            row, l = first
            return Violation(
                "coplanar",
                (i, i + 1 + int(jj[row]), i + 1 + int(kk[row]), i + 1 + int(l)),
                float(det[row, l]),
            )
    return None


def require_general_position(points, eps: float = EPS_GP) -> None:
    violation = check_general_position(points, eps)
    if violation is not None:
        raise DegenerateInput(f"input not in general position: {violation}")
