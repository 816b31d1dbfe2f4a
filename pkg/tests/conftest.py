import math

import numpy as np
import pytest

from shapley3d.geometry import check_general_position

# unit-edge regular tetrahedron and equilateral triangle
TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / (2 * math.sqrt(2))
TRIANGLE = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]])
TETRA_MW = 3 * math.acos(-1 / 3) / (2 * math.pi)


def sphere_points(n, seed):
    """Seeded uniform points on the unit sphere, redrawn until in general position."""
    rng = np.random.default_rng(seed)
    while True:
        z = rng.standard_normal((n, 3))
        pts = z / np.linalg.norm(z, axis=1)[:, None]
        if check_general_position(pts) is None:
            return pts


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def max_rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


@pytest.fixture
def tetra():
    return TETRA.copy()
