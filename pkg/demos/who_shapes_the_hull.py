"""
Who shapes the hull?
====================

Points in a ball: the outer ones carry most of the mean width, but the
inner ones still earn a share because they sit on the hull of many
smaller coalitions.
"""

import time

import numpy as np

from shapley3d import mean_width_exact, shapley_mean_width
from shapley3d.cli import generate
from shapley3d.oracle import hull3d

pts = generate(40, "ball", seed=3)
res = shapley_mean_width(pts)
radius = np.linalg.norm(pts, axis=1)
on_hull = np.zeros(len(pts), dtype=bool)
on_hull[list(hull3d(pts).vertices)] = True

print("mean width", mean_width_exact(pts), " sum of values", res.total)
print(f"hull vertices  {on_hull.sum():2d}, mean value {res.phi[on_hull].mean():.4f}")
print(f"interior       {(~on_hull).sum():2d}, mean value {res.phi[~on_hull].mean():.4f}")
print("correlation of value with radius", np.corrcoef(radius, res.phi)[0, 1])

order = np.argsort(radius)
print()
print("radius   value")
for i in order[:: len(order) // 8]:
    print(f"{radius[i]:.3f}    {res.phi[i]:.4f}")

# cost grows like n^3 log^2 n
print()
shapley_mean_width(generate(8, "sphere", 0))
for n in (20, 40, 80):
    p = generate(n, "sphere", n)
    t0 = time.perf_counter()
    shapley_mean_width(p)
    print(f"n={n:3d}  {time.perf_counter() - t0:.2f} s")
