"""
A regular tetrahedron, four ways
================================

Mean width from the edges and from random directions, then the Shapley
values of the four corners from the fast sweep, from every arrival order
and from sampled orders.
"""

import math

import numpy as np

from shapley3d import exact_shapley, mc_mean_width, mc_shapley, mean_width_exact, shapley_mean_width

# unit edge length
T = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / (2 * math.sqrt(2))

closed = 3 * math.acos(-1 / 3) / (2 * math.pi)
print("closed form      ", closed)
print("edge formula     ", mean_width_exact(T))
est = mc_mean_width(T, 10**6, seed=7)
print("random directions", est.value, "+-", est.stderr)

fast = shapley_mean_width(T)
exact = exact_shapley(T)
sampled = mc_shapley(T, 20000, seed=1)
print()
print("corner   fast                exact               sampled")
for i in range(4):
    print(f"{i:6d}   {fast.phi[i]:.15f}   {exact.phi[i]:.15f}   {sampled.phi[i]:.4f} +- {sampled.stderr[i]:.4f}")
print("sum     ", fast.total)

# where the value comes from: one predecessor (segments), two (triangles),
# and three or more (edges lost and gained)
print()
for name, part in fast.breakdown().items():
    print(f"{name:15s} {part[0]: .6f}")
