"""
Dynamic convolution by hand
===========================

The structure keeps sum_i f(i + c) g(i) while f is edited at a moving
cursor and c shifts by one. Work is grouped in chunks along the bits of
the operation count.
"""

import numpy as np

from shapley3d import ConvQueue, DynamicConvolution, KernelFn
from shapley3d.cli import dynconv_scaling

g = KernelFn.from_function(lambda i: float(i), -20, 20)
dc = DynamicConvolution(g)
dc.update(2)
dc.move(1)
dc.update(3)
print("f =", dc.f(), " query:", dc.query())
dc.rotate(1)
print("after rotating   query:", dc.query())

# after 6 operations the live chunks are levels 1 and 2 (6 = 0b110)
for lev in dc.levels():
    print(f"level {lev.index}: positions {lev.positions.tolist()}, rotation since built {lev.offset}")

# a queue whose query weights the k-th newest item by g(k)
q = ConvQueue(KernelFn.from_function(lambda x: x + 1.0, 0, 10))
for x in (5.0, 7.0):
    q.push(x)
    print("push", x, "->", q.query())
q.pop()
print("pop     ->", q.query())

# transform work per operation grows like log^2 n
print()
print("ops        seconds   work / (n log2^2 n)")
for row in dynconv_scaling(range(12, 18), repeats=2, min_time=0.3):
    print(f"{row['ops']:<10d} {row['seconds']:.4f}    {row['C']:.3f}")
