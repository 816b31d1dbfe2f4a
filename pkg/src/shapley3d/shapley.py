"""
Shapley values of points for the mean width of their 3-D convex hull.

For a point p and a uniformly random arrival order, p's marginal
contribution splits by how many points arrived before it:

* one point: the hull becomes a segment (closed form, O(n^2) overall);
* two points: the hull becomes a triangle (closed form, O(n^3) overall);
* three or more: hull edges appear and disappear. Each edge qr is handled
  in the projection along qr, where every candidate pair of adjacent faces
  is a planar cone around the origin and the probability that it is an edge
  at the right moment depends only on how many points the cone holds.
  Sweeping polar angle with a convolution queue evaluates all of these in
  O(n log^2 n) per edge, O(n^3 log^2 n) in total.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _dcjit as dc
from . import _sweepjit as sw
from .errors import DegenerateInput, KernelWindowError
from .geometry import (
    TWO_PI,
    PolarSweepOrder,
    Side,
    as_points,
    polar_order,
    project_along,
    require_general_position,
)


@dataclass(frozen=True)
class GFun:
    """
    Probability that ``arity`` given points precede p while the
    ``n - arity - 1 - i`` points outside a cone holding ``i`` points follow
    it: arity! (n - arity - 1 - i)! / (n - i)!, valid for 0 <= i <= n - arity - 1.
    """

    n: int
    arity: int

    @property
    def hi(self):
        return self.n - self.arity - 1

    def __call__(self, i):
        if not 0 <= i <= self.hi:
            raise KernelWindowError(f"g (arity {self.arity}, n={self.n}) evaluated at {i}, valid range [0, {self.hi}]")
        out = float(np.prod(np.arange(1, self.arity + 1)))
        for k in range(self.arity + 1):
            out /= self.n - i - k
        return out

    def table(self, length):
        """Values at 0 .. length-1, zero where no such cone can occur."""
        out = np.zeros(length)
        for i in range(min(length, self.hi + 1)):
            out[i] = self(i)
        return out


def gfun_eval(gf: GFun, i: int) -> float:
    return gf(i)


@dataclass
class ShapleyResult:
    """Per-point Shapley values with the split by number of predecessors."""

    phi: np.ndarray
    case1: np.ndarray
    case2: np.ndarray
    case3_removal: np.ndarray
    case3_apex: np.ndarray
    case3_endpoint: np.ndarray
    n: int
    algorithm: str
    seed: Optional[int] = None
    stderr: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    BREAKDOWN = ("case1", "case2", "case3_removal", "case3_apex", "case3_endpoint")

    @property
    def total(self):
        return float(np.sum(self.phi))

    def breakdown(self):
        return {name: getattr(self, name) for name in self.BREAKDOWN}

    @classmethod
    def from_parts(cls, algorithm, **parts):
        n = len(parts["case1"])
        phi = np.zeros(n)
        for name in cls.BREAKDOWN:
            phi = phi + parts[name]
        return cls(phi=phi, n=n, algorithm=algorithm, **parts)


def _pairwise_distances(pts):
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def case1(points) -> np.ndarray:
    """Contributions from orders where exactly one point precedes p."""
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        return np.zeros(n)
    dist = _pairwise_distances(pts)
    return dist.sum(1) / (2.0 * n * (n - 1))


def case2(points) -> np.ndarray:
    """Contributions from orders where exactly two points precede p (the hull becomes a triangle)."""
    pts = as_points(points)
    n = len(pts)
    if n < 3:
        return np.zeros(n)
    dist = _pairwise_distances(pts)
    # sum over ordered (q, r), both != p: 2(n-2) sum_q |pq| - sum_{q,r != p} |qr|
    row = dist.sum(1)
    total = dist.sum()
    others = total - 2.0 * row
    terms = 2.0 * (n - 2) * row - others
    return terms / (4.0 * n * (n - 1) * (n - 2))


# -- sweeps ------------------------------------------------------------

def _queue_states(kernels, m, width=2):
    """Two compiled states (tail, head) for a queue over kernel tables of length m."""
    kernels = np.atleast_2d(kernels)
    gvals = np.ascontiguousarray(kernels[:, ::-1])
    ops = 7 * m + 8
    lcap = max(ops.bit_length() - 1, 1)
    return (
        dc.allocate(width, len(kernels), gvals, -kernels.shape[1], lcap),
        dc.allocate(width, len(kernels), gvals, -kernels.shape[1], lcap),
    )


def _kernel_table(gf, m):
    if callable(gf) and not isinstance(gf, GFun):
        return np.array([gf(i) for i in range(m)], dtype=np.float64)
    return gf.table(m)


def sweep_sums(order: PolarSweepOrder, gf, side=Side.RIGHT, weights="one", include_self=True) -> np.ndarray:
    """
    For every sorted position i, sum over p_j on ``side`` of p_i of
    f(j) g(W(p_i, p_j)), W being the number of points strictly between them.

    ``weights`` is "one", "angle" (the polar angle of p_j lifted to within
    pi of p_i) or a per-position array. With ``include_self`` the term
    f(i) g(0) is added, matching the sums over Side(p_i) plus p_i itself.
    ``gf`` is a :class:`GFun` or any callable on 0 .. m-1.
    """
    theta = np.asarray(order.theta, dtype=np.float64)
    m = len(theta)
    if m == 0:
        return np.zeros(0)
    side = Side(side)
    table = _kernel_table(gf, m)
    clockwise = side is Side.LEFT
    keys = -theta[::-1].copy() if clockwise else theta.copy()
    if isinstance(weights, str):
        if weights == "one":
            vals, coef = np.ones(m), 0.0
        elif weights == "angle":
            vals, coef = (-keys, -1.0) if clockwise else (keys.copy(), 1.0)
        else:
            raise ValueError(f"unknown weights {weights!r}")
    else:
        w = np.asarray(weights, dtype=np.float64)
        vals, coef = (w[::-1].copy() if clockwise else w.copy()), 0.0
    tail, head = _queue_states(table, m, width=1)
    out = np.empty((m, 1, 1))
    sw.queue_sweep(keys, vals[:, None], np.array([coef]), sw._first_at_least(keys, keys[0] + np.pi), tail, head, out)
    res = out[:, 0, 0]
    if clockwise:
        res = res[::-1]
        vals = vals[::-1]
    if include_self:
        res = res + vals * table[0]
    return res


def initial_cone_sum(order: PolarSweepOrder, i0: int, gf, weights="one") -> float:
    """
    Sum of f(j) g(W(p_j, p_k)) over the pairs (p_j, p_k), p_k within pi
    counterclockwise of p_j, whose cone does not contain p_{i0}.
    """
    theta = np.asarray(order.theta, dtype=np.float64)
    m = len(theta)
    if m < 3:
        return 0.0
    table = _kernel_table(gf, m)
    idx = (i0 + 1 + np.arange(m - 1)) % m
    keys = theta[idx] + TWO_PI * (idx <= i0)
    if isinstance(weights, str):
        if weights == "one":
            vals, coef = np.ones(m - 1), 0.0
        elif weights == "angle":
            vals, coef = keys.copy(), 1.0
        else:
            raise ValueError(f"unknown weights {weights!r}")
    else:
        vals, coef = np.asarray(weights, dtype=np.float64)[idx], 0.0
    tail, head = _queue_states(table, m, width=1)
    out = np.empty((m - 1, 1, 1))
    sw.queue_sweep(keys, vals[:, None], np.array([coef]), m - 1, tail, head, out)
    return float(out[:, 0, 0].sum())


#: how triangle prefixes {q, r, t} enter the removal sums
DIAGONAL_MODES = ("triangle", "arity4")


class _PairEngine:
    """Compiled states reused across all pairs for one point-set size."""

    def __init__(self, n, diagonal="triangle"):
        if diagonal not in DIAGONAL_MODES:
            raise ValueError(f"diagonal must be one of {DIAGONAL_MODES}")
        self.n = n
        m = n - 2
        self.g3 = GFun(n, 3).table(m)
        self.g4 = GFun(n, 4).table(m)
        # g4 has no value at 0 for n = 4; the table zero-extends it
        self.diag_g = GFun(n, 3)(0) if diagonal == "triangle" else float(self.g4[0])
        self.tail2, self.head2 = _queue_states(np.vstack((self.g3, self.g4)), m)
        self.tail1, self.head1 = _queue_states(self.g4, m)

    def run(self, pts, q, r):
        order = polar_order(project_along(pts, q, r))
        removal, apex, endpoint = sw.pair_terms(
            order.theta, self.diag_g, self.tail2, self.head2, self.tail1, self.head1
        )
        return order, removal, apex, endpoint


def _pair_setup(points, q, r):
    pts = as_points(points)
    n = len(pts)
    if n < 4:
        raise ValueError("edge sweeps need at least 4 points")
    return pts, n, float(np.linalg.norm(pts[q] - pts[r]))


def case3_pair_removal(points, q, r) -> np.ndarray:
    """
    For the line qr: per point p (indexed like ``points``), the edge length
    times the exterior-angle weighted probability that some pair of faces
    at qr is on the hull just before p arrives and p sees it. Zero at q, r.
    """
    pts, n, length = _pair_setup(points, q, r)
    order, removal, _, _ = _PairEngine(n).run(pts, q, r)
    out = np.zeros(n)
    out[order.index] = length * removal
    return out


def case3_pair_addition_apex(points, q, r) -> np.ndarray:
    """Per point p: weighted probability that qr becomes an edge with p on one of its faces."""
    pts, n, length = _pair_setup(points, q, r)
    order, _, apex, _ = _PairEngine(n).run(pts, q, r)
    out = np.zeros(n)
    out[order.index] = length * apex
    return out


def case3_pair_addition_endpoint(points, p, r) -> float:
    """Weighted probability that pr becomes an edge when p arrives."""
    pts, n, length = _pair_setup(points, p, r)
    _, _, _, endpoint = _PairEngine(n).run(pts, p, r)
    return length * endpoint


def _case3_block(pts, qs, rs, diagonal):
    """Compensated sums (6, n) over the lines (qs[k], rs[k]); see ``case3_block``."""
    engine = _PairEngine(len(pts), diagonal)
    acc = np.zeros((6, len(pts)))
    bad = sw.case3_block(pts, qs, rs, engine.diag_g, engine.tail2, engine.head2, engine.tail1, engine.head1, acc)
    if bad >= 0:
        # redo it in Python for a precise message
        polar_order(project_along(pts, int(qs[bad]), int(rs[bad])))
        raise DegenerateInput(f"degenerate projection along points {qs[bad]} and {rs[bad]}")
    return acc


def _merge_compensated(blocks):
    """Fold per-block (sum, compensation) rows in block order."""
    acc = blocks[0].copy()
    for other in blocks[1:]:
        for row in (0, 2, 4):
            for x in (other[row], other[row + 1]):
                s = acc[row]
                t = s + x
                acc[row + 1] += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
                acc[row] = t
    return acc[0::2] + acc[1::2]


def shapley_mean_width(points, check=True, threads=1, diagonal="triangle") -> ShapleyResult:
    """
    Exact Shapley values of every point for the mean width of the convex
    hull, in O(n^3 log^2 n) time.

    With ``check`` the input is first validated for general position
    (raises :class:`~shapley3d.errors.DegenerateInput`). ``threads`` splits
    the edge loop into that many contiguous blocks whose partial sums are
    combined in block order.

    ``diagonal="arity4"`` treats three-point prefixes like every other cone
    (arity-4 probability) instead of as triangles; it is wrong and exists
    only so tests can show the difference.
    """
    pts = as_points(points)
    n = len(pts)
    if check:
        require_general_position(pts)
    zeros = np.zeros(n)
    parts = {
        "case1": case1(pts),
        "case2": case2(pts),
        "case3_removal": zeros.copy(),
        "case3_apex": zeros.copy(),
        "case3_endpoint": zeros.copy(),
    }
    if n >= 4:
        qs, rs = np.triu_indices(n, 1)
        threads = max(1, min(int(threads), len(qs)))
        blocks = np.array_split(np.arange(len(qs)), threads)
        if threads == 1:
            results = [_case3_block(pts, qs, rs, diagonal)]
        else:
            # the compiled block releases the GIL
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(lambda b: _case3_block(pts, qs[b], rs[b], diagonal), blocks))
        rem, apex, end = _merge_compensated(results)
        parts["case3_removal"] = rem
        parts["case3_apex"] = apex
        parts["case3_endpoint"] = end
    res = ShapleyResult.from_parts("fast", **parts)
    res.extra["diagonal"] = diagonal
    return res
