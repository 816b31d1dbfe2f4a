"""
Dynamic convolution with local updates and queries.

Maintains ``sum_i f(i + c) g(i)`` for a fixed kernel ``g`` while ``f`` is
edited one position at a time at a cursor ``p`` that moves by +-1 and the
alignment ``c`` rotates by +-1. Operations are grouped into chunks along the
binary representation of the operation count; when a chunk of size 2**i
closes, its net change of ``f`` is convolved against the kernel for every
rotation the next 2**i operations can reach. ``n`` operations cost
O(n log^2 n) time and O(n) space.

:class:`ConvQueue` layers a queue on two instances: push to the tail, pop
from the head and query ``sum_k Q(k) g(|Q| - k)``.
"""

from collections import deque
from typing import NamedTuple

import numpy as np
from numba import njit

from . import _dcjit as jit
from .errors import EmptyQueueError, KernelWindowError

#: chunks up to this many entries are always convolved directly
DIRECT_MAX = 32


class KernelFn:
    """
    A kernel ``g`` sampled on the integer window ``[lo, hi]``.

    Inside the structure the kernel is extended by zero outside its window;
    evaluating it directly there raises :class:`KernelWindowError`. ``values``
    may be 1-D or of shape (channels, hi - lo + 1) for several kernels that
    share one sequence of operations.
    """

    def __init__(self, values, lo=0):
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2 or vals.shape[1] == 0:
            raise ValueError("kernel needs at least one sample")
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel values must be finite on the window")
        self.values = vals
        self.lo = int(lo)
        self.hi = self.lo + vals.shape[1] - 1

    @classmethod
    def from_function(cls, func, lo, hi):
        return cls([func(i) for i in range(lo, hi + 1)], lo)

    @property
    def channels(self):
        return self.values.shape[0]

    def __call__(self, i):
        if not self.lo <= i <= self.hi:
            raise KernelWindowError(f"kernel evaluated at {i}, outside [{self.lo}, {self.hi}]")
        col = self.values[:, i - self.lo]
        return float(col[0]) if self.channels == 1 else col.copy()

    def sample(self, idx):
        """Zero-extended evaluation at an integer array; shape (channels, len(idx))."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros((self.channels, idx.size))
        ok = (idx >= self.lo) & (idx <= self.hi)
        out[:, ok] = self.values[:, idx[ok] - self.lo]
        return out

    def reversed_shifted(self):
        """The kernel x -> g(-x - 1), used by :class:`ConvQueue`."""
        return KernelFn(self.values[:, ::-1], lo=-self.hi - 1)


class Level(NamedTuple):
    index: int
    positions: np.ndarray
    deltas: np.ndarray
    answers: np.ndarray
    offset: int


class DynamicConvolution:
    """
    The chunked structure. ``width`` is the number of channels of ``f``;
    with one channel of ``f`` and a single kernel, :meth:`query` returns a
    float, otherwise a (width, kernel.channels) array.
    """

    BUILD_MODES = {"auto": jit.BUILD_AUTO, "transform": jit.BUILD_TRANSFORM, "direct": jit.BUILD_DIRECT}

    def __init__(self, kernel: KernelFn, width=1, check_window=True, build="auto"):
        self.kernel = kernel
        self.width = width
        self.check_window = check_window
        self._scalar = width == 1 and kernel.channels == 1
        if build not in self.BUILD_MODES:
            raise ValueError(f"build must be one of {sorted(self.BUILD_MODES)}")
        self.build = build
        self._st = jit.allocate(width, kernel.channels, kernel.values, kernel.lo, 4, self.BUILD_MODES[build])
        self._out = np.zeros((width, kernel.channels))

    # -- bookkeeping ---------------------------------------------------
    def _reserve(self):
        k = int(self._st.scal[jit.K])
        lcap = int(self._st.scal[jit.LCAP])
        if k + 1 >= 1 << (lcap + 1):
            self._st = jit.grow(self._st, lcap + 1)

    @property
    def p(self):
        return int(self._st.scal[jit.P])

    @property
    def c(self):
        return int(self._st.scal[jit.C])

    @property
    def op_count(self):
        return int(self._st.scal[jit.K])

    @property
    def stats(self):
        s = self._st.stats
        return {
            "fft_builds": int(s[jit.ST_FFT_BUILDS]),
            "transform_samples": int(s[jit.ST_TRANSFORM_SAMPLES]),
            "direct_builds": int(s[jit.ST_DIRECT_BUILDS]),
            "direct_madds": int(s[jit.ST_DIRECT_MADDS]),
            "merged_entries": int(s[jit.ST_MERGED]),
            "peak_live_entries": int(s[jit.ST_PEAK_ENTRIES]),
        }

    def levels(self):
        """Live chunk levels, lowest first."""
        st = self._st
        k = self.op_count
        out = []
        for i in range(len(st.hlen)):
            if (k >> i) & 1:
                ho = jit.h_offset(i)
                n = int(st.hlen[i])
                ao = jit.a_offset(i)
                out.append(
                    Level(
                        i,
                        st.hpos[ho:ho + n].copy(),
                        st.hval[ho:ho + n].copy(),
                        st.A[:, :, ao:ao + (2 << i) + 1].copy(),
                        int(st.I[i]),
                    )
                )
        return out

    def f(self):
        """Current ``f`` as a dict position -> value, rebuilt from the live chunks."""
        acc = {}
        for lev in self.levels():
            for pos, val in zip(lev.positions, lev.deltas):
                acc[int(pos)] = acc.get(int(pos), 0.0) + val
        out = {}
        for pos, val in sorted(acc.items()):
            if np.any(val != 0):
                out[pos] = float(val[0]) if self.width == 1 else val
        return out

    def check_invariants(self):
        """Assert the chunk invariants: live levels are the set bits, sizes and offsets bounded."""
        k = self.op_count
        live = [lev.index for lev in self.levels()]
        assert live == [i for i in range(k.bit_length()) if (k >> i) & 1], (k, live)
        for lev in self.levels():
            bound = 1 << lev.index
            assert len(lev.positions) <= bound, (lev.index, len(lev.positions))
            if len(lev.positions):
                assert np.all(np.diff(lev.positions) > 0)
                assert lev.positions[-1] - lev.positions[0] <= bound
            assert abs(lev.offset) <= bound, (lev.index, lev.offset)
            assert lev.answers.shape[-1] == 2 * bound + 1

    def reset(self):
        """Back to f = 0, p = c = 0 and zero counters, keeping the allocated capacity."""
        jit.reset(self._st)
        self._st.stats[:] = 0

    # -- operations ----------------------------------------------------
    def update(self, x):
        self._reserve()
        val = np.broadcast_to(np.asarray(x, dtype=np.float64), (self.width,)).copy()
        jit.update(self._st, val)

    def move(self, step):
        if step not in (1, -1):
            raise ValueError("the cursor moves one position at a time")
        self._reserve()
        jit.move(self._st, step)

    def rotate(self, step):
        if step not in (1, -1):
            raise ValueError("rotation is one position at a time")
        self._reserve()
        jit.rotate(self._st, step)

    def inc_p(self):
        self.move(1)

    def dec_p(self):
        self.move(-1)

    def rotate_left(self):
        self.rotate(1)

    def rotate_right(self):
        self.rotate(-1)

    def query(self):
        if self.check_window and self._st.scal[jit.NUPD]:
            lo = int(self._st.scal[jit.MINPOS]) - self.c
            hi = int(self._st.scal[jit.MAXPOS]) - self.c
            if lo < self.kernel.lo or hi > self.kernel.hi:
                raise KernelWindowError(
                    f"query reaches kernel positions [{lo}, {hi}] outside [{self.kernel.lo}, {self.kernel.hi}]"
                )
        self._reserve()
        jit.query(self._st, self._out)
        return float(self._out[0, 0]) if self._scalar else self._out.copy()

    def replay(self, kinds, args=None, values=None, check=False):
        """
        Run a batch of operations in compiled code. ``kinds`` holds 0 update,
        1 move, 2 rotate, 3 query; returns the query results in order. No
        window check is made. With ``check`` the level invariants are
        verified after every operation (AssertionError on a violation).
        """
        kinds = np.asarray(kinds, dtype=np.int64)
        n = len(kinds)
        args = np.zeros(n, dtype=np.int64) if args is None else np.asarray(args, dtype=np.int64)
        values = np.zeros((n, self.width)) if values is None else np.asarray(values, dtype=np.float64).reshape(n, self.width)
        need = (self.op_count + n).bit_length()
        if need - 1 > self._st.scal[jit.LCAP]:
            self._st = jit.grow(self._st, need - 1)
        out = np.zeros((int(np.count_nonzero(kinds == 3)), self.width, self.kernel.channels))
        done = jit.replay(self._st, kinds, args, values, out, check)
        if done < 0:
            raise AssertionError(f"level invariant broken by operation {-done - 1} of the batch")
        return out[:, 0, 0] if self._scalar else out


class NaiveDynamicConvolution:
    """Reference: explicit ``f`` and a direct sum per query."""

    def __init__(self, kernel: KernelFn, check_window=True):
        self.kernel = kernel
        self.check_window = check_window
        self.p = 0
        self.c = 0
        self.op_count = 0
        self._f = {}

    def update(self, x):
        self._f[self.p] = self._f.get(self.p, 0.0) + float(x)
        if self._f[self.p] == 0.0:
            del self._f[self.p]
        self.op_count += 1

    def move(self, step):
        self.p += step
        self.op_count += 1

    def rotate(self, step):
        self.c += step
        self.op_count += 1

    def f(self):
        return dict(sorted(self._f.items()))

    def query(self):
        self.op_count += 1
        if not self._f:
            return 0.0
        pos = np.fromiter(self._f.keys(), dtype=np.int64, count=len(self._f))
        val = np.fromiter(self._f.values(), dtype=np.float64, count=len(self._f))
        idx = pos - self.c
        if self.check_window and (idx.min() < self.kernel.lo or idx.max() > self.kernel.hi):
            raise KernelWindowError("query reaches outside the kernel window")
        return float(val @ self.kernel.sample(idx)[0])


@njit(cache=True)
def _naive_replay(kinds, args, values, glo, gvals, span):
    f = np.zeros(2 * span + 1)
    p = span
    c = 0
    nq = 0
    for i in range(kinds.shape[0]):
        if kinds[i] == 3:
            nq += 1
    res = np.zeros(nq)
    scale = np.zeros(nq)
    nq = 0
    for i in range(kinds.shape[0]):
        kind = kinds[i]
        if kind == 0:
            f[p] += values[i]
        elif kind == 1:
            p += args[i]
        elif kind == 2:
            c += args[i]
        else:
            s = 0.0
            a = 0.0
            for t in range(gvals.shape[0]):
                x = span + glo + t + c
                if 0 <= x < f.shape[0]:
                    s += f[x] * gvals[t]
                    a += abs(f[x] * gvals[t])
            res[nq] = s
            scale[nq] = a
            nq += 1
    return res, scale


def naive_replay(kinds, args, values, kernel: KernelFn):
    """
    Compiled reference for long single-channel logs (same encoding as
    :meth:`DynamicConvolution.replay`): a dense ``f`` and a direct sum over
    the kernel window per query. Returns (results, scales) where scale is
    sum_i |f(i + c) g(i)|, the natural size for relative errors.
    """
    kinds = np.asarray(kinds, dtype=np.int64)
    args = np.asarray(args, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64).ravel()
    moves = np.abs(args[kinds == 1]).sum()
    return _naive_replay(kinds, args, values, kernel.lo, kernel.values[0], int(moves) + 1)


def random_oplog(n, rng, mix=(0.3, 0.25, 0.25, 0.2)):
    """
    ``n`` random operations in replay encoding: kinds drawn with
    probabilities ``mix`` (update, move, rotate, query), unit steps of random
    sign and update values uniform in [-1, 1].
    """
    kinds = rng.choice(4, size=n, p=mix).astype(np.int64)
    steps = rng.choice(np.array([-1, 1], dtype=np.int64), size=n)
    values = rng.uniform(-1.0, 1.0, n)
    return kinds, steps, values


def naive_query(oplog, kernel: KernelFn):
    """
    Replay ``oplog`` (tuples such as ``("update", 2.0)``, ``("move", 1)``,
    ``("rotate", -1)``, ``("query",)``) on an explicit ``f`` and return the
    final value of sum_i f(i + c) g(i).
    """
    ref = NaiveDynamicConvolution(kernel, check_window=False)
    for op in oplog:
        name = op[0]
        if name == "update":
            ref.update(op[1])
        elif name == "move":
            ref.move(op[1])
        elif name == "rotate":
            ref.rotate(op[1])
        elif name == "query":
            ref.query()
        else:
            raise ValueError(f"unknown operation {name!r}")
    return ref.query()


class ConvQueue:
    """
    Queue with convolution queries, built from two dynamic convolutions over
    the kernel x -> g(-x - 1). A push writes the value into the first
    instance and rotates both; a pop cancels the head value in the second.
    """

    def __init__(self, kernel: KernelFn, width=1, build="auto"):
        self.kernel = kernel
        inner = kernel.reversed_shifted()
        self._tail = DynamicConvolution(inner, width, check_window=False, build=build)
        self._head = DynamicConvolution(inner, width, check_window=False, build=build)
        self._items = deque()

    def __len__(self):
        return len(self._items)

    def push(self, x):
        self._tail.update(x)
        self._tail.rotate(1)
        self._tail.move(1)
        self._head.rotate(1)
        self._items.append(x)

    def pop(self, x=None):
        """Remove the head. ``x`` defaults to the stored head value."""
        if not self._items:
            raise EmptyQueueError("pop from an empty queue")
        head = self._items.popleft()
        if x is None:
            x = head
        self._head.update(-np.asarray(x, dtype=np.float64))
        self._head.move(1)
        return head

    def query(self):
        if self._items and (self.kernel.lo > 0 or len(self._items) - 1 > self.kernel.hi):
            raise KernelWindowError(f"queue of length {len(self._items)} exceeds the kernel window")
        return self._tail.query() + self._head.query()

    @property
    def stats(self):
        a, b = self._tail.stats, self._head.stats
        return {key: a[key] + b[key] for key in a}


def _direct_convolve(a, b):
    out = np.zeros(len(a) + len(b) - 1)
    for i, x in enumerate(a):
        out[i:i + len(b)] += x * b
    return out


def convolve(a, b):
    """Full linear convolution of two real sequences, length len(a) + len(b) - 1."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) == 0 or len(b) == 0:
        raise ValueError("convolve needs non-empty sequences")
    if min(len(a), len(b)) <= DIRECT_MAX:
        return _direct_convolve(a, b) if len(a) <= len(b) else _direct_convolve(b, a)
    return jit.fft_convolve(a, b)
