"""
Compiled core of the dynamic convolution structure.

State lives in a namedtuple of flat numpy arrays so that the same code
serves both the Python wrapper in :mod:`shapley3d.dynconv` and the
compiled sweeps in :mod:`shapley3d._sweepjit`.

Layout
------
Level ``i`` owns ``2**i`` slots of (position, delta) pairs starting at
``2**i - 1`` in ``hpos``/``hval`` and ``2**(i+1) + 1`` answer slots
starting at ``2**(i+1) - 2 + i`` in ``A``. Offsets depend only on ``i``,
so growing the capacity is a prefix copy.

``f`` takes values in R^wf and the kernel in R^wg; a query returns the
wf x wg matrix sum_i f(i + c) g(i)^T.
"""

from collections import namedtuple

import numpy as np
from numba import njit

# scalar slots
K, P, C, MINPOS, MAXPOS, NUPD, LCAP, GLO, MODE = range(9)
NSCAL = 9

# MODE values: how a chunk's answers are built
BUILD_AUTO, BUILD_TRANSFORM, BUILD_DIRECT = range(3)

# instrumentation slots
ST_FFT_BUILDS, ST_TRANSFORM_SAMPLES, ST_DIRECT_BUILDS, ST_DIRECT_MADDS, ST_MERGED, ST_PEAK_ENTRIES = range(6)
NSTATS = 6

# a transform build is chosen when nnz * min(2w+1, len(g)) * wf * wg exceeds
# FFT_COST * N log2 N * (wf + wg + wf * wg); measured on this code
FFT_COST = 1.5

State = namedtuple(
    "State",
    ["scal", "hpos", "hval", "hlen", "A", "I", "gvals", "stats", "bpos", "bval", "cpos", "cval", "fh", "fg", "fp", "tw"],
)


def h_offset(level):
    return (1 << level) - 1


def a_offset(level):
    return (1 << (level + 1)) - 2 + level


def twiddles(n):
    """
    Twiddles of every stage up to size n, stage by stage: entry L/2 + k is
    exp(-2 pi i k / L) for k < L/2, so each stage reads a contiguous run
    and a small transform never touches the tail of the table.
    """
    out = np.zeros(max(n, 1), dtype=np.complex128)
    length = 2
    while length <= n:
        half = length // 2
        out[half:length] = np.exp(-2j * np.pi * np.arange(half) / length)
        length <<= 1
    return out


def allocate(wf, wg, gvals, glo, lcap, mode=BUILD_AUTO):
    """
    Fresh state able to absorb 2**(lcap+1) - 1 operations. Transform
    scratch is preallocated so the compiled core never touches the
    allocator (and can run without reference counting).
    """
    nh = (1 << (lcap + 1)) - 1
    na = a_offset(lcap + 1)
    buf = 1 << lcap
    nf = 4 << lcap
    scal = np.zeros(NSCAL, dtype=np.int64)
    scal[LCAP] = lcap
    scal[GLO] = glo
    scal[MODE] = mode
    return State(
        scal,
        np.zeros(nh, dtype=np.int64),
        np.zeros((nh, wf)),
        np.zeros(lcap + 1, dtype=np.int64),
        np.zeros((wf, wg, na)),
        np.zeros(lcap + 1, dtype=np.int64),
        np.ascontiguousarray(gvals, dtype=np.float64),
        np.zeros(NSTATS, dtype=np.int64),
        np.zeros(buf, dtype=np.int64),
        np.zeros((buf, wf)),
        np.zeros(buf, dtype=np.int64),
        np.zeros((buf, wf)),
        np.zeros((wf, nf), dtype=np.complex128),
        np.zeros((wg, nf), dtype=np.complex128),
        np.zeros(nf, dtype=np.complex128),
        twiddles(nf),
    )


def grow(st, lcap):
    """Copy ``st`` into a state with a larger capacity."""
    wf = st.hval.shape[1]
    wg = st.A.shape[1]
    new = allocate(wf, wg, st.gvals, int(st.scal[GLO]), lcap, int(st.scal[MODE]))
    new.scal[:] = st.scal
    new.scal[LCAP] = lcap
    new.hpos[: len(st.hpos)] = st.hpos
    new.hval[: len(st.hval)] = st.hval
    new.hlen[: len(st.hlen)] = st.hlen
    new.A[:, :, : st.A.shape[2]] = st.A
    new.I[: len(st.I)] = st.I
    new.stats[:] = st.stats
    return new


@njit(cache=True, _nrt=False)
def reset(st):
    st.scal[K] = 0
    st.scal[P] = 0
    st.scal[C] = 0
    st.scal[MINPOS] = 0
    st.scal[MAXPOS] = 0
    st.scal[NUPD] = 0
    st.hlen[:] = 0
    st.I[:] = 0


#: transform stages of up to this length are done one cache-sized block at a time
FFT_BLOCK = 1 << 14


@njit(cache=True, _nrt=False)
def _dit_stages(a, lo, hi, first, last, inverse, tw):
    """Decimation-in-time stages of length first..last (increasing) over a[lo:hi]."""
    length = first
    while length <= last:
        half = length // 2
        for start in range(lo, hi, length):
            for k in range(half):
                w = tw[half + k]
                if inverse:
                    w = w.conjugate()
                u = a[start + k]
                v = a[start + k + half] * w
                a[start + k] = u + v
                a[start + k + half] = u - v
        length <<= 1


@njit(cache=True, _nrt=False)
def _dif_stages(a, lo, hi, first, last, tw):
    """Decimation-in-frequency stages of length first..last (decreasing) over a[lo:hi]."""
    length = first
    while length >= last:
        half = length // 2
        for start in range(lo, hi, length):
            for k in range(half):
                u = a[start + k]
                v = a[start + k + half]
                a[start + k] = u + v
                a[start + k + half] = (u - v) * tw[half + k]
        length >>= 1


@njit(cache=True, _nrt=False)
def fft_scrambled(a, n, tw):
    """
    Forward transform of a[:n] in place, leaving the spectrum in bit-reversed
    order. A pointwise product of two such spectra followed by
    :func:`ifft_scrambled` is a circular convolution; skipping the
    permutation saves a cache-hostile pass over the array.
    """
    block = min(n, FFT_BLOCK)
    _dif_stages(a, 0, n, n, 2 * block, tw)
    for base in range(0, n, block):
        _dif_stages(a, base, base + block, block, 2, tw)


@njit(cache=True, _nrt=False)
def ifft_scrambled(a, n, tw):
    """Inverse of :func:`fft_scrambled`: bit-reversed spectrum in, natural order out."""
    block = min(n, FFT_BLOCK)
    for base in range(0, n, block):
        _dit_stages(a, base, base + block, 2, block, True, tw)
    _dit_stages(a, 0, n, 2 * block, n, True, tw)
    for i in range(n):
        a[i] /= n


@njit(cache=True)
def fft_convolve(x, y):
    """Full linear convolution of two real 1-D arrays through the radix-2 transform."""
    nout = x.shape[0] + y.shape[0] - 1
    n = 1
    while n < nout:
        n <<= 1
    fx = np.zeros(n, dtype=np.complex128)
    fy = np.zeros(n, dtype=np.complex128)
    fx[: x.shape[0]] = x
    fy[: y.shape[0]] = y
    tw = np.zeros(n, dtype=np.complex128)
    length = 2
    while length <= n:
        half = length // 2
        for k in range(half):
            tw[half + k] = np.exp(-2j * np.pi * k / length)
        length <<= 1
    fft_scrambled(fx, n, tw)
    fft_scrambled(fy, n, tw)
    for i in range(n):
        fx[i] *= fy[i]
    ifft_scrambled(fx, n, tw)
    return fx[:nout].real.copy()


@njit(cache=True, _nrt=False)
def _merge_into(apos, aval, na, bpos, bval, nb, opos, oval):
    """Merge two position-sorted sparse runs, summing equal positions; returns length."""
    wf = aval.shape[1]
    i = 0
    j = 0
    o = 0
    while i < na or j < nb:
        if j >= nb or (i < na and apos[i] < bpos[j]):
            opos[o] = apos[i]
            for t in range(wf):
                oval[o, t] = aval[i, t]
            i += 1
        elif i >= na or bpos[j] < apos[i]:
            opos[o] = bpos[j]
            for t in range(wf):
                oval[o, t] = bval[j, t]
            j += 1
        else:
            opos[o] = apos[i]
            for t in range(wf):
                oval[o, t] = aval[i, t] + bval[j, t]
            i += 1
            j += 1
        o += 1
    return o


@njit(cache=True, _nrt=False)
def _build_answers(st, level):
    """Fill A(level, .) for every rotation offset in [-2**level, 2**level]."""
    half = 1 << level
    width = 2 * half + 1
    aoff = (1 << (level + 1)) - 2 + level
    hoff = (1 << level) - 1
    nnz = st.hlen[level]
    wf = st.hval.shape[1]
    wg = st.gvals.shape[0]
    glen = st.gvals.shape[1]
    c = st.scal[C]
    glo = st.scal[GLO]
    A = st.A
    # an empty level is skipped by query, so its answers are never read
    if nnz == 0:
        return
    for a in range(wf):
        for b in range(wg):
            for t in range(width):
                A[a, b, aoff + t] = 0.0

    n_fft = 4 * half
    log_n = level + 2
    mode = st.scal[MODE]
    if mode == BUILD_AUTO:
        direct = nnz * min(width, glen) * wf * wg <= FFT_COST * n_fft * log_n * (wf + wg + wf * wg)
    else:
        direct = mode == BUILD_DIRECT
    if direct:
        # A[t] = sum_p H(p) g(p - c + half - t)
        madds = 0
        for e in range(nnz):
            x0 = st.hpos[hoff + e] - c + half - glo
            tlo = max(0, x0 - glen + 1)
            thi = min(width - 1, x0)
            if thi < tlo:
                continue
            for a in range(wf):
                h = st.hval[hoff + e, a]
                if h == 0.0:
                    continue
                for b in range(wg):
                    for t in range(tlo, thi + 1):
                        A[a, b, aoff + t] += h * st.gvals[b, x0 - t]
                madds += wg * (thi - tlo + 1)
        st.stats[ST_DIRECT_BUILDS] += 1
        st.stats[ST_DIRECT_MADDS] += madds
        return

    # shifted operands: H'(s) = H(L + s), g'(s) = g(L - c + 2*half - s), s in [0, 3*half]
    lo = st.hpos[hoff]
    hf = st.fh
    gf = st.fg
    prod = st.fp
    for a in range(wf):
        for s in range(n_fft):
            hf[a, s] = 0.0
    for b in range(wg):
        for s in range(n_fft):
            gf[b, s] = 0.0
    for e in range(nnz):
        s = st.hpos[hoff + e] - lo
        for a in range(wf):
            hf[a, s] = st.hval[hoff + e, a]
    for s in range(3 * half + 1):
        x = lo - c + 2 * half - s - glo
        if 0 <= x < glen:
            for b in range(wg):
                gf[b, s] = st.gvals[b, x]
    for a in range(wf):
        fft_scrambled(hf[a], n_fft, st.tw)
    for b in range(wg):
        fft_scrambled(gf[b], n_fft, st.tw)
    for a in range(wf):
        for b in range(wg):
            for s in range(n_fft):
                prod[s] = hf[a, s] * gf[b, s]
            ifft_scrambled(prod, n_fft, st.tw)
            for t in range(width):
                A[a, b, aoff + t] = prod[half + t].real
    st.stats[ST_FFT_BUILDS] += 1
    st.stats[ST_TRANSFORM_SAMPLES] += (wf + wg + wf * wg) * n_fft * log_n


@njit(cache=True, _nrt=False)
def _maintain(st, has_delta, dpos, dval):
    """Per-operation bookkeeping: fold the finished chunk into level ctz(k)."""
    k = st.scal[K] + 1
    st.scal[K] = k
    top = 0
    while not (k >> top) & 1:
        top += 1
    if top > st.scal[LCAP]:
        raise RuntimeError("dynamic convolution capacity exceeded")
    wf = st.hval.shape[1]

    # Delta f, then levels 0..top-1 (all live because k-1 ends in `top` ones)
    n_cur = 0
    if has_delta:
        st.bpos[0] = dpos
        for t in range(wf):
            st.bval[0, t] = dval[t]
        n_cur = 1
    src_pos = st.bpos
    src_val = st.bval
    dst_pos = st.cpos
    dst_val = st.cval
    merged = n_cur
    for lev in range(top):
        ho = (1 << lev) - 1
        nl = st.hlen[lev]
        merged += nl
        n_cur = _merge_into(src_pos, src_val, n_cur, st.hpos[ho:], st.hval[ho:], nl, dst_pos, dst_val)
        src_pos, dst_pos = dst_pos, src_pos
        src_val, dst_val = dst_val, src_val
        st.hlen[lev] = 0
        st.I[lev] = 0

    ho = (1 << top) - 1
    n_out = 0
    for e in range(n_cur):
        nonzero = False
        for t in range(wf):
            if src_val[e, t] != 0.0:
                nonzero = True
        if nonzero:
            st.hpos[ho + n_out] = src_pos[e]
            for t in range(wf):
                st.hval[ho + n_out, t] = src_val[e, t]
            n_out += 1
    st.hlen[top] = n_out
    st.I[top] = 0
    st.stats[ST_MERGED] += merged
    live = 0
    for lev in range(st.hlen.shape[0]):
        if (k >> lev) & 1:
            live += st.hlen[lev]
    if live > st.stats[ST_PEAK_ENTRIES]:
        st.stats[ST_PEAK_ENTRIES] = live
    _build_answers(st, top)


@njit(cache=True, _nrt=False)
def update(st, x):
    """f(p) += x (x has length wf)."""
    p = st.scal[P]
    nonzero = False
    for t in range(x.shape[0]):
        if x[t] != 0.0:
            nonzero = True
    if nonzero:
        if st.scal[NUPD] == 0:
            st.scal[MINPOS] = p
            st.scal[MAXPOS] = p
        else:
            st.scal[MINPOS] = min(st.scal[MINPOS], p)
            st.scal[MAXPOS] = max(st.scal[MAXPOS], p)
        st.scal[NUPD] += 1
    _maintain(st, True, p, x)


@njit(cache=True, _nrt=False)
def move(st, step):
    st.scal[P] += step
    _maintain(st, False, 0, st.bval[0])


@njit(cache=True, _nrt=False)
def rotate(st, step):
    st.scal[C] += step
    k = st.scal[K]
    for lev in range(st.I.shape[0]):
        if (k >> lev) & 1:
            st.I[lev] += step
    _maintain(st, False, 0, st.bval[0])


@njit(cache=True, _nrt=False)
def query(st, out):
    """Write sum_i f(i + c) g(i)^T into ``out`` (wf x wg), then count the operation."""
    wf = out.shape[0]
    wg = out.shape[1]
    k = st.scal[K]
    for a in range(wf):
        for b in range(wg):
            s = 0.0
            comp = 0.0
            for lev in range(st.I.shape[0]):
                if (k >> lev) & 1 and st.hlen[lev] > 0:
                    half = 1 << lev
                    off = st.I[lev]
                    if off > half or off < -half:
                        raise RuntimeError("rotation offset outside precomputed range")
                    v = st.A[a, b, (1 << (lev + 1)) - 2 + lev + half + off]
                    t = s + v
                    if abs(s) >= abs(v):
                        comp += (s - t) + v
                    else:
                        comp += (v - t) + s
                    s = t
            out[a, b] = s + comp
    _maintain(st, False, 0, st.bval[0])


@njit(cache=True, _nrt=False)
def check_levels(st):
    """
    O(log n) structural check: live levels are the set bits of the operation
    count, each holds at most 2**i sorted positions spanning at most 2**i,
    and its rotation offset stays within 2**i. Returns the first offending
    level or -1.
    """
    k = st.scal[K]
    for lev in range(st.hlen.shape[0]):
        bound = 1 << lev
        nl = st.hlen[lev]
        if not (k >> lev) & 1:
            if nl != 0:
                return lev
            continue
        if nl > bound or st.I[lev] > bound or st.I[lev] < -bound:
            return lev
        if nl > 0:
            ho = bound - 1
            if st.hpos[ho + nl - 1] - st.hpos[ho] > bound:
                return lev
    return -1


@njit(cache=True)
def replay(st, kinds, args, values, out, check):
    """
    Run an operation log: kind 0 update(values[i]), 1 move(args[i]),
    2 rotate(args[i]), 3 query (result appended to ``out``). With ``check``
    the level invariants are verified after every operation. Returns the
    number of queries answered, or -(i + 1) if operation i broke an
    invariant.
    """
    nq = 0
    buf = np.empty((out.shape[1], out.shape[2]))
    for i in range(kinds.shape[0]):
        kind = kinds[i]
        if kind == 0:
            update(st, values[i])
        elif kind == 1:
            move(st, args[i])
        elif kind == 2:
            rotate(st, args[i])
        else:
            query(st, buf)
            out[nq] = buf
            nq += 1
        if check and check_levels(st) >= 0:
            return -(i + 1)
    return nq
