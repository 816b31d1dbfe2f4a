"""
Compiled polar sweeps over a :class:`ConvQueue` built from two dynamic
convolution states (see :mod:`shapley3d._dcjit`).

Angles are handled as increasing "keys": theta for a counterclockwise
sweep, -theta (visited in reverse) for a clockwise one. In key space both
sweeps compute, for each position i,

    sum over j with key_i - pi <= key_j < key_i of  f(j) g(W(j, i))

where W(j, i) counts the points strictly between j and i; that is the
queue query taken just before i is pushed.
"""

import numpy as np
from numba import njit

from . import _dcjit as dc

TWO_PI = 2.0 * np.pi


@njit(cache=True, _nrt=False)
def _push(st_tail, st_head, x):
    dc.update(st_tail, x)
    dc.rotate(st_tail, 1)
    dc.move(st_tail, 1)
    dc.rotate(st_head, 1)


@njit(cache=True, _nrt=False)
def _pop(st_head, x, scratch):
    for a in range(x.shape[0]):
        scratch[a] = -x[a]
    dc.update(st_head, scratch)
    dc.move(st_head, 1)


@njit(cache=True)
def queue_sweep(keys, vals, coefs, prepush_from, st_tail, st_head, out):
    """
    ``vals[j]`` are the channel values of point j at its unlifted key; a
    point pushed ahead of the sweep (index >= prepush_from) has its key
    lowered by 2*pi and each channel shifted by -2*pi * coefs. Writes the
    per-position query results into ``out`` (m, wf, wg).
    """
    m = keys.shape[0]
    wf = vals.shape[1]
    wg = out.shape[2]
    cap = 2 * m + 1
    _queue_sweep(
        keys, vals, coefs, prepush_from, st_tail, st_head, out,
        np.empty(cap), np.empty((cap, wf)), np.empty(wf), np.empty((wf, wg)), np.empty((wf, wg)),
    )


@njit(cache=True, _nrt=False)
def _queue_sweep(keys, vals, coefs, prepush_from, st_tail, st_head, out, rkey, rval, scratch, q1, q2):
    # allocation-free body of queue_sweep
    m = keys.shape[0]
    wf = vals.shape[1]
    wg = out.shape[2]
    dc.reset(st_tail)
    dc.reset(st_head)
    head = 0
    tail = 0
    for j in range(prepush_from, m):
        rkey[tail] = keys[j] - TWO_PI
        for a in range(wf):
            rval[tail, a] = vals[j, a] - TWO_PI * coefs[a]
        _push(st_tail, st_head, rval[tail])
        tail += 1
    for i in range(m):
        lim = keys[i] - np.pi
        # a point exactly pi behind still shares a cone with p_i
        while head < tail and rkey[head] < lim:
            _pop(st_head, rval[head], scratch)
            head += 1
        dc.query(st_tail, q1)
        dc.query(st_head, q2)
        for a in range(wf):
            for b in range(wg):
                out[i, a, b] = q1[a, b] + q2[a, b]
        rkey[tail] = keys[i]
        for a in range(wf):
            rval[tail, a] = vals[i, a]
        _push(st_tail, st_head, rval[tail])
        tail += 1


@njit(cache=True)
def _first_at_least(keys, limit):
    # first index with keys[j] >= limit
    lo = 0
    hi = keys.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] >= limit:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def cone_pair_sums(keys, out):
    """
    Turn [1, key] channel results into sum_j (1/2 - (key_i - key_j) / 2pi) g(W),
    the exterior-angle weighted sum for each position and kernel.
    """
    m = keys.shape[0]
    wg = out.shape[2]
    res = np.empty((m, wg))
    for i in range(m):
        for b in range(wg):
            res[i, b] = (0.5 - keys[i] / TWO_PI) * out[i, 0, b] + out[i, 1, b] / TWO_PI
    return res


@njit(cache=True)
def side_sweep(theta, clockwise, st_tail, st_head):
    """
    Exterior-angle weighted sums over one side for every sorted position:
    counterclockwise gives the right-hand neighbours R(p_i), clockwise the
    left-hand neighbours L(p_i). Returns (m, wg) in the original order.
    """
    m = theta.shape[0]
    wg = st_tail.gvals.shape[0]
    if clockwise:
        keys = -theta[::-1].copy()
    else:
        keys = theta.copy()
    vals = np.empty((m, 2))
    for j in range(m):
        vals[j, 0] = 1.0
        vals[j, 1] = keys[j]
    coefs = np.array([0.0, 1.0])
    out = np.empty((m, 2, wg))
    queue_sweep(keys, vals, coefs, _first_at_least(keys, keys[0] + np.pi), st_tail, st_head, out)
    res = cone_pair_sums(keys, out)
    if clockwise:
        return res[::-1].copy()
    return res


@njit(cache=True)
def initial_cone_total(theta, st_tail, st_head):
    """
    Sum of exterior-angle weighted kernel values over all cones that avoid
    the last sorted point: a linear sweep over the other m - 1 points.
    """
    m = theta.shape[0]
    if m < 3:
        return 0.0
    keys = theta[: m - 1].copy()
    vals = np.empty((m - 1, 2))
    for j in range(m - 1):
        vals[j, 0] = 1.0
        vals[j, 1] = keys[j]
    coefs = np.array([0.0, 1.0])
    out = np.empty((m - 1, 2, st_tail.gvals.shape[0]))
    queue_sweep(keys, vals, coefs, m - 1, st_tail, st_head, out)
    res = cone_pair_sums(keys, out)
    total = 0.0
    for k in range(m - 1):
        total += res[k, 0]
    return total


@njit(cache=True)
def pair_terms(theta, diag_g, st_tail2, st_head2, st_tail1, st_head1):
    """
    Per-pair Case-3 sums for sorted angles ``theta`` (length m = n - 2).

    ``st_*2`` carry the kernels (g3, g4) and ``st_*1`` carry g4 alone.
    ``diag_g`` is the probability used for triangle prefixes {q, r, t}
    (g3(0); passing g4(0) reproduces the uncorrected arity-4 treatment).
    Returns (removal, apex, endpoint): removal[i] and apex[i] are per sorted
    position, endpoint is shared by both ends of the sweep line. None of
    them include the edge length or the global factor 1/2.
    """
    m = theta.shape[0]
    right = side_sweep(theta, False, st_tail2, st_head2)
    left = side_sweep(theta, True, st_tail2, st_head2)
    apex = np.empty(m)
    endpoint = 0.0
    for i in range(m):
        apex[i] = right[i, 0] + left[i, 0]
        endpoint += apex[i]
    endpoint *= 0.5

    # cones avoiding p_i, walked from i = m-1 around to m-2:
    # S(i+1) = S(i) + right_g4(i) - left_g4(i+1)
    removal = np.empty(m)
    cur = initial_cone_total(theta, st_tail1, st_head1)
    removal[m - 1] = cur
    for step in range(m - 1):
        i = (m - 1 + step) % m
        nxt = (i + 1) % m
        cur = cur + right[i, 1] - left[nxt, 1]
        removal[nxt] = cur
    # prefixes that are exactly a triangle {q, r, t}: every other t, angle 1/2
    diag = 0.5 * (m - 1) * diag_g
    for i in range(m):
        removal[i] += diag
    return removal, apex, endpoint


@njit(cache=True)
def pair_angles(pts, q, r, theta, index):
    """
    Sorted polar angles of the points other than q and r around the line qr,
    in the frame of :func:`shapley3d.geometry.projection_frame`. Fills
    ``theta`` and ``index`` (length n - 2); returns False on a point on the
    line or two equal angles.
    """
    n = pts.shape[0]
    d0 = pts[r, 0] - pts[q, 0]
    d1 = pts[r, 1] - pts[q, 1]
    d2 = pts[r, 2] - pts[q, 2]
    length = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    if not length > 1e-300:
        return False
    d0 /= length
    d1 /= length
    d2 /= length
    a0 = abs(d0)
    a1 = abs(d1)
    a2 = abs(d2)
    # e_k x d for the least aligned axis k (last one on ties)
    if a2 <= a1 and a2 <= a0:
        u0, u1, u2 = -d1, d0, 0.0
    elif a1 <= a0:
        u0, u1, u2 = d2, 0.0, -d0
    else:
        u0, u1, u2 = 0.0, -d2, d1
    un = np.sqrt(u0 * u0 + u1 * u1 + u2 * u2)
    u0 /= un
    u1 /= un
    u2 /= un
    v0 = d1 * u2 - d2 * u1
    v1 = d2 * u0 - d0 * u2
    v2 = d0 * u1 - d1 * u0
    m = 0
    raw = np.empty(n - 2)
    src = np.empty(n - 2, dtype=np.int64)
    for j in range(n):
        if j == q or j == r:
            continue
        x0 = pts[j, 0] - pts[q, 0]
        x1 = pts[j, 1] - pts[q, 1]
        x2 = pts[j, 2] - pts[q, 2]
        cu = x0 * u0 + x1 * u1 + x2 * u2
        cv = x0 * v0 + x1 * v1 + x2 * v2
        if np.hypot(cu, cv) == 0.0:
            return False
        t = np.arctan2(cv, cu) % TWO_PI
        if t >= TWO_PI:
            t = 0.0
        raw[m] = t
        src[m] = j
        m += 1
    perm = np.argsort(raw, kind="mergesort")
    for k in range(m):
        theta[k] = raw[perm[k]]
        index[k] = src[perm[k]]
    for k in range(m):
        nxt = theta[k + 1] if k + 1 < m else theta[0] + TWO_PI
        if m > 1 and nxt - theta[k] <= 1e-12:
            return False
    return True


@njit(cache=True)
def _neumaier(s, c, i, x):
    t = s[i] + x
    if abs(s[i]) >= abs(x):
        c[i] += (s[i] - t) + x
    else:
        c[i] += (x - t) + s[i]
    s[i] = t


@njit(cache=True, nogil=True)
def case3_block(pts, qs, rs, diag_g, st_tail2, st_head2, st_tail1, st_head1, acc):
    """
    Accumulate the scaled per-pair sums for the lines (qs[k], rs[k]) into
    ``acc`` (6, n): Neumaier sum and compensation rows for removal (negated),
    apex and endpoint. Returns -1, or the first k whose projection is
    degenerate.
    """
    n = pts.shape[0]
    m = n - 2
    theta = np.empty(m)
    index = np.empty(m, dtype=np.int64)
    for k in range(qs.shape[0]):
        q = qs[k]
        r = rs[k]
        if not pair_angles(pts, q, r, theta, index):
            return k
        removal, apex, endpoint = pair_terms(theta, diag_g, st_tail2, st_head2, st_tail1, st_head1)
        d0 = pts[q, 0] - pts[r, 0]
        d1 = pts[q, 1] - pts[r, 1]
        d2 = pts[q, 2] - pts[r, 2]
        half_len = 0.5 * np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        for i in range(m):
            _neumaier(acc[0], acc[1], index[i], -half_len * removal[i])
            _neumaier(acc[2], acc[3], index[i], half_len * apex[i])
        _neumaier(acc[4], acc[5], q, half_len * endpoint)
        _neumaier(acc[4], acc[5], r, half_len * endpoint)
    return -1
