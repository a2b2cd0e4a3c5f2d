"""Compiled inner loops.

Branches and measures that have a closed form are dispatched on an integer
kind plus a float parameter vector so that a single compiled loop serves all
of them. Python-level callables never enter these functions.
"""
import math

import numpy as np
from numba import njit

# branch kinds
FAREY_A = 0
FAREY_B = 1
AFFINE = 2
DRIL_POLY = 3
DRIL_CF = 4

# measure kinds
M_UNIFORM = 0
M_LIN = 1
M_EXP = 2
M_TABLE = 3

LOG2 = math.log(2.0)
EXP_Z = math.e / (2.0 * (math.e - 1.0))

SWITCH = 1e-12
SIMPSON_BELOW = 1e-4


# ---------------------------------------------------------------- branches


@njit(cache=True)
def _dril_u(p, x):
    # p = [gamma, A, deg, c_0, ..., c_deg]
    if x <= 0.0:
        return 0.0
    g = p[0]
    deg = int(p[2])
    L = LOG2 - math.log(x)
    s = p[3]
    for j in range(1, deg + 1):
        s = s * L + p[3 + j]
    return p[1] * x ** (g + 1.0) * s


@njit(cache=True)
def _gamma_cf(a, z):
    """exp(z) z^-a Gamma(a, z) by the Legendre continued fraction (z > 0)."""
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 20000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        e = d * c
        h *= e
        if abs(e - 1.0) < 1e-16:
            break
    return h


@njit(cache=True)
def _dril_cf_u(p, x):
    # p = [gamma, A, delta]; u = A x^(g+1) L^(d+1) e^z z^-(d+1) Gamma(d+1, z)
    if x <= 0.0:
        return 0.0
    g = p[0]
    a = p[2] + 1.0
    L = LOG2 - math.log(x)
    return p[1] * x ** (g + 1.0) * L ** a * _gamma_cf(a, (g + 1.0) * L)


@njit(cache=True)
def _dril_du(p, x):
    if x <= 0.0:
        return 0.0
    L = LOG2 - math.log(x)
    return p[1] * x ** p[0] * L ** p[2]


@njit(cache=True)
def beval(kind, p, x):
    if kind == FAREY_A:
        return x / (1.0 + x)
    elif kind == FAREY_B:
        return 1.0 / (1.0 + x)
    elif kind == AFFINE:
        return p[0] + p[1] * x
    elif kind == DRIL_POLY:
        return x - _dril_u(p, x)
    return x - _dril_cf_u(p, x)


@njit(cache=True)
def bderiv(kind, p, x):
    if kind == FAREY_A:
        return 1.0 / ((1.0 + x) * (1.0 + x))
    elif kind == FAREY_B:
        return -1.0 / ((1.0 + x) * (1.0 + x))
    elif kind == AFFINE:
        return p[1]
    return 1.0 - _dril_du(p, x)


@njit(cache=True)
def bboth(kind, p, x):
    """(h(x), h'(x)) sharing the logarithm for the DRIL kinds."""
    if kind == DRIL_POLY and x > 0.0:
        lx = math.log(x)
        L = LOG2 - lx
        xg = math.exp(p[0] * lx)
        deg = int(p[2])
        s = p[3]
        Ld = 1.0
        for j in range(1, deg + 1):
            s = s * L + p[3 + j]
            Ld *= L
        return x - p[1] * xg * x * s, 1.0 - p[1] * xg * Ld
    return beval(kind, p, x), bderiv(kind, p, x)


@njit(cache=True)
def bdefect(kind, p, x):
    """x - h(x), evaluated without cancellation for the increasing kinds."""
    if kind == FAREY_A:
        return x * x / (1.0 + x)
    elif kind == DRIL_POLY:
        return _dril_u(p, x)
    elif kind == DRIL_CF:
        return _dril_cf_u(p, x)
    return x - beval(kind, p, x)


@njit(cache=True)
def binv(kind, p, y):
    """Inverse of a branch on its image; returns nan if Newton fails."""
    if kind == FAREY_A:
        return y / (1.0 - y)
    elif kind == FAREY_B:
        return 1.0 / y - 1.0
    elif kind == AFFINE:
        return (y - p[0]) / p[1]
    # DRIL: a(x) = x - u(x) <= x, so the root lies in [y, 1]
    if y <= 0.0:
        return 0.0
    lo = y
    hi = 1.0
    x = y + bdefect(kind, p, y)
    if x > hi:
        x = hi
    for _ in range(200):
        f = x - bdefect(kind, p, x) - y
        # residual at rounding level; x is then as good as the conditioning 1/a' allows
        if abs(f) <= 4.4e-16 * y:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        d = 1.0 - _dril_du(p, x)
        step = f / d
        xn = x - step
        if xn <= lo or xn >= hi or d <= 0.0:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 2.3e-16 * x:
            return xn
        x = xn
        if hi - lo <= 2.3e-16 * hi:
            return x
    return np.nan


@njit(cache=True)
def bimage(kind, p, x, c):
    # canonical endpoint rule: the image of 1 is c for both branches
    if x == 1.0:
        return c
    return beval(kind, p, x)


@njit(cache=True)
def beval_arr(kind, p, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = beval(kind, p, x[i])
    return out


@njit(cache=True)
def bderiv_arr(kind, p, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = bderiv(kind, p, x[i])
    return out


@njit(cache=True)
def bdefect_arr(kind, p, x):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = bdefect(kind, p, x[i])
    return out


@njit(cache=True)
def binv_arr(kind, p, y):
    out = np.empty(y.size)
    for i in range(y.size):
        out[i] = binv(kind, p, y[i])
    return out


# ---------------------------------------------------------------- measures


@njit(cache=True)
def mpdf(kind, p, x):
    if kind == M_UNIFORM:
        return 1.0
    elif kind == M_LIN:
        return 0.5 + x
    elif kind == M_EXP:
        return EXP_Z * (1.0 + x * math.exp(-x))
    # tabulated: p = [n, v_0..v_{n-1}, cum_0..cum_{n-1}] on a uniform grid
    n = int(p[0])
    h = 1.0 / (n - 1)
    t = x / h
    i = int(t)
    if i >= n - 1:
        i = n - 2
    if i < 0:
        i = 0
    s = t - i
    return p[1 + i] * (1.0 - s) + p[2 + i] * s


@njit(cache=True)
def mcdf(kind, p, x):
    if kind == M_UNIFORM:
        return x
    elif kind == M_LIN:
        return 0.5 * (x + x * x)
    elif kind == M_EXP:
        return EXP_Z * (x + 1.0 - (x + 1.0) * math.exp(-x))
    n = int(p[0])
    h = 1.0 / (n - 1)
    t = x / h
    i = int(t)
    if i >= n - 1:
        i = n - 2
    if i < 0:
        i = 0
    s = t - i
    f0 = p[1 + i]
    f1 = p[2 + i]
    return p[1 + n + i] + h * (f0 * s + 0.5 * (f1 - f0) * s * s)


# ---------------------------------------------------------------- orbits


@njit(cache=True)
def iterate_a(kind, p, n_max, dense_n, ckpt):
    """q(n) = a^n(1) for n <= dense_n and at the sorted checkpoints ckpt."""
    dense = np.empty(dense_n + 1)
    out = np.empty(ckpt.size)
    x = 1.0
    j = 0
    for n in range(n_max + 1):
        if n <= dense_n:
            dense[n] = x
        while j < ckpt.size and ckpt[j] == n:
            out[j] = x
            j += 1
        if n < n_max:
            x = beval(kind, p, x)
    return dense, out


@njit(cache=True)
def v_along(kind, p, q):
    out = np.empty(q.size)
    for i in range(q.size):
        out[i] = bdefect(kind, p, q[i]) / q[i]
    return out


@njit(cache=True)
def block_stream(ka, pa, kb, pb, x, M):
    """(g_m(x), |g_m'(x)|) for m = 1..M."""
    ys = np.empty(M)
    ds = np.empty(M)
    y = beval(kb, pb, x)
    d = abs(bderiv(kb, pb, x))
    for m in range(M):
        ys[m] = y
        ds[m] = d
        y, da = bboth(ka, pa, y)
        d *= da
    return ys, ds


@njit(cache=True)
def _interp(nodes_h, n, y):
    t = y / nodes_h
    i = int(t)
    if i >= n - 1:
        i = n - 2
    if i < 0:
        i = 0
    s = t - i
    return i, s


@njit(cache=True)
def _cheb(lo, hi, n):
    z = np.empty(n)
    w = np.empty(n)
    for j in range(n):
        z[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * math.cos(math.pi * j / (n - 1))
        w[j] = -1.0 if j % 2 else 1.0
    w[0] *= 0.5
    w[n - 1] *= 0.5
    return z, w


@njit(cache=True)
def _bary(z, w, f, x):
    num = 0.0
    den = 0.0
    for j in range(z.size):
        dx = x - z[j]
        if dx == 0.0:
            return f[j]
        t = w[j] / dx
        num += t * f[j]
        den += t
    return num / den


NCHEB = 16


@njit(cache=True)
def _runs(q, M, h, n_nodes):
    """Split the branches whose J_m lies inside one grid cell into runs per cell."""
    mstar = M + 1
    for m in range(M, 0, -1):
        k_lo = int(q[m] / h)
        k_hi = int(math.ceil(q[m - 1] / h)) - 1
        if k_hi < k_lo:
            k_hi = k_lo
        if k_lo != k_hi or k_lo > n_nodes - 2:
            break
        mstar = m
    starts = []
    cells = []
    for m in range(mstar, M + 1):
        k = int(q[m] / h)
        if len(cells) == 0 or cells[-1] != k:
            starts.append(m)
            cells.append(k)
    starts.append(M + 1)
    return mstar, np.array(starts, np.int64), np.array(cells, np.int64)


@njit(cache=True)
def _run_tables(ka, pa, q, starts, cells, h):
    """Chebyshev samples of the per-run sums on J_start.

    For z in J_s and j = 0..len-1: S0 = sum D_j (1 - s_j), S1 = sum D_j s_j with
    D_j = (a^j)'(z), s_j the cell coordinate of a^j(z); E = a^len(z), DE = (a^len)'(z),
    DL = (a^(len-1))'(z).
    """
    nr = cells.size
    Z = np.empty((nr, NCHEB))
    W = np.empty((nr, NCHEB))
    T = np.empty((5, nr, NCHEB))
    for r in range(nr):
        m = starts[r]
        z, w = _cheb(q[m], q[m - 1], NCHEB)
        Z[r] = z
        W[r] = w
        ln = starts[r + 1] - m
        for j in range(NCHEB):
            y = z[j]
            d = 1.0
            s0 = 0.0
            s1 = 0.0
            dl = 1.0
            for _ in range(ln):
                s = y / h - cells[r]
                s0 += d * (1.0 - s)
                s1 += d * s
                dl = d
                y, da = bboth(ka, pa, y)
                d *= da
            T[0, r, j] = s0
            T[1, r, j] = s1
            T[2, r, j] = y
            T[3, r, j] = d
            T[4, r, j] = dl
    return Z, W, T


@njit(cache=True)
def collocation(ka, pa, kb, pb, n_nodes, M, q, JM):
    """Collocation matrix of the block transfer operator on a uniform grid.

    Row i gives G[f](x_i) ~= sum_j G[i, j] f(x_j) with f linearly interpolated.
    Branches whose image interval fits in one cell are summed by runs through
    the interpolated run tables. The tail m > M is folded into column 0 with
    weight |g_M'(x)| q(M) / |J_M|.
    """
    h = 1.0 / (n_nodes - 1)
    mstar, starts, cells = _runs(q, M, h, n_nodes)
    Z, W, T = _run_tables(ka, pa, q, starts, cells, h)
    qM = q[M]
    rows = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        x = i * h
        y = beval(kb, pb, x)
        d = abs(bderiv(kb, pb, x))
        dlast = d
        for m in range(1, mstar):
            k, s = _interp(h, n_nodes, y)
            rows[i, k] += d * (1.0 - s)
            rows[i, k + 1] += d * s
            dlast = d
            y, da = bboth(ka, pa, y)
            d *= da
        for r in range(cells.size):
            k = cells[r]
            rows[i, k] += d * _bary(Z[r], W[r], T[0, r], y)
            rows[i, k + 1] += d * _bary(Z[r], W[r], T[1, r], y)
            dlast = d * _bary(Z[r], W[r], T[4, r], y)
            dn = d * _bary(Z[r], W[r], T[3, r], y)
            y = _bary(Z[r], W[r], T[2, r], y)
            d = dn
        rows[i, 0] += dlast * qM / JM
    return rows


@njit(cache=True)
def entropy_terms(ka, pa, kb, pb, M, gx, gw, nodes_h, psi):
    """Per-branch integrals of |g'| log(1/|g'|) psi(g) on [0,1]."""
    out = np.zeros(M)
    mass = np.zeros(M)
    for k in range(gx.size):
        x = gx[k]
        w = gw[k]
        y = beval(kb, pb, x)
        d = abs(bderiv(kb, pb, x))
        for m in range(M):
            i, s = _interp(nodes_h, psi.size, y)
            ps = psi[i] * (1.0 - s) + psi[i + 1] * s
            out[m] += w * d * (-math.log(d)) * ps
            mass[m] += w * d * ps
            y, da = bboth(ka, pa, y)
            d *= da
    return out, mass


# ---------------------------------------------------------------- cylinders


@njit(cache=True)
def push(kind, p, inc, c, lo, hi, anchor, loglen, deg):
    """Apply one inverse branch to a tracked interval state."""
    if not deg:
        if inc:
            nlo = bimage(kind, p, lo, c)
            nhi = bimage(kind, p, hi, c)
        else:
            nlo = bimage(kind, p, hi, c)
            nhi = bimage(kind, p, lo, c)
        ln = nhi - nlo
        if ln >= SWITCH:
            return nlo, nhi, 0.5 * (nlo + nhi), math.log(ln), False
        mid = 0.5 * (lo + hi)
        na = beval(kind, p, mid)
        if ln > 0.0:
            nl = math.log(ln)
        else:
            nl = math.log(hi - lo) + math.log(abs(bderiv(kind, p, mid)))
        return nlo, nhi, na, nl, True
    na = beval(kind, p, anchor)
    nl = loglen + math.log(abs(bderiv(kind, p, anchor)))
    return lo, hi, na, nl, True


@njit(cache=True)
def state_logp(mk, mp, lo, hi, anchor, loglen, deg):
    if not deg:
        w = hi - lo
        if w < SIMPSON_BELOW:
            mid = 0.5 * (lo + hi)
            d = w * (mpdf(mk, mp, lo) + 4.0 * mpdf(mk, mp, mid) + mpdf(mk, mp, hi)) / 6.0
        else:
            d = mcdf(mk, mp, hi) - mcdf(mk, mp, lo)
        if d > 0.0:
            return math.log(d)
        return math.log(mpdf(mk, mp, 0.5 * (lo + hi))) + loglen
    return math.log(mpdf(mk, mp, anchor)) + loglen


@njit(cache=True)
def word_logp(ka, pa, kb, pb, c, mk, mp, bits, n):
    """log p of bits[0:n], composing right to left."""
    lo = 0.0
    hi = 1.0
    an = 0.5
    ll = 0.0
    dg = False
    for j in range(n - 1, -1, -1):
        if bits[j] == 1:
            lo, hi, an, ll, dg = push(kb, pb, False, c, lo, hi, an, ll, dg)
        else:
            lo, hi, an, ll, dg = push(ka, pa, True, c, lo, hi, an, ll, dg)
    return state_logp(mk, mp, lo, hi, an, ll, dg)


@njit(cache=True)
def forward(ka, pa, kb, pb, c, x, n, bits):
    """Encode n symbols of the orbit of x into bits; returns False on failure."""
    y = x
    for k in range(n):
        if y > c:
            bits[k] = 1
            y = binv(kb, pb, y)
        else:
            bits[k] = 0
            y = binv(ka, pa, y)
        if not (y == y):
            return False
        if y < 0.0:
            y = 0.0
        elif y > 1.0:
            y = 1.0
    return True


@njit(cache=True, nogil=True)
def mc_chunk(ka, pa, kb, pb, c, mk, mp, x0, depths):
    """-log p and ones count of the prefixes of each orbit at each depth."""
    ns = x0.size
    nd = depths.size
    dmax = 0
    for j in range(nd):
        if depths[j] > dmax:
            dmax = depths[j]
    nlp = np.empty((ns, nd))
    ones = np.empty((ns, nd))
    bits = np.empty(max(dmax, 1), np.uint8)
    ok = np.ones(ns, np.bool_)
    for i in range(ns):
        if not forward(ka, pa, kb, pb, c, x0[i], dmax, bits):
            ok[i] = False
            continue
        for j in range(nd):
            d = depths[j]
            cnt = 0
            for k in range(d):
                cnt += bits[k]
            ones[i, j] = cnt
            nlp[i, j] = -word_logp(ka, pa, kb, pb, c, mk, mp, bits, d)
    return nlp, ones, ok


@njit(cache=True, nogil=True)
def _lockstep_rational(kb, pb, c, x, counts, bsz):
    # both inverses are ratios, so the update vectorizes as a select
    ns = x.size
    nbatch, K1 = counts.shape
    if kb == FAREY_B:
        p0, p1 = 1.0, 1.0  # b^-1(y) = (1 - y) / y
    else:
        p0, p1 = pb[0], pb[1]
    for k in range(K1):
        for b in range(nbatch):
            cnt = 0
            for i in range(b * bsz, min(ns, (b + 1) * bsz)):
                xi = x[i]
                one = xi > c
                cnt += one
                if kb == FAREY_B:
                    num = 1.0 - xi if one else xi
                    den = xi if one else 1.0 - xi
                else:
                    num = xi - p0 if one else xi
                    den = p1 if one else 1.0 - xi
                y = num / den
                x[i] = min(max(y, 0.0), 1.0)
            counts[b, k] = cnt



@njit(cache=True, nogil=True)
def ones_by_position(ka, pa, kb, pb, c, x0, K, nbatch):
    """counts[b, k]: number of orbits in batch b whose symbol at position k is 1.

    All orbits are advanced in lockstep with a branch-free update, which is
    several times faster than following one orbit at a time.
    """
    ns = x0.size
    x = x0.copy()
    counts = np.zeros((nbatch, K + 1), np.int64)
    bsz = (ns + nbatch - 1) // nbatch
    if ka == FAREY_A and (kb == FAREY_B or kb == AFFINE):
        _lockstep_rational(kb, pb, c, x, counts, bsz)
        return counts
    for k in range(K + 1):
        for b in range(nbatch):
            cnt = 0
            for i in range(b * bsz, min(ns, (b + 1) * bsz)):
                xi = x[i]
                one = xi > c
                cnt += one
                if one:
                    y = binv(kb, pb, xi)
                else:
                    y = binv(ka, pa, xi)
                if y < 0.0:
                    y = 0.0
                elif y > 1.0:
                    y = 1.0
                x[i] = y
            counts[b, k] = cnt
    return counts
