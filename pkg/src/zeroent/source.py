"""Tent sources, measures, words and cylinder probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import _kernels as K
from .branches import Branch, validate_tent

SWITCH = K.SWITCH
SIMPSON_BELOW = K.SIMPSON_BELOW


# ------------------------------------------------------------------- measures


class Measure:
    """Probability measure on [0,1] with a positive C^1 density."""

    def __init__(self, pdf: Callable, cdf: Callable, inverse_cdf: Callable,
                 name: str = "custom", kernel: tuple[int, np.ndarray] | None = None):
        self.pdf = pdf
        self.cdf = cdf
        self.inverse_cdf = inverse_cdf
        self.name = name
        self.kernel = kernel

    @property
    def phi_at_zero(self) -> float:
        return float(np.asarray(self.pdf(np.array([0.0])))[0])

    def __repr__(self):
        return f"Measure({self.name})"


def _bisect_inverse(cdf: Callable, pdf: Callable) -> Callable:
    def inv(u):
        u = np.asarray(u, dtype=float)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            below = cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(2):
            x = np.clip(x - (cdf(x) - u) / pdf(x), 0.0, 1.0)
        return x
    return inv


def _kernel_fns(kind: int, p: np.ndarray):
    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.array([K.mpdf(kind, p, t) for t in x.ravel()]).reshape(x.shape)
    return pdf


def uniform() -> Measure:
    return Measure(lambda x: np.ones_like(np.asarray(x, dtype=float)),
                   lambda x: np.asarray(x, dtype=float),
                   lambda u: np.asarray(u, dtype=float),
                   "uniform", (K.M_UNIFORM, np.zeros(1)))


def lin() -> Measure:
    """Density (1 + 2x)/2."""
    def inv(u):
        u = np.asarray(u, dtype=float)
        # root of x^2 + x - 2u in [0,1], written without cancellation
        return 4.0 * u / (1.0 + np.sqrt(1.0 + 8.0 * u))
    return Measure(lambda x: 0.5 + np.asarray(x, dtype=float),
                   lambda x: 0.5 * (np.asarray(x, dtype=float) + np.asarray(x, dtype=float) ** 2),
                   inv, "lin", (K.M_LIN, np.zeros(1)))


def exp_measure() -> Measure:
    """Density Z (1 + x e^{-x}) with Z = e / (2(e - 1))."""
    z = K.EXP_Z

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return z * (1.0 + x * np.exp(-x))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return z * (x + 1.0 - (x + 1.0) * np.exp(-x))

    return Measure(pdf, cdf, _bisect_inverse(cdf, pdf), "exp", (K.M_EXP, np.zeros(1)))


def tabulated(values: np.ndarray, name: str = "block_invariant") -> Measure:
    """Measure with piecewise-linear density given on a uniform grid of [0,1]."""
    v = np.asarray(values, dtype=float)
    n = v.size
    h = 1.0 / (n - 1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))])
    v = v / cum[-1]
    cum = cum / cum[-1]
    p = np.concatenate([[float(n)], v, cum])

    def seg(x):
        t = np.asarray(x, dtype=float) / h
        i = np.clip(np.floor(t).astype(np.int64), 0, n - 2)
        return i, t - i

    def pdf(x):
        i, s = seg(x)
        return v[i] * (1 - s) + v[i + 1] * s

    def cdf(x):
        i, s = seg(x)
        f0, f1 = v[i], v[i + 1]
        return cum[i] + h * (f0 * s + 0.5 * (f1 - f0) * s * s)

    def inv(u):
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, n - 2)
        r = (u - cum[i]) / h
        f0, f1 = v[i], v[i + 1]
        s = 2.0 * r / (f0 + np.sqrt(np.maximum(f0 * f0 + 2.0 * (f1 - f0) * r, 0.0)))
        return np.clip((i + np.clip(s, 0.0, 1.0)) * h, 0.0, 1.0)

    return Measure(pdf, cdf, inv, name, (K.M_TABLE, p))


def custom(pdf: Callable, cdf: Callable, inverse_cdf: Callable | None = None,
           name: str = "custom") -> Measure:
    if inverse_cdf is None:
        inverse_cdf = _bisect_inverse(cdf, pdf)
    return Measure(pdf, cdf, inverse_cdf, name)


BUNDLED = {"uniform": uniform, "lin": lin, "exp": exp_measure}


def check_measure(mu: Measure, grid_n: int = 4096, tol: float = 1e-6) -> None:
    x = np.linspace(0.0, 1.0, grid_n)
    F = np.asarray(mu.cdf(x), dtype=float)
    phi = np.asarray(mu.pdf(x), dtype=float)
    if abs(F[0]) > 1e-12 or abs(F[-1] - 1) > 1e-12:
        raise ValueError("measure cdf must satisfy F(0)=0 and F(1)=1")
    if np.any(np.diff(F) <= 0):
        raise ValueError("measure cdf must be strictly increasing")
    if np.any(phi <= 0):
        raise ValueError("measure density must be positive")
    h = 1e-6
    xi = x[(x > h) & (x < 1 - h)]
    fd = (np.asarray(mu.cdf(xi + h)) - np.asarray(mu.cdf(xi - h))) / (2 * h)
    err = np.abs(fd - np.asarray(mu.pdf(xi)))
    if err.max() > tol:
        raise ValueError(f"measure density disagrees with cdf derivative at x={xi[np.argmax(err)]:.6g}")


# ------------------------------------------------------------------- source


class TentSource:
    """Pair of inverse branches (a, b) meeting at c = a(1) = b(1)."""

    def __init__(self, a: Branch, b: Branch, grid_n: int = 4096):
        diag = validate_tent(a, b, grid_n)
        self.a = a
        self.b = b
        self.c = diag.c
        self.class_tag = diag.class_tag

    @property
    def kernel(self):
        if self.a.kernel is None or self.b.kernel is None:
            return None
        return self.a.kernel[0], self.a.kernel[1], self.b.kernel[0], self.b.kernel[1], self.c

    @property
    def spec(self) -> dict | None:
        if self.a.spec is None or self.b.spec is None:
            return None
        return {"a": dict(self.a.spec), "b": dict(self.b.spec)}

    def T(self, y):
        """Forward map; points equal to c take the left branch."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        one = y > self.c
        out = np.empty_like(y)
        if (~one).any():
            out[~one] = invert_branch(self.a, y[~one])
        if one.any():
            out[one] = invert_branch(self.b, y[one])
        return np.clip(out, 0.0, 1.0)

    def __repr__(self):
        return f"TentSource({self.a.name}, {self.b.name}, c={self.c:.6g})"


# ------------------------------------------------------------------- words


@dataclass(frozen=True)
class Word:
    bits: tuple[int, ...] = ()

    @classmethod
    def parse(cls, s: str | Iterable[int]) -> "Word":
        if isinstance(s, str):
            if s and set(s) - {"0", "1"}:
                raise ValueError(f"not a binary word: {s!r}")
            return cls(tuple(int(ch) for ch in s))
        return cls(tuple(int(b) for b in s))

    def __len__(self):
        return len(self.bits)

    @property
    def length(self) -> int:
        return len(self.bits)

    @property
    def ones_count(self) -> int:
        return sum(self.bits)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.bits + other.bits)

    def __str__(self):
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class CylinderInterval:
    lo: float
    hi: float
    log_length: float
    anchor: float
    degenerate: bool


# ------------------------------------------------------------------- interval batches


def _img(br: Branch, x: np.ndarray, c: float) -> np.ndarray:
    y = np.asarray(br(x), dtype=float)
    return np.where(x == 1.0, c, y)


def _push(br: Branch, c: float, lo, hi, an, ll, dg):
    """Vectorized image of tracked intervals under one branch (numpy path)."""
    nlo, nhi = _img(br, lo, c), _img(br, hi, c)
    if not br.increasing:
        nlo, nhi = nhi, nlo
    ln = nhi - nlo
    src = np.where(dg, an, 0.5 * (lo + hi))
    nan_ = np.asarray(br(src), dtype=float)
    lder = np.log(np.abs(np.asarray(br.deriv(src), dtype=float)))
    fresh = ~dg & (ln < SWITCH)
    stay = ~dg & ~fresh
    with np.errstate(divide="ignore", invalid="ignore"):
        lln = np.log(ln)
        lold = np.log(hi - lo)
    new_ll = np.where(stay, lln,
                      np.where(fresh, np.where(ln > 0, lln, lold + lder), ll + lder))
    new_an = np.where(stay, 0.5 * (nlo + nhi), nan_)
    new_lo = np.where(dg, lo, nlo)
    new_hi = np.where(dg, hi, nhi)
    return new_lo, new_hi, new_an, new_ll, dg | fresh


def _logp(mu: Measure, lo, hi, an, ll, dg):
    mid = 0.5 * (lo + hi)
    width = hi - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.asarray(mu.cdf(hi), float) - np.asarray(mu.cdf(lo), float)
        simpson = width * (np.asarray(mu.pdf(lo), float) + 4.0 * np.asarray(mu.pdf(mid), float)
                           + np.asarray(mu.pdf(hi), float)) / 6.0
        d = np.where(width < SIMPSON_BELOW, simpson, d)
        tangent_pt = np.where(dg, an, mid)
        tangent = np.log(np.asarray(mu.pdf(tangent_pt), float)) + ll
        direct = np.log(np.where(d > 0, d, 1.0))
    return np.where(~dg & (d > 0), direct, tangent)


def _start(n: int):
    return (np.zeros(n), np.ones(n), np.full(n, 0.5), np.zeros(n), np.zeros(n, dtype=bool))


def _compose(src: TentSource, bits: np.ndarray):
    """Interval states for a batch of equal-length words (rows of bits)."""
    bits = np.atleast_2d(bits)
    st = _start(bits.shape[0])
    for j in range(bits.shape[1] - 1, -1, -1):
        one = bits[:, j] == 1
        out = [s.copy() for s in st]
        for mask, br in ((~one, src.a), (one, src.b)):
            if mask.any():
                res = _push(br, src.c, *(s[mask] for s in st))
                for o, r in zip(out, res):
                    o[mask] = r
        st = tuple(out)
    return st


# ------------------------------------------------------------------- public operations


def cylinder(src: TentSource, w: Word | str) -> CylinderInterval:
    if isinstance(w, str):
        w = Word.parse(w)
    lo, hi, an, ll, dg = (s[0] for s in _compose(src, np.array([w.bits or ()], dtype=np.int8).reshape(1, -1)))
    if dg:
        half = 0.5 * math.exp(ll)
        return CylinderInterval(max(an - half, 0.0), min(an + half, 1.0), float(ll), float(an), True)
    return CylinderInterval(float(lo), float(hi), float(ll), float(an), False)


def log_prob(src: TentSource, mu: Measure, w: Word | str) -> float:
    if isinstance(w, str):
        w = Word.parse(w)
    st = _compose(src, np.array([w.bits or ()], dtype=np.int8).reshape(1, -1))
    return float(_logp(mu, *st)[0])


def invert_branch(br: Branch, y, tol: float = 1e-14):
    """x with br(x) = y, for y in the image of br."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    e0, e1 = br.endpoints
    lo_im, hi_im = min(e0, e1), max(e0, e1)
    if np.any(y < lo_im - 1e-15) | np.any(y > hi_im + 1e-15):
        bad = y[(y < lo_im - 1e-15) | (y > hi_im + 1e-15)][0]
        raise ValueError(f"y={bad:.17g} outside the branch image [{lo_im:.17g}, {hi_im:.17g}]")
    y = np.clip(y, lo_im, hi_im)
    if br.has_inverse:
        x = np.clip(np.asarray(br.inverse(y), dtype=float), 0.0, 1.0)
        if np.any(np.isnan(x)):
            raise RuntimeError(f"inverse failed to converge at y={y[np.isnan(x)][0]:.17g}")
    else:
        x = _newton_inverse(br, y, tol)
    return float(x[0]) if scalar else x


def _newton_inverse(br: Branch, y: np.ndarray, tol: float) -> np.ndarray:
    sgn = 1.0 if br.increasing else -1.0
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    x = np.full_like(y, 0.5)
    for _ in range(200):
        f = sgn * (np.asarray(br(x), float) - y)
        lo = np.where(f <= 0, x, lo)
        hi = np.where(f > 0, x, hi)
        d = sgn * np.asarray(br.deriv(x), float)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / d
        out = ~((xn > lo) & (xn < hi)) | ~(d > 0)
        xn = np.where(out, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= 1e-16 * np.maximum(x, 1e-300)
        x = xn
        if np.all(done | (hi - lo <= 2.3e-16)):
            break
    res = np.abs(np.asarray(br(x), float) - y)
    if np.any(res > tol):
        raise RuntimeError(f"inverse failed to converge at y={y[np.argmax(res)]:.17g}")
    return x


def encode(src: TentSource, x: float, n: int) -> Word:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0,1]")
    kern = src.kernel
    if kern is not None:
        bits = np.zeros(max(n, 1), np.uint8)
        if not K.forward(*kern, float(x), n, bits):
            raise RuntimeError(f"orbit of x={x!r} lost: inverse branch did not converge")
        return Word(tuple(int(b) for b in bits[:n]))
    out = []
    y = float(x)
    for _ in range(n):
        if y > src.c:
            out.append(1)
            y = invert_branch(src.b, y)
        else:
            out.append(0)
            y = invert_branch(src.a, y)
        y = min(max(y, 0.0), 1.0)
    return Word(tuple(out))


def sample(mu: Measure, u):
    return mu.inverse_cdf(u)
