"""Inverse branches of tent-shaped interval maps.

The increasing branch ``a`` fixes 0 with ``a'(0) = 1`` and the decreasing
branch ``b`` maps 0 to 1. Both map 1 to the subdivision point ``c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import _kernels as K

VALIDATION_GRID = 4096


class BranchError(ValueError):
    """Raised when a branch or a pair of branches violates a required inequality."""

    def __init__(self, inequality: str, x: float | None = None, detail: str = ""):
        self.inequality = inequality
        self.x = x
        msg = inequality if x is None else f"{inequality} violated at x={x:.17g}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class Branch:
    """A monotone C^2 self-map of [0, 1].

    ``kernel`` is an optional (kind, params) pair understood by the compiled
    loops; branches without one go through the numpy fallbacks.
    """

    def __init__(self, f: Callable, df: Callable, increasing: bool, name: str = "custom",
                 kernel: tuple[int, np.ndarray] | None = None,
                 inverse: Callable | None = None, defect: Callable | None = None,
                 spec: dict | None = None):
        self._f = f
        self._df = df
        self.increasing = increasing
        self.name = name
        self.kernel = kernel
        self._inverse = inverse
        self._defect = defect
        self.spec = spec

    def __call__(self, x):
        return self._f(x)

    def eval(self, x):
        return self._f(x)

    def deriv(self, x):
        return self._df(x)

    def defect(self, x):
        """x - h(x); accurate near 0 when the branch provides it."""
        if self._defect is not None:
            return self._defect(x)
        x = np.asarray(x, dtype=float)
        return x - self._f(x)

    @property
    def has_inverse(self) -> bool:
        return self._inverse is not None

    def inverse(self, y):
        if self._inverse is None:
            raise AttributeError("branch has no closed-form inverse")
        return self._inverse(y)

    @property
    def endpoints(self) -> tuple[float, float]:
        return float(self._f(np.array([0.0]))[0]), float(self._f(np.array([1.0]))[0])

    def __repr__(self):
        return f"Branch({self.name}, {'increasing' if self.increasing else 'decreasing'})"


def _kernel_branch(kind: int, params, increasing: bool, name: str, spec: dict) -> Branch:
    p = np.ascontiguousarray(params, dtype=float)

    def wrap(fn):
        def g(x):
            x = np.asarray(x, dtype=float)
            return fn(kind, p, np.ascontiguousarray(x.ravel())).reshape(x.shape)
        return g

    return Branch(wrap(K.beval_arr), wrap(K.bderiv_arr), increasing, name,
                  kernel=(kind, p), inverse=wrap(K.binv_arr), defect=wrap(K.bdefect_arr),
                  spec=spec)


def check_branch(br: Branch, grid_n: int = VALIDATION_GRID, fd_tol: float = 1e-6) -> None:
    """Monotonicity, derivative consistency and image containment on a grid."""
    x = np.linspace(0.0, 1.0, grid_n)
    y = np.asarray(br(x), dtype=float)
    if not np.all(np.isfinite(y)):
        i = int(np.argmin(np.isfinite(y)))
        raise BranchError("finite values", x[i])
    bad = np.flatnonzero((y < 0.0) | (y > 1.0))
    if bad.size:
        raise BranchError("image contained in [0,1]", x[bad[0]])
    dy = np.diff(y)
    bad = np.flatnonzero(dy <= 0.0 if br.increasing else dy >= 0.0)
    if bad.size:
        raise BranchError("strict monotonicity", x[bad[0]])
    h = 1e-6
    xi = x[1:-1]
    xi = xi[(xi > h) & (xi < 1 - h)]
    fd = (np.asarray(br(xi + h)) - np.asarray(br(xi - h))) / (2 * h)
    err = np.abs(fd - np.asarray(br.deriv(xi)))
    if err.max() > fd_tol:
        i = int(np.argmax(err))
        raise BranchError("derivative matches finite difference", xi[i], f"error {err[i]:.3g}")


# ------------------------------------------------------------------- DRIL


def a_gamma_delta_bound(gamma: float, delta: float) -> float:
    """sup over [0,1] of x^gamma |log(x/2)|^delta."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if delta == 0:
        raise ValueError("delta = 0 has no amplitude bound; supply v0 instead")
    if delta >= math.log(2.0) * gamma:
        return 2.0 ** gamma * math.exp(-delta) * (delta / gamma) ** delta
    return math.log(2.0) ** delta


def in_gamma_s(gamma: float, delta: float) -> bool:
    return gamma > 1 or (gamma == 1 and delta <= 0)


@dataclass(frozen=True)
class DrilParams:
    gamma: float
    delta: float
    amplitude: Optional[float] = None
    v0: Optional[Callable | float] = field(default=None, compare=False)

    def __post_init__(self):
        if not in_gamma_s(self.gamma, self.delta):
            raise BranchError("(gamma, delta) in Gamma_S", None,
                              f"got ({self.gamma}, {self.delta}); need gamma > 1, or gamma = 1 with delta <= 0")
        if self.delta != 0:
            if self.v0 is not None:
                raise ValueError("v0 applies only to delta = 0")
            if self.amplitude is not None:
                bound = 1.0 / a_gamma_delta_bound(self.gamma, self.delta)
                if not 0 < self.amplitude < bound:
                    raise BranchError("0 < A < 1/A_{gamma,delta}", None,
                                      f"A={self.amplitude}, bound={bound}")
        elif self.amplitude is not None:
            raise ValueError("amplitude applies only to delta != 0; use v0")

    @property
    def A(self) -> float:
        if self.amplitude is not None:
            return self.amplitude
        return 0.99 / a_gamma_delta_bound(self.gamma, self.delta)


def _poly_params(gamma: float, A: float, deg: int) -> np.ndarray:
    # u = A x^{g+1} sum_j deg!/(deg-j)! / (g+1)^{j+1} L^{deg-j}
    c = [math.factorial(deg) / math.factorial(deg - j) / (gamma + 1.0) ** (j + 1)
         for j in range(deg + 1)]
    return np.array([gamma, A, float(deg)] + c)


def make_dril_a(params: DrilParams) -> Branch:
    """a(x) = x - u(x) with u'(x) = A x^gamma |log(x/2)|^delta (or x^gamma v0(x))."""
    g, d = float(params.gamma), float(params.delta)
    spec = {"kind": "dril", "gamma": g, "delta": d}
    if d == 0:
        v0 = 0.99 if params.v0 is None else params.v0
        if callable(v0):
            return _quad_dril(g, v0)
        v0 = float(v0)
        if not 0 < v0 <= 1.0:
            raise BranchError("x^gamma v0(x) in [0,1]", 1.0, f"v0={v0}")
        spec["v0"] = v0
        return _kernel_branch(K.DRIL_POLY, _poly_params(g, v0, 0), True, f"dril({g:g},0)", spec)
    A = params.A
    spec["amplitude"] = A
    name = f"dril({g:g},{d:g})"
    if d > 0 and d == int(d) and d <= 64:
        return _kernel_branch(K.DRIL_POLY, _poly_params(g, A, int(d)), True, name, spec)
    return _kernel_branch(K.DRIL_CF, np.array([g, A, d]), True, name, spec)


def _quad_dril(gamma: float, v0: Callable) -> Branch:
    """DRIL branch with a general delta = 0 profile, integrated numerically."""
    x = np.linspace(0.0, 1.0, VALIDATION_GRID)
    up = x ** gamma * np.asarray(v0(x), dtype=float)
    bad = np.flatnonzero((up < 0) | (up > 1))
    if bad.size:
        raise BranchError("x^gamma v0(x) in [0,1]", x[bad[0]])

    def du(t):
        return t ** gamma * v0(t)

    def u_scalar(t):
        if t <= 0:
            return 0.0
        val, err = integrate.quad(du, 0.0, t, epsabs=0.0, epsrel=1e-12, limit=200)
        if err > 1e-10 * max(abs(val), 1e-300):
            raise BranchError("quadrature convergence", t, f"error estimate {err:.3g}")
        return val

    def u(t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(u_scalar, otypes=[float])(t)

    def f(t):
        t = np.asarray(t, dtype=float)
        return t - u(t)

    def df(t):
        t = np.asarray(t, dtype=float)
        return 1.0 - du(t)

    return Branch(f, df, True, f"dril({gamma:g},0,v0)", defect=u)


# ------------------------------------------------------------------- Farey and b


def farey_a() -> Branch:
    return _kernel_branch(K.FAREY_A, np.zeros(1), True, "farey_a", {"kind": "farey"})


def make_b(kind: str = "farey", c: float | None = None,
           f: Callable | None = None, df: Callable | None = None) -> Branch:
    """Decreasing branch with b(0) = 1: 'farey', 'linear' (to c) or 'custom'."""
    if kind == "farey":
        return _kernel_branch(K.FAREY_B, np.zeros(1), False, "farey_b", {"kind": "farey"})
    if kind == "linear":
        if c is None or not 0 < c < 1:
            raise ValueError("linear b needs c in ]0,1[")
        return _kernel_branch(K.AFFINE, np.array([1.0, -(1.0 - c)]), False,
                              f"linear({c:g})", {"kind": "linear", "c": float(c)})
    if kind == "custom":
        if f is None or df is None:
            raise ValueError("custom b needs f and df")
        br = Branch(f, df, False, "custom_b")
        check_branch(br)
        x = np.linspace(0.0, 1.0, VALIDATION_GRID)
        d = np.asarray(df(x), dtype=float)
        bad = np.flatnonzero((d < -1.0) | (d >= 0.0))
        if bad.size:
            raise BranchError("-1 <= b' < 0", x[bad[0]])
        return br
    raise ValueError(f"unknown b kind {kind!r}")


# ------------------------------------------------------------------- pair validation


@dataclass
class TentDiagnostics:
    c: float
    class_tag: str
    a_deriv_max: float
    b_deriv_range: tuple[float, float]


def validate_tent(a: Branch, b: Branch, grid_n: int = VALIDATION_GRID,
                  atol: float = 1e-12) -> TentDiagnostics:
    """Check the tent-shape inequalities on a uniform grid; raise BranchError on failure."""
    if not a.increasing or b.increasing:
        raise BranchError("a increasing and b decreasing")
    x = np.linspace(0.0, 1.0, grid_n)
    ya, yb = np.asarray(a(x), float), np.asarray(b(x), float)
    da, db = np.asarray(a.deriv(x), float), np.asarray(b.deriv(x), float)

    if abs(ya[0]) > atol:
        raise BranchError("a(0) = 0", 0.0)
    if abs(yb[0] - 1.0) > atol:
        raise BranchError("b(0) = 1", 0.0)
    for name, ok in (("a' > 0", da > 0), ("a' <= 1", da <= 1.0 + atol),
                     ("b' < 0", db < 0), ("b' >= -1", db >= -1.0 - atol)):
        if not ok.all():
            raise BranchError(name, x[int(np.argmin(ok))])
    # strict inequalities away from the fixed point
    ok = da[1:] < 1.0
    if not ok.all():
        raise BranchError("a'(x) < 1 for x > 0", x[1 + int(np.argmin(ok))])
    ok = db[1:] > -1.0
    if not ok.all():
        raise BranchError("b'(x) > -1 for x > 0", x[1 + int(np.argmin(ok))])
    for name, y, inc in (("a", ya, True), ("b", yb, False)):
        dy = np.diff(y)
        ok = dy > 0 if inc else dy < 0
        if not ok.all():
            raise BranchError(f"{name} strictly monotone", x[int(np.argmin(ok))])
        ok = (y >= 0) & (y <= 1)
        if not ok.all():
            raise BranchError(f"{name} maps into [0,1]", x[int(np.argmin(ok))])
    c = float(ya[-1])
    if abs(c - yb[-1]) > atol:
        raise BranchError("a(1) = b(1)", 1.0, f"a(1)={c:.17g}, b(1)={yb[-1]:.17g}")
    if not 0 < c < 1:
        raise BranchError("0 < c < 1", 1.0)
    if abs(da[0] - 1.0) > 1e-9:
        tag = "DR"
    elif abs(db[0] + 1.0) <= atol:
        tag = "DRI_w"
    else:
        tag = "DRI_s"
    return TentDiagnostics(c, tag, float(da.max()), (float(db.min()), float(db.max())))
