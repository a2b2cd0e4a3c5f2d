"""Induced block system g_m = a^(m-1) o b on J_m = [q(m), q(m-1)]."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .source import Measure, TentSource, tabulated
from .wtd import AsymptoticLaw, WtdSequence, fit_law, wtd_uniform

M_CAP = 10 ** 6
M_FLOOR = 64


class ConvergenceError(RuntimeError):
    def __init__(self, what: str, residual: float, sweeps: int):
        self.residual = residual
        self.sweeps = sweeps
        super().__init__(f"{what} did not converge after {sweeps} sweeps (residual {residual:.3g})")


class BlockSystem:
    """Block map of a tent source truncated to branches m <= M_max."""

    def __init__(self, src: TentSource, tail_tol: float = 1e-6, M_max: int | None = None,
                 M_cap: int = M_CAP):
        self.source = src
        self.tail_tol = tail_tol
        if M_max is None:
            q = wtd_uniform(src.a, M_cap, dense_n=M_cap).q
            below = np.flatnonzero(q < tail_tol)
            M_max = int(below[0]) if below.size else M_cap
            M_max = max(M_max, M_FLOOR)
            q = q[: M_max + 1]
        else:
            q = wtd_uniform(src.a, M_max, dense_n=M_max).q
        self.M_max = M_max
        self.q = q
        self.tail_mass = float(q[M_max])
        self.tail_ok = self.tail_mass < tail_tol
        # |J_m| from the defect avoids cancellation in q(m-1) - q(m)
        self.J = np.asarray(src.a.defect(q[:-1]), dtype=float)
        self.J[0] = 1.0 - q[1]

    @property
    def wtd(self) -> WtdSequence:
        return WtdSequence.from_values(self.q, "uniform")

    def branches(self, x: float):
        """(g_m(x), |g_m'(x)|) for m = 1..M_max as two arrays."""
        return block_branch_all(self, x)


def block_branch_all(bs: BlockSystem, x: float):
    src = bs.source
    kern = src.kernel
    if kern is not None:
        return K.block_stream(kern[0], kern[1], kern[2], kern[3], float(x), bs.M_max)
    ys = np.empty(bs.M_max)
    ds = np.empty(bs.M_max)
    y = float(src.b(np.array([x]))[0])
    d = abs(float(src.b.deriv(np.array([x]))[0]))
    for m in range(bs.M_max):
        ys[m], ds[m] = y, d
        arr = np.array([y])
        d *= float(src.a.deriv(arr)[0])
        y = float(src.a(arr)[0])
    return ys, ds


# ------------------------------------------------------------------- density


@dataclass
class DensityEstimate:
    nodes: np.ndarray
    values: np.ndarray
    sweeps: int = 0
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values)

    @property
    def psi0(self) -> float:
        return float(self.values[0])

    @property
    def integral(self) -> float:
        h = np.diff(self.nodes)
        return float(np.sum(0.5 * h * (self.values[1:] + self.values[:-1])))

    def to_measure(self) -> Measure:
        return tabulated(self.values, "block_invariant")

    def cdf(self, x):
        return self.to_measure().cdf(x)


def _operator_matrix(bs: BlockSystem, grid_n: int) -> np.ndarray:
    src = bs.source
    kern = src.kernel
    M = bs.M_max
    qM, JM = bs.tail_mass, float(bs.J[M - 1])
    if kern is not None:
        return K.collocation(kern[0], kern[1], kern[2], kern[3], grid_n, M, bs.q, JM)
    nodes = np.linspace(0.0, 1.0, grid_n)
    h = 1.0 / (grid_n - 1)
    G = np.zeros((grid_n, grid_n))
    y = np.asarray(src.b(nodes), float)
    d = np.abs(np.asarray(src.b.deriv(nodes), float))
    rows = np.arange(grid_n)
    for _ in range(M):
        t = y / h
        i = np.clip(np.floor(t).astype(np.int64), 0, grid_n - 2)
        s = t - i
        np.add.at(G, (rows, i), d * (1 - s))
        np.add.at(G, (rows, i + 1), d * s)
        dlast = d
        d = d * np.asarray(src.a.deriv(y), float)
        y = np.asarray(src.a(y), float)
    G[:, 0] += dlast * qM / JM
    return G


def _trapz(values: np.ndarray) -> float:
    h = 1.0 / (values.size - 1)
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


def invariant_density(bs: BlockSystem, grid_n: int = 1024, tol: float = 1e-10,
                      max_sweeps: int = 10 ** 4) -> DensityEstimate:
    """Fixed point of the collocated block transfer operator by power iteration."""
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    G = _operator_matrix(bs, grid_n)
    f = np.ones(grid_n)
    res = math.inf
    for sweep in range(1, max_sweeps + 1):
        g = G @ f
        g /= _trapz(g)
        res = float(np.max(np.abs(g - f)))
        f = g
        if res < tol:
            break
    else:
        raise ConvergenceError("invariant density", res, max_sweeps)
    nodes = np.linspace(0.0, 1.0, grid_n)
    fixed = float(np.max(np.abs(G @ f - f)))
    return DensityEstimate(nodes, f, sweep, res, {"fixed_point_residual": fixed, "M_max": bs.M_max,
                                                 "tail_mass": bs.tail_mass})


def transfer(bs: BlockSystem, f, x) -> np.ndarray:
    """Pointwise G[f](x) = sum_m |g_m'(x)| f(g_m(x)) with the tail folded in."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    qM = bs.tail_mass
    JM = float(bs.J[bs.M_max - 1])
    for k, xk in enumerate(x):
        ys, ds = block_branch_all(bs, xk)
        out[k] = np.dot(ds, f(ys)) + ds[-1] * qM / JM * float(f(np.array([0.5 * qM]))[0])
    return out


def psi0_refinement(bs: BlockSystem, grid_n: int, tol: float = 1e-10) -> dict:
    """psi(0) at grid_n and 2 grid_n with a Richardson estimate (second order)."""
    p1 = invariant_density(bs, grid_n, tol).psi0
    p2 = invariant_density(bs, 2 * grid_n - 1, tol).psi0
    return {"psi0": p1, "psi0_refined": p2, "richardson": p2 + (p2 - p1) / 3.0}


# ------------------------------------------------------------------- entropy


@dataclass
class EntropyResult:
    value: float
    tail_bound: float
    M_max: int

    def __float__(self):
        return self.value


def _q_law(bs: BlockSystem) -> AsymptoticLaw | None:
    M = bs.M_max
    lo = max(16, M // 1000)
    if M <= lo * 2:
        return None
    try:
        return fit_law(bs.wtd, lo, M)
    except ValueError:
        return None


def block_entropy(bs: BlockSystem, psi: DensityEstimate, order: int = 64) -> EntropyResult:
    """Rohlin integral of log|T'| against psi, in branch coordinates."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    src = bs.source
    kern = src.kernel
    h = 1.0 / (psi.values.size - 1)
    if kern is not None:
        terms, _ = K.entropy_terms(kern[0], kern[1], kern[2], kern[3], bs.M_max, gx, gw, h,
                                   psi.values)
    else:
        terms = np.zeros(bs.M_max)
        for x, w in zip(gx, gw):
            ys, ds = block_branch_all(bs, x)
            terms += w * ds * -np.log(ds) * psi(ys)
    value = float(terms.sum())
    if value < -1e-12:
        raise RuntimeError(f"negative block entropy {value:.3g}")
    qM = bs.tail_mass
    law = _q_law(bs)
    beta = law.beta if law is not None and law.beta > 0 else 1.0
    rM = max(float(bs.J[-1]), 1e-300)
    tail = float(psi.values.max()) * qM * (-math.log(rM) + (1.0 + beta) / beta)
    return EntropyResult(max(value, 0.0), tail, bs.M_max)


# ------------------------------------------------------------------- E_nu[W]


@dataclass
class BlockTimeResult:
    status: str  # finite | divergent | indeterminate
    value: float
    partial_sum: float
    law: AsymptoticLaw | None


def classify_mean(law: AsymptoticLaw, band: float = 0.02, delta_margin: float = 0.3) -> str:
    """Sum of K n^-beta (log n)^delta: finite iff beta > 1 or (beta = 1, delta < -1)."""
    if law.beta < 1 - band:
        return "divergent"
    if law.beta > 1 + band:
        return "finite"
    if law.delta > -1 + delta_margin:
        return "divergent"
    if law.delta < -1 - delta_margin:
        return "finite"
    return "indeterminate"


def expected_block_time(bs: BlockSystem, psi: DensityEstimate) -> BlockTimeResult:
    """E_nu[W] = sum_m m nu(J_m) = sum_n q_nu(n)."""
    F = psi.to_measure().cdf
    qnu = np.asarray(F(bs.q), dtype=float)
    partial = float(qnu[: bs.M_max].sum())
    law = _q_law(bs)
    if law is None:
        # too few branches to fit: tail is below M_FLOOR-level resolution
        return BlockTimeResult("finite", partial + float(qnu[bs.M_max]), partial, None)
    status = classify_mean(law)
    if status == "finite":
        n = np.arange(bs.M_max, bs.M_max * 1000, dtype=float)
        tail = psi.psi0 * float(np.sum(law(n)))
        return BlockTimeResult(status, partial + tail, partial, law)
    return BlockTimeResult(status, math.inf if status == "divergent" else math.nan, partial, law)


# ------------------------------------------------------------------- phi_0


@dataclass
class InvariantFunction:
    y: np.ndarray
    values: np.ndarray
    N: int
    integral_partial: float
    residual: float
    residual_window: tuple[float, float]


def _phi0_at(src: TentSource, psi: DensityEstimate, y: np.ndarray, N: int) -> np.ndarray:
    """sum_{n<N} (a^n)'(y) psi(a^n(y))."""
    y = np.asarray(y, dtype=float).copy()
    d = np.ones_like(y)
    out = np.zeros_like(y)
    for _ in range(N):
        out += d * psi(y)
        d *= np.asarray(src.a.deriv(y), float)
        y = np.asarray(src.a(y), float)
    return out


def invariant_function_original(bs: BlockSystem, psi: DensityEstimate, N_trunc: int,
                                grid_n: int = 1000,
                                window: tuple[float, float] = (0.1, 1.0)) -> InvariantFunction:
    """Truncated invariant function of the original map and its fixed-point residual."""
    if N_trunc < 1:
        raise ValueError("N_trunc must be >= 1")
    src = bs.source
    y = np.arange(1, grid_n + 1) / grid_n
    phi = _phi0_at(src, psi, y, N_trunc)
    yw = y[(y >= window[0]) & (y <= window[1])]
    ay = np.asarray(src.a(yw), float)
    by = np.asarray(src.b(yw), float)
    L = (np.asarray(src.a.deriv(yw), float) * _phi0_at(src, psi, ay, N_trunc)
         + np.abs(np.asarray(src.b.deriv(yw), float)) * _phi0_at(src, psi, by, N_trunc))
    res = float(np.max(np.abs(L - _phi0_at(src, psi, yw, N_trunc))))
    F = psi.to_measure().cdf
    n = min(N_trunc, bs.q.size)
    integral = float(np.sum(F(bs.q[:n])))
    return InvariantFunction(y, phi, N_trunc, integral, res, window)


# ------------------------------------------------------------------- diagnostics


@dataclass
class GoodClassDiagnostics:
    abscissa_estimate: float
    eta1: float
    eta2: float
    distortion_L: float

    def to_dict(self):
        return dict(self.__dict__)


def good_class_diagnostics(bs: BlockSystem, grid_n: int = 33, pairs_m: int = 64) -> GoodClassDiagnostics:
    M = bs.M_max
    m = np.arange(1, M + 1)
    lo = max(2, M // 100)
    sel = slice(lo - 1, M)
    slope = np.polyfit(np.log(m[sel]), np.log(bs.J[sel]), 1)[0]
    abscissa = -1.0 / slope

    xs = np.linspace(0.0, 1.0, grid_n)
    dmax = np.zeros(M)
    dmin = np.full(M, np.inf)
    ys_all = []
    ds_all = []
    for x in xs:
        ys, ds = block_branch_all(bs, x)
        dmax = np.maximum(dmax, ds)
        dmin = np.minimum(dmin, ds)
        ys_all.append(ys[:pairs_m])
        ds_all.append(ds[:pairs_m])
    eta1 = float(dmax.max())
    distortion = float(np.max(dmax / dmin))

    eta2 = 0.0
    k = min(pairs_m, M)
    for x_i in range(grid_n):
        for j in range(k):
            inner = ys_all[x_i][j]
            _, d_out = block_branch_all_truncated(bs, inner, k)
            eta2 = max(eta2, float(np.max(d_out * ds_all[x_i][j])))
    return GoodClassDiagnostics(float(abscissa), eta1, eta2, distortion)


def block_branch_all_truncated(bs: BlockSystem, x: float, k: int):
    kern = bs.source.kernel
    if kern is not None:
        return K.block_stream(kern[0], kern[1], kern[2], kern[3], float(x), k)
    ys, ds = block_branch_all(bs, x)
    return ys[:k], ds[:k]
