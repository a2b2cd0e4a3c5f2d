"""Waiting-time tails q(n) = mu[W > n] and their asymptotic laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .branches import Branch, in_gamma_s

DENSE_N = 2 ** 16
CKPT_PER_DECADE = 512


# ------------------------------------------------------------------- parameter sets


def in_gamma_q(beta: float, delta: float) -> bool:
    return 0 < beta < 1 or (beta == 1 and delta > -1) or (beta == 0 and delta < 0)


def in_gamma_q_star(beta: float, delta: float) -> bool:
    return 0 < beta < 1 or (beta == 1 and delta >= 0)


def in_gamma_m(beta: float, delta: float) -> bool:
    return 0 < beta < 1 or (beta == 1 and delta < 0) or (beta == 0 and delta > 0)


def in_gamma_m_star(beta: float, delta: float) -> bool:
    return 0 < beta < 1 or (beta == 1 and delta <= -1)


DOMAINS = {
    "Gamma_Q": in_gamma_q,
    "Gamma_Q_star": in_gamma_q_star,
    "Gamma_M": in_gamma_m,
    "Gamma_M_star": in_gamma_m_star,
    "Gamma_S": lambda g, d: in_gamma_s(g, d),
}

DOMAIN_TEXT = {
    "Gamma_Q": "]0,1[ x R, {1} x ]-1,inf[, {0} x ]-inf,0[",
    "Gamma_Q_star": "]0,1[ x R, {1} x [0,inf[",
    "Gamma_M": "]0,1[ x R, {1} x ]-inf,0[, {0} x ]0,inf[",
    "Gamma_M_star": "]0,1[ x R, {1} x ]-inf,-1]",
    "Gamma_S": "]1,inf[ x R, {1} x ]-inf,0]",
}


class DomainError(ValueError):
    def __init__(self, domain: str, point: tuple[float, float], detail: str = ""):
        self.domain = domain
        self.point = point
        msg = f"{point} is not in {domain} = {DOMAIN_TEXT[domain]}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class AsymptoticLaw:
    """K n^-beta (log n)^delta."""
    K: float
    beta: float
    delta: float
    domain_tag: str = "Gamma_Q"
    n_lo: int | None = None
    n_hi: int | None = None
    residual: float | None = None

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return self.K * n ** -self.beta * np.log(n) ** self.delta

    def in_domain(self, tag: str | None = None) -> bool:
        return DOMAINS[tag or self.domain_tag](self.beta, self.delta)

    def to_dict(self) -> dict:
        return {"K": self.K, "beta": self.beta, "delta": self.delta,
                "n_lo": self.n_lo, "n_hi": self.n_hi, "residual": self.residual}


# ------------------------------------------------------------------- sequences


def checkpoints(n_max: int, dense_n: int = DENSE_N) -> np.ndarray:
    """Stored indices beyond the dense range: a fine geometric grid plus n_max."""
    if n_max <= dense_n:
        return np.zeros(0, np.int64)
    k = np.arange(1, int(CKPT_PER_DECADE * math.log10(n_max / dense_n)) + 2)
    ck = np.ceil(dense_n * 10.0 ** (k / CKPT_PER_DECADE)).astype(np.int64)
    ck = np.unique(np.append(ck[(ck > dense_n) & (ck < n_max)], n_max))
    return ck


@dataclass
class WtdSequence:
    """q(n) at all n <= dense_n and at sparse checkpoints beyond."""
    n: np.ndarray
    q: np.ndarray
    measure_tag: str = "uniform"
    dense_n: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, q, measure_tag: str = "custom") -> "WtdSequence":
        q = np.asarray(q, dtype=float)
        return cls(np.arange(q.size, dtype=np.int64), q, measure_tag, q.size - 1)

    @property
    def n_max(self) -> int:
        return int(self.n[-1])

    @property
    def dense(self) -> np.ndarray:
        return self.q[: self.dense_n + 1]

    def at(self, n):
        n = np.asarray(n, dtype=np.int64)
        idx = np.searchsorted(self.n, n)
        idx = np.minimum(idx, self.n.size - 1)
        if np.any(self.n[idx] != n):
            raise KeyError("requested n not stored")
        return self.q[idx]

    def r(self) -> np.ndarray:
        """r(n) = q(n-1) - q(n) for n = 1..dense_n."""
        d = self.dense
        return d[:-1] - d[1:]

    def between(self, lo: int, hi: int):
        m = (self.n >= lo) & (self.n <= hi)
        return self.n[m], self.q[m]


def wtd_uniform(a: Branch, n_max: int, dense_n: int = DENSE_N) -> WtdSequence:
    """q(n) = a^n(1)."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    dense_n = min(dense_n, n_max)
    ck = checkpoints(n_max, dense_n)
    if a.kernel is not None:
        dense, tail = K.iterate_a(a.kernel[0], a.kernel[1], n_max, dense_n, ck)
    else:
        dense = np.empty(dense_n + 1)
        tail = np.empty(ck.size)
        x, j = 1.0, 0
        for n in range(n_max + 1):
            if n <= dense_n:
                dense[n] = x
            while j < ck.size and ck[j] == n:
                tail[j] = x
                j += 1
            x = float(a(np.array([x]))[0])
    n = np.concatenate([np.arange(dense_n + 1, dtype=np.int64), ck])
    return WtdSequence(n, np.concatenate([dense, tail]), "uniform", dense_n)


def wtd_pushforward(q_tau: WtdSequence, F, measure_tag: str = "custom") -> WtdSequence:
    """q_mu(n) = F(q_tau(n))."""
    if q_tau.measure_tag != "uniform":
        raise ValueError("push-forward expects the uniform-measure sequence")
    return WtdSequence(q_tau.n.copy(), np.asarray(F(q_tau.q), dtype=float),
                       measure_tag, q_tau.dense_n)


def fit_law(q: WtdSequence, n_lo: int, n_hi: int, points: int = 64,
            domain_tag: str = "Gamma_Q") -> AsymptoticLaw:
    """Least squares of log q on (1, log n, log log n) at geometric n."""
    if not n_hi > n_lo >= 16:
        raise ValueError("need n_hi > n_lo >= 16")
    ns, qs = q.between(n_lo, n_hi)
    if ns.size == 0:
        raise ValueError("fewer than 8 sample points in range")
    target = np.log(n_lo) + np.arange(points) / (points - 1) * np.log(n_hi / n_lo)
    ln = np.log(ns)
    pick = np.unique(np.abs(ln[None, :] - target[:, None]).argmin(axis=1))
    if pick.size < 8:
        raise ValueError(f"fewer than 8 sample points in range ({pick.size})")
    x = ln[pick]
    y = np.log(qs[pick])
    X = np.column_stack([np.ones_like(x), x, np.log(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return AsymptoticLaw(float(math.exp(coef[0])), float(-coef[1]), float(coef[2]),
                         domain_tag, int(n_lo), int(n_hi), res)


@dataclass
class VAsymptoticReport:
    n: np.ndarray
    deviation: np.ndarray
    window_max: list
    max_deviation: float
    last_deviation: float
    decreasing: bool


def check_v_asymptotic(src, q: WtdSequence, gamma: float,
                       n_range: tuple[int, int] = (1000, 10 ** 6)) -> VAsymptoticReport:
    """|gamma n v(q(n)) - 1| with v(x) = (x - a(x))/x, maxima per decade window."""
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1:
        raise ValueError("n_range must start at n >= 1")
    ns, qs = q.between(lo, hi)
    a = src.a if hasattr(src, "a") else src
    v = np.asarray(a.defect(qs), dtype=float) / qs
    dev = np.abs(gamma * ns * v - 1.0)
    edges = [lo]
    while edges[-1] * 10 < hi:
        edges.append(edges[-1] * 10)
    edges.append(hi + 1)
    wmax = []
    for e0, e1 in zip(edges[:-1], edges[1:]):
        m = (ns >= e0) & (ns < e1)
        if m.any():
            wmax.append(float(dev[m].max()))
    dec = all(x > y for x, y in zip(wmax[:-1], wmax[1:]))
    return VAsymptoticReport(ns, dev, wmax, float(dev.max()), float(dev[-1]), dec)


@dataclass
class SandwichReport:
    lower: float  # largest C with C n^(-1/(gamma-eps)) <= q(n)
    upper: float  # smallest C with q(n) <= C n^(-1/(gamma+eps))
    growth: float  # smallest A with n <= A q(n)^(-gamma_hat), gamma_hat = gamma + eps
    settled: bool  # both scaled ratios monotone over the range


def sandwich_constants(q: WtdSequence, gamma: float, eps: float = 0.1,
                       n_min: int = 10 ** 4) -> SandwichReport:
    """Fitted constants for the power bounds on q over the stored n >= n_min."""
    if not 0 < eps < gamma:
        raise ValueError("need 0 < eps < gamma")
    ns, qs = q.between(n_min, q.n_max)
    if ns.size < 2:
        raise ValueError("need at least two stored points beyond n_min")
    n = ns.astype(float)
    lo = qs * n ** (1.0 / (gamma - eps))
    hi = qs * n ** (1.0 / (gamma + eps))
    grow = n * qs ** (gamma + eps)
    settled = bool(np.all(np.diff(lo) > 0) and np.all(np.diff(hi) < 0))
    return SandwichReport(float(lo.min()), float(hi.max()), float(grow.max()), settled)
