"""Generating functions, renewal and Tauberian checks, parameter maps, synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .branches import DrilParams, farey_a, in_gamma_s, make_b, make_dril_a
from .source import Measure, TentSource, invert_branch
from .weights import chunk_starts, resolve_threads
from .wtd import (AsymptoticLaw, DomainError, fit_law, in_gamma_m, in_gamma_m_star,
                  in_gamma_q, wtd_pushforward, wtd_uniform)

V_DEFAULT = (0.9, 0.99, 0.999)
GF_CUT = 1e-12


# ------------------------------------------------------------------- generating functions


@dataclass
class GfEvaluation:
    v: float
    value: float
    truncation_n: int
    tail_bound: float


def _powers(v: float, n: int) -> np.ndarray:
    if v == 0.0:
        out = np.zeros(n)
        out[0] = 1.0
        return out
    return np.exp(np.arange(n) * math.log(v))


def gf_eval(coeffs, v: float, law: AsymptoticLaw | None = None) -> GfEvaluation:
    """Partial sum of c_n v^n over the stored coefficients, with an optional tail bound."""
    if not 0 <= v < 1:
        raise ValueError("need 0 <= v < 1")
    c = np.asarray(coeffs, dtype=float)
    N = c.size - 1
    value = float(np.dot(c, _powers(v, c.size)))
    tail = 0.0
    if law is not None and N >= 2:
        tail = float(law(N)) * v ** (N + 1) / (1 - v)
    return GfEvaluation(v, value, N, max(tail, 0.0))


def truncation_for(v: float, cut: float = GF_CUT) -> int:
    if v <= 0:
        return 1
    return int(math.ceil(math.log(cut) / math.log(v))) + 1


def law_sequence(law: AsymptoticLaw, n_terms: int) -> np.ndarray:
    """q(n) = law(n), with the head n < n0 clamped to law(n0) (n0 = 1, or 3 if delta != 0)."""
    n0 = 1 if law.delta == 0 else 3
    n = np.maximum(np.arange(n_terms, dtype=float), n0)
    return law(n)


def _sv_part(law: AsymptoticLaw) -> tuple[float, float, float]:
    """(rho, C, e) with Q_n ~ n^rho U(n) / Gamma(rho + 1) and U(x) = C (log x)^e."""
    b, d, k = law.beta, law.delta, law.K
    if b == 1:
        return 0.0, k / (d + 1.0), d + 1.0
    return 1.0 - b, k * math.gamma(1.0 - b), d


@dataclass
class RoundTripReport:
    law: AsymptoticLaw
    rho: float
    v: list
    gf_value: list
    v_deviation: list
    n: list
    partial_sum: list
    n_deviation: list


def abelian_tauberian_roundtrip(law: AsymptoticLaw, v_list: Sequence[float] = V_DEFAULT,
                                n_list: Sequence[int] = (10 ** 4, 10 ** 5, 10 ** 6),
                                n_terms: int | None = None) -> RoundTripReport:
    """Compare Q(v) and Q_n against the log-power slowly varying prediction."""
    if not in_gamma_q(law.beta, law.delta):
        raise DomainError("Gamma_Q", (law.beta, law.delta))
    rho, C, e = _sv_part(law)

    def U(x):
        return C * math.log(x) ** e

    vdev, gfv = [], []
    for v in v_list:
        N = n_terms or min(truncation_for(v), 10 ** 7)
        Q = gf_eval(law_sequence(law, N), v).value
        x = 1.0 / (1.0 - v)
        gfv.append(Q)
        vdev.append(abs(Q * (1.0 - v) ** rho / U(x) - 1.0))
    nmax = max(n_list) if len(n_list) else 0
    Qn = np.concatenate([[0.0], np.cumsum(law_sequence(law, nmax))]) if nmax else np.zeros(1)
    ps, ndev = [], []
    for n in n_list:
        ps.append(float(Qn[n]))
        ndev.append(abs(Qn[n] * math.gamma(rho + 1.0) / (n ** rho * U(n)) - 1.0))
    return RoundTripReport(law, rho, list(v_list), gfv, vdev, list(n_list), ps, ndev)


@dataclass
class SVTransform:
    n: np.ndarray
    tilde: np.ndarray
    ratio: np.ndarray | None


def sv_partial_sum_transform(V, beta: float) -> SVTransform:
    """tilde V_n = n^(beta-1) sum_{1<=k<n} V_k k^-beta for n = 1..len(V)-1."""
    if not 0 <= beta <= 1:
        raise ValueError("need 0 <= beta <= 1")
    V = np.asarray(V, dtype=float)
    k = np.arange(V.size, dtype=float)
    terms = np.zeros(V.size)
    terms[1:] = V[1:] * k[1:] ** -beta
    S = np.concatenate([[0.0], np.cumsum(terms)])  # S[n] = sum_{k<n}
    n = np.arange(1, V.size)
    tilde = n ** (beta - 1.0) * S[n]
    ratio = None
    if beta < 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = tilde * (1.0 - beta) / V[n]
    return SVTransform(n, tilde, ratio)


# ------------------------------------------------------------------- renewal


class RenewalError(RuntimeError):
    pass


@dataclass
class RenewalReport:
    v: list
    product: list
    stderr: list
    D: float
    deviation: list
    decreasing: bool
    final_deviation: float
    samples: int
    seed: int
    meta: dict = field(default_factory=dict)


def _ones_counts(src: TentSource, x0: np.ndarray, K_: int) -> np.ndarray:
    kern = src.kernel
    if kern is not None:
        return K.ones_by_position(kern[0], kern[1], kern[2], kern[3], kern[4], x0, K_, 1)[0]
    counts = np.zeros(K_ + 1, np.int64)
    y = x0.copy()
    for k in range(K_ + 1):
        one = y > src.c
        counts[k] = int(one.sum())
        nxt = np.empty_like(y)
        if (~one).any():
            nxt[~one] = invert_branch(src.a, y[~one])
        if one.any():
            nxt[one] = invert_branch(src.b, y[one])
        y = np.clip(nxt, 0.0, 1.0)
    return counts


def renewal_check(src: TentSource, mu: Measure, v_list: Sequence[float] = V_DEFAULT,
                  mc_samples: int = 10 ** 6, seed: int = 0, psi0: float | None = None,
                  threads: int | None = 1, tol: float = 0.2) -> RenewalReport:
    """(sum_{k>=1} mu[T^-k J] v^k) (1 - sum_{k>=1} r(k) v^k) against D = phi(0)/psi(0)."""
    v_list = [float(v) for v in v_list]
    if any(not 0 <= v < 1 for v in v_list):
        raise ValueError("v must lie in [0, 1)")
    if mc_samples < 10 ** 5:
        raise ValueError("renewal check needs at least 1e5 samples")
    if psi0 is None:
        from .blocksys import BlockSystem, invariant_density
        try:
            psi0 = invariant_density(BlockSystem(src), 256).psi0
        except Exception as exc:  # any solver failure leaves psi(0) undefined
            raise RenewalError(f"psi(0) unavailable: {exc}") from exc
    if not psi0 or not math.isfinite(psi0) or psi0 <= 0:
        raise RenewalError("psi(0) unavailable")
    D = mu.phi_at_zero / psi0

    K_ = max(truncation_for(v) for v in v_list)
    qmu = wtd_pushforward(wtd_uniform(src.a, K_, dense_n=K_), mu.cdf).q
    r = qmu[:-1] - qmu[1:]  # r(k), k = 1..K
    second = []
    for v in v_list:
        pw = _powers(v, K_ + 1)
        second.append(1.0 - float(np.dot(r, pw[1:])))

    pw_all = [_powers(v, K_ + 1) for v in v_list]

    def work(item):
        _, x0 = item
        cnt = _ones_counts(src, x0, K_)
        freq = cnt / x0.size
        return x0.size, [float(np.dot(freq[1:], pw[1:])) for pw in pw_all]

    items = chunk_starts(mu, mc_samples, seed)
    nthreads = resolve_threads(threads)
    if nthreads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(work, items))
    else:
        parts = [work(it) for it in items]
    w = np.array([p[0] for p in parts], dtype=float)
    first = np.array([p[1] for p in parts])  # chunks x v
    prod, se, dev = [], [], []
    for j, v in enumerate(v_list):
        est = first[:, j] * second[j]
        mean = float(np.sum(w * est) / w.sum())
        var = float(np.sum(w * (est - mean) ** 2) / w.sum())
        prod.append(mean)
        se.append(math.sqrt(var / max(len(w) - 1, 1)))
        dev.append(abs(mean - D) / D)
    dec = all(a > b for a, b in zip(dev[:-1], dev[1:]))
    return RenewalReport(v_list, prod, se, D, dev, dec, dev[-1], mc_samples, seed,
                         {"truncation": K_, "psi0": psi0, "tolerance": tol,
                          "second_factor": second})


# ------------------------------------------------------------------- parameter maps


def map_s_to_q(gamma, delta):
    if not in_gamma_s(gamma, delta):
        raise DomainError("Gamma_S", (gamma, delta))
    return 1 / gamma, -delta / gamma


def _q_to_m(beta, delta, unit: bool):
    return (beta, -(delta + 1)) if unit else (beta, -delta)


def map_q_to_m(beta, delta):
    if not in_gamma_q(beta, delta):
        raise DomainError("Gamma_Q", (beta, delta))
    return _q_to_m(beta, delta, beta == 1)


class UnreachableError(DomainError):
    """Parameters in Gamma_M that no DRIL source realizes."""


def map_m_to_s(beta, delta):
    """Inverse of (Q -> M) o (S -> Q) on Gamma_M*."""
    if not in_gamma_m_star(beta, delta):
        if in_gamma_m(beta, delta):
            raise UnreachableError("Gamma_M_star", (beta, delta),
                                   "this region of Gamma_M is not reached by any DRIL source")
        raise DomainError("Gamma_M_star", (beta, delta))
    if beta == 1:
        return 1 / beta, delta + 1
    return 1 / beta, delta / beta


# ------------------------------------------------------------------- predicted weights


def predicted_weights(law: AsymptoticLaw, E_B: float, expected_W: float | None = None):
    """n -> predicted Shannon weight from the q_nu law (or a finite E_nu[W])."""
    if expected_W is not None and math.isfinite(expected_W):
        return lambda n: E_B / expected_W * np.asarray(n, dtype=float)
    if not in_gamma_q(law.beta, law.delta):
        raise DomainError("Gamma_Q", (law.beta, law.delta))
    b, d, k = law.beta, law.delta, law.K
    if b == 1:
        return lambda n: (E_B / k) * (d + 1) * np.asarray(n, float) / np.log(n) ** (d + 1)
    const = (E_B / k) / (math.gamma(1 + b) * math.gamma(1 - b))
    return lambda n: const * np.asarray(n, float) ** b / np.log(n) ** d


# ------------------------------------------------------------------- synthesis


@dataclass
class SynthesisReport:
    gamma: float
    delta: float
    target_q: tuple
    fitted: AsymptoticLaw
    err_beta: float
    err_delta: float
    recovered_m: tuple
    source_spec: dict


def synthesize_source(betaM, deltaM, n_max: int = 10 ** 6,
                      fit_range: tuple[int, int] = (10 ** 4, 10 ** 6)):
    """DRIL source whose Shannon weights follow the (beta_M, delta_M) law."""
    gamma, delta = map_m_to_s(betaM, deltaM)
    gamma, delta = float(gamma), float(delta)
    if gamma == 1 and delta == 0:
        a = farey_a()
    else:
        a = make_dril_a(DrilParams(gamma, delta))
    b = make_b("linear", c=float(a(np.array([1.0]))[0]))
    src = TentSource(a, b)
    bq, dq = map_s_to_q(gamma, delta)
    q = wtd_uniform(a, n_max)
    law = fit_law(q, fit_range[0], min(fit_range[1], n_max))
    rec = _q_to_m(law.beta, law.delta, bq == 1)
    rep = SynthesisReport(gamma, delta, (float(bq), float(dq)), law,
                          abs(law.beta - bq), abs(law.delta - dq),
                          (float(rec[0]), float(rec[1])), src.spec)
    return src, rep
