"""Shannon weights and number-of-ones profiles, exact and Monte Carlo."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .source import Measure, TentSource, _compose, _logp, _push, _start

EXACT_MAX_DEPTH = 26
LAMBDA_MAX_DEPTH = 22
MC_MAX_DEPTH = 10 ** 5
MC_MIN_SAMPLES = 1000
CHUNK = 4096
ENUM_CHUNK = 1 << 16


@dataclass
class WeightProfile:
    depths: np.ndarray
    m: np.ndarray
    nbar: np.ndarray
    method: str
    stderr_m: np.ndarray | None = None
    stderr_nbar: np.ndarray | None = None
    samples: int | None = None
    seed: int | None = None
    q999: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


# ------------------------------------------------------------------- enumeration


def _enumerate(src: TentSource, mu: Measure, n_max: int, visit: Callable) -> None:
    """Call visit(depth, logp, ones) for every word of length <= n_max.

    Words grow by prepending a symbol, I_{s w} = h_s(I_w), so every state
    expands independently and the tree is processed in bounded-size chunks.
    """
    def expand(state, ones, depth):
        visit(depth, _logp(mu, *state), ones)
        if depth == n_max:
            return
        ca = _push(src.a, src.c, *state)
        cb = _push(src.b, src.c, *state)
        child = tuple(np.concatenate([x, y]) for x, y in zip(ca, cb))
        cones = np.concatenate([ones, ones + 1])
        n = cones.size
        for lo in range(0, n, ENUM_CHUNK):
            sl = slice(lo, lo + ENUM_CHUNK)
            expand(tuple(x[sl] for x in child), cones[sl], depth + 1)

    expand(_start(1), np.zeros(1, np.int64), 0)


def exact_profile(src: TentSource, mu: Measure, n_max: int) -> WeightProfile:
    """m(k) = sum p |log p| and nbar(k) = sum p n(w) over all words of length k."""
    if not 0 <= n_max <= EXACT_MAX_DEPTH:
        raise ValueError(f"exact enumeration needs 0 <= n_max <= {EXACT_MAX_DEPTH}")
    m = np.zeros(n_max + 1)
    nb = np.zeros(n_max + 1)
    mass = np.zeros(n_max + 1)

    def visit(k, lp, ones):
        p = np.exp(lp)
        m[k] += float(np.sum(-p * lp))
        nb[k] += float(np.sum(p * ones))
        mass[k] += float(np.sum(p))

    _enumerate(src, mu, n_max, visit)
    m[0] = 0.0
    return WeightProfile(np.arange(n_max + 1), m, nb, "exact",
                         meta={"mass_error": float(np.max(np.abs(mass - 1.0)))})


def lambda_truncated(src: TentSource, mu: Measure, v: float, t: float, s: float,
                     n_max: int) -> float:
    """sum over |w| <= n_max of v^|w| t^n(w) p(w)^s."""
    if not 0 <= v < 1:
        raise ValueError("need 0 <= v < 1")
    if not 0 <= n_max <= LAMBDA_MAX_DEPTH:
        raise ValueError(f"need 0 <= n_max <= {LAMBDA_MAX_DEPTH}")
    level = np.zeros(n_max + 1)

    def visit(k, lp, ones):
        level[k] += float(np.sum(np.power(float(t), ones) * np.exp(s * lp)))

    _enumerate(src, mu, n_max, visit)
    total = 0.0
    for k in range(n_max, -1, -1):  # Horner in v
        total = total * v + level[k]
    return total


# ------------------------------------------------------------------- Monte Carlo


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one chunk: Philox keyed by (seed, chunk index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def chunk_starts(mu: Measure, samples: int, seed: int, chunk: int = CHUNK):
    for j, lo in enumerate(range(0, samples, chunk)):
        n = min(chunk, samples - lo)
        u = chunk_rng(seed, j).random(n)
        yield j, np.asarray(mu.inverse_cdf(u), dtype=float)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("ZEROENT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _mc_numpy(src: TentSource, mu: Measure, x0: np.ndarray, depths: np.ndarray):
    dmax = int(depths.max()) if depths.size else 0
    bits = np.zeros((x0.size, dmax), np.int8)
    y = x0.copy()
    for k in range(dmax):
        one = y > src.c
        bits[:, k] = one
        nxt = np.empty_like(y)
        from .source import invert_branch
        if (~one).any():
            nxt[~one] = invert_branch(src.a, y[~one])
        if one.any():
            nxt[one] = invert_branch(src.b, y[one])
        y = np.clip(nxt, 0.0, 1.0)
    nlp = np.empty((x0.size, depths.size))
    ones = np.empty((x0.size, depths.size))
    for j, d in enumerate(depths):
        st = _compose(src, bits[:, :d]) if d > 0 else _start(x0.size)
        nlp[:, j] = -_logp(mu, *st)
        ones[:, j] = bits[:, :d].sum(axis=1)
    return nlp, ones


def mc_profile(src: TentSource, mu: Measure, depths: Sequence[int], samples: int, seed: int,
               threads: int | None = 1, chunk: int = CHUNK) -> WeightProfile:
    """Monte Carlo estimates of m(n) = E[-log p(w_n)] and nbar(n) = E[n(w_n)]."""
    depths = np.asarray(sorted(set(int(d) for d in depths)), dtype=np.int64)
    if samples < MC_MIN_SAMPLES:
        raise ValueError(f"sample budget must be at least {MC_MIN_SAMPLES}")
    if depths.size == 0 or depths[0] < 0 or depths[-1] > MC_MAX_DEPTH:
        raise ValueError(f"depths must lie in [0, {MC_MAX_DEPTH}]")
    kern = src.kernel
    mk = mu.kernel

    def work(item):
        j, x0 = item
        if kern is not None and mk is not None:
            nlp, ones, ok = K.mc_chunk(kern[0], kern[1], kern[2], kern[3], kern[4],
                                       mk[0], mk[1], x0, depths)
            if not ok.all():
                bad = x0[~ok][0]
                raise RuntimeError(f"orbit of x={bad!r} lost: inverse branch did not converge")
            return nlp, ones
        return _mc_numpy(src, mu, x0, depths)

    items = chunk_starts(mu, samples, seed, chunk)
    nthreads = resolve_threads(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(work, items))
    else:
        parts = [work(it) for it in items]
    nlp = np.concatenate([p[0] for p in parts])
    ones = np.concatenate([p[1] for p in parts])
    n = nlp.shape[0]
    # correctly rounded column sums; strided numpy reductions accumulate ~n eps
    m = np.array([math.fsum(col) for col in nlp.T]) / n
    nb = np.array([math.fsum(col) for col in ones.T]) / n
    se_m = nlp.std(axis=0, ddof=1) / math.sqrt(n)
    se_n = ones.std(axis=0, ddof=1) / math.sqrt(n)
    q999 = np.quantile(nlp, 0.999, axis=0)
    return WeightProfile(depths, m, nb, "monte_carlo", se_m, se_n, samples, seed, q999)


# ------------------------------------------------------------------- ratios


@dataclass
class RatioReport:
    depths: np.ndarray
    ratio: np.ndarray
    distance: np.ndarray
    trend: float
    toward_one: bool


def weight_ratio(profile: WeightProfile, block_entropy: float) -> RatioReport:
    """m(n) / (E_B nbar(n)) per depth, with the last-quartile mean distance from 1."""
    keep = profile.nbar > 0
    r = profile.m[keep] / (float(block_entropy) * profile.nbar[keep])
    dist = np.abs(r - 1.0)
    q = max(1, int(math.ceil(dist.size / 4)))
    toward = bool(np.all(np.diff(dist) < 0))
    return RatioReport(profile.depths[keep], r, dist, float(dist[-q:].mean()), toward)
