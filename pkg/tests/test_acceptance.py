"""Acceptance criteria, one test each. Results are summarized after the run."""
import math
import time

import numpy as np
import pytest

from conftest import dril_source
from zeroent import asymptotics as AS
from zeroent import blocksys as BS
from zeroent import weights as W
from zeroent import wtd as WT
from zeroent.branches import farey_a
from zeroent.source import lin, uniform

GAUSS_ENTROPY = math.pi ** 2 / (6 * math.log(2))


@pytest.fixture(scope="module")
def farey_block(farey):
    bs = BS.BlockSystem(farey, M_cap=10 ** 6)
    t = time.perf_counter()
    psi = BS.invariant_density(bs, 1024)
    return bs, psi, time.perf_counter() - t


@pytest.fixture(scope="module")
def farey_mc(farey):
    t = time.perf_counter()
    prof = W.mc_profile(farey, uniform(), [100, 1000, 10000], 10 ** 5, seed=7)
    return prof, time.perf_counter() - t


def test_c01_farey_wtd_closed_form(criterion):
    WT.wtd_uniform(farey_a(), 10)  # compile
    t = time.perf_counter()
    q = WT.wtd_uniform(farey_a(), 10 ** 5, dense_n=10 ** 5)
    dt = time.perf_counter() - t
    n = np.arange(q.dense.size)
    err = float(np.max(np.abs(q.dense * (n + 1) - 1.0)))
    ok = err < 1e-9 and dt < 1.0
    criterion(1, ok, f"max rel err {err:.2e}, {dt:.3f} s")
    assert ok


def test_c02_gauss_density(farey_block, criterion):
    bs, psi, dt = farey_block
    x = psi.nodes
    err = float(np.max(np.abs(psi.values - 1 / ((1 + x) * math.log(2)))))
    ok = err < 1e-3 and dt < 60 and bs.M_max >= 10 ** 5
    criterion(2, ok, f"sup err {err:.2e}, M_max {bs.M_max}, {dt:.1f} s")
    assert ok


def test_c03_gauss_entropy(farey_block, criterion):
    bs, psi, dt0 = farey_block
    t = time.perf_counter()
    H = BS.block_entropy(bs, psi)
    dt = dt0 + time.perf_counter() - t
    err = abs(H.value - GAUSS_ENTROPY)
    ok = err < 5e-3 and dt < 60
    criterion(3, ok, f"entropy {H.value:.7f}, err {err:.2e}, {dt:.1f} s")
    assert ok


@pytest.mark.parametrize("gamma,delta", [(2.0, 0.0), (2.0, 2.0), (1.4, 1.0)])
def test_c04_wtd_exponents(gamma, delta, criterion):
    src = dril_source(gamma, delta)
    t = time.perf_counter()
    q = WT.wtd_uniform(src.a, 10 ** 7)
    law = WT.fit_law(q, 10 ** 5, 10 ** 7)
    dt = time.perf_counter() - t
    eb, ed = abs(law.beta - 1 / gamma), abs(law.delta + delta / gamma)
    ok = eb < 0.02 and ed < 0.3 and dt < 60
    prev = test_c04_wtd_exponents.__dict__.setdefault("parts", [])
    prev.append((ok, f"({gamma:g},{delta:g}) beta err {eb:.4f} delta err {ed:.3f} {dt:.1f}s"))
    criterion(4, all(p[0] for p in prev), "; ".join(p[1] for p in prev))
    assert ok


@pytest.mark.parametrize("name,gamma", [("farey", 1.0), ("dril20", 2.0), ("dril22", 2.0),
                                        ("dril14", 1.4)])
def test_c05_v_asymptotic(name, gamma, farey, criterion):
    src = {"farey": lambda: farey, "dril20": lambda: dril_source(2.0, 0.0),
           "dril22": lambda: dril_source(2.0, 2.0), "dril14": lambda: dril_source(1.4, 1.0)}[name]()
    q = WT.wtd_uniform(src.a, 10 ** 6)
    rep = WT.check_v_asymptotic(src, q, gamma, (1000, 10 ** 6))
    ok = rep.decreasing
    detail = f"{name} window maxima {[f'{w:.3g}' for w in rep.window_max]}"
    if name == "farey":
        exact = 2.0 / (rep.n + 2.0)
        e = float(np.max(np.abs(rep.deviation - exact)))
        ok = ok and e < 1e-9
        detail += f", |dev - 2/(n+2)| {e:.1e}"
    prev = test_c05_v_asymptotic.__dict__.setdefault("parts", [])
    prev.append((ok, detail))
    criterion(5, all(p[0] for p in prev), "; ".join(p[1] for p in prev))
    assert ok


@pytest.mark.parametrize("which", ["farey", "dril20"])
@pytest.mark.parametrize("mname", ["uniform", "lin"])
def test_c06_exact_vs_mc(which, mname, farey, dril20, criterion):
    src = farey if which == "farey" else dril20
    mu = uniform() if mname == "uniform" else lin()
    t = time.perf_counter()
    ex = W.exact_profile(src, mu, 16)
    mc = W.mc_profile(src, mu, range(1, 17), 10 ** 5, seed=11)
    dt = time.perf_counter() - t
    em = ex.m[1:17]
    en = ex.nbar[1:17]
    zm = np.abs(mc.m - em) / np.maximum(mc.stderr_m, 1e-300)
    zn = np.abs(mc.nbar - en) / np.maximum(mc.stderr_nbar, 1e-300)
    # zero-variance depths (e.g. depth 1 under uniform) compare to rounding
    okm = np.abs(mc.m - em) <= 4 * mc.stderr_m + 1e-12
    okn = np.abs(mc.nbar - en) <= 4 * mc.stderr_nbar + 1e-12
    ok = bool(okm.all() and okn.all()) and dt < 120
    zmax = float(np.max(np.where(mc.stderr_m > 0, zm, 0)))
    nmax = float(np.max(np.where(mc.stderr_nbar > 0, zn, 0)))
    prev = test_c06_exact_vs_mc.__dict__.setdefault("parts", [])
    prev.append((ok, f"{which}/{mname} max z {max(zmax, nmax):.2f} {dt:.1f}s"))
    criterion(6, all(p[0] for p in prev), "; ".join(p[1] for p in prev))
    assert ok


def test_c07_lambda_identity(farey, dril20, criterion):
    worst = 0.0
    for src in (farey, dril20, dril_source(1.4, 1.0)):
        for v in (0.3, 0.7, 0.95):
            for N in (4, 8, 12):
                val = W.lambda_truncated(src, uniform(), v, 1.0, 1.0, N)
                worst = max(worst, abs(val - (1 - v ** (N + 1)) / (1 - v)))
    ok = worst < 1e-12
    criterion(7, ok, f"max err {worst:.1e}")
    assert ok


def test_c08_tauberian_roundtrip(criterion):
    t = time.perf_counter()
    law = WT.AsymptoticLaw(1.0, 0.5, 0.0)
    rep = AS.abelian_tauberian_roundtrip(law, [1 - 1e-4], [10 ** 6], n_terms=10 ** 7)
    dt = time.perf_counter() - t
    # the roundtrip normalizes by Gamma(1 - beta) = sqrt(pi); check the raw value as well
    raw = rep.gf_value[0] * math.sqrt(1e-4)
    raw_dev = abs(raw / math.sqrt(math.pi) - 1)
    n_raw = abs(rep.partial_sum[0] / (2 * math.sqrt(10 ** 6)) - 1)
    ok = raw_dev < 0.01 and n_raw < 0.01 and dt < 30
    criterion(8, ok, f"Q(v)sqrt(1-v) = {raw:.6f} dev {raw_dev:.2e}; Q_n/(2 sqrt n) dev "
                     f"{n_raw:.2e}; {dt:.2f}s")
    assert ok


def test_c09_renewal(farey, criterion):
    t = time.perf_counter()
    rep = AS.renewal_check(farey, uniform(), (0.9, 0.99, 0.999), 10 ** 6, seed=3)
    dt = time.perf_counter() - t
    dev = rep.deviation
    ok = rep.decreasing and dev[-1] < 0.2 and dt < 300
    criterion(9, ok, f"deviations {[f'{d:.4f}' for d in dev]} (decreasing: {rep.decreasing}), "
                     f"{dt:.0f}s")
    assert ok


def test_c10_weight_ratio_trend(farey_mc, farey_block, criterion):
    prof, _ = farey_mc
    bs, psi, _ = farey_block
    H = BS.block_entropy(bs, psi).value
    rep = W.weight_ratio(prof, H)
    ok = rep.toward_one and 0.6 <= rep.ratio[-1] <= 1.5
    criterion(10, ok, f"ratios {[f'{r:.4f}' for r in rep.ratio]}")
    assert ok


def test_c11_shannon_constant(farey_mc, criterion):
    prof, dt = farey_mc
    n = prof.depths[-1]
    val = float(prof.m[-1] * math.log(n) / n)
    ok = n == 10 ** 4 and 1.2 <= val <= 2.3 and dt < 600
    criterion(11, ok, f"m(n) log n / n = {val:.4f} at n = {n}, {dt:.0f}s")
    assert ok


def test_c12_synthesis(criterion):
    parts, ok = [], True
    for bm, dm in [(1.0, -1.0), (0.5, -1.0), (0.25, 0.25)]:
        _, rep = AS.synthesize_source(bm, dm)
        eb, ed = abs(rep.recovered_m[0] - bm), abs(rep.recovered_m[1] - dm)
        ok &= eb < 0.02 and ed < 0.3
        parts.append(f"({bm:g},{dm:g}) err ({eb:.4f},{ed:.3f})")
    for bm, dm in [(0.0, 1.0), (1.0, -0.5)]:
        try:
            AS.synthesize_source(bm, dm)
            ok = False
            parts.append(f"({bm:g},{dm:g}) accepted")
        except AS.UnreachableError as exc:
            ok &= "Gamma_M_star" in str(exc)
            parts.append(f"({bm:g},{dm:g}) rejected")
    criterion(12, ok, "; ".join(parts))
    assert ok


def test_c13_invariant_function_blowup(farey_block, criterion):
    bs, psi, _ = farey_block
    f1 = BS.invariant_function_original(bs, psi, 1000)
    f2 = BS.invariant_function_original(bs, psi, 2000)
    f4 = BS.invariant_function_original(bs, psi, 4000)
    i1, i5 = np.searchsorted(f1.y, 1e-3), np.searchsorted(f1.y, 0.5)
    ratio = f1.values[i1] / f1.values[i5]
    h1, h2 = f1.residual / f2.residual, f2.residual / f4.residual
    ok = ratio > 10 and 1.8 <= h1 <= 2.2 and 1.8 <= h2 <= 2.2
    criterion(13, ok, f"phi(1e-3)/phi(0.5) = {ratio:.1f}; residual ratios {h1:.3f}, {h2:.3f}")
    assert ok
