import itertools
import math

import numpy as np
import pytest

from test_blocksys import plain_farey
from test_source import farey_cylinder_exact
from zeroent import weights as W
from zeroent.source import lin, uniform


def farey_words(n):
    """(probability, ones) for every Farey word of length n under Lebesgue measure."""
    for bits in itertools.product("01", repeat=n):
        lo, hi = farey_cylinder_exact("".join(bits))
        yield hi - lo, bits.count("1")


def test_exact_profile_matches_rational_oracle(farey):
    prof = W.exact_profile(farey, uniform(), 10)
    assert prof.meta["mass_error"] < 1e-13
    for k in range(1, 11):
        m = math.fsum(-float(p) * math.log(float(p)) for p, _ in farey_words(k))
        nb = float(sum(p * o for p, o in farey_words(k)))
        assert prof.m[k] == pytest.approx(m, rel=1e-13)
        assert prof.nbar[k] == pytest.approx(nb, rel=1e-13)


def test_exact_profile_frozen_values(farey):
    prof = W.exact_profile(farey, uniform(), 2)
    # depth 2 cylinders have lengths 1/3, 1/6, 1/6, 1/3
    assert prof.m[2] == pytest.approx(1.329661348854758, rel=1e-14)
    assert prof.nbar[2] == pytest.approx(5 / 6, rel=1e-14)


def test_exact_depth_limit(farey):
    with pytest.raises(ValueError):
        W.exact_profile(farey, uniform(), 27)


@pytest.mark.parametrize("v,t,s", [(0.5, 2.0, 1.0), (0.3, 0.5, 2.0), (0.9, 1.0, 0.5)])
def test_lambda_against_rational_oracle(farey, v, t, s):
    N = 7
    ref = 0.0
    for k in range(N + 1):
        ref += v ** k * math.fsum(t ** o * float(p) ** s for p, o in farey_words(k))
    assert W.lambda_truncated(farey, uniform(), v, t, s, N) == pytest.approx(ref, rel=1e-13)


def test_lambda_identity_lin_measure(dril20):
    for v in (0.3, 0.95):
        val = W.lambda_truncated(dril20, lin(), v, 1.0, 1.0, 10)
        assert val == pytest.approx((1 - v ** 11) / (1 - v), abs=1e-12)


def test_mc_reproducible_and_thread_independent(farey):
    a = W.mc_profile(farey, uniform(), [5, 50], 10 ** 4, seed=3, threads=1)
    b = W.mc_profile(farey, uniform(), [50, 5], 10 ** 4, seed=3, threads=3)
    c = W.mc_profile(farey, uniform(), [5, 50], 10 ** 4, seed=4)
    np.testing.assert_array_equal(a.m, b.m)
    np.testing.assert_array_equal(a.stderr_nbar, b.stderr_nbar)
    assert not np.array_equal(a.m, c.m)


def test_mc_numpy_path_matches_kernel(farey):
    k = W.mc_profile(farey, lin(), [1, 8, 30], 2000, seed=5)
    p = W.mc_profile(plain_farey(), lin(), [1, 8, 30], 2000, seed=5)
    np.testing.assert_allclose(p.m, k.m, rtol=1e-9)
    np.testing.assert_array_equal(p.nbar, k.nbar)


def test_mc_argument_checks(farey):
    with pytest.raises(ValueError):
        W.mc_profile(farey, uniform(), [10], 999, seed=0)
    with pytest.raises(ValueError):
        W.mc_profile(farey, uniform(), [10 ** 5 + 1], 1000, seed=0)


def test_chunk_streams_are_keyed():
    u1 = W.chunk_rng(9, 2).random(4)
    u2 = W.chunk_rng(9, 2).random(4)
    u3 = W.chunk_rng(9, 3).random(4)
    np.testing.assert_array_equal(u1, u2)
    assert not np.array_equal(u1, u3)


def test_resolve_threads_env(monkeypatch):
    monkeypatch.setenv("ZEROENT_THREADS", "3")
    assert W.resolve_threads(None) == 3
    assert W.resolve_threads(2) == 2


def test_weight_ratio_trend():
    prof = W.WeightProfile(np.array([10, 100, 1000]), np.array([5.0, 40.0, 390.0]),
                           np.array([2.0, 20.0, 200.0]), "synthetic")
    rep = W.weight_ratio(prof, 2.0)
    np.testing.assert_allclose(rep.ratio, [1.25, 1.0, 0.975])
    assert not rep.toward_one
