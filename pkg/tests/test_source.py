import itertools
import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dril_source
from zeroent.branches import farey_a, make_b
from zeroent.source import (BUNDLED, TentSource, Word, check_measure, custom, cylinder, encode,
                            exp_measure, invert_branch, lin, log_prob, tabulated, uniform)


def farey_cylinder_exact(word: str):
    """Cylinder of a Farey word by exact composition of x/(1+x) and 1/(1+x)."""
    lo, hi = Fraction(0), Fraction(1)
    for s in reversed(word):
        if s == "0":
            lo, hi = lo / (1 + lo), hi / (1 + hi)
        else:
            lo, hi = 1 / (1 + hi), 1 / (1 + lo)
    return lo, hi


def test_word_basics():
    w = Word.parse("0110")
    assert len(w) == 4 and w.ones_count == 2 and str(w + Word.parse("1")) == "01101"
    with pytest.raises(ValueError):
        Word.parse("012")


@pytest.mark.parametrize("n", [1, 3, 6, 9])
def test_farey_cylinders_exact(farey, n):
    for bits in itertools.product("01", repeat=n):
        w = "".join(bits)
        lo, hi = farey_cylinder_exact(w)
        cyl = cylinder(farey, w)
        assert cyl.lo == pytest.approx(float(lo), abs=2e-16)
        assert cyl.hi == pytest.approx(float(hi), abs=2e-16)
        ref = math.log(float(hi - lo))
        assert log_prob(farey, uniform(), w) == pytest.approx(ref, abs=1e-12)


def test_probabilities_sum_to_one():
    src = dril_source(2.0, 2.0)
    for mu in (uniform(), lin(), exp_measure()):
        tot = math.fsum(math.exp(log_prob(src, mu, "".join(b)))
                        for b in itertools.product("01", repeat=8))
        assert tot == pytest.approx(1.0, abs=1e-12)


def test_tangent_mode_affine_oracle():
    # b(x) = 1 - x/2 on its own: 1^k has length 2^-k around the fixed point 2/3
    src = TentSource(farey_a(), make_b("linear", c=0.5))
    mu = lin()
    for k in (10, 30, 45, 60):
        cyl = cylinder(src, "1" * k)
        assert cyl.log_length == pytest.approx(-k * math.log(2), rel=1e-12)
        assert cyl.degenerate == (k >= 40)
        mp.mp.dps = 50
        t = mp.mpf(-0.5) ** k
        e1, e2 = mp.mpf(2) / 3 - mp.mpf(2) / 3 * t, mp.mpf(2) / 3 + t / 3
        lo, hi = min(e1, e2), max(e1, e2)
        F = lambda x: (x + x * x) / 2
        ref = float(mp.log(F(hi) - F(lo)))
        assert log_prob(src, mu, "1" * k) == pytest.approx(ref, rel=1e-11)


def test_long_farey_zero_run(farey):
    k = 20000
    cyl = cylinder(farey, "0" * k)
    assert cyl.hi == pytest.approx(1 / (k + 1), rel=1e-12)
    assert log_prob(farey, lin(), "0" * k) == pytest.approx(
        math.log(lin().cdf(1 / (k + 1))), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(1, 40))
def test_point_lies_in_its_cylinder(x, n):
    src = dril_source(1.4, 1.0)
    w = encode(src, x, n)
    cyl = cylinder(src, w)
    assert cyl.lo - 1e-12 <= x <= cyl.hi + 1e-12


def test_forward_map_tie_rule(farey):
    c = farey.c
    assert farey.T(c)[0] == pytest.approx(1.0)
    assert encode(farey, c, 1).bits == (0,)
    np.testing.assert_allclose(farey.T(np.array([0.25, 0.75])), [1 / 3, 1 / 3], rtol=1e-15)


def test_invert_branch_checks_image(farey):
    with pytest.raises(ValueError):
        invert_branch(farey.a, 0.9)
    assert invert_branch(farey.b, 0.75) == pytest.approx(1 / 3, rel=1e-15)


def test_invert_branch_newton_fallback():
    f = lambda x: np.asarray(x) / (1 + np.asarray(x))
    from zeroent.branches import Branch
    br = Branch(f, lambda x: 1 / (1 + np.asarray(x)) ** 2, True)
    y = np.array([0.1, 0.3, 0.5])
    np.testing.assert_allclose(invert_branch(br, y), y / (1 - y), rtol=1e-14)


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_measures(name):
    mu = BUNDLED[name]()
    check_measure(mu)
    total = float(mp.quad(lambda t: float(mu.pdf(np.array([float(t)]))[0]), [0, 1]))
    assert total == pytest.approx(1.0, abs=1e-12)
    u = np.linspace(0, 1, 257)
    np.testing.assert_allclose(mu.cdf(mu.inverse_cdf(u)), u, atol=1e-13)


def test_exp_measure_density_at_zero():
    assert exp_measure().phi_at_zero == pytest.approx(math.e / (2 * (math.e - 1)), rel=1e-15)


def test_tabulated_measure():
    mu = tabulated(np.array([2.0, 1.0, 1.0, 3.0]))
    check_measure(mu, tol=1e-5)  # kinks at the nodes bias the central difference
    assert float(mu.cdf(np.array([1.0]))[0]) == pytest.approx(1.0, abs=1e-15)
    u = np.linspace(0, 1, 101)
    np.testing.assert_allclose(mu.cdf(mu.inverse_cdf(u)), u, atol=1e-13)


def test_custom_measure_bisect_inverse():
    mu = custom(lambda x: 2 * np.asarray(x) * 0 + 1.5 - np.asarray(x),
                lambda x: 1.5 * np.asarray(x) - np.asarray(x) ** 2 / 2)
    u = np.linspace(0, 1, 33)
    np.testing.assert_allclose(mu.cdf(mu.inverse_cdf(u)), u, atol=1e-13)
