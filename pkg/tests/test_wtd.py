
import numpy as np
import pytest

from conftest import dril_source
from zeroent import wtd as WT
from zeroent.branches import Branch, farey_a
from zeroent.source import lin


def test_farey_tail_at_checkpoints():
    q = WT.wtd_uniform(farey_a(), 10 ** 6)
    ck = q.n[q.n > q.dense_n]
    assert ck[-1] == 10 ** 6 and np.all(np.diff(q.n) > 0)
    np.testing.assert_allclose(q.at(ck), 1 / (ck + 1.0), rtol=1e-9)
    with pytest.raises(KeyError):
        q.at(q.dense_n + 1 if q.dense_n + 1 not in set(ck) else 10 ** 6 - 1)


def test_trivial_n_max_zero():
    q = WT.wtd_uniform(farey_a(), 0)
    assert q.n.tolist() == [0] and q.q.tolist() == [1.0]


def test_dril_tail_against_plain_iteration():
    src = dril_source(2.0, 0.0)
    q = WT.wtd_uniform(src.a, 10 ** 4)
    x, ref = 1.0, [1.0]
    for _ in range(10 ** 4):
        x = x - 0.99 * x ** 3 / 3
        ref.append(x)
    np.testing.assert_allclose(q.dense, ref, rtol=1e-12)


def test_numpy_fallback_matches_kernel():
    plain = Branch(lambda x: np.asarray(x) / (1 + np.asarray(x)),
                   lambda x: 1 / (1 + np.asarray(x)) ** 2, True)
    a = WT.wtd_uniform(plain, 3000, dense_n=1000)
    b = WT.wtd_uniform(farey_a(), 3000, dense_n=1000)
    np.testing.assert_array_equal(a.n, b.n)
    np.testing.assert_allclose(a.q, b.q, rtol=1e-13)


def test_pushforward_lin():
    q = WT.wtd_uniform(farey_a(), 1000)
    qm = WT.wtd_pushforward(q, lin().cdf, "lin")
    x = 1 / (np.arange(1001) + 1.0)
    np.testing.assert_allclose(qm.q, (x + x * x) / 2, rtol=1e-13)
    assert np.allclose(qm.r(), qm.q[:-1] - qm.q[1:])


def test_fit_recovers_exact_law():
    n = np.arange(2, 200001, dtype=float)
    law = WT.AsymptoticLaw(0.7, 0.4, -1.3)
    q = WT.WtdSequence.from_values(np.concatenate([[1.0, 1.0], law(n)]))
    fit = WT.fit_law(q, 100, 200000)
    assert fit.K == pytest.approx(0.7, rel=1e-9)
    assert fit.beta == pytest.approx(0.4, abs=1e-10)
    assert fit.delta == pytest.approx(-1.3, abs=1e-9)
    assert fit.residual < 1e-10


def test_fit_range_errors():
    q = WT.wtd_uniform(farey_a(), 100)
    with pytest.raises(ValueError):
        WT.fit_law(q, 8, 100)
    with pytest.raises(ValueError):
        WT.fit_law(q, 200, 1000)


def test_parameter_sets():
    assert WT.in_gamma_q(0.5, -7) and WT.in_gamma_q(1, -0.5) and not WT.in_gamma_q(1, -1)
    assert WT.in_gamma_q(0, -1) and not WT.in_gamma_q(0, 1)
    assert WT.in_gamma_m_star(1, -1) and not WT.in_gamma_m_star(1, -0.5)
    assert WT.in_gamma_m(1, -0.5) and WT.in_gamma_m(0, 1) and not WT.in_gamma_m_star(0, 1)
    law = WT.AsymptoticLaw(1.0, 1.0, 0.0)
    assert law.in_domain() and law.in_domain("Gamma_Q_star")
    with pytest.raises(WT.DomainError) as e:
        raise WT.DomainError("Gamma_M_star", (0.0, 1.0))
    assert "]0,1[" in str(e.value)


def test_checkpoints_density():
    ck = WT.checkpoints(10 ** 7)
    ratios = ck[1:] / ck[:-1]
    assert ck[-1] == 10 ** 7 and ck[0] > WT.DENSE_N
    assert ratios.max() < 10 ** (1.5 / WT.CKPT_PER_DECADE)


def test_v_asymptotic_farey_exact():
    q = WT.wtd_uniform(farey_a(), 10 ** 5)
    src = type("S", (), {"a": farey_a()})()
    rep = WT.check_v_asymptotic(src, q, 1.0, (100, 10 ** 5))
    np.testing.assert_allclose(rep.deviation, 2 / (rep.n + 2.0), rtol=1e-9)
    assert rep.decreasing and len(rep.window_max) == 3


def test_dril_q10_extended_precision():
    import mpmath as mp
    src = dril_source(2.0, 0.0, v0=0.9)
    mp.mp.dps = 50
    x = mp.mpf(1)
    for _ in range(10):
        x = x - mp.mpf("0.9") * x ** 3 / 3
    q = WT.wtd_uniform(src.a, 10)
    assert q.q[10] == pytest.approx(float(x), rel=1e-12)


@pytest.mark.parametrize("gd", [(2.0, 2.0), (1.4, 1.0), (2.0, -2.0)])
def test_recurrence_and_mass_identities(gd):
    src = dril_source(*gd)
    q = WT.wtd_uniform(src.a, 5000)
    d = q.dense
    v = np.asarray(src.a.defect(d[:-1])) / d[:-1]
    assert np.all(np.abs(d[1:] - d[:-1] * (1 - v)) <= 1e-14 * d[:-1])
    assert np.all(np.diff(d) < 0)
    r = q.r()
    assert np.all(r > 0) and abs(r.sum() + d[-1] - 1) < 1e-10


@pytest.mark.parametrize("gamma,delta", [(2.0, 0.0), (2.0, 2.0), (1.4, 1.0)])
def test_sandwich_bounds(gamma, delta):
    src = dril_source(gamma, delta)
    q = WT.wtd_uniform(src.a, 10 ** 6)
    rep = WT.sandwich_constants(q, gamma, 0.1)
    assert rep.lower > 0 and rep.upper > 0 and rep.growth > 0
    ns, qs = q.between(10 ** 4, 10 ** 6)
    assert np.all(rep.lower * ns ** (-1 / (gamma - 0.1)) <= qs * (1 + 1e-15))
    assert np.all(qs <= rep.upper * ns ** (-1 / (gamma + 0.1)) * (1 + 1e-15))
    # a positive log power delays the lower ratio turning monotone well past n = 1e6
    assert rep.settled == (delta == 0.0)
