import math

import numpy as np
import pytest
from scipy import integrate

from mvsubexp.laws import (Exponential, Gamma, IntegratedTail, LawError, Lognormal, Pareto, PointMass, Weibull,
                           integrated_tail, law_from_descriptor)

LAWS = [Pareto(1.5), Pareto(2.5, 2.0), Exponential(2.0), Weibull(0.5, 1.5), Lognormal(0.3, 1.2), Gamma(2.0, 0.5)]


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_survival_monotone_and_quantile_inverse(law):
    t = np.linspace(0, 50, 1000)
    sf = law.survival(t)
    assert np.all(np.diff(sf) <= 1e-15)
    assert law.survival(law.support_edge - 1e-9) == 1.0
    q = np.linspace(0.001, 0.999, 1000)
    x = law.quantile(q)
    assert np.allclose(law.cdf(x), q, atol=1e-9)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_stop_loss_matches_quadrature(law):
    for t in (0.0, 0.5, 3.0, 20.0):
        lo = max(t, law.support_edge)
        ref = max(law.support_edge - t, 0.0) + integrate.quad(lambda y: float(law.survival(y)), lo, np.inf,
                                                              epsrel=1e-12, limit=500)[0]
        assert law.stop_loss(t) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_sample_mean(law):
    x = law.sample(np.random.default_rng(0), 10**6)
    assert np.all(x >= 0)
    if math.isfinite(law.second_moment):
        se = math.sqrt((law.second_moment - law.mean**2) / x.size)
        assert abs(x.mean() - law.mean) < 4 * se


def test_integrated_tail_pareto_two():
    fi = integrated_tail(Pareto(2.0))
    x = np.array([1.0, 2.0, 10.0, 1000.0])
    assert np.allclose(fi.survival(x), 0.5 / x, rtol=1e-12)
    assert fi.survival(0.0) == 1.0
    assert fi.tail_index == 1.0


def test_integrated_tail_exponential_is_itself():
    fi = integrated_tail(Exponential(3.0))
    assert isinstance(fi, Exponential) and fi.rate == 3.0


@pytest.mark.parametrize("law", [Weibull(0.5), Lognormal(0.0, 1.0), Pareto(3.0)], ids=repr)
def test_integrated_tail_quantile_and_mean(law):
    fi = IntegratedTail(law)
    q = np.array([0.1, 0.5, 0.9, 0.999])
    assert np.allclose(fi.cdf(fi.quantile(q)), q, atol=1e-10)
    mean = integrate.quad(lambda y: float(fi.survival(y)), 0, np.inf, limit=500)[0]
    assert fi.mean == pytest.approx(mean, rel=1e-6)


def test_infinite_mean_rejected():
    with pytest.raises(LawError):
        integrated_tail(Pareto(0.9))
    with pytest.raises(LawError):
        Pareto(0.9).stop_loss(1.0)


def test_point_mass():
    p = PointMass(2.0)
    assert p.survival(1.9) == 1.0 and p.survival(2.0) == 0.0
    assert p.stop_loss(0.5) == 1.5


def test_descriptors_round_trip():
    for law in LAWS + [PointMass(1.0), IntegratedTail(Pareto(2.0))]:
        again = law_from_descriptor(law.to_descriptor())
        assert again.survival(3.3) == law.survival(3.3)
    with pytest.raises(LawError, match="unknown"):
        law_from_descriptor({"law": "cauchy"})
    with pytest.raises(LawError, match="unexpected"):
        law_from_descriptor({"law": "pareto", "alpha": 2, "beta": 1})
    with pytest.raises(LawError):
        law_from_descriptor({"law": "pareto", "alpha": -1})
