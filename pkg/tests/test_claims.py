import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from mvsubexp.claims import (OSC_GAMMA_MAX, AngularMeasure, ClaimModelError, DeterministicClaims, DyadicSimplex,
                             IndependentMarginals, OscillatingModel, PolarModel, crnonlin_sum_survival,
                             crnonlin_survival, model_from_descriptor, sample)
from mvsubexp.laws import Exponential, Lognormal, Pareto
from mvsubexp.ruinsets import HyperplaneFamily
from mvsubexp.streams import RngStream

N = 10**6


def z_score(hits, n, p):
    return abs(hits / n - p) / math.sqrt(p * (1 - p) / n)


def test_pareto_marginal_tail():
    x = sample(IndependentMarginals([Pareto(1.5), Pareto(1.5)]), RngStream(1), N)
    p = np.mean(x[:, 0] > 10)
    assert abs(p / 10**-1.5 - 1) < 0.05


def test_sampling_reproducible():
    m = IndependentMarginals([Pareto(1.5), Lognormal()])
    assert np.array_equal(sample(m, RngStream(3, 1), 1000), sample(m, RngStream(3, 1), 1000))
    with pytest.raises(ClaimModelError):
        sample(m, 0, 0)


def test_crnonlin_exact_values():
    assert crnonlin_survival(1) == Fraction(1, 3)
    assert crnonlin_survival(2) == Fraction(1, 6)
    assert crnonlin_survival(8) == Fraction(1, 24)
    assert crnonlin_survival(Fraction(1, 2)) == Fraction(2, 3)
    for n in range(1, 11):
        assert crnonlin_sum_survival(2**n) / crnonlin_sum_survival(2**n - 1) == Fraction(1, 2)
    assert crnonlin_sum_survival(0.5) == 1.0
    with pytest.raises(ValueError):
        crnonlin_survival(-1)


def test_crnonlin_marginal_oracle():
    # independent route: P(X > x) = sum_n 2^-(n+1) P(U 2^n > x)
    for x in (1, 2, 3, 5, 8, 13, 100):
        oracle = sum(Fraction(1, 2 ** (n + 1)) * max(Fraction(0), 1 - Fraction(x, 2**n)) for n in range(0, 60))
        assert abs(crnonlin_survival(x) - oracle) < Fraction(1, 2**50)


def test_dyadic_sum_mass_and_conditional_uniform():
    x = DyadicSimplex().sample(RngStream(5).generator(), N)
    s = x.sum(axis=1)
    for n in range(6):
        hits = int(np.sum(np.isclose(s, 2.0**n)))
        assert z_score(hits, N, 2.0 ** -(n + 1)) < 4
    sel = np.isclose(s, 8.0)
    assert stats.kstest(x[sel, 0] / 8.0, "uniform").pvalue > 1e-4


def test_dyadic_marginal_matches_exact():
    x = DyadicSimplex().sample(RngStream(6).generator(), N)[:, 0]
    for t in (1, 2, 8):
        assert z_score(int(np.sum(x > t)), N, float(crnonlin_survival(t))) < 4


def test_oscillating_survival_and_tail():
    m = OscillatingModel(0.05)
    assert m.joint_survival([0.0, 0.0]) == 1.0
    x = 1000.0
    assert 1 - 0.05 <= x * m.marginal_survival(x) <= 1 + 0.05


def test_oscillating_density_is_mixed_partial():
    m = OscillatingModel(0.2)
    rng = np.random.default_rng(0)
    pts = rng.exponential(3.0, size=(1000, 2))
    h = 1e-3 * (1 + pts.sum(axis=1))

    def S(a, b):
        return m.joint_survival(np.stack([a, b], axis=-1))

    x, y = pts[:, 0], pts[:, 1]
    fd = (S(x + h, y + h) - S(x + h, y - h) - S(x - h, y + h) + S(x - h, y - h)) / (4 * h * h)
    rel = np.abs(fd - m.density(x, y)) / m.density(x, y)
    assert rel.max() < 1e-4


def test_oscillating_density_positive_on_grid():
    m = OscillatingModel(0.999 * OSC_GAMMA_MAX)
    g = np.geomspace(1e-3, 1e6, 400)
    X, Y = np.meshgrid(np.concatenate([[0.0], g]), np.concatenate([[0.0], g]))
    assert np.all(m.density(X, Y) > 0)


def test_oscillating_gamma_range():
    with pytest.raises(ClaimModelError, match="admissible"):
        OscillatingModel(0.5)
    with pytest.raises(ClaimModelError):
        OscillatingModel(0.0)


def test_oscillating_joint_survival_mc():
    m = OscillatingModel(0.05)
    x = m.sample(RngStream(7).generator(), N)
    p = float(m.joint_survival([5.0, 5.0]))
    hits = int(np.sum((x[:, 0] > 5) & (x[:, 1] > 5)))
    assert z_score(hits, N, p) < 4


def test_oscillating_acceptance_rate_bound():
    g = 0.05
    m = OscillatingModel(g)
    lower = (2 - 4 * g - 3 * g * math.pi - math.pi**2 / 4) / (2 + 4 * g + 3 * g * math.pi + math.pi**2 / 4)
    # measured rate from one batch of proposals
    rng = np.random.default_rng(1)
    n = 200_000
    root = np.sqrt(rng.random(n))
    s = root / (1 - root)
    xx = s * rng.random(n)
    keep = rng.random(n) * m.envelope * 2 / (1 + s) ** 3 < m.density(xx, s - xx)
    rate = keep.mean()
    assert rate >= lower - 3 * math.sqrt(rate * (1 - rate) / n)
    assert abs(rate - m.acceptance_rate) < 4 * math.sqrt(rate * (1 - rate) / n)


def test_ks_sampler_vs_survival():
    laws = IndependentMarginals([Pareto(1.5), Exponential(1.0)])
    x = laws.sample(RngStream(9).generator(), N)
    n = x.shape[0]
    bound = 5 * math.sqrt(math.log(n) / n)
    for j, law in enumerate(laws.marginals):
        grid = law.quantile(np.linspace(0.01, 0.99, 50))
        emp = (x[:, j][:, None] > grid[None, :]).mean(axis=0)
        assert np.max(np.abs(emp - law.survival(grid))) < bound


def test_declared_mean_matches_samples():
    m = IndependentMarginals([Pareto(3.5), Exponential(0.5)])
    x = m.sample(RngStream(10).generator(), N)
    se = x.std(axis=0, ddof=1) / math.sqrt(N)
    assert np.all(np.abs(x.mean(axis=0) - m.mean) < 4 * se)


def test_polar_degenerate_ray_and_scalar_survival():
    m = PolarModel(AngularMeasure(atoms=[[0.5, 0.5]]), Pareto(2.0))
    x = m.sample(RngStream(11).generator(), 10_000)
    assert np.allclose(x[:, 0], x[:, 1])
    agg = HyperplaneFamily([[0.5, 0.5]])
    t = np.array([0.5, 1.0, 5.0])
    assert np.allclose(m.scalar_survival(agg, t), (2 * t) ** -2.0)
    y = agg.scale_index(x)
    assert z_score(int(np.sum(y > 5.0)), y.size, 0.01) < 4


def test_polar_uniform_radial_exponential():
    m = PolarModel(AngularMeasure.uniform(2), Exponential(1.0))
    x = m.sample(RngStream(12).generator(), 50_000)
    assert np.all(x >= 0)
    assert stats.kstest(x.sum(axis=1), "expon").pvalue > 1e-4


def test_polar_two_atoms_quadrature_vs_mc():
    m = PolarModel(AngularMeasure(atoms=[[1.0, 0.0], [0.25, 0.75]], weights=[1.0, 3.0]), Pareto(1.5), scales=[1.0, 2.0])
    fam = HyperplaneFamily([[1.0, 0.0], [0.0, 0.5]])
    y = fam.scale_index(m.sample(RngStream(13).generator(), 200_000))
    t = float(np.median(y))
    p = float(m.scalar_survival(fam, t))
    assert z_score(int(np.sum(y > t)), y.size, p) < 4


def test_polar_scale_validation():
    with pytest.raises(ClaimModelError):
        PolarModel(AngularMeasure(atoms=[[1.0, 0.0]]), Pareto(2.0), scales=[np.inf])
    with pytest.raises(ClaimModelError):
        AngularMeasure(atoms=[[0.7, 0.7]])


def test_angular_measure_mass():
    a = AngularMeasure(atoms=[[1.0, 0.0], [0.0, 1.0]], weights=[0.25, 0.75])
    assert a.total_mass == 1.0
    assert np.allclose(a.mean(), [0.25, 0.75])


def test_deterministic_and_descriptors():
    d = DeterministicClaims([1.0, 2.0])
    assert np.array_equal(d.sample(None, 3), [[1, 2]] * 3)
    for desc in ({"type": "independent", "marginals": [{"law": "pareto", "alpha": 1.5, "scale": 1}]},
                 {"type": "polar", "angular": {"atoms": [[0.5, 0.5]]}, "radial": {"law": "pareto", "alpha": 2}},
                 {"type": "dyadic_simplex"}, {"type": "oscillating", "gamma": 0.05},
                 {"type": "deterministic", "value": [3, 3]}):
        m = model_from_descriptor(desc)
        assert model_from_descriptor(m.to_descriptor()).to_descriptor() == m.to_descriptor()
    with pytest.raises(ClaimModelError, match="unknown"):
        model_from_descriptor({"type": "copula"})
    with pytest.raises(ClaimModelError, match="missing"):
        model_from_descriptor({"type": "independent"})
