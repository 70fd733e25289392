import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvsubexp.ruinsets import (BidAskError, BidAskSpec, HyperplaneFamily, LinearMapSpec, RuinSetError,
                               SolvencyRuinSet, check_set_properties, compile_bidask, family_from_descriptor,
                               pullback, validate)
from mvsubexp.selftest import random_bidask

AGG = HyperplaneFamily([[0.5, 0.5]])
UNION = HyperplaneFamily([[1.0, 0.0], [0.0, 0.5]])


def test_validate_examples():
    assert validate([[0.5, 0.5]]) is None
    assert validate([[1.0, 0.0], [0.0, 0.5]]) is None
    assert "negative component" in validate([[-1.0, 1.0]])
    assert "zero direction" in validate([[0.0, 0.0]])
    assert "empty" in validate(np.zeros((0, 2)))
    with pytest.raises(RuinSetError, match="negative component"):
        HyperplaneFamily([[-1.0, 1.0]])


def test_scale_index_examples():
    assert AGG.scale_index([3.0, 1.0]) == 2.0
    assert UNION.scale_index([0.5, 3.0]) == 1.5
    assert AGG.scale_index([0.0, 0.0]) == 0.0
    assert AGG.scale_index([-5.0, -1.0]) == 0.0
    with pytest.raises(RuinSetError, match="dimension"):
        AGG.scale_index([1.0, 2.0, 3.0])


def test_membership_examples():
    x = np.array([2.0, 2.0])
    assert AGG.membership(x, 1.0)
    assert not AGG.membership(x, 2.0)  # boundary excluded
    assert not AGG.membership(3 * x, 6.0)
    assert AGG.membership(3 * x, 5.9)
    with pytest.raises(RuinSetError):
        AGG.membership(x, 0.0)


def test_height_examples():
    assert AGG.height([0.5, 0.5]) == 2.0
    assert UNION.height([0.0, 1.0]) == 2.0
    assert HyperplaneFamily([[1.0, 0.0]]).height([0.0, 1.0]) == math.inf
    with pytest.raises(RuinSetError, match="simplex"):
        AGG.height([0.5, 0.6])


def test_excess_sojourn_examples():
    assert AGG.excess_sojourn([6.0, 2.0], [1.0, 1.0], 2.0) == 2.0
    assert AGG.excess_sojourn([1.0, 1.0], [1.0, 1.0], 2.0) == 0.0
    assert UNION.excess_sojourn([5.0, 8.0], [1.0, 2.0], 3.0) == 2.0
    with pytest.raises(RuinSetError):
        AGG.excess_sojourn([1.0, 1.0], [1.0, 0.0], 1.0)


def test_excess_sojourn_brute_force_scan():
    x, c, u = np.array([5.0, 8.0]), np.array([1.0, 2.0]), 3.0
    v = np.arange(0.0, 10.0, 1e-4)
    pts = x[None, :] - v[:, None] * c[None, :]
    length = UNION.membership(pts, u).sum() * 1e-4
    assert length == pytest.approx(UNION.excess_sojourn(x, c, u), abs=2e-4)


def _same_directions(got, expect, tol):
    got = np.array(sorted(map(tuple, np.asarray(got))))
    expect = np.array(sorted(map(tuple, np.asarray(expect))))
    return got.shape == expect.shape and np.allclose(got, expect, atol=tol)


def test_compile_bidask_examples():
    free = compile_bidask(BidAskSpec(np.ones((2, 2)), [0.5, 0.5]))
    assert _same_directions(free.directions, [[1.0, 1.0]], 1e-12)
    two = compile_bidask(BidAskSpec([[1, 2], [2, 1]], [1.0, 1.0]))
    assert _same_directions(two.directions, [[1 / 3, 2 / 3], [2 / 3, 1 / 3]], 1e-12)
    wide = compile_bidask(BidAskSpec([[1, 1e6], [1e6, 1]], [0.5, 0.5]))
    assert _same_directions(wide.directions, [[2.0, 0.0], [0.0, 2.0]], 1e-5)


def test_compiled_directions_normalised_to_b():
    spec = BidAskSpec([[1, 1.5, 2], [1.2, 1, 1.4], [1.3, 1.1, 1]], [0.2, 0.3, 0.5])
    fam = compile_bidask(spec)
    assert np.allclose(fam.directions @ spec.b, 1.0)


def test_bidask_constraint_names():
    with pytest.raises(BidAskError, match=r"constraint \(i\)"):
        BidAskSpec([[1, 0.5], [2, 1]], [0.5, 0.5])
    with pytest.raises(BidAskError, match=r"constraint \(ii\)"):
        BidAskSpec([[2, 2], [2, 1]], [0.5, 0.5])
    with pytest.raises(BidAskError, match=r"constraint \(iii\)"):
        BidAskSpec([[1, 5, 1], [1, 1, 1], [1, 1, 1]], [0.2, 0.3, 0.5])


def test_compiled_matches_lp_and_solvency_set():
    rng = np.random.default_rng(0)
    for d in (2, 3):
        spec = random_bidask(rng, d)
        fam = compile_bidask(spec)
        lp = SolvencyRuinSet(spec)
        x = rng.normal(scale=2.0, size=(200, d))
        assert np.allclose(fam.scale_index(x), lp.scale_index(x), atol=1e-9)
        for xi in x[:50]:
            if abs(fam.scale_index(xi) - 1.0) > 1e-9:
                assert fam.membership(xi, 1.0) == spec.cone_membership(xi, 1.0)
        c = rng.exponential(size=d) + 0.1
        assert np.allclose(fam.excess_sojourn(x[:40], c, 0.5), lp.excess_sojourn(x[:40], c, 0.5), atol=1e-9)


def test_solvency_set_four_dimensional():
    rng = np.random.default_rng(4)
    spec = random_bidask(rng, 4)
    lp = family_from_descriptor({"type": "bidask", "pi": spec.pi.tolist(), "b": spec.b.tolist()})
    assert isinstance(lp, SolvencyRuinSet)
    for x in rng.normal(scale=2.0, size=(30, 4)):
        y = lp.scale_index(x)
        if abs(y - 1.0) > 1e-7:
            assert lp.membership(x, 1.0) == spec.cone_membership(x, 1.0)
    assert check_set_properties(lp, rng, 40) == []


def test_pullback_examples():
    T = np.eye(2)
    assert np.array_equal(pullback(AGG, LinearMapSpec(T)).directions, AGG.directions)
    agg = pullback(HyperplaneFamily([[1.0]]), LinearMapSpec([[1.0, 1.0]]))
    assert np.array_equal(agg.directions, [[1.0, 1.0]])
    pb = pullback(AGG, LinearMapSpec([[2.0, 0.0], [0.0, 0.0]]))
    assert np.array_equal(pb.directions, [[1.0, 0.0]])
    x = np.random.default_rng(1).normal(scale=3, size=(1000, 2))
    Tx = x @ np.array([[2.0, 0.0], [0.0, 0.0]]).T
    assert np.array_equal(pb.membership(x, 1.0), AGG.membership(Tx, 1.0))
    with pytest.raises(RuinSetError, match="annihilated"):
        pullback(HyperplaneFamily([[0.0, 1.0]]), LinearMapSpec([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(RuinSetError, match="nonnegative"):
        LinearMapSpec([[1.0, -1.0]])


def test_prune_keeps_membership():
    fam = HyperplaneFamily([[1.0, 0.0], [0.0, 1.0], [0.4, 0.4], [1.0, 0.0]])
    pruned = fam.prune()
    assert len(pruned) == 2
    x = np.random.default_rng(2).normal(scale=2, size=(2000, 2))
    assert np.array_equal(pruned.membership(x, 1.0), fam.membership(x, 1.0))


def test_descriptor_sugar():
    agg = family_from_descriptor({"type": "aggregate", "weights": [1, 2], "capital": 2})
    assert np.allclose(agg.directions, [[0.5, 1.0]])
    uni = family_from_descriptor({"type": "union", "thresholds": [1, 2, 4]})
    assert np.allclose(uni.directions, np.diag([1, 0.5, 0.25]))
    hyp = family_from_descriptor(AGG.to_descriptor())
    assert np.array_equal(hyp.directions, AGG.directions)
    with pytest.raises(RuinSetError, match="unknown"):
        family_from_descriptor({"type": "ball"})


# properties -------------------------------------------------------------------------------------

dims = st.integers(1, 4)


@st.composite
def families(draw):
    d = draw(dims)
    k = draw(st.integers(1, 4))
    # zero or at least 1e-6, so heights 1/p stay finite
    P = draw(arrays(float, (k, d), elements=st.one_of(st.just(0.0), st.floats(1e-6, 10))))
    for row in P:
        if not row.any():
            row[0] = 1.0
    return HyperplaneFamily(P)


@st.composite
def family_and_point(draw):
    fam = draw(families())
    x = draw(arrays(float, (fam.dim,), elements=st.floats(-50, 50)))
    return fam, x


@settings(max_examples=200, deadline=None)
@given(family_and_point(), st.floats(1e-3, 1e3))
def test_homogeneity(fx, lam):
    fam, x = fx
    y = fam.scale_index(x)
    assert fam.scale_index(lam * x) == pytest.approx(lam * y, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(family_and_point(), st.data())
def test_monotonicity_and_nesting(fx, data):
    fam, x = fx
    a = data.draw(arrays(float, (fam.dim,), elements=st.floats(0, 50)))
    assert fam.scale_index(x + a) >= fam.scale_index(x) - 1e-12
    u1 = data.draw(st.floats(1e-3, 100))
    u2 = data.draw(st.floats(1e-3, u1))
    if fam.membership(x, u1):
        assert fam.membership(x, u2)
        assert fam.membership(x + a, u1)


@settings(max_examples=200, deadline=None)
@given(families(), st.data())
def test_height_scale_duality(fam, data):
    w = data.draw(arrays(float, (fam.dim,), elements=st.floats(0.01, 1)))
    theta = w / w.sum()
    theta[-1] = 1.0 - theta[:-1].sum()
    if theta[-1] < 0:
        return
    s = fam.scale_index(theta)
    if s > 0:
        assert fam.height(theta) * s == pytest.approx(1.0, rel=1e-12)
    else:
        assert fam.height(theta) == math.inf


@settings(max_examples=200, deadline=None)
@given(family_and_point(), st.data())
def test_complement_convex(fx, data):
    fam, x = fx
    y = data.draw(arrays(float, (fam.dim,), elements=st.floats(-50, 50)))
    t = data.draw(st.floats(0, 1))
    u = data.draw(st.floats(0.01, 10))
    if not fam.membership(x, u) and not fam.membership(y, u):
        assert fam.scale_index(t * x + (1 - t) * y) <= u * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(family_and_point(), st.data())
def test_pullback_commutes(fx, data):
    fam, _ = fx
    d = data.draw(dims)
    T = data.draw(arrays(float, (fam.dim, d), elements=st.floats(0, 5)))
    if not np.any(fam.directions @ T > 0):
        return
    pb = pullback(fam, LinearMapSpec(T))
    x = data.draw(arrays(float, (d,), elements=st.floats(-20, 20)))
    assert pb.scale_index(x) == pytest.approx(fam.scale_index(T @ x), rel=1e-10, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(family_and_point(), st.floats(0.1, 10), st.floats(0.1, 10))
def test_scaled_family(fx, lam, u):
    fam, x = fx
    assert fam.scaled(lam).membership(x, lam * u) == fam.membership(x, u) or \
        abs(fam.scale_index(x) - u) < 1e-9 * (1 + u)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_bidask_compilation_property(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_bidask(rng, d)
    fam = compile_bidask(spec)
    assert np.all(fam.directions >= 0)
    for x in rng.normal(scale=2.0, size=(20, d)):
        u = rng.exponential() + 0.1
        if abs(fam.scale_index(x) - u) > 1e-9:
            assert fam.membership(x, u) == spec.cone_membership(x, u)
