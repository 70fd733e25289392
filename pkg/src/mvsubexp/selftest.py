"""Fast self-check: geometry invariants, dyadic simplex exact values and a Cramér-Lundberg oracle.

Statistical checks use 5-sigma binomial margins, so any seed passes.
"""

from __future__ import annotations

import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .claims import DyadicSimplex, IndependentMarginals, crnonlin_sum_survival, crnonlin_survival
from .laws import Exponential
from .ruinsets import (BidAskSpec, HyperplaneFamily, LinearMapSpec, RuinSetError, check_set_properties,
                       compile_bidask, family_from_descriptor, pullback, validate)
from .simulator import RiskConfig, simulate_ruin_curve
from .stats import binomial_stderr
from .streams import RngStream

SIGMA = 5.0
INVARIANTS = ("homogeneity", "monotonicity", "nesting", "height-scale", "pullback")


def random_family(rng: np.random.Generator, d: int | None = None) -> HyperplaneFamily:
    d = d or int(rng.integers(1, 5))
    K = int(rng.integers(1, 5))
    P = rng.exponential(size=(K, d)) * (rng.random((K, d)) < 0.7)
    for k in range(K):
        if not P[k].any():
            P[k, rng.integers(d)] = rng.exponential()
    return HyperplaneFamily(P)


def geometry_checks(family: HyperplaneFamily, rng: np.random.Generator, n: int, tol: float = 1e-12) -> dict:
    """Count violations of each geometric invariant over ``n`` random draws."""
    d = family.dim
    x = rng.normal(scale=3.0, size=(n, d))
    lam = rng.exponential(size=n) + 1e-3
    a = rng.exponential(size=(n, d))
    u = rng.exponential(size=n) + 1e-3
    v = u * (1.0 + rng.exponential(size=n))
    y = family.scale_index(x)
    fails = dict.fromkeys(INVARIANTS, 0)
    fails["homogeneity"] = int(np.sum(np.abs(family.scale_index(lam[:, None] * x) - lam * y) > tol * (1 + lam * np.abs(y))))
    inside = family.membership(x, u)
    fails["monotonicity"] = int(np.sum(inside & ~family.membership(x + a, u))
                                + np.sum(family.scale_index(x + a) < y - tol * (1 + np.abs(y))))
    fails["nesting"] = int(np.sum(family.membership(x, v) & ~inside))
    theta = rng.dirichlet(np.ones(d), size=n)
    for th in theta:
        h = family.height(th)
        s = family.scale_index(th)
        if s > 0 and abs(h * s - 1.0) > 1e-12:
            fails["height-scale"] += 1
    T = rng.exponential(size=(d, d)) * (rng.random((d, d)) < 0.6)
    T[np.arange(d), np.arange(d)] += 0.1
    pb = pullback(family, LinearMapSpec(T))
    fails["pullback"] = int(np.sum(np.abs(pb.scale_index(x) - family.scale_index(x @ T.T)) > 1e-9 * (1 + np.abs(y))))
    return fails


def random_bidask(rng: np.random.Generator, d: int) -> BidAskSpec:
    """Valid bid-ask matrix: shortest-path closure of random rates >= 1 enforces the triangle constraint."""
    pi = np.exp(rng.exponential(0.5, size=(d, d)))
    np.fill_diagonal(pi, 1.0)
    for k in range(d):
        pi = np.minimum(pi, pi[:, [k]] * pi[[k], :])
    b = rng.dirichlet(np.ones(d))
    return BidAskSpec(pi, b)


def bidask_disagreements(spec: BidAskSpec, rng: np.random.Generator, n: int, tol: float = 1e-9) -> int:
    """Points where compiled membership and the direct LP cone test disagree, excluding a ``tol`` band at the boundary."""
    fam = compile_bidask(spec)
    x = rng.normal(scale=2.0, size=(n, spec.dim))
    y = fam.scale_index(x)
    bad = 0
    for xi, yi in zip(x, y):
        if abs(yi - 1.0) <= tol:
            continue
        if fam.membership(xi, 1.0) != spec.cone_membership(xi, 1.0):
            bad += 1
    return bad


def _check_user_set(path, rng) -> list[str]:
    desc = json.loads(Path(path).read_text())
    if desc.get("type") == "hyperplanes":
        problem = validate(np.array(desc.get("directions", []), dtype=float, ndmin=2))
        if problem:
            return [f"direction table: {problem}"]
    try:
        fam = family_from_descriptor(desc)
    except RuinSetError as exc:
        return [f"ruin set: {exc}"]
    problems = check_set_properties(fam, rng, 2000)
    if isinstance(fam, HyperplaneFamily):
        problems += [f"{k}: {v} violations" for k, v in geometry_checks(fam, rng, 2000).items() if v]
    return problems


def run_checks(seed: int = 20240601, ruin_set=None, out=print) -> bool:
    root = RngStream(seed)
    rng = root.spawn(0).generator()
    ok = True

    def report(name, passed, detail=""):
        nonlocal ok
        ok &= bool(passed)
        out(f"{'PASS' if passed else 'FAIL'} {name}{': ' + detail if detail else ''}")

    if ruin_set is not None:
        problems = _check_user_set(ruin_set, rng)
        report("user ruin set", not problems, "; ".join(problems))

    totals = dict.fromkeys(INVARIANTS, 0)
    for _ in range(20):
        for k, v in geometry_checks(random_family(rng), rng, 100).items():
            totals[k] += v
    bad = {k: v for k, v in totals.items() if v}
    report("geometry invariants (2000 draws)", not bad, ", ".join(f"{k} {v}" for k, v in bad.items()))

    diffs = sum(bidask_disagreements(random_bidask(rng, d), rng, 100) for d in (2, 3) for _ in range(3))
    two = compile_bidask(BidAskSpec([[1, 2], [2, 1]], [1.0, 1.0])).directions
    expect = np.array([[1 / 3, 2 / 3], [2 / 3, 1 / 3]])
    report("bid-ask compilation", diffs == 0 and np.allclose(np.sort(two, axis=0), np.sort(expect, axis=0), atol=1e-12),
           f"{diffs} disagreements")

    exact = [crnonlin_survival(x) for x in (1, 2, 8)] == [Fraction(1, 3), Fraction(1, 6), Fraction(1, 24)]
    halves = all(crnonlin_sum_survival(2**n) / crnonlin_sum_survival(2**n - 1) == Fraction(1, 2) for n in range(1, 11))
    n = 10**5
    xs = DyadicSimplex().sample(root.spawn(1).generator(), n)[:, 0]
    zs = [abs(np.mean(xs > x) - p) / binomial_stderr(p * n, n) for x, p in ((1, 1 / 3), (2, 1 / 6), (8, 1 / 24))]
    report("dyadic simplex exact values", exact and halves and max(zs) < SIGMA, f"max z {max(zs):.2f}")

    cfg = RiskConfig(IndependentMarginals([Exponential(1.0)]), Exponential(1.0), [1.25], HyperplaneFamily([[1.0]]))
    n = 10**4
    est = simulate_ruin_curve(cfg, [1e-9, 10.0], n, root.spawn(2))
    targets = [0.8, 0.8 * math.exp(-2.0)]
    zs = [abs(e.estimate - p) / binomial_stderr(p * n, n) for e, p in zip(est, targets)]
    report("Cramer-Lundberg oracle", max(zs) < SIGMA,
           f"psi(0+) {est[0].estimate:.4f}, psi(10) {est[1].estimate:.4f}, max z {max(zs):.2f}")

    return ok


def selftest(seed: int = 20240601, ruin_set=None) -> int:
    t0 = time.perf_counter()
    ok = run_checks(seed, ruin_set)
    print(f"selftest {'passed' if ok else 'FAILED'} in {time.perf_counter() - t0:.1f} s")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(selftest())
