"""The ruin asymptote ``H(u) = int_0^inf F(uA + v c) dv`` and related constants.

``H`` is evaluated three ways: a Monte Carlo average of the excess sojourn
``V(X, u)``, deterministic quadrature for independent analytic marginals or
atomic polar models, and the regular-variation closed form
``u P(|X|_1 > u) C(A, c)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .claims import AngularMeasure, ClaimModel, DeterministicClaims, IndependentMarginals, PolarModel
from .diagnostics import TailCurve, _check_levels
from .parallel import map_blocks
from .quadrature import integrate_halfline
from .ruinsets import HyperplaneFamily
from .stats import median_of_means
from .streams import as_stream

log = logging.getLogger(__name__)

QUAD_RTOL = 1e-10
MOM_BLOCKS = 16


class AsymptoticsError(ValueError):
    pass


@dataclass(frozen=True)
class SafetyLoading:
    """Drift ``c = E[Y] p - E[X]`` per claim; must be strictly positive."""

    c: tuple
    provenance: str = "analytic"
    stderr: tuple | None = None

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        if not all(math.isfinite(v) and v > 0 for v in c):
            raise AsymptoticsError(f"safety loading must be positive in every component, got {c}")
        object.__setattr__(self, "c", c)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.c)


def safety_loading(model: ClaimModel, premium, mean_interarrival: float, stream=None, n: int = 10**6) -> SafetyLoading:
    """Analytic loading when the claim mean is closed-form, else an MC estimate (rejected unless > 0 at 3 sigma)."""
    premium = np.asarray(premium, dtype=float)
    try:
        mean = np.asarray(model.mean, dtype=float)
    except NotImplementedError:
        mean = None
    if mean is not None:
        if not np.all(np.isfinite(mean)):
            raise AsymptoticsError("claim law has an infinite mean; the safety loading is undefined")
        return SafetyLoading(tuple(mean_interarrival * premium - mean))
    if stream is None:
        raise AsymptoticsError("claim mean is not closed-form; supply a stream for an MC estimate")
    x = model.sample(as_stream(stream).generator(), n)
    c = mean_interarrival * premium - x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(n)
    if np.any(c - 3 * se <= 0):
        raise AsymptoticsError(f"safety loading not positive at 3 sigma: c={c}, stderr={se}")
    return SafetyLoading(tuple(c), "mc-estimated", tuple(se))


def _c_vector(c) -> np.ndarray:
    if isinstance(c, SafetyLoading):
        return c.vector
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(c <= 0):
        raise AsymptoticsError("drift vector c must be strictly positive")
    return c


@dataclass
class Estimate:
    value: float
    stderr: float
    method: str
    extra: dict = field(default_factory=dict)


def theta_normalizer(model: ClaimModel, c, n: int | None = None, stream=None) -> Estimate:
    """``theta = E[min_j X_j / c_j]``, the total mass before normalising ``F^I``."""
    c = _c_vector(c)
    if isinstance(model, DeterministicClaims):
        return Estimate(float(np.min(model.value / c)), 0.0, "closed_form")
    if isinstance(model, IndependentMarginals):
        if not all(math.isfinite(m.mean) for m in model.marginals):
            raise AsymptoticsError("theta needs finite marginal means")
        f = lambda v: float(np.prod([m.survival(v * cj) for m, cj in zip(model.marginals, c)]))
        edges = [m.support_edge / cj for m, cj in zip(model.marginals, c)]
        res = integrate_halfline(f, scale=max(max(edges), 1.0), breakpoints=edges, rtol=QUAD_RTOL)
        return Estimate(res.value, 0.0, "quadrature", {"quadrature_error": res.error})
    if n is None or stream is None:
        raise AsymptoticsError("theta for this model needs n and a stream for MC")
    vals = np.concatenate(map_blocks(lambda g, k: np.min(model.sample(g, k) / c, axis=1), n, as_stream(stream)))
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), "mc")


# H(u) by Monte Carlo ---------------------------------------------------------------------------


def h_curve_mc(model: ClaimModel, family: HyperplaneFamily, c, levels, n: int, stream, threads=None) -> TailCurve:
    """Average of the excess sojourn ``V(X, u)`` over ``n`` claims, for every level at once.

    The point estimate is the plain mean.  When a single sample carries more
    than 10% of the sum the variance estimate is unreliable; the level is then
    flagged and its standard error comes from median-of-means over 16 groups.
    """
    c = _c_vector(c)
    levels = _check_levels(levels)
    rates = family.directions @ c
    if np.any(rates <= 0):
        raise AsymptoticsError("every direction must have p.c > 0")

    def run(g, k):
        proj = family.projections(model.sample(g, k))  # (k, K)
        v = np.maximum(((proj[:, None, :] - levels[None, :, None]) / rates).max(axis=2), 0.0)  # (k, L)
        return v

    vals = np.concatenate(map_blocks(run, n, as_stream(stream), threads=threads), axis=0)
    total = vals.sum(axis=0)
    mean = total / n
    stderr = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(levels.size)
    flags, mom = [], []
    for j in range(levels.size):
        mm, mse = median_of_means(vals[:, j], MOM_BLOCKS)
        mom.append(mm)
        heavy = total[j] > 0 and vals[:, j].max() > 0.1 * total[j]
        if heavy:
            stderr[j] = max(stderr[j], mse)
        if total[j] == 0:
            flags.append("no sample reached the level; estimate is 0 with unknown error")
        else:
            flags.append("heavy-tail: top sample >10% of sum; stderr from median-of-means" if heavy else "")
    return TailCurve(levels, mean, stderr, "mc", n, flags, {"median_of_means": mom})


# H(u) by quadrature ----------------------------------------------------------------------------


def _axis_thresholds(family: HyperplaneFamily):
    """For a union of coordinate half-spaces, the weight per axis (largest wins), else None."""
    P = family.directions
    if np.any((P > 0).sum(axis=1) != 1):
        return None
    w = np.zeros(family.dim)
    for p in P:
        j = int(np.argmax(p))
        w[j] = max(w[j], p[j])
    return w


def _union_integrand(marginals, w, c, u):
    axes = [j for j in range(len(w)) if w[j] > 0]
    subsets = [J for r in range(1, len(axes) + 1) for J in itertools.combinations(axes, r)]

    def f(v):
        tails = {j: float(marginals[j].survival(u / w[j] + v * c[j])) for j in axes}
        return sum((-1) ** (len(J) + 1) * math.prod(tails[j] for j in J) for J in subsets)

    kinks = [(m.support_edge - u / w[j]) / c[j] for j, m in enumerate(marginals) if w[j] > 0]
    return f, [k for k in kinks if k > 0]


class _ScaledLaw:
    """Law of ``s X`` for a fixed ``s > 0``."""

    def __init__(self, law, s):
        self.law, self.s = law, s
        self.mean = s * law.mean
        self.support_edge = s * law.support_edge

    def survival(self, t):
        return self.law.survival(np.asarray(t) / self.s)

    def stop_loss(self, t):
        return self.s * self.law.stop_loss(np.asarray(t) / self.s)

    def quantile(self, q):
        return self.s * self.law.quantile(q)


class _SumLaw:
    """Law of ``A + B`` for independent nonnegative ``A``, ``B`` built by 1-D convolution integrals."""

    def __init__(self, a, b):
        self.a, self.b = a, b
        self.mean = a.mean + b.mean
        self.support_edge = a.support_edge + b.support_edge

    def survival(self, t):
        t = float(t)
        if t < self.support_edge:
            return 1.0
        # P(A + B > t) = P(B > t) + int_0^{F_B(t)} P(A > t - q_B(w)) dw
        fb = 1.0 - float(self.b.survival(t))
        val, _ = integrate.quad(lambda w: float(self.a.survival(t - self.b.quantile(w))), 0.0, fb,
                                epsrel=1e-10, limit=200)
        return float(self.b.survival(t)) + val

    def stop_loss(self, t):
        t = float(t)
        if t <= self.support_edge:
            return self.mean - t
        # E(A + B - t)^+ = SL_A(t) + SL_B(t) + int_0^t P(A > t - z) P(B > z) dz
        pts = sorted({x for x in (self.a.support_edge, t - self.a.support_edge, self.b.support_edge) if 0 < x < t})
        val, _ = integrate.quad(lambda z: float(self.a.survival(t - z)) * float(self.b.survival(z)), 0.0, t,
                                points=pts or None, epsrel=1e-10, limit=200)
        return float(self.a.stop_loss(t)) + float(self.b.stop_loss(t)) + val


def _projected_law(marginals, p):
    parts = [_ScaledLaw(m, pj) for m, pj in zip(marginals, p) if pj > 0]
    law = parts[0]
    for nxt in parts[1:]:
        law = _SumLaw(law, nxt)
    return law


def h_value_quadrature(model: ClaimModel, family: HyperplaneFamily, c, u: float):
    """``(H(u), error estimate)`` by deterministic quadrature, or raise for unsupported inputs."""
    c = _c_vector(c)
    if isinstance(model, DeterministicClaims):
        return float(family.excess_sojourn(model.value, c, u)), 0.0
    if isinstance(model, PolarModel) and model.angular.is_atomic:
        return _polar_h(model, family, c, u)
    if not isinstance(model, IndependentMarginals):
        raise AsymptoticsError("quadrature needs independent analytic marginals or an atomic polar model")
    marg = model.marginals
    w = _axis_thresholds(family)
    if w is not None:
        f, kinks = _union_integrand(marg, w, c, u)
        scale = max(1.0, u / max(c.max(), 1e-300))
        res = integrate_halfline(f, scale=scale, breakpoints=kinks, rtol=QUAD_RTOL)
        return res.value, res.error
    if len(family) == 1:
        p = family.directions[0]
        law = _projected_law(marg, p)
        return float(law.stop_loss(u)) / float(p @ c), 1e-9 * float(law.stop_loss(u))
    raise AsymptoticsError("quadrature supports coordinate unions or a single direction; use h_curve_mc")


def _polar_h(model: PolarModel, family, c, u):
    probs = model.angular.probabilities()
    scales = model._atom_scales()
    total, err = 0.0, 0.0
    rates = family.directions @ c
    for prob, theta, a in zip(probs, model.angular.atoms, scales):
        b = family.directions @ theta
        live = b > 0
        if not np.any(live):
            continue
        bl, rl = b[live], rates[live]

        def f(v, bl=bl, rl=rl, a=a):
            return float(model.radial.survival(np.min((u + v * rl) / (a * bl))))

        kinks = _breakpoints(u, rl, bl) + _edge_kink(model.radial.support_edge * a, u, rl, bl)
        res = integrate_halfline(f, scale=max(1.0, u / rl.max()), breakpoints=kinks, rtol=QUAD_RTOL)
        total += prob * res.value
        err += prob * res.error
    return total, err


def _breakpoints(u, rates, b):
    """``v`` values where the minimising direction of ``(u + v r_k) / b_k`` changes."""
    out = []
    for i, j in itertools.combinations(range(len(b)), 2):
        den = rates[i] / b[i] - rates[j] / b[j]
        if den != 0:
            v = (u / b[j] - u / b[i]) / den
            if v > 0:
                out.append(float(v))
    return out


def _edge_kink(edge, u, rates, b):
    out = []
    for r, bb in zip(rates, b):
        v = (edge * bb - u) / r
        if v > 0:
            out.append(float(v))
    return out


def h_curve_quadrature(model: ClaimModel, family: HyperplaneFamily, c, levels) -> TailCurve:
    levels = _check_levels(levels)
    vals, errs = zip(*(h_value_quadrature(model, family, c, float(u)) for u in levels))
    method = "closed_form" if isinstance(model, DeterministicClaims) else "quadrature"
    return TailCurve(levels, np.array(vals), np.zeros(levels.size), method, 0, aux={"quadrature_error": list(errs)})


def fI_scalar_survival(model: ClaimModel, family: HyperplaneFamily, c, levels, theta: float | None = None,
                       curve: TailCurve | None = None) -> TailCurve:
    """``H(u) / theta``, clipped to ``[0, 1]``, as a survival curve of the scalarized integrated law.

    In dimension one this is exactly the integrated-tail survival.  In higher
    dimension ``H(0+) >= theta``, so the curve is capped at 1 near the origin.
    """
    if curve is None:
        curve = h_curve_quadrature(model, family, c, levels)
    if theta is None:
        theta = theta_normalizer(model, c).value
    raw = curve.values / theta
    flags = ["capped at 1" if r > 1 else "" for r in raw]
    return TailCurve(curve.levels, np.minimum(raw, 1.0), curve.stderr / theta, curve.method, curve.n, flags,
                     {"theta": theta})


def h_one_dim(law, c: float, u):
    """``H(u) = (1/c) int_u^inf F(v) dv`` for the half-line ruin set (1, inf)."""
    return np.asarray(law.stop_loss(u)) / c


# regular variation -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MrvDescriptor:
    """Tail index, angular measure (total mass 1 on the L1 simplex) and ``u -> P(|X|_1 > u)``."""

    alpha: float
    angular: AngularMeasure
    norm_survival: object

    def __post_init__(self):
        if not self.alpha > 1:
            raise AsymptoticsError("MRV ruin constant needs alpha > 1 (finite mean)")
        if self.angular.is_atomic and abs(self.angular.total_mass - 1.0) > 1e-12:
            raise AsymptoticsError("angular measure must have total mass 1")


def mrv_descriptor(model: ClaimModel) -> MrvDescriptor:
    info = model.mrv
    if info is None:
        raise AsymptoticsError("model does not expose a regular-variation descriptor")
    return MrvDescriptor(*info)


def _atom_constant(alpha, theta, family, c):
    """Exact ``int_0^inf min_k(a_k + s_k v)^-alpha dv`` by walking the lower envelope of the lines."""
    b = family.directions @ theta
    live = b > 0
    if not np.any(live):
        return 0.0, 0.0
    a = 1.0 / b[live]
    s = (family.directions @ c)[live] * a
    j = int(np.lexsort((s, a))[0])
    v0, total = 0.0, 0.0
    while True:
        steeper = s < s[j]
        cross = np.full(a.size, np.inf)
        cross[steeper] = (a[steeper] - a[j]) / (s[j] - s[steeper])
        cross[cross < v0] = np.inf
        k = int(np.argmin(cross))
        v1 = cross[k]
        lo = (a[j] + s[j] * v0) ** (1.0 - alpha)
        hi = 0.0 if not np.isfinite(v1) else (a[j] + s[j] * v1) ** (1.0 - alpha)
        total += (lo - hi) / (s[j] * (alpha - 1.0))
        if not np.isfinite(v1):
            return float(total), 0.0
        j, v0 = k, v1


def mrv_ruin_constant(mrv: MrvDescriptor, family: HyperplaneFamily, c, n: int = 20000, stream=None) -> Estimate:
    """``int_0^inf mu(A + v c) dv`` with ``mu(A + v c) = int sigma(dtheta) [min_k (1 + v p_k.c) / p_k.theta]^-alpha``.

    Atomic angular measures are integrated deterministically; Dirichlet
    measures average ``n`` angular draws.
    """
    c = _c_vector(c)
    if not mrv.alpha > 1:
        raise AsymptoticsError("alpha must exceed 1")
    ang = mrv.angular
    if ang.is_atomic:
        total, err = 0.0, 0.0
        for w, theta in zip(ang.probabilities(), ang.atoms):
            val, e = _atom_constant(mrv.alpha, theta, family, c)
            total += w * val
            err += w * e
        return Estimate(total, 0.0, "quadrature", {"alpha": mrv.alpha, "quadrature_error": err})
    if stream is None:
        raise AsymptoticsError("non-atomic angular measure needs a stream for MC integration")
    thetas = ang.sample(as_stream(stream).generator(), n)
    vals = np.array([_atom_constant(mrv.alpha, th, family, c)[0] for th in thetas])
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), "mc", {"alpha": mrv.alpha})


def mrv_asymptote(mrv: MrvDescriptor, family: HyperplaneFamily, c, levels, constant: Estimate | None = None) -> TailCurve:
    """``u P(|X|_1 > u) C(A, c)`` on a grid."""
    levels = _check_levels(levels)
    if constant is None:
        constant = mrv_ruin_constant(mrv, family, c)
    vals = np.array([u * mrv.norm_survival(u) * constant.value for u in levels])
    return TailCurve(levels, vals, vals * (constant.stderr / constant.value if constant.value else 0.0),
                     "closed_form" if constant.method != "mc" else "mc", aux={"constant": constant.value})
