"""Finite-sample diagnostics for subexponential, long-tailed and dominated-varying scalarized laws.

Every check evaluates a ratio on a grid of levels and returns a
``RatioVerdict``.  A verdict only says whether the data are consistent with
the limiting statement over the tested range; it is never a proof.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .claims import ClaimModel
from .parallel import DEFAULT_BLOCK, map_blocks
from .stats import binomial_stderr, ratio_interval, wilson_interval
from .streams import as_stream

log = logging.getLogger(__name__)

MIN_HITS = 20
METHODS = ("mc", "quadrature", "closed_form")


class DiagnosticError(ValueError):
    pass


@dataclass
class TailCurve:
    """Estimates on an increasing grid of levels, with provenance."""

    levels: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    method: str
    n: int = 0
    flags: list = field(default_factory=list)  # per-point notes, "" when clean
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.method not in METHODS:
            raise DiagnosticError(f"unknown method tag {self.method!r}")
        if self.levels.ndim != 1 or np.any(np.diff(self.levels) <= 0):
            raise DiagnosticError("levels must be strictly increasing")
        if self.values.shape != self.levels.shape or self.stderr.shape != self.levels.shape:
            raise DiagnosticError("levels, values and stderr must have equal length")
        if np.any(self.stderr < 0):
            raise DiagnosticError("negative standard error")
        if not self.flags:
            self.flags = [""] * self.levels.size

    def rows(self):
        for u, v, s in zip(self.levels, self.values, self.stderr):
            yield {"level": float(u), "estimate": float(v), "stderr": float(s), "method": self.method, "n": self.n}


@dataclass
class RatioPoint:
    u: float
    ratio: float
    lo: float
    hi: float

    def covers(self, target: float) -> bool:
        return self.lo <= target <= self.hi


@dataclass
class RatioVerdict:
    target: float
    points: list
    verdict: str
    note: str = ""
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points])

    def to_json(self) -> dict:
        out = {
            "target": self.target,
            "points": [{"u": p.u, "ratio": p.ratio, "lo": p.lo, "hi": p.hi} for p in self.points],
            "verdict": self.verdict,
            "note": self.note,
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out


SCOPE_NOTE = "consistent/inconsistent with the limit over the tested range only"


def decide(points, target: float, last: int = 3) -> str:
    """Verdict from the final ``last`` points: all cover -> consistent, all exclude -> inconsistent."""
    tail = points[-last:]
    if len(tail) < last or any(not (np.isfinite(p.lo) and np.isfinite(p.hi)) for p in tail):
        return "inconclusive"
    cover = [p.covers(target) for p in tail]
    if all(cover):
        return "consistent"
    if not any(cover):
        return "inconsistent"
    return "inconclusive"


def _check_levels(levels) -> np.ndarray:
    levels = np.asarray(levels, dtype=float).reshape(-1)
    if levels.size == 0 or np.any(levels <= 0) or np.any(np.diff(levels) <= 0):
        raise DiagnosticError("level grid must be positive and strictly increasing")
    return levels


def _count_exceed(y: np.ndarray, levels: np.ndarray) -> np.ndarray:
    ys = np.sort(y)
    return ys.size - np.searchsorted(ys, levels, side="right")


def scalar_samples(model: ClaimModel, family, n: int, stream, block: int = DEFAULT_BLOCK, threads=None) -> np.ndarray:
    """``Y_A(X)`` for ``n`` claims, in block order."""
    parts = map_blocks(lambda g, k: family.scale_index(model.sample(g, k)), n, as_stream(stream), block, threads)
    return np.concatenate(parts)


def quantile_levels(model, family, probs, n: int, stream) -> np.ndarray:
    """Empirical quantiles of ``Y_A(X)``; used to place grid tops."""
    y = scalar_samples(model, family, n, stream)
    return np.quantile(y, np.asarray(probs, dtype=float))


def empirical_FA(model: ClaimModel, family, levels, n: int, stream, threads=None) -> TailCurve:
    """Estimate ``F(uA) = P(Y_A(X) > u)`` on a grid from one pass of ``n`` samples."""
    levels = _check_levels(levels)
    counts = sum(
        map_blocks(lambda g, k: _count_exceed(family.scale_index(model.sample(g, k)), levels),
                   n, as_stream(stream), threads=threads)
    )
    values = counts / n
    stderr = np.array([binomial_stderr(int(k), n) for k in counts])
    flags = ["" if k >= MIN_HITS else "inconclusive: fewer than 20 hits" for k in counts]
    lohi = [wilson_interval(int(k), n) for k in counts]
    return TailCurve(levels, values, stderr, "mc", n, flags, {"hits": counts.tolist(), "wilson": lohi})


def _sum_block(model, family, m, levels):
    def run(g, k):
        xs = model.sample(g, k * m).reshape(k, m, -1)
        total = family.scale_index(xs.sum(axis=1))
        parts = family.scale_index(xs)  # (k, m)
        upper = parts.sum(axis=1)
        lower = parts.max(axis=1)
        return np.stack([_count_exceed(total, levels), _count_exceed(upper, levels), _count_exceed(lower, levels)])

    return run


def convolution_ratio_mc(model: ClaimModel, family, m: int, levels, n: int, stream, threads=None) -> RatioVerdict:
    """Estimate ``F^{*m}(uA) / F(uA)`` with target ``m``.

    Numerator and denominator use independent child streams.  The upper
    bound ``P(sum_i Y_A(X_i) > u)`` and the lower bound ``P(max_i Y_A(X_i) > u)``
    are counted on the numerator samples, so they bracket it pathwise; the
    analytic lower bound ``1 - (1 - F_A(u))^m`` from the denominator is also
    checked within 3 standard errors.
    """
    if m < 1:
        raise DiagnosticError("m must be at least 1")
    levels = _check_levels(levels)
    stream = as_stream(stream)
    den = empirical_FA(model, family, levels, n, stream.spawn(0), threads)
    k_den = np.asarray(den.aux["hits"])
    if m == 1:
        pts = [RatioPoint(float(u), 1.0, 1.0, 1.0) for u in levels]
        return RatioVerdict(1.0, pts, "consistent", "m = 1 is an identity", extra={"sandwich_ok": [True] * levels.size})

    blocks = map_blocks(_sum_block(model, family, m, levels), n, stream.spawn(1), threads=threads)
    k_num, k_up, k_lo = np.sum(blocks, axis=0)
    points, sandwich, flags = [], [], []
    for i, u in enumerate(levels):
        r, lo, hi = ratio_interval(int(k_num[i]), n, int(k_den[i]), n)
        points.append(RatioPoint(float(u), r, lo, hi))
        fa = k_den[i] / n
        analytic_lower = 1.0 - (1.0 - fa) ** m
        sd = math.sqrt(max(k_num[i], 1)) / n + m * binomial_stderr(int(k_den[i]), n)
        ok = bool(k_lo[i] <= k_num[i] <= k_up[i]) and k_num[i] / n >= analytic_lower - 3 * sd
        sandwich.append(ok)
        if k_den[i] < MIN_HITS:
            flags.append(f"u={u:g}: fewer than {MIN_HITS} tail hits")
        if not ok:
            flags.append(f"u={u:g}: sandwich violated")
    verdict = decide(points, float(m))
    return RatioVerdict(float(m), points, verdict, SCOPE_NOTE, flags, {
        "sandwich_ok": sandwich,
        "upper": (k_up / n).tolist(),
        "lower": (k_lo / n).tolist(),
        "numerator_hits": k_num.tolist(),
        "denominator_hits": k_den.tolist(),
    })


# deterministic convolution on a survival table -------------------------------------------------


def tabulate(law, t_min: float, t_max: float, size: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Survival table of ``law`` on a geometric grid."""
    t = np.geomspace(t_min, t_max, size)
    return t, np.asarray(law.survival(t), dtype=float)


def _interp_survival(t: np.ndarray, sf: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Log-linear interpolation of a survival table; linear from (0, 1) below the first node."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    below = x < t[0]
    out[below] = 1.0 - (1.0 - sf[0]) * np.clip(x[below], 0.0, None) / t[0]
    with np.errstate(divide="ignore"):
        logsf = np.log(sf)
    above = ~below
    out[above] = np.exp(np.interp(x[above], t, logsf))
    return out


def convolve_survival(t: np.ndarray, sf_a: np.ndarray, sf_b: np.ndarray) -> np.ndarray:
    """``P(A + B > t_i)`` for independent nonnegative ``A``, ``B`` tabulated on the grid ``t``.

    Uses ``P(A + B > t) = P(B > t) + int_0^t P(A > t - s) dF_B(s)``, the
    Stieltjes integral taken as a midpoint sum over grid cells (the mass of
    ``B`` below ``t[0]`` sits at ``t[0] / 2``).
    """
    mass = np.concatenate([[1.0 - sf_b[0]], sf_b[:-1] - sf_b[1:]])
    mids = np.concatenate([[t[0] / 2], (t[:-1] + t[1:]) / 2])
    out = np.empty_like(t)
    for i, ti in enumerate(t):
        j = i + 1  # cells whose upper edge is <= t_i
        inner = _interp_survival(t, sf_a, ti - mids[:j])
        out[i] = sf_b[i] + np.dot(inner, mass[:j])
    return np.minimum(out, 1.0)


def _check_table(t, sf):
    t = np.asarray(t, dtype=float)
    sf = np.asarray(sf, dtype=float)
    if t.ndim != 1 or t.size != sf.size:
        raise DiagnosticError("survival table needs matching 1-D grid and values")
    if t.size < 1000:
        raise DiagnosticError("survival table needs at least 1000 points")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise DiagnosticError("grid must be positive and strictly increasing")
    if np.any(np.diff(sf) > 0) or np.any(sf < 0) or np.any(sf > 1):
        raise DiagnosticError("survival table is not monotone nonincreasing in [0, 1]")
    return t, sf


def convolution_ratio_numeric(t, sf, at=None, target: float = 2.0, tol: float = 0.05) -> RatioVerdict:
    """Deterministic ratio ``F^{*2}(t) / F(t)`` from a tabulated survival function.

    The error bar of each point is the change against the same sum on the
    grid with every other node removed, which overstates the error of the
    full grid.  Points where the survival is 0 are undefined and reported as nan.
    ``at`` restricts the reported points to grid values closest to the given levels.
    """
    t, sf = _check_table(t, sf)
    fine = convolve_survival(t, sf, sf)
    tc, sfc = t[::2], sf[::2]
    coarse = convolve_survival(tc, sfc, sfc)
    idx = np.arange(0, t.size, 2)
    err = np.full(t.size, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sf > 0, fine / sf, np.nan)
        err[idx] = np.abs(fine[idx] - coarse) / sf[idx]
    # odd nodes borrow the larger neighbouring estimate
    odd = np.arange(1, t.size, 2)
    right = np.where(odd + 1 < t.size, odd + 1, odd - 1)
    err[odd] = np.fmax(err[odd - 1], err[right])

    pick = np.arange(t.size) if at is None else np.unique([int(np.argmin(np.abs(t - a))) for a in np.atleast_1d(at)])
    points = []
    for i in pick:
        r = float(ratio[i])
        e = float(err[i]) + tol * (0 if math.isnan(r) else 1)
        points.append(RatioPoint(float(t[i]), r, r - e, r + e))
    if any(math.isnan(p.ratio) for p in points[-3:]):
        verdict = "inconclusive"
    else:
        verdict = decide(points, target)
    extra = {"ratio": ratio, "error": err, "grid": t, "convolved": fine}
    return RatioVerdict(target, points, verdict, SCOPE_NOTE, extra=extra)


# shift and doubling ratios ------------------------------------------------------------------------


def _exact_points(ratios, levels, tol):
    return [RatioPoint(float(u), float(r), float(r) - tol, float(r) + tol) for u, r in zip(levels, ratios)]


def long_tail_test(source, y: float, levels, tol: float = 0.02) -> RatioVerdict:
    """Ratio ``F(x + y) / F(x)`` on the grid, target 1.

    ``source`` is either an object with a ``survival`` method (exact
    evaluation, points carry the tolerance band ``tol``) or a 1-D sample array
    (ratio of nested counts with a Wilson interval).
    """
    levels = _check_levels(levels)
    if hasattr(source, "survival") or callable(source):
        sf = source.survival if hasattr(source, "survival") else source
        num = np.array([float(sf(x + y)) for x in levels])
        den = np.array([float(sf(x)) for x in levels])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(den > 0, num / den, np.nan)
        points = _exact_points(ratios, levels, tol)
        method = "closed_form"
    else:
        sample = np.asarray(source, dtype=float)
        points = []
        for x in levels:
            k_den = int(np.sum(sample > x))
            k_num = int(np.sum(sample > x + y))
            if k_den == 0:
                points.append(RatioPoint(float(x), math.nan, math.nan, math.nan))
                continue
            lo, hi = wilson_interval(k_num, k_den)
            points.append(RatioPoint(float(x), k_num / k_den, lo, hi))
        method = "mc"
    finite = [p.ratio for p in points if not math.isnan(p.ratio)]
    return RatioVerdict(1.0, points, decide(points, 1.0), SCOPE_NOTE,
                        extra={"liminf": min(finite) if finite else math.nan, "method": method})


def dominated_variation_test(source, levels, floor: float = 1e-3, tol: float = 0.0) -> RatioVerdict:
    """Ratio ``F(2x) / F(x)`` on the grid; reports its infimum.

    Dominated variation asks the ratio to stay bounded away from 0.  The
    verdict is consistent when the last three ratios are all at least
    ``floor``, inconsistent when all are below it.
    """
    levels = _check_levels(levels)
    sf = source.survival if hasattr(source, "survival") else source
    num = np.array([float(sf(2 * x)) for x in levels])
    den = np.array([float(sf(x)) for x in levels])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(den > 0, num / den, np.nan)
    points = _exact_points(ratios, levels, tol)
    tail = ratios[-3:]
    if np.any(np.isnan(tail)):
        verdict = "inconclusive"
    elif np.all(tail >= floor):
        verdict = "consistent"
    elif np.all(tail < floor):
        verdict = "inconsistent"
    else:
        verdict = "inconclusive"
    return RatioVerdict(0.0, points, verdict, SCOPE_NOTE, extra={"infimum": float(np.nanmin(ratios)), "floor": floor})


# random sums, translations, Kesten bound -------------------------------------------------------


def _diverging(points, target) -> bool:
    """Ratios above the target whose lower bounds keep increasing over the last three points."""
    tail = points[-3:]
    los = [p.lo for p in tail]
    return len(tail) == 3 and all(lo > target for lo in los) and los[0] < los[1] < los[2]


def random_sum_ratio(model: ClaimModel, family, p: float, levels, n: int, stream, threads=None) -> RatioVerdict:
    """``P(X_1 + ... + X_N in uA) / F(uA)`` with ``N`` geometric on ``{1, 2, ...}``; target ``1/p``."""
    if not 0 < p <= 1:
        raise DiagnosticError("geometric parameter must lie in (0, 1]")
    levels = _check_levels(levels)
    stream = as_stream(stream)
    den = empirical_FA(model, family, levels, n, stream.spawn(0), threads)
    k_den = np.asarray(den.aux["hits"])

    def run(g, k):
        counts = g.geometric(p, k)
        xs = model.sample(g, int(counts.sum()))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        sums = np.add.reduceat(xs, starts, axis=0)
        return _count_exceed(family.scale_index(sums), levels)

    k_num = np.sum(map_blocks(run, n, stream.spawn(1), threads=threads), axis=0)
    target = 1.0 / p
    points = [RatioPoint(float(u), *ratio_interval(int(a), n, int(b), n)) for u, a, b in zip(levels, k_num, k_den)]
    flags = ["diverging"] if _diverging(points, target) else []
    return RatioVerdict(target, points, decide(points, target), SCOPE_NOTE, flags,
                        {"numerator_hits": k_num.tolist(), "denominator_hits": k_den.tolist()})


def translation_test(model: ClaimModel, family, a, levels, n: int, stream, threads=None) -> RatioVerdict:
    """``F(uA + a) / F(uA)`` (independent streams), target 1.  ``a = 0`` is an identity."""
    levels = _check_levels(levels)
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        pts = [RatioPoint(float(u), 1.0, 1.0, 1.0) for u in levels]
        return RatioVerdict(1.0, pts, "consistent", "a = 0 is an identity")
    stream = as_stream(stream)
    den = np.asarray(empirical_FA(model, family, levels, n, stream.spawn(0), threads).aux["hits"])
    k_num = sum(map_blocks(lambda g, k: _count_exceed(family.scale_index(model.sample(g, k) - a), levels),
                           n, stream.spawn(1), threads=threads))
    points = [RatioPoint(float(u), *ratio_interval(int(x), n, int(y), n)) for u, x, y in zip(levels, k_num, den)]
    return RatioVerdict(1.0, points, decide(points, 1.0), SCOPE_NOTE)


@dataclass
class KestenReport:
    epsilon: float
    m_max: int
    K: float  # smallest K with every point estimate <= K (1 + eps)^m
    K_upper: float  # same with the upper confidence limits
    ratios: dict  # m -> list of RatioPoint
    method: str = "mc"

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "m_max": self.m_max,
            "K": self.K,
            "K_upper": self.K_upper,
            "method": self.method,
            "ratios": {str(m): [[p.u, p.ratio, p.lo, p.hi] for p in pts] for m, pts in self.ratios.items()},
        }


def kesten_check(model: ClaimModel, family, epsilon: float, m_max: int, levels, n: int, stream, threads=None) -> KestenReport:
    """Fit the smallest ``K`` such that ``F^{*m}(uA) / F(uA) <= K (1 + eps)^m`` for ``m <= m_max``."""
    if epsilon <= 0 or m_max < 1:
        raise DiagnosticError("need epsilon > 0 and m_max >= 1")
    stream = as_stream(stream)
    ratios = {}
    K = K_up = 0.0
    for m in range(1, m_max + 1):
        res = convolution_ratio_mc(model, family, m, levels, n, stream.spawn(m), threads)
        ratios[m] = res.points
        for pt in res.points:
            if not math.isnan(pt.ratio):
                K = max(K, pt.ratio / (1 + epsilon) ** m)
                if not math.isnan(pt.hi):
                    K_up = max(K_up, pt.hi / (1 + epsilon) ** m)
    return KestenReport(epsilon, m_max, K, K_up, ratios)


def kesten_numeric(t, sf, epsilon: float, m_max: int, at) -> KestenReport:
    """Kesten constant from repeated numeric convolution of a survival table."""
    t, sf = _check_table(t, sf)
    at = np.atleast_1d(np.asarray(at, dtype=float))
    idx = np.unique([int(np.argmin(np.abs(t - a))) for a in at])
    conv = sf.copy()
    ratios = {}
    K = 0.0
    for m in range(1, m_max + 1):
        if m > 1:
            conv = convolve_survival(t, conv, sf)
        pts = [RatioPoint(float(t[i]), float(conv[i] / sf[i]), float(conv[i] / sf[i]), float(conv[i] / sf[i])) for i in idx]
        ratios[m] = pts
        K = max(K, max(p.ratio / (1 + epsilon) ** m for p in pts))
    return KestenReport(epsilon, m_max, K, K, ratios, "quadrature")
