"""Crude Monte Carlo for multivariate ruin probabilities of a renewal risk model.

A path is the claim-surplus walk ``S_n = sum_{i<=n} (X_i - Y_i p)``.  Ruin at
level ``u`` means ``Y_A(S_n) > u`` for some ``n``.  Between claims the reserve
only grows, so checking at claim instants is exact.

Paths are grouped into fixed blocks of ``BLOCK`` rows.  Each block draws from
its own child stream, always in chunks of ``CHUNK`` steps for every row (claims
first, then interarrival times), whether or not a row has already stopped.  A
path's draws therefore depend only on the seed and its index, which couples
runs across levels, give-up thresholds, scaled ruin sets and thread counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .asymptotics import AsymptoticsError, SafetyLoading, h_value_quadrature, mrv_asymptote, mrv_descriptor
from .claims import ClaimModel
from .laws import OneDimLaw
from .parallel import map_blocks
from .ruinsets import HyperplaneFamily
from .stats import wilson_interval
from .streams import as_stream

log = logging.getLogger(__name__)

BLOCK = 1024
CHUNK = 256
GIVE_UP_FACTOR = 100.0

RUNNING, OVERFLOW, GAVE_UP, MAX_STEPS = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RiskConfig:
    """Renewal risk model: claims, interarrival law, premium rates and ruin set.

    ``give_up`` fixes the give-up distance; when None it is
    ``max(50 max_k p_k.c, 50 max_k p_k.E[X], give_up_factor * u_max)``.
    """

    model: ClaimModel
    interarrival: OneDimLaw
    premium: np.ndarray
    family: HyperplaneFamily
    b: np.ndarray | None = None
    give_up: float | None = None
    give_up_factor: float = GIVE_UP_FACTOR
    max_steps: int = 10**6

    def __post_init__(self):
        premium = np.atleast_1d(np.asarray(self.premium, dtype=float))
        object.__setattr__(self, "premium", premium)
        if not isinstance(self.family, HyperplaneFamily):
            raise ConfigError("the simulator needs a hyperplane family (bid-ask sets with d <= 3)")
        d = self.model.dim
        if premium.shape != (d,) or self.family.dim != d:
            raise ConfigError(f"dimension mismatch: claims d={d}, premium {premium.shape}, ruin set d={self.family.dim}")
        if np.any(premium <= 0):
            raise ConfigError("premium rates must be positive")
        if self.b is not None:
            b = np.asarray(self.b, dtype=float)
            if b.shape != (d,) or np.any(b <= 0) or abs(b.sum() - 1.0) > 1e-9:
                raise ConfigError("allocation b must lie on the open unit simplex")
        if self.give_up is not None and not self.give_up > 0:
            raise ConfigError("give_up must be positive")
        if not self.give_up_factor > 0 or self.max_steps < 1:
            raise ConfigError("give_up_factor and max_steps must be positive")
        try:
            mean = np.asarray(self.model.mean, dtype=float)
        except NotImplementedError:
            raise ConfigError("claim model needs a closed-form mean") from None
        if not np.all(np.isfinite(mean)) or not math.isfinite(self.interarrival.mean):
            raise ConfigError("claims and interarrival times need finite means")
        c = self.interarrival.mean * premium - mean
        if np.any(c <= 0):
            raise ConfigError(f"safety loading c = E[Y] p - E[X] = {c.tolist()} is not positive")
        object.__setattr__(self, "_loading", SafetyLoading(tuple(c)))

    @property
    def loading(self) -> SafetyLoading:
        return self._loading

    @property
    def c(self) -> np.ndarray:
        return self._loading.vector

    def give_up_level(self, u_max: float) -> float:
        if self.give_up is not None:
            return float(self.give_up)
        P = self.family.directions
        return max(50.0 * float((P @ self.c).max()), 50.0 * float((P @ np.asarray(self.model.mean)).max()),
                   self.give_up_factor * u_max)

    def scaled(self, lam: float) -> "RiskConfig":
        """Same model with ruin set ``A / lam``; the give-up distance scales with it."""
        return RiskConfig(self.model, self.interarrival, self.premium, self.family.scaled(lam), self.b,
                          None if self.give_up is None else self.give_up * lam, self.give_up_factor, self.max_steps)


@dataclass
class RuinEstimate:
    u: float
    n_paths: int
    ruin_count: int
    estimate: float
    ci: tuple
    truncated_paths: int  # ended by give-up or max_steps without ruin
    mean_steps: float
    give_up: float
    ruin_count_half_give_up: int = 0

    @property
    def give_up_shift(self) -> float:
        """Change of the estimate when the give-up distance is doubled from g/2 to g."""
        return (self.ruin_count - self.ruin_count_half_give_up) / self.n_paths

    @property
    def give_up_stable(self) -> bool:
        return self.give_up_shift < self.ci[1] - self.ci[0]

    @property
    def truncated_frac(self) -> float:
        return self.truncated_paths / self.n_paths


@dataclass
class PathSummary:
    """Per-path outcome: running maximum of the scale index, stop reason, and steps taken."""

    running_max: np.ndarray
    half_give_up_max: np.ndarray  # running maximum had the walk stopped at -g/2
    status: np.ndarray
    steps: np.ndarray
    give_up: float


@njit(cache=True)
def _walk_chunk(X, Y, premium, P, S, runmax, half_max, steps, status, alive, g_level, u_max, max_steps):
    """Advance every alive row through one chunk of pre-drawn claims ``X`` and interarrivals ``Y``.

    ``half_max`` freezes the running maximum at the first step with
    ``max_k p_k.S <= -g/2``, i.e. the outcome of the same path under half the
    give-up distance.
    """
    rows, T, d = X.shape
    K = P.shape[0]
    for i in range(rows):
        if not alive[i]:
            continue
        m = runmax[i]
        for t in range(T):
            top = -np.inf
            for j in range(d):
                S[i, j] += X[i, t, j] - Y[i, t] * premium[j]
            for k in range(K):
                v = 0.0
                for j in range(d):
                    v += P[k, j] * S[i, j]
                if v > top:
                    top = v
            steps[i] += 1
            if top > m:
                m = top
            if half_max[i] < 0 and top <= -0.5 * g_level:
                half_max[i] = m
            if m > u_max:
                status[i] = OVERFLOW
            elif top <= -g_level:
                status[i] = GAVE_UP
            elif steps[i] >= max_steps:
                status[i] = MAX_STEPS
            if status[i] != RUNNING:
                alive[i] = False
                break
        runmax[i] = m
        if not alive[i] and half_max[i] < 0:
            half_max[i] = m


def _simulate_block(config: RiskConfig, g_level: float, u_max: float):
    P = np.ascontiguousarray(config.family.directions)
    d = config.model.dim
    premium = config.premium
    model, inter = config.model, config.interarrival

    def run(gen: np.random.Generator, size: int):
        S = np.zeros((BLOCK, d))
        runmax = np.zeros(BLOCK)
        half_max = np.full(BLOCK, -1.0)
        steps = np.zeros(BLOCK, dtype=np.int64)
        status = np.zeros(BLOCK, dtype=np.int8)
        alive = np.zeros(BLOCK, dtype=np.bool_)
        alive[:size] = True
        while alive.any():
            X = model.sample(gen, BLOCK * CHUNK).reshape(BLOCK, CHUNK, d)
            Y = inter.sample(gen, BLOCK * CHUNK).reshape(BLOCK, CHUNK)
            _walk_chunk(X, Y, premium, P, S, runmax, half_max, steps, status, alive, g_level, u_max, config.max_steps)
        return runmax[:size], half_max[:size], status[:size], steps[:size]

    return run


def simulate_paths(config: RiskConfig, u_max: float, n_paths: int, stream, threads=None) -> PathSummary:
    """Run ``n_paths`` walks until give-up, ``max_steps`` or a running maximum above ``u_max``."""
    if n_paths < 1:
        raise ConfigError("n_paths must be at least 1")
    if not u_max > 0:
        raise ConfigError("levels must be positive")
    g_level = config.give_up_level(u_max)
    parts = map_blocks(_simulate_block(config, g_level, u_max), n_paths, as_stream(stream), BLOCK, threads)
    runmax, half_max, status, steps = (np.concatenate(x) for x in zip(*parts))
    return PathSummary(runmax, half_max, status, steps, g_level)


def estimates_from_paths(paths: PathSummary, levels) -> list[RuinEstimate]:
    n = paths.running_max.size
    truncated_end = paths.status != OVERFLOW
    out = []
    for u in levels:
        ruined = paths.running_max > u
        k = int(ruined.sum())
        out.append(RuinEstimate(
            u=float(u), n_paths=n, ruin_count=k, estimate=k / n, ci=wilson_interval(k, n),
            truncated_paths=int(np.sum(truncated_end & ~ruined)), mean_steps=float(paths.steps.mean()),
            give_up=paths.give_up, ruin_count_half_give_up=int(np.sum(paths.half_give_up_max > u)),
        ))
    return out


def simulate_ruin_curve(config: RiskConfig, levels, n_paths: int, stream, threads=None) -> list[RuinEstimate]:
    """Ruin estimates for a grid of levels from one set of coupled paths."""
    levels = np.asarray(levels, dtype=float).reshape(-1)
    if levels.size == 0 or np.any(levels <= 0):
        raise ConfigError("levels must be positive")
    paths = simulate_paths(config, float(levels.max()), n_paths, stream, threads)
    return estimates_from_paths(paths, levels)


def simulate_ruin(config: RiskConfig, u: float, n_paths: int, stream, threads=None) -> RuinEstimate:
    return simulate_ruin_curve(config, [u], n_paths, stream, threads)[0]


# comparison with the asymptote -----------------------------------------------------------------


@dataclass
class ComparisonRow:
    u: float
    psi: float
    psi_lo: float
    psi_hi: float
    H: float
    ratio: float
    ratio_lo: float
    ratio_hi: float
    truncated_frac: float
    mean_steps: float
    mrv: float | None = None


@dataclass
class Comparison:
    rows: list
    trend_steps: list  # per step among the top three: did |ratio - 1| shrink?
    trend_toward_one: bool
    h_method: str
    give_up: float
    notes: list = field(default_factory=list)


def trend_toward_one(ratios, steps: int = 3) -> list[bool]:
    r = np.asarray(ratios, dtype=float)[-(steps + 1):]
    return [bool(abs(b - 1) < abs(a - 1)) for a, b in zip(r[:-1], r[1:])]


def asymptote_curve(config: RiskConfig, levels, n_mc: int = 10**6, stream=None):
    """``H(u)`` on the grid by quadrature when supported, else by the sojourn Monte Carlo."""
    from .asymptotics import h_curve_mc

    try:
        vals = [h_value_quadrature(config.model, config.family, config.c, float(u))[0] for u in levels]
        return np.array(vals), np.zeros(len(levels)), "quadrature"
    except AsymptoticsError:
        if stream is None:
            raise
        curve = h_curve_mc(config.model, config.family, config.c, levels, n_mc, stream)
        return curve.values, curve.stderr, "mc"


def ruin_vs_asymptote(config: RiskConfig, levels, n_paths: int, stream, threads=None, n_mc: int = 10**6) -> Comparison:
    """Table of ``psi_hat(u)``, ``H(u)`` and their ratio, plus the MRV asymptote when available."""
    stream = as_stream(stream)
    levels = np.asarray(levels, dtype=float)
    est = simulate_ruin_curve(config, levels, n_paths, stream.spawn(0), threads)
    H, H_se, method = asymptote_curve(config, levels, n_mc, stream.spawn(1))
    try:
        mrv_vals = mrv_asymptote(mrv_descriptor(config.model), config.family, config.c, levels).values
    except AsymptoticsError:
        mrv_vals = [None] * levels.size
    rows = []
    for e, h, hse, m in zip(est, H, H_se, mrv_vals):
        lo_r, hi_r = e.ci[0] / h, e.ci[1] / h
        if hse > 0:
            # widen by the error of an MC asymptote
            lo_r, hi_r = e.ci[0] / (h + 2 * hse), e.ci[1] / max(h - 2 * hse, 1e-300)
        rows.append(ComparisonRow(e.u, e.estimate, e.ci[0], e.ci[1], float(h), e.estimate / h, lo_r, hi_r,
                                  e.truncated_frac, e.mean_steps, None if m is None else float(m)))
    steps = trend_toward_one([r.ratio for r in rows])
    notes = [f"give-up distance {est[0].give_up:g}; estimates are lower bounds up to truncation"]
    return Comparison(rows, steps, sum(steps) >= 2, method, est[0].give_up, notes)


def config_from_descriptor(desc: dict) -> RiskConfig:
    from .claims import model_from_descriptor
    from .laws import law_from_descriptor
    from .ruinsets import family_from_descriptor

    try:
        model = model_from_descriptor(desc["claims"])
        inter = law_from_descriptor(desc.get("interarrival", {"law": "exponential", "rate": 1.0}))
        family = family_from_descriptor(desc["ruin_set"])
        premium = desc["premium"]
    except KeyError as exc:
        raise ConfigError(f"risk model is missing field {exc}") from None
    b = desc.get("b")
    if b is None and desc["ruin_set"].get("type") == "bidask":
        b = desc["ruin_set"]["b"]
    return RiskConfig(model, inter, premium, family, b, desc.get("give_up"),
                      float(desc.get("give_up_factor", GIVE_UP_FACTOR)), int(desc.get("max_steps", 10**6)))
