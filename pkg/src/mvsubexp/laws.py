"""One-dimensional nonnegative laws with analytic survival, quantile and stop-loss facets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special


class LawError(ValueError):
    pass


class OneDimLaw:
    """Base class.  Subclasses provide ``survival``, ``quantile`` and ``stop_loss``.

    ``stop_loss(t)`` is ``E[(X - t)^+] = int_t^inf survival(y) dy``.
    """

    name = "law"
    support_edge = 0.0
    tail_index: float | None = None  # regular-variation index, None when lighter

    def survival(self, t):
        raise NotImplementedError

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def quantile(self, q):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return float(self.stop_loss(0.0))

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    def stop_loss(self, t):
        t = np.asarray(t, dtype=float)
        out = np.vectorize(self._stop_loss_quad)(t)
        return float(out) if out.ndim == 0 else out

    def _stop_loss_quad(self, t: float) -> float:
        lo = max(t, self.support_edge)
        head = max(self.support_edge - t, 0.0)
        val, _ = integrate.quad(lambda y: float(self.survival(y)), lo, np.inf, epsrel=1e-10, limit=200)
        return head + val

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-transform sampling unless a subclass has a faster exact sampler."""
        return self.quantile(rng.random(n))

    def to_descriptor(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_descriptor()})"


def _as_out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True, repr=False)
class Pareto(OneDimLaw):
    """Survival ``(t / scale)^-alpha`` for ``t >= scale``."""

    alpha: float
    scale: float = 1.0
    name = "pareto"

    def __post_init__(self):
        if not (self.alpha > 0 and self.scale > 0):
            raise LawError("pareto needs alpha > 0 and scale > 0")

    @property
    def support_edge(self):
        return self.scale

    @property
    def tail_index(self):
        return self.alpha

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t < self.scale, 1.0, (np.maximum(t, self.scale) / self.scale) ** -self.alpha)
        return _as_out(out)

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _as_out(self.scale * (1.0 - q) ** (-1.0 / self.alpha))

    @property
    def mean(self):
        a = self.alpha
        return math.inf if a <= 1 else a * self.scale / (a - 1)

    @property
    def second_moment(self):
        a = self.alpha
        return math.inf if a <= 2 else a * self.scale**2 / (a - 2)

    def stop_loss(self, t):
        if self.alpha <= 1:
            raise LawError("stop-loss transform is infinite for alpha <= 1")
        t = np.asarray(t, dtype=float)
        a, s = self.alpha, self.scale
        tt = np.maximum(t, s)
        out = np.where(t < s, self.mean - t, s**a * tt ** (1 - a) / (a - 1))
        return _as_out(out)

    def to_descriptor(self):
        return {"law": "pareto", "alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True, repr=False)
class Exponential(OneDimLaw):
    rate: float = 1.0
    name = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise LawError("exponential rate must be positive")

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return _as_out(np.exp(-self.rate * np.maximum(t, 0.0)))

    def quantile(self, q):
        return _as_out(-np.log1p(-np.asarray(q, dtype=float)) / self.rate)

    def sample(self, rng, n):
        return rng.standard_exponential(n) / self.rate

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2

    def stop_loss(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, self.mean - t, np.exp(-self.rate * np.maximum(t, 0.0)) / self.rate)
        return _as_out(out)

    def to_descriptor(self):
        return {"law": "exponential", "rate": self.rate}


@dataclass(frozen=True, repr=False)
class Weibull(OneDimLaw):
    """Survival ``exp(-(t/scale)^shape)``; heavy-tailed (subexponential) for ``shape < 1``."""

    shape: float
    scale: float = 1.0
    name = "weibull"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise LawError("weibull needs shape > 0 and scale > 0")

    def survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return _as_out(np.exp(-((t / self.scale) ** self.shape)))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _as_out(self.scale * (-np.log1p(-q)) ** (1.0 / self.shape))

    @property
    def mean(self):
        return self.scale * special.gamma(1 + 1 / self.shape)

    @property
    def second_moment(self):
        return self.scale**2 * special.gamma(1 + 2 / self.shape)

    def stop_loss(self, t):
        t = np.asarray(t, dtype=float)
        k, s = self.shape, self.scale
        z = (np.maximum(t, 0.0) / s) ** k
        tail = s / k * special.gamma(1 / k) * special.gammaincc(1 / k, z)
        return _as_out(np.where(t < 0, self.mean - t, tail))

    def to_descriptor(self):
        return {"law": "weibull", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True, repr=False)
class Lognormal(OneDimLaw):
    """``exp(mu + sigma N)`` with ``N`` standard normal."""

    mu: float = 0.0
    sigma: float = 1.0
    name = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise LawError("lognormal sigma must be positive")

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(t, 0.0)) - self.mu) / self.sigma
        return _as_out(special.ndtr(-z))

    def quantile(self, q):
        return _as_out(np.exp(self.mu + self.sigma * special.ndtri(np.asarray(q, dtype=float))))

    def sample(self, rng, n):
        return np.exp(self.mu + self.sigma * rng.standard_normal(n))

    @property
    def mean(self):
        return math.exp(self.mu + self.sigma**2 / 2)

    @property
    def second_moment(self):
        return math.exp(2 * self.mu + 2 * self.sigma**2)

    def stop_loss(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 1e-300)
        d2 = (self.mu - np.log(tp)) / self.sigma
        d1 = d2 + self.sigma
        val = self.mean * special.ndtr(d1) - tp * special.ndtr(d2)
        return _as_out(np.where(t <= 0, self.mean - t, val))

    def to_descriptor(self):
        return {"law": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True, repr=False)
class PointMass(OneDimLaw):
    value: float
    name = "point"

    def __post_init__(self):
        if self.value < 0:
            raise LawError("point mass must sit at a nonnegative value")

    @property
    def support_edge(self):
        return self.value

    def survival(self, t):
        return _as_out(np.where(np.asarray(t, dtype=float) < self.value, 1.0, 0.0))

    def quantile(self, q):
        return _as_out(np.full(np.shape(q), float(self.value)))

    @property
    def mean(self):
        return float(self.value)

    @property
    def second_moment(self):
        return float(self.value) ** 2

    def stop_loss(self, t):
        return _as_out(np.maximum(self.value - np.asarray(t, dtype=float), 0.0))

    def to_descriptor(self):
        return {"law": "point", "value": self.value}


@dataclass(frozen=True, repr=False)
class Gamma(OneDimLaw):
    """Shape ``k`` and scale ``theta``; used for interarrival times."""

    k: float
    theta: float = 1.0
    name = "gamma"

    def __post_init__(self):
        if not (self.k > 0 and self.theta > 0):
            raise LawError("gamma needs k > 0 and theta > 0")

    def survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return _as_out(special.gammaincc(self.k, t / self.theta))

    def quantile(self, q):
        return _as_out(self.theta * special.gammainccinv(self.k, 1.0 - np.asarray(q, dtype=float)))

    def sample(self, rng, n):
        return rng.gamma(self.k, self.theta, n)

    @property
    def mean(self):
        return self.k * self.theta

    @property
    def second_moment(self):
        return self.k * (self.k + 1) * self.theta**2

    def to_descriptor(self):
        return {"law": "gamma", "k": self.k, "theta": self.theta}


class IntegratedTail(OneDimLaw):
    """Stationary-excess law with survival ``stop_loss_F(x) / mean_F``."""

    name = "integrated_tail"

    def __init__(self, base: OneDimLaw):
        mu = base.mean
        if not (math.isfinite(mu) and mu > 0):
            raise LawError("integrated tail needs a finite positive mean")
        self.base = base
        self._mu = mu

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return _as_out(np.where(t <= 0, 1.0, np.asarray(self.base.stop_loss(np.maximum(t, 0.0))) / self._mu))

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        out = np.vectorize(self._quantile_one)(q)
        return _as_out(out)

    def _quantile_one(self, q: float) -> float:
        if q <= 0:
            return 0.0
        if q >= 1:
            return math.inf
        target = 1.0 - q
        hi = max(1.0, self.base.mean)
        while self.survival(hi) > target:
            hi *= 2.0
        return optimize.brentq(lambda x: self.survival(x) - target, 0.0, hi, xtol=1e-14 * hi, rtol=1e-13)

    @property
    def mean(self):
        return self.base.second_moment / (2 * self._mu)

    @property
    def tail_index(self):
        a = self.base.tail_index
        return None if a is None else a - 1

    def to_descriptor(self):
        return {"law": "integrated_tail", "base": self.base.to_descriptor()}


def integrated_tail(law: OneDimLaw) -> OneDimLaw:
    """Integrated-tail law ``F_I``; exponential laws map to themselves."""
    if isinstance(law, Exponential):
        return Exponential(law.rate)
    return IntegratedTail(law)


_LAWS = {
    "pareto": (Pareto, ("alpha", "scale")),
    "exponential": (Exponential, ("rate",)),
    "weibull": (Weibull, ("shape", "scale")),
    "lognormal": (Lognormal, ("mu", "sigma")),
    "point": (PointMass, ("value",)),
    "deterministic": (PointMass, ("value",)),
    "gamma": (Gamma, ("k", "theta")),
}


def law_from_descriptor(desc: dict) -> OneDimLaw:
    kind = desc.get("law")
    if kind == "integrated_tail":
        return integrated_tail(law_from_descriptor(desc["base"]))
    if kind not in _LAWS:
        raise LawError(f"unknown law {kind!r}")
    cls, fields = _LAWS[kind]
    extra = set(desc) - set(fields) - {"law"}
    if extra:
        raise LawError(f"unexpected parameter(s) for {kind}: {sorted(extra)}")
    try:
        return cls(**{k: float(desc[k]) for k in fields if k in desc})
    except TypeError as exc:
        raise LawError(f"{kind}: {exc}") from None
