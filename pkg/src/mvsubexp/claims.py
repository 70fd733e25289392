"""Claim-size models: seeded samplers plus whatever analytic facets each law admits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .laws import LawError, OneDimLaw, law_from_descriptor
from .streams import as_stream


class ClaimModelError(ValueError):
    pass


class ClaimModel:
    """A nonnegative d-dimensional claim law.

    Optional facets return ``None`` when not available: ``marginals``
    (independent analytic marginals), ``joint_survival`` and ``mrv``.
    """

    dim: int
    marginals: tuple[OneDimLaw, ...] | None = None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> np.ndarray:
        """Mean vector; entries may be ``inf``."""
        raise NotImplementedError

    def joint_survival(self, x):
        return None

    @property
    def mrv(self):
        """``(alpha, AngularMeasure, norm_survival)`` for regularly varying models, else None."""
        return None

    def to_descriptor(self) -> dict:
        raise NotImplementedError


def sample(model: ClaimModel, stream, n: int) -> np.ndarray:
    """``n`` i.i.d. claim vectors drawn from ``stream`` (an ``RngStream`` or int seed)."""
    if n < 1:
        raise ClaimModelError("n must be at least 1")
    return model.sample(as_stream(stream).generator(), n)


class IndependentMarginals(ClaimModel):
    def __init__(self, marginals):
        marginals = tuple(marginals)
        if not marginals:
            raise ClaimModelError("need at least one marginal")
        self.marginals = marginals
        self.dim = len(marginals)

    def sample(self, rng, n):
        return np.column_stack([law.sample(rng, n) for law in self.marginals])

    @property
    def mean(self):
        return np.array([law.mean for law in self.marginals], dtype=float)

    def joint_survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for j, law in enumerate(self.marginals):
            out = out * law.survival(x[..., j])
        return out

    @property
    def mrv(self):
        alphas = {law.tail_index for law in self.marginals}
        if len(alphas) != 1 or None in alphas or not all(hasattr(m, "scale") for m in self.marginals):
            return None
        (alpha,) = alphas
        # Only the axes carry tail mass; the L1 norm tail is asymptotically the sum of marginal tails.
        w = np.array([m.scale**alpha for m in self.marginals])
        ang = AngularMeasure(atoms=np.eye(self.dim), weights=w / w.sum())
        return alpha, ang, lambda u: float(sum(m.survival(u) for m in self.marginals))

    def to_descriptor(self):
        return {"type": "independent", "marginals": [m.to_descriptor() for m in self.marginals]}

    def __repr__(self):
        return f"IndependentMarginals({list(self.marginals)})"


@dataclass(frozen=True, eq=False)
class AngularMeasure:
    """Finite measure on the unit simplex: atoms with weights, or a Dirichlet family.

    ``dirichlet`` holds the Dirichlet parameter vector; all ones is the uniform law.
    """

    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None
    dirichlet: np.ndarray | None = None

    def __post_init__(self):
        if (self.atoms is None) == (self.dirichlet is None):
            raise ClaimModelError("angular measure needs either atoms or a dirichlet parameter")
        if self.atoms is not None:
            atoms = np.array(self.atoms, dtype=float, ndmin=2)
            w = np.ones(len(atoms)) if self.weights is None else np.array(self.weights, dtype=float).reshape(-1)
            if w.size != atoms.shape[0] or np.any(w <= 0):
                raise ClaimModelError("angular weights must be positive, one per atom")
            if np.any(atoms < 0) or np.any(np.abs(atoms.sum(axis=1) - 1) > 1e-12):
                raise ClaimModelError("angular atoms must lie on the unit simplex")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "weights", w)
        else:
            a = np.array(self.dirichlet, dtype=float).reshape(-1)
            if np.any(a <= 0):
                raise ClaimModelError("dirichlet parameters must be positive")
            object.__setattr__(self, "dirichlet", a)

    @classmethod
    def uniform(cls, d: int) -> "AngularMeasure":
        return cls(dirichlet=np.ones(d))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1] if self.atoms is not None else self.dirichlet.size

    @property
    def is_atomic(self) -> bool:
        return self.atoms is not None

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum()) if self.is_atomic else 1.0

    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def sample_index(self, rng, n):
        return rng.choice(self.atoms.shape[0], size=n, p=self.probabilities())

    def sample(self, rng, n):
        if self.is_atomic:
            return self.atoms[self.sample_index(rng, n)]
        return rng.dirichlet(self.dirichlet, size=n)

    def mean(self) -> np.ndarray:
        if self.is_atomic:
            return self.probabilities() @ self.atoms
        return self.dirichlet / self.dirichlet.sum()

    def to_descriptor(self):
        if self.is_atomic:
            return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}
        return {"dirichlet": self.dirichlet.tolist()}


def angular_from_descriptor(desc: dict) -> AngularMeasure:
    if "atoms" in desc:
        return AngularMeasure(atoms=desc["atoms"], weights=desc.get("weights"))
    if "dirichlet" in desc:
        return AngularMeasure(dirichlet=desc["dirichlet"])
    if desc.get("family") == "uniform":
        return AngularMeasure.uniform(int(desc["dim"]))
    raise ClaimModelError("angular descriptor needs 'atoms', 'dirichlet' or family 'uniform'")


class PolarModel(ClaimModel):
    """``X = a_theta W theta`` with ``theta ~ nu`` and ``W`` a radial law independent of ``theta``.

    ``scales`` gives ``a_theta`` per atom (atomic ``nu`` only).
    """

    def __init__(self, angular: AngularMeasure, radial: OneDimLaw, scales=None):
        self.angular = angular
        self.radial = radial
        self.dim = angular.dim
        if scales is not None:
            if not angular.is_atomic:
                raise ClaimModelError("per-atom scales need an atomic angular measure")
            scales = np.array(scales, dtype=float).reshape(-1)
            if scales.size != angular.atoms.shape[0] or np.any(scales <= 0) or not np.all(np.isfinite(scales)):
                raise ClaimModelError("scale function must be bounded and positive on every atom")
        self.scales = scales

    def _atom_scales(self):
        return np.ones(self.angular.atoms.shape[0]) if self.scales is None else self.scales

    def sample(self, rng, n):
        if self.angular.is_atomic:
            idx = self.angular.sample_index(rng, n)
            w = self.radial.sample(rng, n) * self._atom_scales()[idx]
            return self.angular.atoms[idx] * w[:, None]
        theta = self.angular.sample(rng, n)
        return theta * self.radial.sample(rng, n)[:, None]

    @property
    def mean(self):
        if self.angular.is_atomic:
            p = self.angular.probabilities() * self._atom_scales()
            return self.radial.mean * (p @ self.angular.atoms)
        return self.radial.mean * self.angular.mean()

    def scalar_survival(self, family, t):
        """``P(Y_A(X) > t)`` as a finite sum over atoms: each atom contributes ``P(a W > t h_theta)``."""
        if not self.angular.is_atomic:
            raise ClaimModelError("closed-form scalar survival needs an atomic angular measure")
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for prob, theta, a in zip(self.angular.probabilities(), self.angular.atoms, self._atom_scales()):
            y = family.scale_index(theta)
            if y > 0:
                out = out + prob * np.asarray(self.radial.survival(t / (a * y)))
        return out

    @property
    def mrv(self):
        alpha = self.radial.tail_index
        if alpha is None:
            return None
        if self.angular.is_atomic:
            a = self._atom_scales()
            w = self.angular.probabilities() * a**alpha
            ang = AngularMeasure(atoms=self.angular.atoms, weights=w / w.sum())
            probs = self.angular.probabilities()

            def norm_survival(u):
                return float(np.sum(probs * self.radial.survival(u / a)))

            return alpha, ang, norm_survival
        return alpha, self.angular, lambda u: float(self.radial.survival(u))

    def to_descriptor(self):
        out = {"type": "polar", "angular": self.angular.to_descriptor(), "radial": self.radial.to_descriptor()}
        if self.scales is not None:
            out["scales"] = self.scales.tolist()
        return out


def _exact(x):
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def crnonlin_survival(x):
    """Exact marginal survival ``P(X > x)`` of the dyadic simplex law.

    Integer or ``Fraction`` input gives an exact ``Fraction``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    exact = _exact(x)
    one = Fraction(1) if exact else 1.0
    if x < 1:
        return one - 2 * one * x / 3
    n = int(math.floor(x)).bit_length() - 1
    return one / 2 ** (n + 1) - one * x / 3 / 2 ** (2 * n + 1)


def crnonlin_sum_survival(x):
    """Exact ``P(X + Y > x)``: ``2^-(n+1)`` on ``[2^n, 2^(n+1))`` and 1 below 1."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    one = Fraction(1) if _exact(x) else 1.0
    if x < 1:
        return one
    n = int(math.floor(x)).bit_length() - 1
    return one / 2 ** (n + 1)


class DyadicSimplex(ClaimModel):
    """Mass ``2^-(n+1)`` spread uniformly on the segment ``x + y = 2^n``, ``n >= 0``."""

    dim = 2

    def sample(self, rng, n):
        level = np.ldexp(1.0, rng.geometric(0.5, n) - 1)
        x = level * rng.random(n)
        return np.column_stack([x, level - x])

    @property
    def mean(self):
        return np.array([np.inf, np.inf])

    def joint_survival(self, x):
        raise NotImplementedError("only marginal and sum survivals are closed-form")

    def to_descriptor(self):
        return {"type": "dyadic_simplex"}

    def __repr__(self):
        return "DyadicSimplex()"


OSC_AMPLITUDE = math.pi * math.sqrt(5.0)  # sup of the bracket in the density of OscillatingModel
OSC_GAMMA_MAX = 2.0 / OSC_AMPLITUDE


class OscillatingModel(ClaimModel):
    """Bivariate law with survival ``(1 + g sin(log s) cos(pi/2 (x-y)/s)) / s``, ``s = 1 + x + y``.

    Sampling is by rejection from the density ``2 / s^3``.
    """

    dim = 2

    def __init__(self, gamma: float = 0.05):
        if not (0 < abs(gamma) < OSC_GAMMA_MAX):
            raise ClaimModelError(
                f"gamma={gamma} outside the admissible range 0 < |gamma| < {OSC_GAMMA_MAX:.6f} "
                "(density lower bound 2 - |gamma| pi sqrt(5) must be positive)"
            )
        self.gamma = float(gamma)
        self.envelope = (2.0 + abs(self.gamma) * OSC_AMPLITUDE) / 2.0

    def joint_survival(self, x):
        x = np.asarray(x, dtype=float)
        a, b = x[..., 0], x[..., 1]
        s = 1.0 + a + b
        return (1.0 + self.gamma * np.sin(np.log(s)) * np.cos(0.5 * np.pi * (a - b) / s)) / s

    def marginal_survival(self, t):
        return self.joint_survival(np.stack([np.asarray(t, dtype=float), np.zeros_like(t, dtype=float)], axis=-1))

    def density(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = 1.0 + x + y
        r = (x - y) / s
        L = np.log(s)
        phi = 0.5 * np.pi * r
        sl, cl = np.sin(L), np.cos(L)
        bracket = (
            (np.pi**2 / 4) * (1 - r**2) * sl * np.cos(phi)
            + sl * np.cos(phi)
            - 3 * cl * np.cos(phi)
            + np.pi * r * (cl - 2 * sl) * np.sin(phi)
        )
        return (2.0 + self.gamma * bracket) / s**3

    @property
    def acceptance_rate(self) -> float:
        return 1.0 / self.envelope

    def sample(self, rng, n):
        out = np.empty((n, 2))
        filled = 0
        batch = max(64, int(n * self.envelope * 1.05) + 16)
        while filled < n:
            root = np.sqrt(rng.random(batch))
            s = root / (1.0 - root)
            x = s * rng.random(batch)
            y = s - x
            proposal = 2.0 / (1.0 + s) ** 3
            keep = rng.random(batch) * self.envelope * proposal < self.density(x, y)
            take = min(int(keep.sum()), n - filled)
            out[filled:filled + take, 0] = x[keep][:take]
            out[filled:filled + take, 1] = y[keep][:take]
            filled += take
        return out

    @property
    def mean(self):
        return np.array([np.inf, np.inf])

    def to_descriptor(self):
        return {"type": "oscillating", "gamma": self.gamma}

    def __repr__(self):
        return f"OscillatingModel(gamma={self.gamma})"


class DeterministicClaims(ClaimModel):
    def __init__(self, value):
        value = np.array(value, dtype=float).reshape(-1)
        if np.any(value < 0):
            raise ClaimModelError("claims must be nonnegative")
        self.value = value
        self.dim = value.size

    def sample(self, rng, n):
        return np.broadcast_to(self.value, (n, self.dim)).copy()

    @property
    def mean(self):
        return self.value.copy()

    def joint_survival(self, x):
        return np.all(np.asarray(x, dtype=float) < self.value, axis=-1).astype(float)

    def to_descriptor(self):
        return {"type": "deterministic", "value": self.value.tolist()}

    def __repr__(self):
        return f"DeterministicClaims({self.value.tolist()})"


def model_from_descriptor(desc: dict) -> ClaimModel:
    kind = desc.get("type")
    try:
        if kind == "independent":
            return IndependentMarginals([law_from_descriptor(m) for m in desc["marginals"]])
        if kind == "polar":
            return PolarModel(
                angular_from_descriptor(desc["angular"]),
                law_from_descriptor(desc["radial"]),
                desc.get("scales"),
            )
        if kind == "dyadic_simplex":
            return DyadicSimplex()
        if kind == "oscillating":
            return OscillatingModel(float(desc.get("gamma", 0.05)))
        if kind == "deterministic":
            return DeterministicClaims(desc["value"])
    except KeyError as exc:
        raise ClaimModelError(f"{kind} model is missing field {exc}") from None
    except LawError as exc:
        raise ClaimModelError(str(exc)) from None
    raise ClaimModelError(f"unknown claim model type {kind!r}")
