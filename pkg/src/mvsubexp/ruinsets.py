"""Polyhedral ruin sets: open, increasing sets with a convex complement.

A ruin set ``A`` is stored through a finite list of supporting directions
``p_k >= 0`` so that ``A = {x : p_k . x > 1 for some k}``.  Scaling the set
by ``u`` keeps the directions and compares against ``u`` instead of 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lp import in_cone, linprog

SIMPLEX_TOL = 1e-12


class RuinSetError(ValueError):
    """Raised for an invalid ruin-set description."""


class BidAskError(RuinSetError):
    def __init__(self, constraint: str, message: str):
        super().__init__(f"constraint {constraint} violated: {message}")
        self.constraint = constraint


def validate(directions) -> str | None:
    """Return ``None`` when ``directions`` describe a valid family, else the first violation."""
    try:
        P = np.array(directions, dtype=float, ndmin=2)
    except (TypeError, ValueError):
        return "directions are not a numeric table"
    if P.size == 0 or P.shape[0] == 0:
        return "empty list"
    if P.ndim != 2:
        return "directions must be a list of d-vectors"
    if not np.all(np.isfinite(P)):
        return "non-finite component"
    for k, p in enumerate(P):
        if np.any(p < 0):
            return f"negative component in direction {k}"
        if not np.any(p > 0):
            return f"zero direction at index {k}"
    return None


@dataclass(frozen=True, eq=False)
class HyperplaneFamily:
    """Supporting directions ``I_A`` of a ruin set ``A``."""

    directions: np.ndarray

    def __post_init__(self):
        P = np.array(self.directions, dtype=float, ndmin=2)
        problem = validate(P)
        if problem:
            raise RuinSetError(problem)
        P.setflags(write=False)
        object.__setattr__(self, "directions", P)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]

    def __repr__(self):
        return f"HyperplaneFamily(directions={self.directions.tolist()})"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise RuinSetError(f"dimension mismatch: family has d={self.dim}, point has {x.shape[-1]}")
        return x

    def projections(self, x) -> np.ndarray:
        """``p_k . x`` for every direction; shape ``x.shape[:-1] + (K,)``."""
        return self._check(x) @ self.directions.T

    def scale_index(self, x) -> np.ndarray | float:
        """``sup{u > 0 : x in uA}``, or 0 when ``x`` is in no ``uA``."""
        y = np.maximum(self.projections(x).max(axis=-1), 0.0)
        return float(y) if np.ndim(y) == 0 else y

    def membership(self, x, u):
        """True iff ``x`` lies in the open set ``uA``."""
        if np.any(np.asarray(u) <= 0):
            raise RuinSetError("level u must be positive")
        out = self.scale_index(x) > u
        return bool(out) if np.ndim(out) == 0 else out

    def height(self, theta) -> float:
        """``inf{w > 0 : w theta in A}`` for ``theta`` on the unit simplex."""
        theta = self._check(theta)
        if theta.ndim != 1:
            raise RuinSetError("height takes a single simplex point")
        if np.any(theta < 0) or abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise RuinSetError("theta is not on the unit simplex")
        y = self.scale_index(theta)
        return np.inf if y == 0 else 1.0 / y

    def excess_sojourn(self, x, c, u):
        """Length of ``{v >= 0 : x - v c in uA}``, the single-sample integrand of H(u)."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.dim,) or np.any(c <= 0):
            raise RuinSetError("drift vector c must have positive components")
        rates = self.directions @ c
        v = ((self.projections(x) - u) / rates).max(axis=-1)
        v = np.maximum(v, 0.0)
        return float(v) if np.ndim(v) == 0 else v

    def scaled(self, lam: float) -> "HyperplaneFamily":
        """Family of the set ``A / lam`` (directions multiplied by ``lam``)."""
        if lam <= 0:
            raise RuinSetError("scale factor must be positive")
        return HyperplaneFamily(self.directions * lam)

    def prune(self, tol: float = 1e-9) -> "HyperplaneFamily":
        """Drop directions whose half-space is implied by the others on the complement of A."""
        P = np.unique(self.directions, axis=0)
        keep = list(range(P.shape[0]))
        for j in range(P.shape[0]):
            others = [k for k in keep if k != j]
            if not others:
                continue
            res = linprog(-P[j], A_ub=P[others], b_ub=np.ones(len(others)), free=range(self.dim))
            if res.status == "optimal" and -res.fun <= 1.0 + tol:
                keep.remove(j)
        return HyperplaneFamily(P[keep])

    def to_descriptor(self) -> dict:
        return {"type": "hyperplanes", "directions": self.directions.tolist()}


@dataclass(frozen=True, eq=False)
class BidAskSpec:
    """Bid-ask transfer matrix ``pi`` and capital allocation ``b``."""

    pi: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float, ndmin=2)
        b = np.array(self.b, dtype=float).reshape(-1)
        d = b.size
        if pi.shape != (d, d):
            raise RuinSetError(f"pi must be {d}x{d} to match b")
        for i, j in itertools.product(range(d), repeat=2):
            if pi[i, j] < 1.0:
                raise BidAskError("(i)", f"pi[{i}][{j}] = {pi[i, j]} < 1")
        for i in range(d):
            if pi[i, i] != 1.0:
                raise BidAskError("(ii)", f"pi[{i}][{i}] = {pi[i, i]} != 1")
        for i, j, k in itertools.product(range(d), repeat=3):
            if pi[i, j] > pi[i, k] * pi[k, j] * (1 + 1e-12):
                raise BidAskError("(iii)", f"pi[{i}][{j}] > pi[{i}][{k}] * pi[{k}][{j}]")
        if np.any(b <= 0) or not np.all(np.isfinite(b)):
            raise RuinSetError("allocation b must have positive entries")
        pi.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.size

    def generators(self) -> np.ndarray:
        """Columns spanning the solvency cone: ``pi_ij e^i - e^j`` and ``e^i``."""
        d = self.dim
        cols = []
        for i, j in itertools.product(range(d), repeat=2):
            if i != j:
                g = np.zeros(d)
                g[i] = self.pi[i, j]
                g[j] = -1.0
                cols.append(g)
        cols.extend(np.eye(d))
        return np.array(cols).T

    def cone_membership(self, x, u: float) -> bool:
        """Direct LP test of ``x in uA``, i.e. ``u b - x`` outside the solvency cone."""
        return not in_cone(self.generators(), u * self.b - np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class LinearMapSpec:
    """Increasing linear map ``T : R^d -> R^k`` (entrywise nonnegative)."""

    T: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=float, ndmin=2)
        if np.any(T < 0):
            raise RuinSetError("linear map must be entrywise nonnegative")
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.T.T


def _dual_extreme_rays(G: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Extreme rays of ``{p : G^T p >= 0}`` by enumerating (d-1)-subsets of tight rows."""
    d = G.shape[0]
    if d == 1:
        return np.ones((1, 1))
    rays = []
    for subset in itertools.combinations(range(G.shape[1]), d - 1):
        rows = G[:, subset].T
        _, s, vt = np.linalg.svd(rows)
        rank = int(np.sum(s > 1e-10 * max(1.0, s.max())))
        if rank != d - 1:
            continue
        v = vt[-1]
        for cand in (v, -v):
            if np.all(G.T @ cand >= -tol * np.abs(G).max()):
                rays.append(cand)
    return np.array(rays)


def compile_bidask(spec: BidAskSpec, max_dim: int = 3) -> HyperplaneFamily:
    """Supporting directions of ``A = b - L`` for the bid-ask solvency set.

    The directions are the extreme rays of the dual of the solvency cone,
    each normalised so that ``p . b = 1``.
    """
    if spec.dim > max_dim:
        raise RuinSetError(
            f"exact ray enumeration is limited to d <= {max_dim}; use SolvencyRuinSet for d={spec.dim}"
        )
    rays = _dual_extreme_rays(spec.generators())
    if rays.size == 0:
        raise RuinSetError("degenerate dual cone: no strictly positive direction")
    out = []
    for p in rays:
        p = np.where(np.abs(p) < 1e-13 * np.abs(p).max(), 0.0, p)
        p = np.clip(p, 0.0, None)
        scale = p @ spec.b
        if scale <= 0:
            continue
        p = p / scale
        if not any(np.allclose(p, q, rtol=1e-10, atol=1e-13) for q in out):
            out.append(p)
    if not out:
        raise RuinSetError("degenerate dual cone: no strictly positive direction")
    out.sort(key=lambda p: tuple(p))
    return HyperplaneFamily(np.array(out))


@dataclass(frozen=True, eq=False)
class SolvencyRuinSet:
    """LP-backed bid-ask ruin set for dimensions where rays are not enumerated."""

    spec: BidAskSpec
    _G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_G", self.spec.generators())

    @property
    def dim(self) -> int:
        return self.spec.dim

    def _one_scale(self, x: np.ndarray) -> float:
        # min u  s.t.  u b - G lam = x, lam >= 0, u free
        G = self._G
        A_eq = np.hstack([self.spec.b[:, None], -G])
        cost = np.zeros(A_eq.shape[1])
        cost[0] = 1.0
        res = linprog(cost, A_eq=A_eq, b_eq=x, free=[0])
        if res.status != "optimal":
            raise RuinSetError(f"scale-index LP failed: {res.status}")
        return max(0.0, res.fun)

    def scale_index(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise RuinSetError("dimension mismatch")
        flat = x.reshape(-1, self.dim)
        out = np.array([self._one_scale(row) for row in flat]).reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def membership(self, x, u):
        if np.any(np.asarray(u) <= 0):
            raise RuinSetError("level u must be positive")
        out = self.scale_index(x) > u
        return bool(out) if np.ndim(out) == 0 else out

    def height(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0) or abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise RuinSetError("theta is not on the unit simplex")
        y = self.scale_index(theta)
        return np.inf if y == 0 else 1.0 / y

    def excess_sojourn(self, x, c, u: float):
        # Charnes-Cooper form of max_p (p.x - u) / (p.c) over the dual cone slice p.b = 1
        c = np.asarray(c, dtype=float)
        if np.any(c <= 0):
            raise RuinSetError("drift vector c must have positive components")
        d = self.dim
        G = self._G
        A_ub = np.hstack([-G.T, np.zeros((G.shape[1], 1))])
        A_eq = np.vstack([np.append(self.spec.b, -1.0), np.append(c, 0.0)])
        b_eq = np.array([0.0, 1.0])
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, d)
        vals = []
        for row in flat:
            res = linprog(-np.append(row, -u), A_ub=A_ub, b_ub=np.zeros(G.shape[1]), A_eq=A_eq, b_eq=b_eq)
            vals.append(max(0.0, -res.fun))
        out = np.array(vals).reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out


def pullback(family: HyperplaneFamily, linmap: LinearMapSpec) -> HyperplaneFamily:
    """Family of ``T^{-1} A``: directions ``T^T p_k`` (zero images are dropped)."""
    T = linmap.T if isinstance(linmap, LinearMapSpec) else LinearMapSpec(linmap).T
    if T.shape[0] != family.dim:
        raise RuinSetError(f"map has {T.shape[0]} outputs, family lives in d={family.dim}")
    Q = family.directions @ T
    Q = Q[np.any(Q > 0, axis=1)]
    if Q.shape[0] == 0:
        raise RuinSetError("all directions annihilated by the map")
    return HyperplaneFamily(Q)


def family_from_descriptor(desc: dict):
    """Build a ruin set from its JSON descriptor."""
    kind = desc.get("type")
    if kind == "hyperplanes":
        return HyperplaneFamily(desc["directions"])
    if kind == "aggregate":
        w = np.asarray(desc["weights"], dtype=float)
        capital = float(desc.get("capital", 1.0))
        if capital <= 0:
            raise RuinSetError("aggregate capital must be positive")
        return HyperplaneFamily([w / capital])
    if kind == "union":
        thr = np.asarray(desc["thresholds"], dtype=float)
        if np.any(thr <= 0):
            raise RuinSetError("union thresholds must be positive")
        return HyperplaneFamily(np.diag(1.0 / thr))
    if kind == "bidask":
        spec = BidAskSpec(desc["pi"], desc["b"])
        if spec.dim <= 3:
            return compile_bidask(spec)
        return SolvencyRuinSet(spec)
    raise RuinSetError(f"unknown ruin-set type {kind!r}")


def check_set_properties(family, rng: np.random.Generator, n: int = 1000, u: float = 1.0) -> list[str]:
    """Sample-based check that the represented set is increasing with convex complement.

    Returns a list of violated properties (empty when none are found).
    """
    d = family.dim
    problems = []
    x = rng.normal(scale=2.0 * u, size=(n, d))
    a = rng.exponential(scale=u, size=(n, d))
    inside = family.membership(x, u)
    if np.any(inside & ~family.membership(x + a, u)):
        problems.append("not increasing")
    y = rng.normal(scale=2.0 * u, size=(n, d))
    t = rng.random((n, 1))
    both_out = ~inside & ~family.membership(y, u)
    mid = family.membership(t * x + (1 - t) * y, u)
    if np.any(both_out & mid):
        problems.append("complement not convex")
    if family.scale_index(np.zeros(d)) != 0:
        problems.append("origin inside the set")
    return problems
