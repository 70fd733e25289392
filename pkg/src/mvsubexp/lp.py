"""Dense two-phase simplex for the small LPs used by the ruin-set geometry.

Problems here have at most ``d + d**2`` columns, so a full tableau is cheap.
Bland's rule is used for both entering and leaving variables, which rules
out cycling at the price of a few extra pivots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    fun: float
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], ncols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Minimise over the tableau ``T`` whose last row holds reduced costs.

    Only columns ``< ncols`` may enter.  Returns (status, iterations).
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        cost = T[m, :ncols]
        candidates = np.nonzero(cost < -tol)[0]
        if candidates.size == 0:
            return "optimal", it
        j = int(candidates[0])
        col = T[:m, j]
        rows = np.nonzero(col > tol)[0]
        if rows.size == 0:
            return "unbounded", it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise LPError("simplex iteration limit reached")


def solve_standard(c, A, b, tol: float = TOL, max_iter: int = 10_000, phase1_only: bool = False) -> LPResult:
    """Minimise ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``."""
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).reshape(-1)
    c = np.array(c, dtype=float).reshape(-1)
    m, n = A.shape
    if b.size != m or c.size != n:
        raise ValueError("inconsistent LP dimensions")

    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: one artificial per row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    status, it = _run(T, basis, n, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if -T[m, -1] > tol * scale * max(1, m):
        return LPResult("infeasible", None, np.nan, it)

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.nonzero(np.abs(T[r, :n]) > tol)[0]
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]
    m = len(keep)

    x = np.zeros(n)
    if phase1_only:
        x[basis] = T[:m, -1]
        return LPResult("optimal", x, 0.0, it)

    T[m, :n] = c
    T[m, -1] = 0.0
    for r, j in enumerate(basis):
        if T[m, j] != 0.0:
            T[m] -= T[m, j] * T[r]
    status, it2 = _run(T, basis, n, tol, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, -np.inf, it + it2)
    x[basis] = T[:m, -1]
    return LPResult("optimal", x, float(c @ x), it + it2)


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, free=None, tol: float = TOL) -> LPResult:
    """Minimise ``c @ x`` with inequality/equality rows.

    Variables are nonnegative unless listed in ``free`` (indices), in which
    case they are split into positive and negative parts internally.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    free = sorted(set(free or ()))
    blocks, rhs = [], []
    n_slack = 0 if A_ub is None else np.asarray(A_ub).shape[0]
    if A_ub is not None:
        A_ub = np.array(A_ub, dtype=float, ndmin=2)
        blocks.append(np.hstack([A_ub, np.eye(n_slack)]))
        rhs.append(np.asarray(b_ub, dtype=float).reshape(-1))
    if A_eq is not None:
        A_eq = np.array(A_eq, dtype=float, ndmin=2)
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_slack))]))
        rhs.append(np.asarray(b_eq, dtype=float).reshape(-1))
    if not blocks:
        raise ValueError("LP needs at least one constraint row")
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    cc = np.concatenate([c, np.zeros(n_slack)])
    if free:
        A = np.hstack([A, -A[:, free]])
        cc = np.concatenate([cc, -cc[free]])
    res = solve_standard(cc, A, b, tol=tol)
    if res.x is None:
        return res
    x = res.x[:n].copy()
    if free:
        x[free] -= res.x[n + n_slack:]
    return LPResult(res.status, x, float(c @ x), res.iterations)


def in_cone(generators: np.ndarray, y: np.ndarray, tol: float = TOL) -> bool:
    """Is ``y`` a nonnegative combination of the columns of ``generators``?"""
    G = np.asarray(generators, dtype=float)
    res = solve_standard(np.zeros(G.shape[1]), G, y, tol=tol, phase1_only=True)
    return res.status == "optimal"
