"""Dense two-phase simplex for small equality-form linear programs.

Solves ``min c @ x  s.t.  A @ x = b, x >= 0``. Problems here have a handful
of rows and up to a few ten thousand columns, so a full tableau is cheap and
keeps results bit-reproducible. Bland's rule is the default pivot rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

_MAX_REFRESH = 8


def _fresh_tableau(A, b, c, basis, m_art):
    """Tableau for ``basis`` computed directly from ``A x = b`` (artificial columns zeroed)."""
    mk, n = A.shape
    B = A[:, basis]
    try:
        rows = np.linalg.solve(B, np.column_stack([A, b]))
    except np.linalg.LinAlgError:
        return None
    T = np.zeros((mk + 1, n + m_art + 1))
    T[:mk, :n] = rows[:, :n]
    T[:mk, -1] = np.where(np.abs(rows[:, -1]) < 1e-13, 0.0, rows[:, -1])
    if (T[:mk, -1] < -1e-9).any():
        return None
    T[:mk, -1] = np.clip(T[:mk, -1], 0.0, None)
    T[mk, :n] = c - c[basis] @ rows[:, :n]
    T[mk, -1] = -(c[basis] @ T[:mk, -1])
    return T


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    fun: float = np.nan
    dual: np.ndarray | None = None
    basis: np.ndarray | None = None
    farkas: np.ndarray | None = None
    infeasibility: float = 0.0
    nit: int = 0
    redundant_rows: list[int] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def solve_lp(c, A, b, *, tol: float = 1e-11, feas_tol: float = 1e-9,
             max_iter: int | None = None, rule: str = "bland") -> LPResult:
    """Minimize ``c @ x`` over ``{x >= 0 : A x = b}``.

    On infeasibility the result carries a Farkas vector ``y`` with
    ``y @ A <= 0`` componentwise (within tolerance) and ``y @ b > 0``.
    On optimality ``dual`` solves ``B.T y = c_B`` for the final basis, so
    ``y @ A <= c`` and ``y @ b == fun``.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.array(A, dtype=np.float64, ndmin=2)
    b = np.array(b, dtype=np.float64, ndmin=1)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError(f"shape mismatch: c{c.shape}, A{A.shape}, b{b.shape}")
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    bland = rule == "bland"
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = As
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = bs
    T[m, :n] = -As.sum(axis=0)
    T[m, -1] = -bs.sum()
    basis = np.arange(n, n + m, dtype=np.int64)

    status, it1 = _kernels.pivot_loop(T, basis, n + m, tol, max_iter, bland)
    if status == _kernels.ITERATION_LIMIT:
        return LPResult("iteration_limit", nit=it1)
    infeas = -T[m, -1]
    scale = max(1.0, float(np.abs(bs).max(initial=0.0)))
    if infeas > feas_tol * scale:
        # phase-one duals: artificial column reduced cost is 1 - y_j
        y = (1.0 - T[m, n:n + m]) * sign
        return LPResult("infeasible", farkas=y, infeasibility=float(infeas), nit=it1)

    # drive zero-level artificials out of the basis
    keep = []
    redundant = []
    for r in range(m):
        if basis[r] >= n:
            row = T[r, :n]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _kernels._pivot_np(T, r, cand[0])
                basis[r] = cand[0]
                keep.append(r)
            else:
                redundant.append(r)
        else:
            keep.append(r)
    if redundant:
        rows = keep + [m]
        T = T[rows]
        basis = basis[keep]
    mk = len(keep)

    cost = np.concatenate([c, np.zeros(m)])
    T[mk, :] = 0.0
    T[mk, :n + m] = cost
    for r in range(mk):
        T[mk] -= cost[basis[r]] * T[r]

    Ak, bk = As[keep], bs[keep]
    nit = it1
    for _ in range(_MAX_REFRESH):
        status, it2 = _kernels.pivot_loop(T, basis, n, tol, max_iter, bland)
        nit += it2
        if status != _kernels.OPTIMAL:
            break
        if mk == 0 or it2 == 0 or basis.max() >= n:
            break
        # rebuild the tableau from the original data on the final basis and
        # resume when round-off had hidden a negative reduced cost
        T = _fresh_tableau(Ak, bk, c, basis, m)
        if T is None:
            break
        if not (T[mk, :n] < -tol).any():
            break
    if status == _kernels.UNBOUNDED:
        return LPResult("unbounded", nit=nit)
    if status == _kernels.ITERATION_LIMIT:
        return LPResult("iteration_limit", nit=nit)

    x = np.zeros(n)
    for r in range(mk):
        x[basis[r]] = max(T[r, -1], 0.0)
    y = np.zeros(m)
    Ak = A[keep]
    if mk:
        y_k, *_ = np.linalg.lstsq(Ak[:, basis].T, c[basis], rcond=None)
        y[keep] = y_k
    return LPResult("optimal", x=x, fun=float(c @ x), dual=y, basis=basis.copy(),
                    nit=nit, redundant_rows=redundant)
