"""Hot numeric kernels with a numba-compiled path and a pure-numpy path.

The backend is chosen once at import time. Set ``GPTLAB_DISABLE_NUMBA=1`` to
force the numpy implementations (useful when numba is unavailable or when
debugging); ``use_backend`` switches temporarily, mainly for tests and the
benchmark script.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2

# smallest admissible pivot element; tiny pivots amplify round-off in the tableau
_PIVOT_TOL = 1e-9


def _env_backend() -> str:
    if not HAVE_NUMBA or os.environ.get("GPTLAB_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy"
    return "numba"


BACKEND = _env_backend()


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _pivot_np(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _pivot_loop_np(T, basis, n_allowed, tol, max_iter, bland):
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for it in range(max_iter):
        reduced = T[m, :n_allowed]
        if bland:
            cand = np.flatnonzero(reduced < -tol)
            if cand.size == 0:
                return OPTIMAL, it
            c = cand[0]
        else:
            c = int(np.argmin(reduced))
            if reduced[c] >= -tol:
                return OPTIMAL, it
        col = T[:m, c]
        ok = col > _PIVOT_TOL
        if not ok.any():
            return UNBOUNDED, it
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, rhs][ok] / col[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-13 * max(1.0, abs(best)))
        r = ties[np.argmin(basis[ties])]
        _pivot_np(T, r, c)
        basis[r] = c
    return ITERATION_LIMIT, max_iter


def _grouped_bhattacharyya_np(p, q, groups, n_groups):
    n_samples, n_cols = p.shape
    rows = np.repeat(np.arange(n_samples), n_cols)
    gp = np.zeros((n_samples, n_groups))
    gq = np.zeros((n_samples, n_groups))
    np.add.at(gp, (rows, groups.ravel()), p.ravel())
    np.add.at(gq, (rows, groups.ravel()), q.ravel())
    return np.sqrt(np.clip(gp, 0.0, None) * np.clip(gq, 0.0, None)).sum(axis=1)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _pivot_nb(T, r, c):
        m1, n1 = T.shape
        piv = T[r, c]
        for k in range(n1):
            T[r, k] /= piv
        for i in range(m1):
            if i == r:
                continue
            f = T[i, c]
            if f != 0.0:
                for k in range(n1):
                    T[i, k] -= f * T[r, k]

    @njit(cache=True)
    def _pivot_loop_nb(T, basis, n_allowed, tol, max_iter, bland):
        m = T.shape[0] - 1
        rhs = T.shape[1] - 1
        for it in range(max_iter):
            c = -1
            if bland:
                for j in range(n_allowed):
                    if T[m, j] < -tol:
                        c = j
                        break
            else:
                best_rc = -tol
                for j in range(n_allowed):
                    if T[m, j] < best_rc:
                        best_rc = T[m, j]
                        c = j
            if c == -1:
                return OPTIMAL, it
            best = np.inf
            for i in range(m):
                a = T[i, c]
                if a > _PIVOT_TOL:
                    ratio = T[i, rhs] / a
                    if ratio < best:
                        best = ratio
            r = -1
            if best < np.inf:
                limit = best + 1e-13 * max(1.0, abs(best))
                for i in range(m):
                    a = T[i, c]
                    if a > _PIVOT_TOL and T[i, rhs] / a <= limit:
                        if r == -1 or basis[i] < basis[r]:
                            r = i
            if r == -1:
                return UNBOUNDED, it
            _pivot_nb(T, r, c)
            basis[r] = c
        return ITERATION_LIMIT, max_iter

    @njit(cache=True)
    def _grouped_bhattacharyya_nb(p, q, groups, n_groups):
        n_samples, n_cols = p.shape
        out = np.empty(n_samples)
        gp = np.empty(n_groups)
        gq = np.empty(n_groups)
        for s in range(n_samples):
            gp[:] = 0.0
            gq[:] = 0.0
            for k in range(n_cols):
                g = groups[s, k]
                gp[g] += p[s, k]
                gq[g] += q[s, k]
            acc = 0.0
            for g in range(n_groups):
                a = gp[g] if gp[g] > 0.0 else 0.0
                b = gq[g] if gq[g] > 0.0 else 0.0
                acc += np.sqrt(a * b)
            out[s] = acc
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def pivot_loop(T, basis, n_allowed, tol, max_iter, bland=True):
    """Run simplex pivots in place on tableau ``T`` until optimality.

    ``T`` has the constraint rows first and the reduced-cost row last; the
    last column is the right-hand side. Only the first ``n_allowed`` columns
    may enter the basis. Returns ``(status, iterations)``.
    """
    if BACKEND == "numba":
        status, it = _pivot_loop_nb(T, basis, int(n_allowed), float(tol), int(max_iter), bool(bland))
    else:
        status, it = _pivot_loop_np(T, basis, int(n_allowed), float(tol), int(max_iter), bool(bland))
    return int(status), int(it)


def grouped_bhattacharyya(p, q, groups, n_groups):
    """Classical fidelity of coarse-grained distributions, one per row.

    ``p`` and ``q`` hold fine-grained outcome probabilities of shape
    ``(n_samples, n_outcomes)``; ``groups`` assigns each fine outcome to one
    of ``n_groups`` coarse outcomes.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    if BACKEND == "numba":
        return _grouped_bhattacharyya_nb(p, q, groups, int(n_groups))
    return _grouped_bhattacharyya_np(p, q, groups, int(n_groups))


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily select ``"numba"`` or ``"numpy"`` kernels."""
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    previous = BACKEND
    BACKEND = name
    try:
        yield
    finally:
        BACKEND = previous


def warmup() -> None:
    """Trigger JIT compilation so later timings exclude compile cost."""
    if BACKEND != "numba":
        return
    T = np.array([[1.0, 1.0, 1.0, 1.0], [-1.0, -1.0, 0.0, -1.0]])
    basis = np.array([2], dtype=np.int64)
    pivot_loop(T, basis, 2, 1e-12, 10, True)
    pivot_loop(T.copy(), basis.copy(), 2, 1e-12, 10, False)
    grouped_bhattacharyya(np.ones((1, 2)) / 2, np.ones((1, 2)) / 2, np.zeros((1, 2), dtype=np.int64), 1)
