"""Affine transformations between state spaces and invertibility certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import State, StateSpace, membership, resolve_tol
from .errors import DimensionError, InvalidTransformationError, NotInvertibleError


@dataclass(frozen=True)
class InvertibilityCertificate:
    inverse_matrix: np.ndarray
    max_roundtrip_error: float
    surjectivity_witness: bool
    condition_number: float


class Transformation:
    """Affine map acting on homogeneous coordinates by ``matrix @ coords``."""

    def __init__(self, matrix, domain: StateSpace, codomain: StateSpace | None = None, *,
                 label: str = "", permutation=None, tol: float | None = None, check: bool = True):
        codomain = domain if codomain is None else codomain
        M = np.array(matrix, dtype=np.float64, ndmin=2)
        if M.shape != (codomain.size, domain.size):
            raise DimensionError(f"matrix shape {M.shape} does not map R^{domain.size} to R^{codomain.size}")
        M.setflags(write=False)
        self.matrix = M
        self.domain = domain
        self.codomain = codomain
        self.label = label
        self.permutation = None if permutation is None else tuple(int(i) for i in permutation)
        self._certificate: InvertibilityCertificate | None = None
        if check:
            problem = self._first_problem(resolve_tol(tol))
            if problem:
                raise InvalidTransformationError(problem)

    def _first_problem(self, t: float) -> str | None:
        X = self.domain.pure_states
        affine = np.abs(X @ self.matrix[-1] - 1.0)
        if affine.max() > t:
            return f"bottom row does not preserve the homogeneous coordinate (margin {affine.max():.3g})"
        images = X @ self.matrix.T
        for k, y in enumerate(images):
            m = membership(y, self.codomain, tol=t)
            if not m.inside:
                return f"image of pure state {k} leaves the codomain (margin {m.residual:.3g})"
        return None

    @property
    def certificate(self) -> InvertibilityCertificate | None:
        return self._certificate

    def __repr__(self) -> str:
        return f"Transformation({self.label!r}, {self.domain.label!r} -> {self.codomain.label!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transformation):
            return NotImplemented
        return (self.domain == other.domain and self.codomain == other.codomain
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None

    def __call__(self, s: State) -> State:
        return apply(self, s)


def _fix_bottom_row(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Replace the last row by the unit functional; agrees with ``M`` on span(X)."""
    M = M.copy()
    last = np.zeros(M.shape[1])
    last[-1] = 1.0
    if np.allclose(X @ M[-1], 1.0, atol=1e-12, rtol=0):
        M[-1] = last
    return M


def _left_inverse(X: np.ndarray) -> np.ndarray:
    """Left inverse ``G`` of the vertex matrix ``X`` (columns = vertices).

    Prefers an exact coordinate selection when the vertices are affinely
    independent and some coordinates are indicator functions of single
    vertices (product simplices); otherwise falls back to the pseudo-inverse.
    """
    D, N = X.shape
    if np.linalg.matrix_rank(X) == N:
        chosen_rows = [-1] * N
        for r in range(D):
            nz = np.flatnonzero(X[r])
            if nz.size == 1 and X[r, nz[0]] == 1.0 and chosen_rows[nz[0]] == -1:
                chosen_rows[nz[0]] = r
        if all(r >= 0 for r in chosen_rows):
            G = np.zeros((N, D))
            G[np.arange(N), chosen_rows] = 1.0
            return G
    return np.linalg.pinv(X)


def permutation_transformation(space: StateSpace, perm, *, codomain: StateSpace | None = None,
                               label: str = "", check: bool = True) -> Transformation:
    """Linear extension of the vertex map ``k -> perm[k]``."""
    codomain = space if codomain is None else codomain
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (len(space.pure_states),):
        raise DimensionError(f"permutation needs {len(space.pure_states)} entries")
    X = space.pure_states.T
    Y = codomain.pure_states[perm].T
    M = _fix_bottom_row(Y @ _left_inverse(X), space.pure_states)
    if check:
        miss = float(np.abs(M @ X - Y).max())
        if miss > 1e-9:
            raise InvalidTransformationError(
                f"vertex permutation does not extend to an affine map (margin {miss:.3g})")
    return Transformation(M, space, codomain, label=label, permutation=perm, check=check)


def identity(space: StateSpace) -> Transformation:
    return Transformation(np.eye(space.size), space, label="id", check=False)


def apply(T: Transformation, s: State, *, tol: float | None = None) -> State:
    if s.space != T.domain:
        raise DimensionError("state does not belong to the transformation's domain")
    y = T.matrix @ s.coords
    m = membership(y, T.codomain, tol=tol)
    if not m.inside:
        raise InvalidTransformationError(
            f"transformation invalid on this state (image outside codomain, margin {m.residual:.3g})")
    return State(y, T.codomain, check=False)


def verify_invertible(T: Transformation, tol: float | None = None, *,
                      cond_cap: float = 1e8) -> InvertibilityCertificate:
    """Certify that ``T`` is an affine bijection of its domain onto its codomain.

    Raises ``NotInvertibleError`` naming the failing vertex or the singular
    linear part.
    """
    t = resolve_tol(tol)
    dom, cod = T.domain, T.codomain
    if dom.dim != cod.dim:
        raise NotInvertibleError(f"dimension mismatch: {dom.dim} vs {cod.dim}")
    X = dom.pure_states.T
    Y = T.matrix @ X
    for k in range(X.shape[1]):
        m = membership(Y[:, k], cod, tol=t)
        if not m.inside:
            raise NotInvertibleError("image leaves the codomain", vertex=k, margin=m.residual)

    restricted = cod.basis @ T.matrix @ dom.basis.T
    if restricted.shape[0] != restricted.shape[1]:
        raise NotInvertibleError("singular linear part: spans have different dimension")
    sv = np.linalg.svd(restricted, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise NotInvertibleError("singular linear part", margin=float(sv[-1]))
    cond = float(sv[0] / sv[-1])
    if cond > cond_cap:
        raise NotInvertibleError(f"condition number {cond:.3g} exceeds cap {cond_cap:.3g}")

    if dom.geometry == "polytope":
        inv = X @ _left_inverse(Y)
    else:
        inv = dom.basis.T @ np.linalg.inv(restricted) @ cod.basis
    inv = _fix_bottom_row(inv, cod.pure_states)

    Q = cod.pure_states.T
    pre = inv @ Q
    for k in range(Q.shape[1]):
        m = membership(pre[:, k], dom, tol=t)
        if not m.inside:
            raise NotInvertibleError("codomain pure state has no preimage", vertex=k, margin=m.residual)
    err_fwd = float(np.abs(inv @ Y - X).max())
    err_back = float(np.abs(T.matrix @ pre - Q).max())
    err = max(err_fwd, err_back)
    if err > t:
        raise NotInvertibleError("round trip does not return the vertices", margin=err)
    cert = InvertibilityCertificate(inverse_matrix=inv, max_roundtrip_error=err,
                                    surjectivity_witness=True, condition_number=cond)
    T._certificate = cert
    return cert


def inverse(T: Transformation, tol: float | None = None) -> Transformation:
    cert = T.certificate or verify_invertible(T, tol)
    perm = None
    if T.permutation is not None:
        perm = np.argsort(T.permutation)
    inv = Transformation(cert.inverse_matrix, T.codomain, T.domain, label=f"{T.label}^-1",
                         permutation=perm, check=False)
    return inv


def compose(T1: Transformation, T2: Transformation) -> Transformation:
    """The map ``T2 after T1``."""
    if T1.codomain != T2.domain:
        raise DimensionError("T1's codomain must equal T2's domain")
    perm = None
    if T1.permutation is not None and T2.permutation is not None and T1.domain == T1.codomain:
        perm = np.asarray(T2.permutation)[np.asarray(T1.permutation)]
    out = Transformation(T2.matrix @ T1.matrix, T1.domain, T2.codomain,
                         label=f"{T2.label}*{T1.label}", permutation=perm, check=False)
    if T1.certificate is not None and T2.certificate is not None:
        inv = T1.certificate.inverse_matrix @ T2.certificate.inverse_matrix
        err = T1.certificate.max_roundtrip_error + T2.certificate.max_roundtrip_error
        out._certificate = InvertibilityCertificate(
            inverse_matrix=inv, max_roundtrip_error=err, surjectivity_witness=True,
            condition_number=T1.certificate.condition_number * T2.certificate.condition_number)
    return out


def power(T: Transformation, j: int) -> Transformation:
    if j < 0:
        return power(inverse(T), -j)
    out = identity(T.domain)
    if T.permutation is not None:
        out.permutation = tuple(range(len(T.domain.pure_states)))
    if T.certificate is not None:
        out._certificate = InvertibilityCertificate(np.eye(T.domain.size), 0.0, True, 1.0)
    for _ in range(j):
        out = compose(out, T)
    return out


def random_symmetry(space: StateSpace, rng: np.random.Generator, *, max_tries: int = 200,
                    tol: float | None = None) -> Transformation:
    """Random certified vertex-permutation symmetry of a polytope.

    Random permutations are proposed and kept when they extend to an affine
    bijection; falls back to the identity after ``max_tries`` rejections.
    """
    n = len(space.pure_states)
    for _ in range(max_tries):
        perm = rng.permutation(n)
        try:
            T = permutation_transformation(space, perm)
            verify_invertible(T, tol)
            return T
        except (InvalidTransformationError, NotInvertibleError):
            continue
    T = permutation_transformation(space, np.arange(n))
    verify_invertible(T, tol)
    return T
