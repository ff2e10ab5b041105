"""Metric nilpotent Lie algebras given by structure constants.

The algebra is stored as the array ``c[i, j, k]``, the coefficient of ``e_k``
in ``[e_i, e_j]``, together with an inner product matrix ``ip`` on the basis.
Everything here is plain linear algebra on small dense arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RANK_RTOL = 1e-10
PLANE_TOL = 1e-12


class NotNilpotent(ValueError):
    pass


class ConditionFails(ValueError):
    pass


def _as_vector(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected vector of length {n}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Structure constants ``c`` (n x n x n) and inner product ``ip`` (n x n)."""

    c: np.ndarray
    ip: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise ValueError("structure constants must have shape (n, n, n)")
        n = c.shape[0]
        ip = np.eye(n) if self.ip is None else np.array(self.ip, dtype=float)
        if ip.shape != (n, n):
            raise ValueError("inner product must be n x n")
        if not np.allclose(ip, ip.T, atol=1e-14):
            raise ValueError("inner product must be symmetric")
        if np.linalg.eigvalsh(ip).min() <= 0:
            raise ValueError("inner product must be positive definite")
        if not np.allclose(c, -np.transpose(c, (1, 0, 2)), atol=1e-14):
            raise ValueError("structure constants are not antisymmetric")
        c.setflags(write=False)
        ip.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "ip", ip)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def basis(self, i: int) -> np.ndarray:
        e = np.zeros(self.n)
        e[i] = 1.0
        return e

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.ip @ np.asarray(y))

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def ad_matrix(self, x) -> np.ndarray:
        """Matrix of ``y -> [x, y]`` acting on coordinate columns."""
        x = _as_vector(x, self.n)
        return np.einsum("i,ijk->kj", x, self.c)

    def jacobi_residual(self) -> float:
        """Max |[e_i,[e_j,e_k]] + cyclic| over all basis triples."""
        c = self.c
        # [e_j, e_k] = c[j,k,m] e_m, then [e_i, e_m] = c[i,m,l] e_l
        t = np.einsum("jkm,iml->ijkl", c, c)
        cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
        return float(np.abs(cyc).max()) if cyc.size else 0.0

    def is_two_step(self, tol: float = 1e-12) -> bool:
        # [g, [g, g]] = 0
        t = np.einsum("jkm,iml->ijkl", self.c, self.c)
        return bool(np.abs(t).max(initial=0.0) <= tol)

    def to_dict(self) -> dict:
        n = self.n
        brackets = []
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(n):
                    if self.c[i, j, k] != 0.0:
                        brackets.append([i + 1, j + 1, k + 1, float(self.c[i, j, k])])
        out = {"dim": n, "brackets": brackets}
        if not np.array_equal(self.ip, np.eye(n)):
            out["ip"] = self.ip.tolist()
        if self.name:
            out["name"] = self.name
        return out


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace with a basis that is orthonormal for the algebra's inner product."""

    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, x, ip: np.ndarray, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return bool(np.linalg.norm(x) <= tol)
        coef = self.basis @ ip @ x
        return bool(np.linalg.norm(x - coef @ self.basis) <= tol * max(1.0, np.linalg.norm(x)))


def from_brackets(dim: int, brackets, ip=None, name: str = "") -> LieAlgebra:
    """Build an algebra from 1-based ``[i, j, k, coeff]`` entries; antisymmetry is filled in."""
    c = np.zeros((dim, dim, dim))
    for i, j, k, coeff in brackets:
        i, j, k = int(i) - 1, int(j) - 1, int(k) - 1
        if not (0 <= i < dim and 0 <= j < dim and 0 <= k < dim):
            raise ValueError(f"bracket index out of range: {[i + 1, j + 1, k + 1]}")
        if i == j:
            if coeff != 0:
                raise ValueError("[e_i, e_i] must vanish")
            continue
        c[i, j, k] = coeff
        c[j, i, k] = -coeff
    return LieAlgebra(c, ip, name=name)


def load_algebra(path) -> LieAlgebra:
    data = json.loads(Path(path).read_text())
    return algebra_from_dict(data)


def algebra_from_dict(data: dict) -> LieAlgebra:
    if "preset" in data:
        return preset(data["preset"], **{k: v for k, v in data.items() if k != "preset"})
    if "file" in data:
        return load_algebra(data["file"])
    return from_brackets(int(data["dim"]), data.get("brackets", []), data.get("ip"), data.get("name", ""))


def abelian(n: int) -> LieAlgebra:
    return LieAlgebra(np.zeros((n, n, n)), name=f"R^{n}")


def heisenberg() -> LieAlgebra:
    return from_brackets(3, [[1, 2, 3, 1.0]], name="heisenberg")


def heisenberg_plus_r() -> LieAlgebra:
    return from_brackets(4, [[1, 2, 3, 1.0]], name="heisenberg+R")


def filiform(n: int) -> LieAlgebra:
    """L_n: orthonormal basis with [X_1, X_i] = X_{i+1}, all other brackets zero."""
    if n < 3:
        raise ValueError("filiform algebras need n >= 3")
    return from_brackets(n, [[1, i, i + 1, 1.0] for i in range(2, n)], name=f"L_{n}")


def preset(name: str, **kw) -> LieAlgebra:
    name = name.lower()
    if name in ("heisenberg", "h3"):
        return heisenberg()
    if name in ("heisenberg+r", "heisenberg_plus_r", "h3+r"):
        return heisenberg_plus_r()
    if name == "filiform":
        return filiform(int(kw["n"]))
    if name == "abelian":
        return abelian(int(kw["n"]))
    raise ValueError(f"unknown algebra preset {name!r}")


def bracket(A: LieAlgebra, x, y) -> np.ndarray:
    x = _as_vector(x, A.n)
    y = _as_vector(y, A.n)
    return np.einsum("i,j,ijk->k", x, y, A.c)


# -- linear algebra helpers ---------------------------------------------------


def _null_space(M: np.ndarray, n: int) -> np.ndarray:
    """Rows spanning ker M (M acts on length-n vectors)."""
    if M.size == 0:
        return np.eye(n)
    u, s, vt = np.linalg.svd(M)
    smax = s.max(initial=0.0)
    if smax == 0.0:
        return np.eye(n)
    rank = int((s > RANK_RTOL * smax).sum())
    return vt[rank:]


def _rref_rows(B: np.ndarray) -> np.ndarray:
    """Reduced row echelon form of a row basis; makes kernel bases canonical."""
    B = np.array(B, dtype=float)
    rows, cols = B.shape
    r = 0
    for col in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(B[r:, col])))
        if abs(B[piv, col]) < 1e-9:
            continue
        B[[r, piv]] = B[[piv, r]]
        B[r] /= B[r, col]
        for i in range(rows):
            if i != r:
                B[i] -= B[i, col] * B[r]
        r += 1
    return B[:r]


def orthonormalize(vectors, ip: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt in the given inner product; drops dependent vectors."""
    out = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        w = v.copy()
        for q in out:
            w = w - (q @ ip @ w) * q
        nw = np.sqrt(max(w @ ip @ w, 0.0))
        if nw > tol * max(1.0, np.sqrt(max(v @ ip @ v, 0.0))):
            out.append(w / nw)
    n = ip.shape[0]
    return np.array(out).reshape(len(out), n)


def _span(A: LieAlgebra, rows) -> Subspace:
    rows = np.asarray(rows, dtype=float).reshape(-1, A.n)
    if rows.shape[0] == 0:
        return Subspace(np.zeros((0, A.n)))
    return Subspace(orthonormalize(_rref_rows(rows), A.ip))


def orthogonal_complement(A: LieAlgebra, V: Subspace, within: Subspace | None = None) -> Subspace:
    """``V^perp`` (w.r.t. ``A.ip``), optionally intersected with ``within``."""
    ambient = np.eye(A.n) if within is None else within.basis
    if V.dim == 0:
        return _span(A, ambient)
    # coefficients a with sum a_i w_i orthogonal to V
    G = V.basis @ A.ip @ ambient.T
    ker = _null_space(G, ambient.shape[0])
    return _span(A, ker @ ambient)


def upper_central_series(A: LieAlgebra) -> list[Subspace]:
    """[g_1, ..., g_k] with g_i = {x : [x, g] in g_{i-1}}; g_0 = 0 is implied."""
    n = A.n
    series: list[Subspace] = []
    prev = Subspace(np.zeros((0, n)))
    while True:
        comp = orthogonal_complement(A, prev)
        # x in g_i iff every [x, e_j] has no component along comp
        blocks = [comp.basis @ A.ip @ A.c[:, j, :].T for j in range(n)]
        M = np.vstack(blocks) if comp.dim else np.zeros((0, n))
        nxt = _span(A, _null_space(M, n))
        if nxt.dim <= prev.dim:
            raise NotNilpotent(f"upper central series stalls at dimension {prev.dim} < {n}")
        series.append(nxt)
        if nxt.dim == n:
            return series
        prev = nxt


def nilpotency_step(A: LieAlgebra) -> int:
    return len(upper_central_series(A))


def dimension_condition(A: LieAlgebra) -> int | None:
    """Smallest i with dim(g_i / g_{i-1}) > 1 + dim g_{i-1}, else None."""
    dims = [0] + [s.dim for s in upper_central_series(A)]
    for i in range(1, len(dims)):
        if dims[i] - dims[i - 1] > 1 + dims[i - 1]:
            return i
    return None


def complement_in_series(A: LieAlgebra, i: int) -> Subspace:
    """h_i = g_{i-1}^perp intersected with g_i."""
    series = upper_central_series(A)
    if not 1 <= i <= len(series):
        raise ValueError(f"index {i} outside 1..{len(series)}")
    prev = series[i - 2] if i >= 2 else Subspace(np.zeros((0, A.n)))
    return orthogonal_complement(A, prev, within=series[i - 1])


def find_commuting_pair(A: LieAlgebra, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal commuting vectors in h_i.

    Scans the basis of h_i in order and takes the first ``x`` whose
    centralizer inside h_i is at least two dimensional.
    """
    h = complement_in_series(A, i)
    for x in h.basis:
        # coefficients a with [x, sum a_j h_j] = 0
        M = A.ad_matrix(x) @ h.basis.T
        ker = _null_space(M, h.dim) @ h.basis
        if ker.shape[0] < 2:
            continue
        # component orthogonal to x, canonicalised
        rest = ker - np.outer(ker @ A.ip @ x, x)
        q = orthonormalize(_rref_rows(rest), A.ip)
        if q.shape[0] == 0:
            continue
        y = q[0]
        if np.linalg.norm(bracket(A, x, y)) <= PLANE_TOL:
            return x.copy(), y
    raise ConditionFails(f"no commuting pair in h_{i}: centralizers are one dimensional")


def koszul(A: LieAlgebra, x, y) -> np.ndarray:
    """Levi-Civita derivative of left-invariant fields from the Koszul formula.

    2<D_x y, z> = <[x,y], z> - <x, [y,z]> - <y, [x,z]>
    """
    x = _as_vector(x, A.n)
    y = _as_vector(y, A.n)
    xy = bracket(A, x, y)
    # [y, e_k] for all k as rows
    y_e = np.einsum("i,ikm->km", y, A.c)
    x_e = np.einsum("i,ikm->km", x, A.c)
    rhs = A.ip @ xy - y_e @ A.ip @ x - x_e @ A.ip @ y
    return np.linalg.solve(A.ip, 0.5 * rhs)


@dataclass(frozen=True)
class PlaneCertificate:
    ok: bool
    bracket_norm: float
    nabla_xx: float
    nabla_xy: float
    nabla_yy: float
    independent: bool

    def __bool__(self) -> bool:
        return self.ok

    @property
    def max_residual(self) -> float:
        return max(self.bracket_norm, self.nabla_xx, self.nabla_xy, self.nabla_yy)


def certify_plane(A: LieAlgebra, x, y, tol: float = PLANE_TOL) -> PlaneCertificate:
    """Check that Exp(span{x, y}) is a flat totally geodesic plane."""
    x = _as_vector(x, A.n)
    y = _as_vector(y, A.n)
    sv = np.linalg.svd(np.vstack([x, y]), compute_uv=False)
    independent = bool(sv[-1] > RANK_RTOL * max(sv[0], 1e-300))
    b = float(np.linalg.norm(bracket(A, x, y)))
    nxx = float(np.linalg.norm(koszul(A, x, x)))
    nxy = float(np.linalg.norm(koszul(A, x, y)))
    nyy = float(np.linalg.norm(koszul(A, y, y)))
    ok = independent and max(b, nxx, nxy, nyy) <= tol
    return PlaneCertificate(ok, b, nxx, nxy, nyy, independent)


def summary(A: LieAlgebra) -> dict:
    """What the ``algebra`` command reports."""
    out = {"dim": A.n, "name": A.name, "jacobi_residual": A.jacobi_residual()}
    try:
        series = upper_central_series(A)
    except NotNilpotent as exc:
        out.update(nilpotent=False, error=str(exc))
        return out
    out["nilpotent"] = True
    out["series_dims"] = [s.dim for s in series]
    out["step"] = len(series)
    i = dimension_condition(A)
    out["dimension_condition"] = i
    if i is not None:
        x, y = find_commuting_pair(A, i)
        cert = certify_plane(A, x, y)
        out["commuting_pair"] = [x.tolist(), y.tolist()]
        out["plane_certified"] = cert.ok
        out["plane_residual"] = cert.max_residual
    return out
