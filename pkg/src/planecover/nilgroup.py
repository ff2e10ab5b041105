"""2-step nilpotent Lie groups in exponential coordinates.

Points of the group are identified with vectors of the Lie algebra through
Exp, so the product is the truncated BCH formula p + q + [p, q]/2.  Geodesics
of the left-invariant metric are integrated as a body velocity ``v`` in the
algebra plus a position ``p`` transported by left translation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .liealg import LieAlgebra, bracket, certify_plane, ConditionFails, heisenberg
from .paths import GeodesicPath, closed_form_path, rk4_step
from .support import KHat


class NotTwoStep(ValueError):
    pass


class HorizonExceeded(RuntimeError):
    pass


def _require_two_step(A: LieAlgebra):
    if not A.is_two_step():
        raise NotTwoStep(f"{A.name or 'algebra'} is not 2-step nilpotent")


def bch_product(A: LieAlgebra, p, q) -> np.ndarray:
    _require_two_step(A)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return p + q + 0.5 * bracket(A, p, q)


def inverse(p) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def _bracket_rows(A: LieAlgebra, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return np.einsum("ni,nj,ijk->nk", P, Q, A.c)


def left_translate(A: LieAlgebra, g, X) -> np.ndarray:
    """g . X for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = np.broadcast_to(np.asarray(g, dtype=float), X.shape)
    return g + X + 0.5 * _bracket_rows(A, g, X)


# -- Heisenberg closed forms ----------------------------------------------------


def _rot(alpha):
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, -s], [s, c]])


def heisenberg_geodesic(x: float, alpha: float = 0.0, z: float = 0.0,
                        t_min: float = -10.0, t_max: float = 10.0) -> GeodesicPath:
    """t -> (R_alpha(x, t), x t / 2 + z), a horizontal unit-speed geodesic."""
    R = _rot(alpha)

    def f(t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        uv = np.stack([np.full_like(t, x), t], axis=-1) @ R.T
        p = np.column_stack([uv, 0.5 * x * t + z])
        dv = np.broadcast_to(np.array([0.0, 1.0]) @ R.T, (len(t), 2))
        v = np.column_stack([dv, np.full_like(t, 0.5 * x)])
        return (p[0], v[0]) if scalar else (p, v)

    return closed_form_path(f, t_min, t_max, provenance="closed-form", x=x, alpha=alpha, z=z)


# -- left-invariant geodesic flow ---------------------------------------------


def _flow_rhs(A: LieAlgebra):
    n = A.n
    ip_inv = np.linalg.inv(A.ip)
    c = A.c

    def rhs(y):
        p, v = y[:n], y[n:]
        adv = np.einsum("i,ijk->kj", v, c)
        # <dv/dt, w> = <v, [v, w]>
        vdot = ip_inv @ (adv.T @ (A.ip @ v))
        pdot = v + 0.5 * np.einsum("i,j,ijk->k", p, v, c)
        return np.concatenate([pdot, vdot])

    return rhs


def _chart_velocity(A: LieAlgebra, P, V):
    return V + 0.5 * _bracket_rows(A, P, V)


def _integrate_flow(A, p0, v0, T, h):
    rhs = _flow_rhs(A)
    steps = max(1, int(math.ceil(abs(T) / h - 1e-9)))
    hh = T / steps
    ys = np.empty((steps + 1, 2 * A.n))
    y = np.concatenate([p0, v0])
    ys[0] = y
    for k in range(steps):
        y = rk4_step(rhs, y, hh)
        ys[k + 1] = y
    return np.linspace(0.0, T, steps + 1), ys


def geodesic_flow(A: LieAlgebra, p0, v0, T: float, step: float = 0.01, t_min: float = 0.0,
                  energy_tol: float = 1e-8, max_refine: int = 6) -> GeodesicPath:
    """Left-invariant geodesic through ``p0`` with body velocity ``v0`` on [t_min, T].

    Fixed-step RK4; the step is halved until the relative drift of <v, v>
    is below ``energy_tol``.
    """
    _require_two_step(A)
    if step <= 0:
        raise ValueError("step must be positive")
    if T <= 0:
        raise ValueError("T must be positive")
    if t_min > 0:
        raise ValueError("t_min must be <= 0")
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    e0 = A.inner(v0, v0)
    if e0 == 0:
        raise ValueError("v0 must be nonzero")
    h = step
    for _ in range(max_refine + 1):
        ts, ys = _integrate_flow(A, p0, v0, T, h)
        if t_min < 0:
            tb, yb = _integrate_flow(A, p0, v0, t_min, h)
            ts = np.concatenate([tb[::-1], ts[1:]])
            ys = np.vstack([yb[::-1], ys[1:]])
        V = ys[:, A.n:]
        energy = np.einsum("ni,ij,nj->n", V, A.ip, V)
        drift = float(np.abs(energy - e0).max() / e0)
        if drift <= energy_tol:
            break
        h /= 2
    P = ys[:, : A.n]
    return GeodesicPath(ts, P, _chart_velocity(A, P, V), "ode", math.sqrt(e0),
                        extra={"body_velocity": V, "energy": energy, "energy_drift": drift, "step": h})


# -- escape profile -------------------------------------------------------------


def direction_grid(A: LieAlgebra, num: int) -> np.ndarray:
    """Deterministic unit directions (w.r.t. A.ip): Fibonacci sphere in 3D, Halton otherwise."""
    n = A.n
    if n == 3:
        k = np.arange(num) + 0.5
        z = 1.0 - 2.0 * k / num
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        rho = np.sqrt(1.0 - z * z)
        D = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    elif n == 1:
        D = np.array([[1.0], [-1.0]] * ((num + 1) // 2))[:num]
    else:
        u = qmc.Halton(d=n, scramble=False).random(num + 1)[1:]
        D = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    L = np.linalg.cholesky(A.ip)
    # unit in the ip-norm: solve L^T x = d/|d|
    D = D / np.linalg.norm(D, axis=1, keepdims=True)
    return np.linalg.solve(L.T, D.T).T


def first_exit_time(A: LieAlgebra, v0, r: float, step: float = 0.01, horizon: float | None = None) -> float:
    """First time the geodesic from the identity leaves the chart ball of radius r."""
    rhs = _flow_rhs(A)
    n = A.n
    horizon = horizon if horizon is not None else 20.0 * r + 20.0
    y = np.concatenate([np.zeros(n), np.asarray(v0, dtype=float)])
    t = 0.0
    while t < horizon:
        y_new = rk4_step(rhs, y, step)
        if np.linalg.norm(y_new[:n]) > r:
            p0, p1 = y[:n], y_new[:n]
            d0 = rhs(y)[:n]
            d1 = rhs(y_new)[:n]

            def g(s):
                # cubic Hermite in the step
                tau = s / step
                h00 = 2 * tau**3 - 3 * tau**2 + 1
                h10 = tau**3 - 2 * tau**2 + tau
                h01 = -2 * tau**3 + 3 * tau**2
                h11 = tau**3 - tau**2
                p = h00 * p0 + h10 * step * d0 + h01 * p1 + h11 * step * d1
                return float(p @ p - r * r)

            return t + brentq(g, 0.0, step, xtol=1e-13)
        y = y_new
        t += step
    raise HorizonExceeded(f"geodesic with v0={np.round(v0, 6).tolist()} did not leave B_{r} by t={horizon}")


@dataclass
class EscapeProfile:
    r: float
    max_exit_time: float
    exit_times: np.ndarray
    directions: np.ndarray


def escape_profile(A: LieAlgebra, r: float, num_samples: int = 64, step: float = 0.01,
                   horizon: float | None = None, threads: int = 1) -> EscapeProfile:
    if r <= 0:
        raise ValueError("r must be positive")
    _require_two_step(A)
    D = direction_grid(A, num_samples)

    def one(d):
        return first_exit_time(A, d, r, step, horizon)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            times = np.array(list(ex.map(one, D)))
    else:
        times = np.array([one(d) for d in D])
    return EscapeProfile(r, float(times.max()), times, D)


# -- paraboloid sandwich --------------------------------------------------------


@dataclass(eq=False)
class ParaboloidKHat:
    """Intersection over frames of shifted paraboloid sandwiches enclosing K.

    Frame k is left translation by ``frames[k]``; the model sandwich is
    (u^2+v^2)/4 - h_minus <= w <= h_plus - (u^2+v^2)/4.
    """

    K: np.ndarray
    frames: np.ndarray
    h_minus: np.ndarray
    h_plus: np.ndarray
    tol: float = 1e-9
    _A: LieAlgebra = field(default_factory=heisenberg, repr=False)

    def to_model(self, g, X) -> np.ndarray:
        return left_translate(self._A, -np.asarray(g), X)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = np.ones(len(X), dtype=bool)
        for g, hm, hp in zip(self.frames, self.h_minus, self.h_plus):
            q = self.to_model(g, X)
            rho = 0.25 * (q[:, 0] ** 2 + q[:, 1] ** 2)
            ok &= (q[:, 2] >= rho - hm - self.tol) & (q[:, 2] <= hp - rho + self.tol)
        return ok

    __call__ = contains

    def bounding_box(self) -> np.ndarray:
        """[[lo], [hi]] box containing the output (intersection of per-frame boxes)."""
        lo = np.full(3, -np.inf)
        hi = np.full(3, np.inf)
        for g, hm, hp in zip(self.frames, self.h_minus, self.h_plus):
            rad = math.sqrt(max(2.0 * (hm + hp), 0.0))
            shear = 0.5 * math.hypot(g[0], g[1]) * rad
            lo = np.maximum(lo, [g[0] - rad, g[1] - rad, g[2] - hm - shear])
            hi = np.minimum(hi, [g[0] + rad, g[1] + rad, g[2] + hp + shear])
        return np.vstack([lo, hi])

    def summary(self) -> dict:
        return {
            "frame_count": int(len(self.frames)),
            "frames": self.frames.tolist(),
            "h_minus": self.h_minus.tolist(),
            "h_plus": self.h_plus.tolist(),
            "bounding_box": self.bounding_box().tolist(),
        }


def rotated_frames(rotations: int, shifts) -> np.ndarray:
    """Translations R_theta s for theta uniform in [0, 2 pi) and s in ``shifts``."""
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    out = []
    for k in range(rotations):
        R = _rot(2.0 * math.pi * k / rotations)
        for s in shifts:
            out.append([*(R @ s[:2]), s[2]])
    return np.array(out)


def paraboloid_khat(K, rotations: int = 1, shifts=None, tol: float = 1e-9) -> ParaboloidKHat:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.size == 0:
        raise ValueError("K must be nonempty")
    if shifts is None:
        shifts = np.zeros((1, 3))
    frames = rotated_frames(rotations, shifts)
    A = heisenberg()
    hm, hp = [], []
    for g in frames:
        q = left_translate(A, -g, K)
        rho = 0.25 * (q[:, 0] ** 2 + q[:, 1] ** 2)
        hm.append(float(np.max(rho - q[:, 2])))
        hp.append(float(np.max(q[:, 2] + rho)))
    return ParaboloidKHat(K, frames, np.array(hm), np.array(hp), tol, A)


def shift_lattice(K, per_axis: int = 3, include_vertical: bool = False) -> np.ndarray:
    """Translation lattice spanning the bounding box of K (horizontal by default)."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    lo, hi = K.min(axis=0), K.max(axis=0)
    axes = [np.linspace(lo[i], hi[i], per_axis) if hi[i] > lo[i] else np.array([lo[i]]) for i in range(2)]
    zs = np.linspace(lo[2], hi[2], per_axis) if include_vertical and hi[2] > lo[2] else np.array([0.0])
    g = np.stack(np.meshgrid(*axes, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    return g


# -- plane cover by translates of a flat F = Exp(span{x, y}) ------------------


@dataclass(eq=False)
class GroupPlane:
    """The translate g F, charted by (r, s) -> g . Exp(r x + s y)."""

    A: LieAlgebra
    g: np.ndarray
    x: np.ndarray
    y: np.ndarray
    geometry: str = "flat"

    def _model(self, X):
        return left_translate(self.A, -self.g, X)

    def chart(self, X) -> np.ndarray:
        w = self._model(X)
        return np.column_stack([w @ self.A.ip @ self.x, w @ self.A.ip @ self.y])

    def distance(self, X) -> np.ndarray:
        w = self._model(X)
        uv = np.column_stack([w @ self.A.ip @ self.x, w @ self.A.ip @ self.y])
        return np.linalg.norm(w - uv @ np.vstack([self.x, self.y]), axis=1)

    def embed(self, uv) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        return left_translate(self.A, self.g, uv @ np.vstack([self.x, self.y]))


@dataclass(eq=False)
class GroupPlaneFamily:
    """Translates of F.  With ``translations=None`` the family is the leaf through each query point."""

    A: LieAlgebra
    x: np.ndarray
    y: np.ndarray
    translations: np.ndarray | None = None

    @property
    def exhaustive(self) -> bool:
        return self.translations is None

    def plane(self, g) -> GroupPlane:
        return GroupPlane(self.A, np.asarray(g, dtype=float), self.x, self.y)

    def _leaf_key(self, p):
        D = np.vstack([self.x, self.y]) + 0.5 * np.vstack([bracket(self.A, p, self.x), bracket(self.A, p, self.y)])
        Q, _ = np.linalg.qr(D.T)
        P = Q @ Q.T
        off = p - P @ p
        return tuple(np.round(np.concatenate([P.ravel(), off]), 9) + 0.0)

    def planes(self, X=None):
        if self.translations is not None:
            return [self.plane(g) for g in self.translations]
        if X is None:
            return []
        seen = {}
        for p in np.atleast_2d(X):
            key = self._leaf_key(p)
            if key not in seen:
                seen[key] = self.plane(p)
        return list(seen.values())


def plane_family(A: LieAlgebra, pair, translations=None) -> GroupPlaneFamily:
    _require_two_step(A)
    x, y = (np.asarray(v, dtype=float) for v in pair)
    cert = certify_plane(A, x, y)
    if not cert:
        raise ConditionFails(f"span{{x, y}} is not a flat totally geodesic plane (residual {cert.max_residual:.3g})")
    # orthonormal chart directions
    x = x / A.norm(x)
    y = y - A.inner(x, y) * x
    y = y / A.norm(y)
    tr = None if translations is None else np.atleast_2d(np.asarray(translations, dtype=float))
    return GroupPlaneFamily(A, x, y, tr)


def group_plane_khat(A: LieAlgebra, K, pair, translations=None, slab: float = 1e-6) -> KHat:
    fam = plane_family(A, pair, translations)
    return KHat(np.asarray(K, dtype=float).reshape(-1, A.n), fam, slab=slab)
