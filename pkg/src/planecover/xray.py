"""Geodesic X-ray transform of compactly supported phantoms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .paths import GeodesicPath, NonEscaping, closed_form_path


# -- phantoms -----------------------------------------------------------------


def bump_profile(q):
    """(1 - q)^3 on q = |x - c|^2 / rho^2 <= 1, zero outside; C^2 across the boundary."""
    q = np.asarray(q, dtype=float)
    return np.where(q < 1.0, (1.0 - np.minimum(q, 1.0)) ** 3, 0.0)


@dataclass(frozen=True)
class Bump:
    center: tuple
    radius: float
    amplitude: float = 1.0

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d2 = np.sum((X - np.asarray(self.center)) ** 2, axis=1)
        return self.amplitude * bump_profile(d2 / self.radius**2)


@dataclass(frozen=True, eq=False)
class Phantom:
    """Finite sum of bumps; ``support_ball`` = (center, radius) covering all of them."""

    bumps: tuple
    support_ball: tuple = None

    def __post_init__(self):
        bumps = tuple(b if isinstance(b, Bump) else Bump(**b) for b in self.bumps)
        for b in bumps:
            if b.radius <= 0:
                raise ValueError("bump radius must be positive")
        object.__setattr__(self, "bumps", bumps)
        if self.support_ball is None and bumps:
            C = np.array([b.center for b in bumps], dtype=float)
            c = C.mean(axis=0)
            R = max(float(np.linalg.norm(np.asarray(b.center) - c)) + b.radius for b in bumps)
            object.__setattr__(self, "support_ball", (tuple(c.tolist()), R))
        elif self.support_ball is not None:
            c, R = self.support_ball
            for b in bumps:
                if np.linalg.norm(np.asarray(b.center) - np.asarray(c)) + b.radius > R + 1e-12:
                    raise ValueError("support ball does not cover every bump")

    @property
    def dim(self) -> int:
        return len(self.bumps[0].center)

    @property
    def amplitude_scale(self) -> float:
        return max((abs(b.amplitude) for b in self.bumps), default=0.0)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(len(X))
        for b in self.bumps:
            out += b(X)
        return out

    def pieces(self):
        return [(np.asarray(b.center, dtype=float), b.radius, b) for b in self.bumps]

    def in_support(self, X, tol: float = 0.0) -> np.ndarray:
        """Union of the closed bump balls (the constructive support)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = np.zeros(len(X), dtype=bool)
        for b in self.bumps:
            m |= np.linalg.norm(X - np.asarray(b.center), axis=1) <= b.radius + tol
        return m

    def scaled(self, c: float) -> "Phantom":
        return Phantom(tuple(Bump(b.center, b.radius, c * b.amplitude) for b in self.bumps), self.support_ball)

    def __add__(self, other: "Phantom") -> "Phantom":
        return Phantom(self.bumps + other.bumps)

    def to_dict(self) -> dict:
        return {"bumps": [{"center": list(b.center), "radius": b.radius, "amplitude": b.amplitude}
                          for b in self.bumps]}

    @classmethod
    def from_dict(cls, d) -> "Phantom":
        bumps = d["bumps"] if isinstance(d, dict) else d
        return cls(tuple(Bump(tuple(float(x) for x in b["center"]), float(b["radius"]),
                              float(b.get("amplitude", 1.0))) for b in bumps))

    @classmethod
    def load(cls, path) -> "Phantom":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- quadrature ---------------------------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 40, vectorized: bool = False):
    """Adaptive Simpson on [a, b]; returns (value, error estimate).

    Intervals are refined level by level, so a ``vectorized`` integrand is
    called once per level.  The tolerance is split in half at each bisection.
    """
    if b <= a:
        return 0.0, 0.0
    F = f if vectorized else (lambda x: np.array([f(xi) for xi in x], dtype=float))
    n0 = 8  # seed panels so narrow features are not missed
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    vals = np.asarray(F(np.concatenate([edges, mid])), dtype=float)
    flo, fhi, fm = vals[:n0], vals[1:n0 + 1], vals[n0 + 1:]
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi)
    tols = np.full(n0, tol / n0)
    total = err = 0.0
    for depth in range(max_depth + 1):
        m = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + m), 0.5 * (m + hi)
        k = len(lo)
        v = np.asarray(F(np.concatenate([lm, rm])), dtype=float)
        flm, frm = v[:k], v[k:]
        left = (m - lo) / 6.0 * (flo + 4.0 * flm + fm)
        right = (hi - m) / 6.0 * (fm + 4.0 * frm + fhi)
        delta = left + right - whole
        done = np.abs(delta) <= 15.0 * tols if depth < max_depth else np.ones(k, dtype=bool)
        total += float(np.sum((left + right + delta / 15.0)[done]))
        err += float(np.sum(np.abs(delta[done]) / 15.0))
        if done.all():
            break
        r = ~done
        lo = np.concatenate([lo[r], m[r]])
        hi = np.concatenate([m[r], hi[r]])
        flo, fhi = np.concatenate([flo[r], fm[r]]), np.concatenate([fm[r], fhi[r]])
        fm = np.concatenate([flm[r], frm[r]])
        whole = np.concatenate([left[r], right[r]])
        tols = np.concatenate([tols[r], tols[r]]) / 2.0
    return total, err


@dataclass(frozen=True)
class QuadSettings:
    rel_tol: float = 1e-12
    samples_per_radius: int = 16
    min_samples: int = 400


@dataclass
class XrayValue:
    value: float
    error: float
    intervals: list = field(default_factory=list)

    def __float__(self):
        return self.value


def _inside_intervals(gamma: GeodesicPath, center, radius, ts, P):
    """Parameter intervals where |gamma - center| < radius, found on samples and refined."""
    d2 = np.sum((P - center) ** 2, axis=1) - radius**2
    inside = d2 < 0
    out = []
    if not inside.any():
        return out

    def g(t):
        p = gamma.position(t)
        return float(np.sum((p - center) ** 2) - radius**2)

    idx = np.flatnonzero(np.diff(inside.astype(int)))
    starts = [ts[0]] if inside[0] else []
    ends = []
    for i in idx:
        root = brentq(g, ts[i], ts[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps)
        (starts if not inside[i] else ends).append(root)
    if inside[-1]:
        ends.append(ts[-1])
    return list(zip(starts, ends))


def check_escaping(gamma: GeodesicPath, center, radius):
    """Both ends outside the ball, moving away from its center."""
    center = np.asarray(center, dtype=float)
    for t, sgn in ((gamma.domain[1], 1.0), (gamma.domain[0], -1.0)):
        p, v = gamma.eval(t)
        p, v = np.asarray(p, dtype=float).ravel(), np.asarray(v, dtype=float).ravel()
        if np.linalg.norm(p - center) <= radius or sgn * (p - center) @ v <= 0:
            raise NonEscaping(f"geodesic is not escaping the support ball at t={t:g}")


def xray_transform(f, gamma: GeodesicPath, quad: QuadSettings | None = None, full_output: bool = False):
    """Integral of f along gamma, restricted to where gamma meets the bumps' supports."""
    quad = quad or QuadSettings()
    c, R = f.support_ball
    check_escaping(gamma, c, R)
    pieces = f.pieces()
    rmin = min(p[1] for p in pieces)
    a, b = gamma.domain
    n = max(quad.min_samples, int(math.ceil((b - a) / rmin * quad.samples_per_radius)) + 1)
    ts = np.linspace(a, b, n)
    P = np.asarray(gamma.position(ts))
    scale = max(getattr(f, "amplitude_scale", 1.0), 1e-300)
    total = err = 0.0
    used = []
    for center, radius, piece in pieces:
        for lo, hi in _inside_intervals(gamma, center, radius, ts, P):
            fn = lambda t, piece=piece: piece(np.asarray(gamma.position(t)).reshape(len(t), -1))
            v, e = adaptive_simpson(fn, lo, hi, quad.rel_tol * scale * max(hi - lo, 1e-300), vectorized=True)
            total += v
            err += e
            used.append((lo, hi))
    total *= gamma.speed
    err = err * gamma.speed + 1e-15 * scale * sum(hi - lo for lo, hi in used)
    if full_output:
        return XrayValue(total, err, used)
    return total


# -- lines in plane charts ----------------------------------------------------


def _affine(plane):
    """Embedding uv -> A uv + b of a flat plane chart."""
    b = plane.embed(np.zeros((1, 2)))[0]
    A = np.column_stack([plane.embed(np.array([[1.0, 0.0]]))[0] - b, plane.embed(np.array([[0.0, 1.0]]))[0] - b])
    return A, b


def plane_line_path(plane, uv0, direction, t_min: float, t_max: float) -> GeodesicPath:
    """Unit-speed geodesic of a flat plane chart through uv0, as a path in the ambient chart."""
    if plane.geometry != "flat":
        raise ValueError("use hyperbolic_line for hyperbolic charts")
    A, b = _affine(plane)
    uv0 = np.asarray(uv0, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def f(t):
        t = np.asarray(t, dtype=float)
        uv = uv0 + np.multiply.outer(t, d)
        return uv @ A.T + b, np.broadcast_to(A @ d, uv.shape[:-1] + (len(b),))

    return closed_form_path(f, t_min, t_max, provenance="closed-form")


def parallel_line(plane, offset: float, angle: float, half_length: float) -> GeodesicPath:
    n = np.array([math.cos(angle), math.sin(angle)])
    return plane_line_path(plane, offset * n, [-n[1], n[0]], -half_length, half_length)


def _disk_to_chart(w):
    """Poincare disk -> (t, s) chart of a hyperbolic plane (via x = s, y = e^{-t})."""
    z = 1j * (1 + w) / (1 - w)
    return np.stack([-np.log(z.imag), z.real], axis=-1)


def hyperbolic_line(plane, offset: float, angle: float, half_length: float) -> GeodesicPath:
    """Geodesic at signed distance ``offset`` from the chart origin, normal direction ``angle``."""
    A, b = _affine(plane)
    a = math.tanh(offset / 2) * complex(math.cos(angle), math.sin(angle))
    u = 1j * complex(math.cos(angle), math.sin(angle))

    def f(t):
        t = np.asarray(t, dtype=float)
        w0 = np.tanh(t / 2) * u
        dw0 = 0.5 / np.cosh(t / 2) ** 2 * u
        den = 1 + np.conj(a) * w0
        w = (w0 + a) / den
        dw = (1 - abs(a) ** 2) / den**2 * dw0
        z = 1j * (1 + w) / (1 - w)
        dz = 2j / (1 - w) ** 2 * dw
        uv = np.stack([-np.log(z.imag), z.real], axis=-1)
        duv = np.stack([-dz.imag / z.imag, dz.real], axis=-1)
        return uv @ A.T + b, duv @ A.T

    return closed_form_path(f, -half_length, half_length, provenance="closed-form")


# -- sinograms ----------------------------------------------------------------


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(eq=False)
class Sinogram:
    values: np.ndarray
    offsets: np.ndarray
    angles: np.ndarray
    geometry: dict
    error: float = 0.0

    def __post_init__(self):
        if self.values.shape != (len(self.offsets), len(self.angles)):
            raise ValueError("sinogram shape does not match grids")

    def header(self) -> dict:
        return {"offsets": self.offsets.tolist(), "angles": self.angles.tolist(),
                "geometry": self.geometry, "shape": list(self.values.shape), "error_estimate": self.error}


def _flat_sinogram(f: Phantom, plane, offsets, angles):
    A, b = _affine(plane)
    P, TH = np.meshgrid(offsets, angles, indexing="ij")
    n = np.stack([np.cos(TH), np.sin(TH)], axis=-1)
    d = np.stack([-np.sin(TH), np.cos(TH)], axis=-1)
    base = (P[..., None] * n) @ A.T + b
    dirv = d @ A.T
    speed = np.linalg.norm(d, axis=-1)  # unit in the chart, which is isometric to the plane
    out = np.zeros(P.shape)
    err = 0.0
    for center, radius, bump in f.pieces():
        w = base - center
        qa = np.sum(dirv * dirv, axis=-1)
        qb = 2.0 * np.sum(w * dirv, axis=-1)
        qc = np.sum(w * w, axis=-1) - radius**2
        disc = qb * qb - 4 * qa * qc
        hit = disc > 0
        if not hit.any():
            continue
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = (-qb - sq) / (2 * qa)
        t1 = (-qb + sq) / (2 * qa)
        half = 0.5 * (t1 - t0)
        mid = 0.5 * (t1 + t0)
        # polynomial of degree 6 along the chord: 8-point Gauss-Legendre is exact
        ts = mid[..., None] + half[..., None] * _GL_X
        pts = base[..., None, :] + ts[..., None] * dirv[..., None, :]
        vals = bump(pts.reshape(-1, pts.shape[-1])).reshape(ts.shape)
        contrib = np.where(hit, half * (vals @ _GL_W), 0.0)
        out += contrib * speed
        err = max(err, 1e-14 * abs(bump.amplitude) * float(np.max(np.where(hit, 2 * half, 0.0))))
    return out, err


def _hyperbolic_reach(f: Phantom, plane) -> float:
    """Bound on the hyperbolic distance from the chart origin to the phantom's trace on the plane."""
    c, R = f.support_ball
    uv = plane.chart(np.atleast_2d(c))[0]
    ts = np.array([uv[0] - R, uv[0] + R])
    ss = np.array([uv[1] - R, uv[1] + R])
    best = 0.0
    for t in ts:
        for s in ss:
            y = math.exp(-t)
            best = max(best, math.acosh(1 + (s * s + (y - 1) ** 2) / (2 * y)))
    # box corners bound the box since distance to i is quasiconvex
    return best


def _gl_rule(L: float, n_nodes: int):
    panels = max(1, n_nodes // 8)
    edges = np.linspace(-L, L, panels + 1)
    mids, halfs = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    return (mids[:, None] + halfs[:, None] * _GL_X).ravel(), (halfs[:, None] * _GL_W).ravel()


def _hyperbolic_sinogram(f: Phantom, plane, offsets, angles, n_nodes: int = 1600):
    """Composite Gauss-Legendre along each line; error estimated against the half-resolution rule."""
    L = _hyperbolic_reach(f, plane) + 1.0
    out = np.zeros((len(offsets), len(angles)))
    coarse = np.zeros_like(out)
    nodes, weights = _gl_rule(L, n_nodes)
    nodes2, weights2 = _gl_rule(L, n_nodes // 2)
    for i, p in enumerate(offsets):
        for j, th in enumerate(angles):
            if abs(p) > L:
                continue
            path = hyperbolic_line(plane, p, th, L)
            out[i, j] = f(path.eval(nodes)[0]) @ weights
            coarse[i, j] = f(path.eval(nodes2)[0]) @ weights2
    err = float(np.abs(out - coarse).max()) + 1e-14 * f.amplitude_scale
    return out, err


def sinogram_plane(f: Phantom, plane, offsets, angles) -> Sinogram:
    """X-ray data on the geodesics of one plane chart, indexed by (offset, angle)."""
    offsets = np.asarray(offsets, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if offsets.ndim != 1 or angles.ndim != 1 or len(offsets) == 0 or len(angles) == 0:
        raise ValueError("offset and angle grids must be nonempty 1D arrays")
    if plane.geometry == "flat":
        vals, err = _flat_sinogram(f, plane, offsets, angles)
    else:
        vals, err = _hyperbolic_sinogram(f, plane, offsets, angles)
    geom = {"geometry": plane.geometry}
    if hasattr(plane, "alpha0"):
        geom["alpha0"] = plane.alpha0
        geom["variant"] = plane.variant
    return Sinogram(vals, offsets, angles, geom, err)


def restrict_to_plane(f: Phantom, plane) -> Phantom:
    """Phantom on a flat plane chart whose embedding is an isometry (bump restricts to a 2D bump)."""
    A, b = _affine(plane)
    if not np.allclose(A.T @ A, np.eye(2), atol=1e-12):
        raise ValueError("chart embedding is not isometric")
    bumps = []
    for center, radius, bump in f.pieces():
        uv = A.T @ (center - b)
        h2 = float(np.sum((center - b - A @ uv) ** 2))
        if h2 >= radius**2:
            continue
        amp = bump.amplitude * (1 - h2 / radius**2) ** 3
        bumps.append(Bump(tuple(uv.tolist()), math.sqrt(radius**2 - h2), amp))
    return Phantom(tuple(bumps)) if bumps else None


# -- R x S^2 ------------------------------------------------------------------


def odd_bump(u, amplitude: float = 5.0):
    u = np.asarray(u, dtype=float)
    return amplitude * u * np.where(np.abs(u) < 1, (1 - np.minimum(u * u, 1.0)) ** 3, 0.0)


def even_bump(u, amplitude: float = 1.0):
    u = np.asarray(u, dtype=float)
    return amplitude * np.where(np.abs(u) < 1, (1 - np.minimum(u * u, 1.0)) ** 3, 0.0)


@dataclass(eq=False)
class ProductExtension:
    """f(x, n) = f0(x) on R x S^2, viewed in R x R^3; f0 supported in [-1, 1]."""

    f0: object
    support_half_width: float = 1.0

    @property
    def support_ball(self):
        return (np.zeros(4), math.sqrt(self.support_half_width**2 + 1.0) + 1e-9)

    @property
    def amplitude_scale(self) -> float:
        u = np.linspace(-self.support_half_width, self.support_half_width, 2001)
        return float(np.abs(self.f0(u)).max())

    def __call__(self, X):
        X = np.atleast_2d(X)
        return self.f0(X[:, 0])

    def pieces(self):
        # slab |x| <= w: bracket by the covering ball
        c, R = self.support_ball
        return [(c, R, self)]


def product_geodesic(x0: float, a: float, n0, m0, horizon: float) -> GeodesicPath:
    """t -> (x0 + a t, cos(b t) n0 + sin(b t) m0) with a^2 + b^2 = 1 (n0, m0 orthonormal)."""
    if a == 0:
        raise NonEscaping("a = 0 gives a closed geodesic in a sphere slice")
    b = math.sqrt(max(1.0 - a * a, 0.0))
    n0 = np.asarray(n0, dtype=float)
    m0 = np.asarray(m0, dtype=float)

    def f(t):
        t = np.asarray(t, dtype=float)
        x = x0 + a * t
        c, s = np.cos(b * t), np.sin(b * t)
        sph = np.multiply.outer(c, n0) + np.multiply.outer(s, m0)
        dsph = b * (np.multiply.outer(-s, n0) + np.multiply.outer(c, m0))
        return (np.concatenate([x[..., None], sph], axis=-1),
                np.concatenate([np.full(x.shape + (1,), a), dsph], axis=-1))

    return closed_form_path(f, -horizon, horizon)


@dataclass
class DemoResult:
    max_abs_xray: float
    max_abs_f: float
    values: np.ndarray
    params: np.ndarray


def product_sphere_demo(f0=odd_bump, samples: int = 100, seed: int = 0, quad: QuadSettings | None = None) -> DemoResult:
    """X-ray transform on R x S^2 of the constant extension of a 1D function f0."""
    rng = np.random.default_rng(seed)
    F = ProductExtension(f0)
    vals, params = [], []
    for k in range(samples):
        a = float(rng.uniform(0.05, 1.0)) * (1 if k % 2 == 0 else -1)
        x0 = float(rng.uniform(-2.0, 2.0))
        n0 = rng.normal(size=3)
        n0 /= np.linalg.norm(n0)
        m0 = rng.normal(size=3)
        m0 -= (m0 @ n0) * n0
        m0 /= np.linalg.norm(m0)
        horizon = (abs(x0) + 3.0) / abs(a) + 2.0
        gamma = product_geodesic(x0, a, n0, m0, horizon)
        vals.append(xray_transform(F, gamma, quad))
        params.append([x0, a])
    vals = np.array(vals)
    return DemoResult(float(np.abs(vals).max()), F.amplitude_scale, vals, np.array(params))
