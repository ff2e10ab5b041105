"""Warped-product metrics on R^3 in cylindrical coordinates (t, r, alpha).

    euclidean:   g = dt^2 + dr^2 + f(r, t)^2 dalpha^2
    hyperbolic:  g = dt^2 + e^{2t} (dr^2 + f(r, t)^2 dalpha^2)

The profile is sin r near the axis, 2 + r - pi beyond r = pi, a quintic
blend in between, and grows in t for r > 2 pi, t > 0.

Points are handed around either as cylindrical triples or in the ambient
Cartesian chart (t, X, Y) = (t, r cos alpha, r sin alpha).  Geodesics that
approach the axis are integrated in a second spherical chart whose pole sits
on the equator of the first; both charts see the metric dt^2 + E(t) g_{S^2}
there because f = sin r for r <= 3 pi / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import GeodesicPath
from .support import KHat, INCIDENCE_TOL

R_SPHERE = 0.75 * math.pi
R_LINEAR = math.pi
R_GROWTH = 2.0 * math.pi

# axis chart switching (hysteresis)
AXIS_ENTER = 0.3
AXIS_LEAVE = 0.6
# planes through the axis are not coordinate surfaces of the rotated chart, so
# truncation error there leaks out of plane; substep to keep it below 1e-9
ROT_SUBSTEPS = 8


class AxisDegenerate(ValueError):
    pass


@dataclass(frozen=True)
class ProfileParams:
    """Growth f = 2 + r - pi + ramp(t) * amp * u^3 / (1 + u^2), u = r - 2 pi, for t > 0."""

    growth_amplitude: float = 0.5


@dataclass(frozen=True)
class WarpedMetric:
    variant: str = "euclidean"
    profile: ProfileParams = field(default_factory=ProfileParams)

    def __post_init__(self):
        if self.variant not in ("euclidean", "hyperbolic"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "WarpedMetric":
        prof = d.get("profile", {})
        return cls(d.get("variant", "euclidean"), ProfileParams(**prof))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "profile": {"growth_amplitude": self.profile.growth_amplitude}}

    @property
    def hyperbolic(self) -> bool:
        return self.variant == "hyperbolic"


@dataclass(frozen=True)
class CylPoint:
    t: float
    r: float
    alpha: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        object.__setattr__(self, "alpha", self.alpha % (2.0 * math.pi))

    def cartesian(self) -> np.ndarray:
        return np.array([self.t, self.r * math.cos(self.alpha), self.r * math.sin(self.alpha)])

    def __iter__(self):
        return iter((self.t, self.r, self.alpha))


def _cyl(p):
    return p if isinstance(p, CylPoint) else CylPoint(*p)


def to_cartesian(cyl) -> np.ndarray:
    cyl = np.atleast_2d(np.asarray(cyl, dtype=float))
    t, r, a = cyl.T
    return np.column_stack([t, r * np.cos(a), r * np.sin(a)])


def to_cylindrical(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = np.hypot(X[:, 1], X[:, 2])
    a = np.mod(np.arctan2(X[:, 2], X[:, 1]), 2.0 * math.pi)
    return np.column_stack([X[:, 0], r, a])


# -- profile ------------------------------------------------------------------


def _profile(r: float, t: float, amp: float):
    """(f, df/dr, df/dt)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r <= R_SPHERE:
        return math.sin(r), math.cos(r), 0.0
    if r < R_LINEAR:
        w = R_LINEAR - R_SPHERE
        u = (r - R_SPHERE) / w
        chi = u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
        dchi = 30.0 * u * u * (1.0 - u) ** 2 / w
        s, c = math.sin(r), math.cos(r)
        lin = 2.0 + r - math.pi
        return (1.0 - chi) * s + chi * lin, dchi * (lin - s) + (1.0 - chi) * c + chi, 0.0
    lin = 2.0 + r - math.pi
    if r <= R_GROWTH or t <= 0.0:
        return lin, 1.0, 0.0
    u = r - R_GROWTH
    t3 = t * t * t
    ramp = t3 / (1.0 + t3)
    dramp = 3.0 * t * t / (1.0 + t3) ** 2
    q = 1.0 + u * u
    psi = amp * u * u * u / q
    dpsi = amp * (3.0 * u * u + u**4) / (q * q)
    return lin + ramp * psi, 1.0 + ramp * dpsi, dramp * psi


def profile_f(r, t, params: ProfileParams | None = None):
    amp = (params or ProfileParams()).growth_amplitude
    if np.ndim(r) == 0 and np.ndim(t) == 0:
        return _profile(float(r), float(t), amp)[0]
    rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    return np.vectorize(lambda a, b: _profile(a, b, amp)[0])(rr, tt)


def profile_derivatives(r: float, t: float, params: ProfileParams | None = None):
    return _profile(float(r), float(t), (params or ProfileParams()).growth_amplitude)


# -- metric and Christoffel symbols -------------------------------------------


def _scale(M: WarpedMetric, t: float):
    """E(t) and E'(t) / (2 E)."""
    if M.hyperbolic:
        return math.exp(2.0 * t), 1.0
    return 1.0, 0.0


def metric_tensor(M: WarpedMetric, p) -> np.ndarray:
    t, r, _ = _cyl(p)
    if r == 0:
        raise AxisDegenerate("cylindrical metric is degenerate on the axis")
    f = _profile(r, t, M.profile.growth_amplitude)[0]
    E, _ = _scale(M, t)
    return np.diag([1.0, E, E * f * f])


def _symbols(M: WarpedMetric, t, f, fr, ft):
    """Nonzero Christoffel symbols in (t, r, alpha) order:
    (G^t_rr, G^t_aa, G^r_tr, G^r_aa, G^a_ta, G^a_ra)."""
    E, k = _scale(M, t)
    return (-k * E, -E * (k * f * f + f * ft), k, -f * fr, k + ft / f, fr / f)


def christoffel(M: WarpedMetric, p) -> np.ndarray:
    """Gamma[i, j, k] = Gamma^i_{jk} at a point off the axis."""
    t, r, _ = _cyl(p) if not isinstance(p, np.ndarray) else p
    if r <= 0:
        raise AxisDegenerate("cylindrical Christoffel symbols are singular on the axis")
    f, fr, ft = _profile(r, t, M.profile.growth_amplitude)
    trr, taa, rtr, raa, ata, ara = _symbols(M, t, f, fr, ft)
    G = np.zeros((3, 3, 3))
    G[0, 1, 1] = trr
    G[0, 2, 2] = taa
    G[1, 0, 1] = G[1, 1, 0] = rtr
    G[1, 2, 2] = raa
    G[2, 0, 2] = G[2, 2, 0] = ata
    G[2, 1, 2] = G[2, 2, 1] = ara
    return G


def christoffel_fd(M: WarpedMetric, p, h: float = 1e-5) -> np.ndarray:
    """Christoffel symbols from centered differences of metric_tensor (validation oracle)."""
    x = np.array(list(_cyl(p)), dtype=float)
    g = metric_tensor(M, x)
    dg = np.zeros((3, 3, 3))
    for m in range(3):
        e = np.zeros(3)
        e[m] = h
        dg[m] = (metric_tensor(M, x + e) - metric_tensor(M, x - e)) / (2 * h)
    # Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk)
    low = 0.5 * (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - np.einsum("ljk->ljk", dg))
    return np.einsum("il,ljk->ijk", np.linalg.inv(g), low)


def christoffel_derivative(M: WarpedMetric, p, h: float = 1e-4) -> np.ndarray:
    """dGamma[m, i, j, k] = d_m Gamma^i_jk by centered differences."""
    x = np.array(list(_cyl(p)) if not isinstance(p, np.ndarray) else p, dtype=float)
    out = np.zeros((3, 3, 3, 3))
    for m in range(3):
        e = np.zeros(3)
        e[m] = h
        out[m] = (christoffel(M, x + e) - christoffel(M, x - e)) / (2 * h)
    return out


def riemann(M: WarpedMetric, p, h: float = 1e-4) -> np.ndarray:
    """R[i, j, k, l] = R^i_{jkl}, with R(d_k, d_l) d_j = R^i_{jkl} d_i."""
    x = np.array(list(_cyl(p)), dtype=float)
    G = christoffel(M, x)
    dG = christoffel_derivative(M, x, h)
    R = (np.einsum("kilj->ijkl", dG) - np.einsum("likj->ijkl", dG)
         + np.einsum("ikm,mlj->ijkl", G, G) - np.einsum("ilm,mkj->ijkl", G, G))
    return R


def sectional_curvature(M: WarpedMetric, p, u, v, h: float = 1e-4) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = metric_tensor(M, p)
    area = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    if area <= 1e-14 * (u @ g @ u) * (v @ g @ v):
        raise ValueError("degenerate span")
    R = riemann(M, p, h)
    Ruvv = np.einsum("ijkl,j,k,l->i", R, v, u, v)
    return float(u @ g @ Ruvv / area)


# -- geodesic integration -----------------------------------------------------


def _rhs_pole(M: WarpedMetric):
    amp = M.profile.growth_amplitude

    def rhs(y):
        t, r, a, vt, vr, va = y
        f, fr, ft = _profile(r, t, amp) if r >= 0 else _mirror(r, t, amp)
        trr, taa, rtr, raa, ata, ara = _symbols(M, t, f, fr, ft)
        return np.array([
            vt, vr, va,
            -trr * vr * vr - taa * va * va,
            -2.0 * rtr * vt * vr - raa * va * va,
            -2.0 * ata * vt * va - 2.0 * ara * vr * va,
        ])

    return rhs


def _mirror(r, t, amp):
    # r < 0 is the opposite half-plane; f extends oddly
    f, fr, ft = _profile(-r, t, amp)
    return -f, fr, -ft


def _rhs_rot(M: WarpedMetric):
    def rhs(y):
        t, rho, b, vt, vr, vb = y
        s, c = math.sin(rho), math.cos(rho)
        trr, taa, rtr, raa, ata, ara = _symbols(M, t, s, c, 0.0)
        return np.array([
            vt, vr, vb,
            -trr * vr * vr - taa * vb * vb,
            -2.0 * rtr * vt * vr - raa * vb * vb,
            -2.0 * ata * vt * vb - 2.0 * ara * vr * vb,
        ])

    return rhs


def _pole_frame(r, a):
    sr, cr, sa, ca = math.sin(r), math.cos(r), math.sin(a), math.cos(a)
    n = np.array([sr * ca, sr * sa, cr])
    dr = np.array([cr * ca, cr * sa, -sr])
    da = np.array([-sr * sa, sr * ca, 0.0])
    return n, dr, da


def _rot_frame(rho, b):
    sr, cr, sb, cb = math.sin(rho), math.cos(rho), math.sin(b), math.cos(b)
    n = np.array([cr, sr * cb, sr * sb])
    dr = np.array([-sr, cr * cb, cr * sb])
    db = np.array([0.0, -sr * sb, sr * cb])
    return n, dr, db


def _pole_to_rot(y):
    t, r, a, vt, vr, va = y
    n, dr, da = _pole_frame(r, a)
    nd = dr * vr + da * va
    rho = math.atan2(math.hypot(n[1], n[2]), n[0])
    b = math.atan2(n[2], n[1])
    _, er, eb = _rot_frame(rho, b)
    return np.array([t, rho, b, vt, nd @ er, (nd @ eb) / math.sin(rho) ** 2])


def _rot_to_pole(y):
    t, rho, b, vt, vr, vb = y
    n, dr, db = _rot_frame(rho, b)
    nd = dr * vr + db * vb
    r = math.atan2(math.hypot(n[0], n[1]), n[2])
    a = math.atan2(n[1], n[0])
    _, er, ea = _pole_frame(r, a)
    return np.array([t, r, a, vt, nd @ er, (nd @ ea) / math.sin(r) ** 2])


def _rot_to_sphere(y):
    """(n, dn/dt) for a rotated-chart state."""
    t, rho, b, vt, vr, vb = y
    n, dr, db = _rot_frame(rho, b)
    return n, dr * vr + db * vb


def _g_and_k(r):
    """r / sin r and (sin r - r cos r) / sin^3 r."""
    if r < 1e-3:
        r2 = r * r
        return 1.0 + r2 / 6.0 + 7.0 * r2 * r2 / 360.0, 1.0 / 3.0 + 2.0 * r2 / 15.0
    s = math.sin(r)
    return r / s, (s - r * math.cos(r)) / s**3


def _cartesian_state(chart, y):
    """Ambient chart position and velocity (t, X, Y)."""
    if chart == "pole":
        t, r, a, vt, vr, va = y
        ca, sa = math.cos(a), math.sin(a)
        return (np.array([t, r * ca, r * sa]),
                np.array([vt, vr * ca - r * sa * va, vr * sa + r * ca * va]))
    t, vt = y[0], y[3]
    n, nd = _rot_to_sphere(y)
    r = math.atan2(math.hypot(n[0], n[1]), n[2])
    g, k = _g_and_k(r)
    pos = g * n[:2]
    vel = g * nd[:2] - k * nd[2] * n[:2]
    return np.array([t, *pos]), np.array([vt, *vel])


def _cyl_state(chart, y):
    if chart == "pole":
        return y
    n, _ = _rot_to_sphere(y)
    if math.hypot(n[0], n[1]) < 1e-12:
        t, vt = y[0], y[3]
        return np.array([t, 0.0, 0.0, vt, math.nan, math.nan])
    return _rot_to_pole(y)


def _energy(M, chart, y):
    t = y[0]
    E, _ = _scale(M, t)
    if chart == "pole":
        f = _profile(abs(y[1]), t, M.profile.growth_amplitude)[0]
        return y[3] ** 2 + E * (y[4] ** 2 + f * f * y[5] ** 2)
    return y[3] ** 2 + E * (y[4] ** 2 + math.sin(y[1]) ** 2 * y[5] ** 2)


def _initial_state(M: WarpedMetric, p0, v0, cartesian: bool):
    """Chart and state from a cylindrical point and tangent (cylindrical or Cartesian components)."""
    p = _cyl(p0)
    v = np.asarray(v0, dtype=float)
    if cartesian:
        if p.r < AXIS_ENTER:
            # n from (X, Y) with |n_xy| = sin r
            r = p.r
            ca, sa = math.cos(p.alpha), math.sin(p.alpha)
            n = np.array([math.sin(r) * ca, math.sin(r) * sa, math.cos(r)])
            if r == 0:
                nd = np.array([v[1], v[2], 0.0])
            else:
                vr = v[1] * ca + v[2] * sa
                va = (-v[1] * sa + v[2] * ca) / r
                _, dr, da = _pole_frame(r, p.alpha)
                nd = dr * vr + da * va
            rho = math.atan2(math.hypot(n[1], n[2]), n[0])
            b = math.atan2(n[2], n[1])
            _, er, eb = _rot_frame(rho, b)
            return "rot", np.array([p.t, rho, b, v[0], nd @ er, (nd @ eb) / math.sin(rho) ** 2])
        r = p.r
        ca, sa = math.cos(p.alpha), math.sin(p.alpha)
        vr = v[1] * ca + v[2] * sa
        va = (-v[1] * sa + v[2] * ca) / r
        return "pole", np.array([p.t, r, p.alpha, v[0], vr, va])
    if p.r == 0:
        raise AxisDegenerate("give Cartesian tangent components for starting points on the axis")
    y = np.array([p.t, p.r, p.alpha, *v])
    if p.r < AXIS_ENTER:
        return "rot", _pole_to_rot(y)
    return "pole", y


def _normalize(M, chart, y):
    e = _energy(M, chart, y)
    if e <= 0:
        raise ValueError("initial velocity must be nonzero")
    y = y.copy()
    y[3:] /= math.sqrt(e)
    return y


def _run(M, chart, y, h, n_steps):
    from .paths import rk4_step

    rhs = {"pole": _rhs_pole(M), "rot": _rhs_rot(M)}
    ts = np.empty(n_steps + 1)
    P = np.empty((n_steps + 1, 3))
    V = np.empty((n_steps + 1, 3))
    C = np.empty((n_steps + 1, 6))
    En = np.empty(n_steps + 1)
    charts = []

    def record(k, chart, y):
        P[k], V[k] = _cartesian_state(chart, y)
        C[k] = _cyl_state(chart, y)
        En[k] = _energy(M, chart, y)
        charts.append(chart)

    ts[0] = 0.0
    record(0, chart, y)
    for k in range(1, n_steps + 1):
        if chart == "rot":
            for _ in range(ROT_SUBSTEPS):
                y = rk4_step(rhs[chart], y, h / ROT_SUBSTEPS)
        else:
            y = rk4_step(rhs[chart], y, h)
        if chart == "pole" and y[1] < AXIS_ENTER:
            y = _pole_to_rot(y)
            chart = "rot"
        elif chart == "rot":
            n, _ = _rot_to_sphere(y)
            if math.atan2(math.hypot(n[0], n[1]), n[2]) > AXIS_LEAVE:
                y = _rot_to_pole(y)
                chart = "pole"
        ts[k] = k * h
        record(k, chart, y)
    return ts, P, V, C, En, charts


def geodesic_integrate(M: WarpedMetric, p0, v0, T: float, step: float = 0.01, t_min: float = 0.0,
                       cartesian: bool = False, energy_tol: float = 1e-8, max_refine: int = 5) -> GeodesicPath:
    """Unit-speed geodesic from ``p0`` in direction ``v0`` on [t_min, T].

    ``v0`` holds (dt, dr, dalpha) components, or (dt, dX, dY) if ``cartesian``.
    Path points are in the ambient chart (t, X, Y); cylindrical samples and
    energies are in ``extra``.
    """
    if step <= 0 or T <= 0 or t_min > 0:
        raise ValueError("need step > 0, T > 0 and t_min <= 0")
    chart0, y0 = _initial_state(M, p0, v0, cartesian)
    y0 = _normalize(M, chart0, y0)
    h = step
    for _ in range(max_refine + 1):
        nf = max(1, int(math.ceil(T / h - 1e-9)))
        parts = [_run(M, chart0, y0, T / nf, nf)]
        if t_min < 0:
            nb = max(1, int(math.ceil(-t_min / h - 1e-9)))
            parts.insert(0, _run(M, chart0, y0, t_min / nb, nb))
        if len(parts) == 2:
            b, f = parts
            ts = np.concatenate([b[0][::-1], f[0][1:]])
            P, V, C, En = (np.concatenate([b[i][::-1], f[i][1:]]) for i in range(1, 5))
            charts = b[5][::-1] + f[5][1:]
        else:
            ts, P, V, C, En, charts = parts[0]
        drift = float(np.abs(En - 1.0).max())
        if drift <= energy_tol:
            break
        h /= 2
    C[:, 2] = np.mod(C[:, 2], 2.0 * math.pi)
    return GeodesicPath(ts, P, V, "ode", 1.0, extra={
        "cyl": C[:, :3], "cyl_velocity": C[:, 3:], "energy": En, "energy_drift": drift,
        "step": h, "charts": charts, "variant": M.variant})


def equator_conjugate_time(M: WarpedMetric, t0: float = 0.0) -> float:
    """Closed-form first conjugate time along :func:`equator_geodesic`."""
    if M.hyperbolic:
        return math.acosh(1.0 + 0.5 * math.pi**2 * math.exp(2 * t0))
    return math.pi


def equator_geodesic(M: WarpedMetric, t0: float = 0.0, T: float = 2 * math.pi, step: float = 0.005) -> GeodesicPath:
    """Geodesic starting tangent to the great circle r = pi/2 of S_{t0}.

    In the hyperbolic variant the t-coordinate bends; the initial direction is
    aimed so the geodesic returns to t0 at the antipodal point alpha = pi.
    """
    p0 = (t0, math.pi / 2, 0.0)
    if M.hyperbolic:
        # half-plane picture (x, y) = (e^{-t0} alpha, e^{-t}): chord to the antipode is a
        # semicircle about its midpoint; the tangent at the start is normal to the radius
        v = (-0.5 * math.pi * math.exp(t0), 0.0, math.exp(-t0))
    else:
        v = (0.0, 0.0, 1.0)
    return geodesic_integrate(M, p0, v, T, step)


# -- Jacobi fields --------------------------------------------------------------


def _jacobi_rhs(M: WarpedMetric):
    geo = _rhs_pole(M)

    def rhs(y):
        x, xd = y[:3], y[3:6]
        J = y[6:12].reshape(3, 2)
        Jd = y[12:18].reshape(3, 2)
        if x[1] <= 0.05:
            raise AxisDegenerate("Jacobi integration is done in the cylindrical chart; geodesic hits the axis")
        acc = geo(y[:6])[3:]
        G = christoffel(M, x)
        dG = christoffel_derivative(M, x)
        # linearised geodesic equation
        Jdd = -np.einsum("mijk,j,k,ma->ia", dG, xd, xd, J) - 2.0 * np.einsum("ijk,j,ka->ia", G, xd, Jd)
        return np.concatenate([xd, acc, Jd.ravel(), Jdd.ravel()])

    return rhs


def _transverse_start(M: WarpedMetric, x, xd):
    g = metric_tensor(M, x)
    basis = []
    for e in np.eye(3):
        w = e - (xd @ g @ e) / (xd @ g @ xd) * xd
        for b in basis:
            w = w - (b @ g @ w) * b
        nw = math.sqrt(max(w @ g @ w, 0.0))
        if nw > 1e-8:
            basis.append(w / nw)
        if len(basis) == 2:
            break
    return np.column_stack(basis)


def _transverse_det(y):
    return float(np.linalg.det(np.column_stack([y[3:6], y[6:12].reshape(3, 2)])))


@dataclass
class JacobiRun:
    conjugate_times: list
    times: np.ndarray
    determinant: np.ndarray


def jacobi_conjugate_points(M: WarpedMetric, gamma: GeodesicPath | tuple, T: float,
                            step: float = 0.005, xtol: float = 1e-6) -> JacobiRun:
    """Conjugate times to gamma(0) along gamma on (0, T].

    Integrates the variational (Jacobi) equation with J(0) = 0 and the two
    initial derivatives orthonormal to gamma'(0); a conjugate point is a sign
    change of det[gamma', J_1, J_2], refined by bisection on the last step.
    """
    from .paths import rk4_step

    if isinstance(gamma, GeodesicPath):
        x0 = gamma.extra["cyl"][np.searchsorted(gamma.times, 0.0)]
        v0 = gamma.extra["cyl_velocity"][np.searchsorted(gamma.times, 0.0)]
    else:
        x0, v0 = (np.asarray(a, dtype=float) for a in gamma)
        y = _normalize(M, "pole", np.concatenate([x0, v0]))
        v0 = y[3:]
    W = _transverse_start(M, x0, v0)
    y = np.concatenate([x0, v0, np.zeros(6), W.ravel()])
    rhs = _jacobi_rhs(M)
    n = max(1, int(math.ceil(T / step)))
    h = T / n
    times = [0.0]
    dets = [0.0]
    found = []
    prev_sign = 0
    t = 0.0
    for k in range(n):
        y_new = rk4_step(rhs, y, h)
        d = _transverse_det(y_new)
        s = int(np.sign(d))
        if k > 0 and s != 0 and prev_sign != 0 and s != prev_sign:
            lo, hi = 0.0, h
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if int(np.sign(_transverse_det(rk4_step(rhs, y, mid)))) == prev_sign:
                    lo = mid
                else:
                    hi = mid
            found.append(t + 0.5 * (lo + hi))
        if s != 0:
            prev_sign = s
        y = y_new
        t += h
        times.append(t)
        dets.append(d)
    return JacobiRun(found, np.array(times), np.array(dets))


# -- plane cover E_alpha --------------------------------------------------------


def _half_plane_to_klein(uv):
    """(t, s) on a hyperbolic E_alpha -> Klein disk via x = s, y = e^{-t}."""
    uv = np.atleast_2d(uv)
    z = uv[:, 1] + 1j * np.exp(-uv[:, 0])
    w = (z - 1j) / (z + 1j)
    k = 2.0 * w / (1.0 + np.abs(w) ** 2)
    return np.column_stack([k.real, k.imag])


@dataclass(eq=False)
class PlaneChart:
    """E_alpha0 charted by (t, s): s = r on the alpha0 side, s = -r on the alpha0 + pi side."""

    alpha0: float
    variant: str = "euclidean"

    def __post_init__(self):
        self.alpha0 = self.alpha0 % math.pi

    @property
    def geometry(self) -> str:
        return "hyperbolic" if self.variant == "hyperbolic" else "flat"

    @property
    def curvature(self) -> float:
        return -1.0 if self.variant == "hyperbolic" else 0.0

    def _dir(self):
        return math.cos(self.alpha0), math.sin(self.alpha0)

    def distance(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        c, s = self._dir()
        return np.abs(-X[:, 1] * s + X[:, 2] * c)

    def chart(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        c, s = self._dir()
        return np.column_stack([X[:, 0], X[:, 1] * c + X[:, 2] * s])

    def embed(self, uv) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        c, s = self._dir()
        return np.column_stack([uv[:, 0], uv[:, 1] * c, uv[:, 1] * s])

    def to_cyl(self, uv) -> np.ndarray:
        return to_cylindrical(self.embed(uv))

    def klein(self, uv) -> np.ndarray:
        return _half_plane_to_klein(uv)

    def induced_metric(self, uv) -> np.ndarray:
        t = np.atleast_2d(uv)[:, 0]
        E = np.exp(2 * t) if self.variant == "hyperbolic" else np.ones_like(t)
        out = np.zeros((len(t), 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 1, 1] = E
        return out

    def geodesic(self, uv0, direction, t_min: float, t_max: float) -> GeodesicPath:
        """Closed-form unit-speed geodesic of the plane, as a path in the ambient chart."""
        from .xray import plane_line_path

        return plane_line_path(self, uv0, direction, t_min, t_max)


@dataclass(eq=False)
class WarpedPlaneFamily:
    """E_alpha for the sampled alphas, or (alphas=None) the plane through each query point."""

    variant: str = "euclidean"
    alphas: np.ndarray | None = None

    @property
    def exhaustive(self) -> bool:
        return self.alphas is None

    def planes(self, X=None):
        if self.alphas is not None:
            return [PlaneChart(a, self.variant) for a in np.atleast_1d(self.alphas)]
        if X is None:
            return []
        X = np.atleast_2d(X)
        a = np.mod(np.arctan2(X[:, 2], X[:, 1]), math.pi)
        a[np.hypot(X[:, 1], X[:, 2]) < INCIDENCE_TOL] = 0.0
        keys = np.unique(np.round(a, 9))
        return [PlaneChart(float(k), self.variant) for k in keys]


def plane_khat(M: WarpedMetric, K, alphas=None, slab: float = INCIDENCE_TOL) -> KHat:
    K = np.asarray(K, dtype=float).reshape(-1, 3)
    return KHat(K, WarpedPlaneFamily(M.variant, None if alphas is None else np.asarray(alphas, dtype=float)),
                slab=slab)


def origin_radius(K) -> float:
    """D = max sqrt(t^2 + r^2) over K (ambient Cartesian points)."""
    K = np.atleast_2d(K)
    return float(np.linalg.norm(K, axis=1).max()) if K.size else 0.0


def check_ball(kh: KHat, grid, D: float, tol: float = 1e-9) -> tuple[bool, float]:
    """Whether the accepted grid points lie in the closed ball of radius D; also their max norm."""
    pts = np.asarray(grid)[kh.contains(grid)]
    rmax = float(np.linalg.norm(pts, axis=1).max()) if len(pts) else 0.0
    return rmax <= D + tol, rmax


def cylindrical_lattice(t_range, r_range, n_t: int, n_r: int, n_alpha: int) -> np.ndarray:
    """Ambient points on a (t, r, alpha) lattice; alpha in [0, 2 pi) so planes E_alpha carry lattice rows."""
    ts = np.linspace(*t_range, n_t)
    rs = np.linspace(*r_range, n_r)
    al = np.arange(n_alpha) * (2 * math.pi / n_alpha)
    T, R, A = np.meshgrid(ts, rs, al, indexing="ij")
    return to_cartesian(np.column_stack([T.ravel(), R.ravel(), A.ravel()]))


def write_trace(path, gamma: GeodesicPath):
    """CSV: arclength, t, r, alpha, dt, dr, dalpha, energy."""
    import csv

    C = gamma.extra["cyl"]
    Cv = gamma.extra["cyl_velocity"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", "r", "alpha", "dt", "dr", "dalpha", "energy"])
        for s, c, v, e in zip(gamma.times, C, Cv, gamma.extra["energy"]):
            w.writerow([f"{s:.10g}", *(f"{x:.12g}" for x in c), *(f"{x:.12g}" for x in v), f"{e:.15g}"])
