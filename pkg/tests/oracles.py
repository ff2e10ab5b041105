"""Independent reference computations used by the tests.

Nothing here calls into the package's algorithms; only raw arrays go in.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp


def brute_series_dims(c: np.ndarray, tol: float = 1e-9) -> list[int]:
    """dim g_i for the upper central series, g_i = {x : [x, e_j] in g_{i-1} for all j}.

    Uses the Euclidean structure only (the series does not depend on the inner product).
    """
    n = c.shape[0]
    dims = []
    Q = np.zeros((n, 0))  # orthonormal basis of g_{i-1}
    while True:
        P = np.eye(n) - Q @ Q.T
        # x -> P [x, e_j] stacked over j
        rows = [P @ c[:, j, :].T for j in range(n)]
        M = np.vstack(rows)
        _, s, Vt = np.linalg.svd(M)
        rank = int(np.sum(s > tol * max(1.0, s.max() if len(s) else 0.0)))
        ker = Vt[rank:].T
        if ker.shape[1] == Q.shape[1]:
            return dims if Q.shape[1] == n else None
        Q, _ = np.linalg.qr(ker)
        Q = Q[:, : ker.shape[1]]
        dims.append(Q.shape[1])
        if Q.shape[1] == n:
            return dims


def levi_civita(c: np.ndarray, x, y) -> np.ndarray:
    """nabla_x y for left-invariant fields, orthonormal basis: sum over z of the Koszul value."""
    n = c.shape[0]
    br = lambda a, b: np.einsum("i,j,ijk->k", a, b, c)  # noqa: E731
    out = np.zeros(n)
    for k in range(n):
        z = np.eye(n)[k]
        out[k] = 0.5 * (br(x, y) @ z - x @ br(y, z) - y @ br(x, z))
    return out


def exp_chart_geodesic(c: np.ndarray, ip: np.ndarray, p0, pdot0, ts, h: float = 1e-5):
    """Geodesic of the metric g(p) = E^{-T} ip E^{-1}, E = I + ad_p / 2, by generic
    Christoffel symbols from finite differences of g, integrated with DOP853."""
    n = c.shape[0]

    def g(p):
        E = np.eye(n) + 0.5 * np.einsum("i,ijk->kj", p, c)
        Ei = np.linalg.inv(E)
        return Ei.T @ ip @ Ei

    def gamma(p):
        dg = np.zeros((n, n, n))
        for m in range(n):
            e = np.zeros(n)
            e[m] = h
            dg[m] = (g(p + e) - g(p - e)) / (2 * h)
        # low[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
        low = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
        return np.einsum("il,ljk->ijk", np.linalg.inv(g(p)), low)

    def rhs(t, y):
        p, v = y[:n], y[n:]
        return np.concatenate([v, -np.einsum("ijk,j,k->i", gamma(p), v, v)])

    sol = solve_ivp(rhs, (ts[0], ts[-1]), np.concatenate([p0, pdot0]), t_eval=ts,
                    method="DOP853", rtol=1e-11, atol=1e-12)
    return sol.y[:n].T


def bump_chord_integral(radius: float, d: float, amplitude: float = 1.0) -> float:
    """Integral of A (1 - |x|^2/rho^2)^3 along a line at distance d from the center (closed form)."""
    if d >= radius:
        return 0.0
    a = 1.0 - d * d / radius**2
    # integrand A (a - s^2/rho^2)^3 on |s| <= rho sqrt(a)
    L = radius * math.sqrt(a)
    # int_{-L}^{L} (a - s^2/r^2)^3 ds expanded
    r2 = radius**2
    val = 2 * (a**3 * L - a**2 * L**3 / r2 + 3 * a * L**5 / (5 * r2**2) - L**7 / (7 * r2**3))
    return amplitude * val


def hyperbolic_equator_conjugate_time(t0: float) -> float:
    """{r = pi/2} is totally geodesic (f_r = 0 there) with metric dt^2 + e^{2t} dalpha^2, a
    hyperbolic plane (x, y) = (alpha, e^{-t}).  Rotations of the round factor fixing
    alpha = 0, pi sweep geodesics between those points, so the first conjugate time is
    their half-plane distance arccosh(1 + pi^2 / (2 y0^2))."""
    return math.acosh(1.0 + 0.5 * math.pi**2 * math.exp(2 * t0))


def dense_line_integral(f, base, direction, half_length: float, n: int = 200001) -> float:
    s = np.linspace(-half_length, half_length, n)
    pts = base[None, :] + s[:, None] * direction[None, :]
    v = f(pts)
    return float(np.trapezoid(v, s)) if hasattr(np, "trapezoid") else float(np.trapz(v, s))


def symbolic_christoffel(variant: str, amp: float = 0.5):
    """Christoffel symbols from the metric by sympy, one lambdified function per profile piece.

    Returns {piece: f(t, r) -> Gamma[i, j, k]} with pieces sphere, blend, linear, growth.
    """
    import sympy as sp

    t, r, a = sp.symbols("t r a", real=True)
    r0, r1, r2 = 3 * sp.pi / 4, sp.pi, 2 * sp.pi
    lin = 2 + r - sp.pi
    u = (r - r0) / (r1 - r0)
    chi = u**3 * (10 - 15 * u + 6 * u**2)
    w = r - r2
    pieces = {
        "sphere": sp.sin(r),
        "blend": (1 - chi) * sp.sin(r) + chi * lin,
        "linear": lin,
        "growth": lin + t**3 / (1 + t**3) * amp * w**3 / (1 + w**2),
    }
    E = sp.exp(2 * t) if variant == "hyperbolic" else sp.Integer(1)
    X = (t, r, a)
    out = {}
    for name, f in pieces.items():
        g = sp.diag(1, E, E * f**2)
        gi = sp.diag(*[1 / g[i, i] for i in range(3)])  # diagonal metric
        G = [[[(sum(gi[i, l] * (sp.diff(g[l, k], X[j]) + sp.diff(g[l, j], X[k]) - sp.diff(g[j, k], X[l]))
                               for l in range(3)) / 2) for k in range(3)] for j in range(3)] for i in range(3)]
        out[name] = sp.lambdify((t, r), G, "numpy")
    return out
