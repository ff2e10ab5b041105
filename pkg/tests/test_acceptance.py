"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.optimize import brentq

from planecover.liealg import (certify_plane, dimension_condition, filiform, find_commuting_pair, heisenberg,
                               heisenberg_plus_r, upper_central_series)
from planecover.nilgroup import (bch_product, escape_profile, geodesic_flow, heisenberg_geodesic, inverse,
                                 paraboloid_khat, plane_family)
from planecover.reconstruct import VerifyConfig, WarpedGeometry, filtered_backprojection, support_verification
from planecover.support import KHat, chart_diameter, dk_bound, shrinking_check
from planecover.warped import (PlaneChart, WarpedMetric, check_ball, cylindrical_lattice, equator_geodesic,
                               geodesic_integrate, jacobi_conjugate_points, origin_radius, plane_khat,
                               sectional_curvature, to_cylindrical)
from planecover.xray import (Bump, Phantom, parallel_line, product_sphere_demo, sinogram_plane, xray_transform)

from conftest import ACCEPTANCE
from oracles import brute_series_dims

EUC, HYP = WarpedMetric("euclidean"), WarpedMetric("hyperbolic")


@contextmanager
def criterion(n, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE[n] = (False, title, ", ".join(f"{k}={v}" for k, v in detail.items()))
        raise
    ACCEPTANCE[n] = (True, title, ", ".join(f"{k}={v}" for k, v in detail.items()))


def _fmt(x):
    return f"{x:.3g}"


def test_c01_algebra_suite():
    with criterion(1, "algebra suite") as d:
        algs = [heisenberg(), heisenberg_plus_r()] + [filiform(n) for n in range(3, 7)]
        jac = max(A.jacobi_residual() for A in algs)
        d["max_jacobi"] = _fmt(jac)
        assert jac <= 1e-12
        for A in algs:
            assert [s.dim for s in upper_central_series(A)] == brute_series_dims(A.c), A.name
        assert [s.dim for s in upper_central_series(filiform(4))] == [1, 2, 4]
        assert dimension_condition(heisenberg()) is None
        assert all(dimension_condition(filiform(n)) is None for n in range(3, 7))
        assert dimension_condition(heisenberg_plus_r()) == 1


def test_c02_koszul_plane_certification():
    with criterion(2, "Koszul plane certification") as d:
        worst = 0.0
        A = heisenberg_plus_r()
        x, y = find_commuting_pair(A, dimension_condition(A))
        cert = certify_plane(A, x, y)
        assert cert.ok
        worst = max(worst, cert.max_residual)
        L5 = filiform(5)
        cert = certify_plane(L5, L5.basis(1), L5.basis(3))
        assert cert.ok
        worst = max(worst, cert.max_residual)
        d["max_residual"] = _fmt(worst)
        assert worst <= 1e-12


def test_c03_bch_group_law():
    with criterion(3, "BCH group law") as d:
        H = heisenberg()
        r = np.random.default_rng(3)
        P, Q, R = r.normal(size=(3, 10_000, 3))
        worst = 0.0
        for p, q, s in zip(P, Q, R):
            lhs = bch_product(H, bch_product(H, p, q), s)
            rhs = bch_product(H, p, bch_product(H, q, s))
            worst = max(worst, np.abs(lhs - rhs).max(), np.abs(bch_product(H, p, inverse(p))).max(),
                        np.abs(bch_product(H, inverse(p), p)).max())
        d["max_residual"] = _fmt(worst)
        assert worst <= 1e-12
        x, y, z, a, b, c = 1.25, -0.5, 3.0, 0.75, 2.0, -1.5
        assert np.array_equal(bch_product(H, [x, y, z], [a, b, c]), [x + a, y + b, z + c + (x * b - y * a) / 2])


def test_c04_geodesic_oracle_and_tangency():
    with criterion(4, "Heisenberg geodesic oracle and tangency") as d:
        H = heisenberg()
        sup = tang = 0.0
        for x in (-3.0, -1.0, 0.5, 2.0, 4.0):
            gamma = geodesic_flow(H, [x, 0, 0], [0, 1, 0], 10.0, t_min=-10.0)
            ref = heisenberg_geodesic(x).position(gamma.times)
            sup = max(sup, np.abs(gamma.points - ref).max())

            def dphi(t):
                # derivative of w - (u^2 + v^2)/4, zero where the geodesic touches the paraboloid boundary
                p, v = gamma.eval(t)
                return v[2] - 0.5 * (p[0] * v[0] + p[1] * v[1])

            t_star = brentq(dphi, -9.9, 9.9, xtol=1e-12)
            tang = max(tang, abs(t_star - x))
            p = gamma.position(t_star)
            assert abs(p[2] - 0.25 * (p[0] ** 2 + p[1] ** 2)) <= 1e-6
        d["sup_error"] = _fmt(sup)
        d["tangency_error"] = _fmt(tang)
        assert sup <= 1e-6 and tang <= 1e-6


def test_c05_energy_conservation():
    with criterion(5, "energy conservation, T=20") as d:
        r = np.random.default_rng(5)
        worst = 0.0
        for A in (heisenberg(), heisenberg_plus_r()):
            for _ in range(10):
                g = geodesic_flow(A, r.normal(size=A.n), r.normal(size=A.n), 20.0)
                worst = max(worst, g.extra["energy_drift"])
        for M in (EUC, HYP):
            for _ in range(10):
                p0 = (r.uniform(-1, 1), r.uniform(0.3, 3.0), r.uniform(0, 2 * math.pi))
                g = geodesic_integrate(M, p0, tuple(r.normal(size=3)), 20.0)
                worst = max(worst, g.extra["energy_drift"])
        d["max_drift"] = _fmt(worst)
        assert worst <= 1e-8


def test_c06_escape_profile():
    with criterion(6, "Heisenberg escape profile") as d:
        H = heisenberg()
        profiles = [escape_profile(H, r, 64) for r in (1.0, 2.0, 4.0)]
        maxima = [p.max_exit_time for p in profiles]
        d["max_exit_times"] = [round(m, 4) for m in maxima]
        assert all(np.isfinite(p.exit_times).all() and len(p.exit_times) == 64 for p in profiles)
        assert maxima == sorted(maxima)


def test_c07_curvature_probes():
    with criterion(7, "warped curvature probes") as d:
        ex, er, ea = np.eye(3)
        r = np.random.default_rng(7)
        flat = sphere = hyp = 0.0
        for _ in range(10):
            p = (r.uniform(-3, -0.2), r.uniform(math.pi + 0.2, 8.0), r.uniform(0, 2 * math.pi))
            for u, v in ((ex, er), (er, ea), (ex, ea)):
                flat = max(flat, abs(sectional_curvature(EUC, p, u, v)))
            p = (r.uniform(-2, 2), r.uniform(0.3, math.pi / 2 - 0.05), r.uniform(0, 2 * math.pi))
            sphere = max(sphere, abs(sectional_curvature(EUC, p, er, ea) - 1))
            p = (r.uniform(-1, 1), r.uniform(0.3, 6.0), r.uniform(0, 2 * math.pi))
            hyp = max(hyp, abs(sectional_curvature(HYP, p, ex, er) + 1))
        d.update(flat=_fmt(flat), sphere=_fmt(sphere), hyperbolic=_fmt(hyp))
        assert flat <= 1e-3 and sphere <= 1e-3 and hyp <= 1e-3


def test_c08_conjugate_points():
    with criterion(8, "conjugate time on the S_0 equator") as d:
        run = jacobi_conjugate_points(EUC, equator_geodesic(EUC), 4.0)
        d["first_conjugate_time"] = f"{run.conjugate_times[0]:.6f}"
        assert abs(run.conjugate_times[0] - math.pi) <= 1e-3


def test_c09_total_geodesy():
    with criterion(9, "total geodesy of E_alpha") as d:
        r = np.random.default_rng(9)
        worst = {}
        for M in (EUC, HYP):
            w = 0.0
            for _ in range(100):
                plane = PlaneChart(r.uniform(0, math.pi), M.variant)
                X = plane.embed(r.uniform(-2, 2, size=(1, 2)))[0]
                if np.hypot(X[1], X[2]) < 1e-3:
                    X = plane.embed([[X[0], 0.5]])[0]
                a, b = r.normal(size=2)
                s_dir = plane.embed([[0, 1]])[0]
                gamma = geodesic_integrate(M, tuple(to_cylindrical(X)[0]), (a, b * s_dir[1], b * s_dir[2]), 10.0,
                                           cartesian=True)
                w = max(w, plane.distance(gamma.points).max())
            worst[M.variant] = w
        d.update({k: _fmt(v) for k, v in worst.items()})
        assert max(worst.values()) <= 1e-6


def test_c10_positivity_and_linearity():
    with criterion(10, "X-ray positivity and linearity") as d:
        E0 = PlaneChart(0.0)
        r = np.random.default_rng(10)
        f1 = Phantom((Bump((0.1, 0.2, 0.0), 0.6),), support_ball=((0.0, 0.0, 0.0), 1.5))
        f2 = Phantom((Bump((-0.3, 0.1, 0.2), 0.4, -2.0),), support_ball=((0.0, 0.0, 0.0), 1.5))
        lin = 0.0
        minpos = math.inf
        for _ in range(50):
            gamma = parallel_line(E0, r.uniform(-0.9, 0.9), r.uniform(0, math.pi), 4.0)
            c1, c2 = r.normal(size=2) * 3
            combo = Phantom(f1.scaled(c1).bumps + f2.scaled(c2).bumps, support_ball=((0.0, 0.0, 0.0), 1.5))
            lin = max(lin, abs(xray_transform(combo, gamma) - c1 * xray_transform(f1, gamma)
                               - c2 * xray_transform(f2, gamma)))
        for _ in range(50):
            # lines through the bump's interior
            th = r.uniform(0, math.pi)
            off = 0.1 * math.cos(th) + 0.2 * math.sin(th) + r.uniform(-0.5, 0.5)
            minpos = min(minpos, xray_transform(f1, parallel_line(E0, off, th, 4.0)))
        gamma = geodesic_integrate(EUC, (0.0, 1.0, 0.0), (0.2, -0.5, 0.3), 8.0, t_min=-8.0)
        minpos = min(minpos, xray_transform(Phantom((Bump((0.0, 1.0, 0.0), 0.5),)), gamma))
        d.update(min_positive=_fmt(minpos), linearity=_fmt(lin))
        assert minpos > 0 and lin <= 1e-8


def test_c11_noninjectivity_demo():
    with criterion(11, "R x S^2 non-injectivity demo") as d:
        res = product_sphere_demo(samples=100)
        d.update(max_xray=_fmt(res.max_abs_xray), max_f=_fmt(res.max_abs_f))
        assert len(res.values) == 100
        assert res.max_abs_xray <= 1e-8 and res.max_abs_f >= 1


def test_c12_fbp_roundtrip():
    with criterion(12, "FBP round trip 256x400") as d:
        E0 = PlaneChart(0.0)
        f = Phantom((Bump((0.0, 0.0, 0.0), 1.0),))
        t0 = time.perf_counter()
        offsets = np.linspace(-1.5, 1.5, 256)
        angles = np.arange(400) * math.pi / 400
        S = sinogram_plane(f, E0, offsets, angles)
        img = filtered_backprojection(S, n_pixels=256, extent=1.5)
        elapsed = time.perf_counter() - t0
        truth = f(E0.embed(img.points())).reshape(img.values.shape)
        err = np.linalg.norm(img.values - truth) / np.linalg.norm(truth)
        d.update(rel_l2=_fmt(err), seconds=f"{elapsed:.2f}")
        assert err <= 0.05 and elapsed <= 30


LAT = cylindrical_lattice((-1.5, 1.5), (0, 1.5), 13, 7, 8)


def _ball(r):
    return LAT[np.linalg.norm(LAT, axis=1) <= r + 1e-9]


def test_c13_khat_pipeline_warped():
    with criterion(13, "K-hat pipeline on the warped euclidean manifold") as d:
        K = _ball(1.0)
        f = Phantom((Bump((0.2, 0.1, 0.0), 0.5), Bump((-0.3, 0.0, 0.2), 0.3, 0.5)))
        rep = support_verification(f, K, WarpedGeometry(EUC, n_planes=4), VerifyConfig(), khat_grid=LAT)
        d["status"] = rep.status
        assert rep.status == "pass" and rep.support_in_khat
        D = origin_radius(K)
        ok, rmax = check_ball(plane_khat(EUC, K), LAT, D)
        d["khat_max_norm"] = _fmt(rmax)
        d["D"] = _fmt(D)
        assert ok
        Ks = [_ball(1.0 / n) for n in (1, 2, 4, 8)]
        sr = shrinking_check(Ks, plane_khat(EUC, K).family, LAT)
        d["diameters"] = [round(x, 4) for x in sr.diameters]
        assert sr.monotone
        # the last ball is below the lattice spacing: only the origin survives
        assert sr.diameters[-1] <= 0.25 + 1e-9


def test_c14_diameter_bound():
    with criterion(14, "diameter bound on H+R, 3 K shapes") as d:
        A = heisenberg_plus_r()
        fam = plane_family(A, find_commuting_pair(A, 1))
        ax = np.linspace(-1.5, 1.5, 7)
        G = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), -1).reshape(-1, 4)
        shapes = {
            "ball": G[np.linalg.norm(G, axis=1) <= 1.0 + 1e-9],
            "box": G[np.all(np.abs(G) <= [1.0, 0.5, 0.5, 1.0], axis=1)],
            "ellipsoid": G[np.sum((G / [1.5, 1.0, 0.5, 1.0]) ** 2, axis=1) <= 1 + 1e-9],
        }
        out = {}
        for name, K in shapes.items():
            acc = G[KHat(K, fam).contains(G)]
            b = dk_bound(K, fam, acc, measured=chart_diameter(acc))
            out[name] = f"{b.measured:.3f}<={b.bound:.3f}"
            assert b.holds, name
        d.update(out)


def test_c15_paraboloid_khat():
    with criterion(15, "paraboloid K-hat containment and anti-monotonicity") as d:
        r = np.random.default_rng(15)
        shifts = np.array([[0.5, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.3]])
        grown = 0
        shrunk = 0
        for _ in range(20):
            K = r.normal(size=(r.integers(1, 40), 3)) * r.uniform(0.2, 2.0) + r.normal(size=3)
            P3 = paraboloid_khat(K, 3, shifts)
            P12 = paraboloid_khat(K, 12, shifts)
            assert P3.contains(K).all() and P12.contains(K).all()
            X = r.uniform(-5, 5, size=(2000, 3))
            a, b = P3.contains(X), P12.contains(X)
            grown += int(np.sum(b & ~a))
            shrunk += int(np.sum(a & ~b))
        d.update(points_added=grown, points_removed=shrunk)
        assert grown == 0
