import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from planecover.liealg import ConditionFails, filiform, heisenberg, heisenberg_plus_r
from planecover.nilgroup import (GroupPlaneFamily, HorizonExceeded, NotTwoStep, bch_product, direction_grid,
                                 escape_profile, first_exit_time, geodesic_flow, heisenberg_geodesic, inverse,
                                 left_translate, paraboloid_khat, plane_family, rotated_frames, shift_lattice)

from oracles import exp_chart_geodesic

H = heisenberg()
coords = st.floats(-5, 5, allow_nan=False)
vec3 = st.tuples(coords, coords, coords).map(np.array)


def test_product_formula_exact():
    x, y, z, a, b, c = 1.5, -0.25, 2.0, 0.5, 3.0, -1.0
    p = bch_product(H, [x, y, z], [a, b, c])
    assert np.array_equal(p, [x + a, y + b, z + c + (x * b - y * a) / 2])


@given(vec3, vec3, vec3)
def test_group_axioms(p, q, r):
    lhs = bch_product(H, bch_product(H, p, q), r)
    rhs = bch_product(H, p, bch_product(H, q, r))
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())
    assert np.abs(bch_product(H, p, inverse(p))).max() <= 1e-12
    assert np.abs(bch_product(H, inverse(p), p)).max() <= 1e-12


def test_left_translate_matches_product(rng):
    g = rng.normal(size=3)
    X = rng.normal(size=(5, 3))
    assert np.allclose(left_translate(H, g, X), [bch_product(H, g, x) for x in X])


def test_not_two_step():
    with pytest.raises(NotTwoStep):
        bch_product(filiform(4), np.zeros(4), np.zeros(4))


def test_heisenberg_closed_form_match():
    for x in (0.0, 1.0, -2.5):
        gamma = geodesic_flow(H, [x, 0, 0], [0, 1, 0], 10.0, t_min=-10.0)
        ref = heisenberg_geodesic(x).position(gamma.times)
        assert np.abs(gamma.points - ref).max() <= 1e-6
        assert gamma.extra["energy_drift"] <= 1e-8


def test_flow_matches_generic_christoffel_oracle(rng):
    """Sign check of the Euler-Arnold equation against a generic metric-geodesic solver."""
    for A in (H, heisenberg_plus_r()):
        p0 = rng.normal(size=A.n) * 0.5
        v0 = rng.normal(size=A.n)
        gamma = geodesic_flow(A, p0, v0, 3.0, step=0.005)
        pdot0 = gamma.velocities[0]
        ref = exp_chart_geodesic(A.c, A.ip, p0, pdot0, gamma.times)
        assert np.abs(gamma.points - ref).max() <= 1e-6


@given(vec3.filter(lambda v: np.linalg.norm(v) > 0.1), vec3)
def test_energy_conserved(v0, p0):
    gamma = geodesic_flow(H, p0, v0, 5.0, step=0.02)
    assert gamma.extra["energy_drift"] <= 1e-8


def test_left_invariance(rng):
    """Translating the start point translates the geodesic."""
    g = rng.normal(size=3)
    v0 = rng.normal(size=3)
    a = geodesic_flow(H, np.zeros(3), v0, 4.0, step=0.005)
    b = geodesic_flow(H, g, v0, 4.0, step=0.005)
    assert np.abs(left_translate(H, g, a.points) - b.points).max() <= 1e-9


def test_escape_profile_monotone():
    maxima = [escape_profile(H, r, 16).max_exit_time for r in (1.0, 2.0)]
    assert all(math.isfinite(m) for m in maxima) and maxima[0] <= maxima[1]
    # vertical geodesic t -> (0, 0, t) leaves B_r exactly at t = r
    assert abs(first_exit_time(H, [0, 0, 1.0], 1.5) - 1.5) <= 1e-9
    with pytest.raises(HorizonExceeded):
        first_exit_time(H, [0, 0, 1.0], 5.0, horizon=1.0)


def test_direction_grid_unit():
    D = direction_grid(H, 64)
    assert D.shape == (64, 3) and np.allclose(np.linalg.norm(D, axis=1), 1.0)
    D4 = direction_grid(heisenberg_plus_r(), 20)
    assert np.allclose(np.linalg.norm(D4, axis=1), 1.0)


@given(st.integers(0, 2**31 - 1))
def test_paraboloid_contains_K_and_antimonotone(seed):
    r = np.random.default_rng(seed)
    K = r.normal(size=(r.integers(1, 30), 3)) * r.uniform(0.2, 2.0)
    sh = np.array([[0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    P3 = paraboloid_khat(K, 3, sh)
    P12 = paraboloid_khat(K, 12, sh)
    assert P3.contains(K).all() and P12.contains(K).all()
    X = r.uniform(-4, 4, size=(500, 3))
    assert not np.any(P12.contains(X) & ~P3.contains(X))
    lo, hi = P12.bounding_box()
    inside = X[P12.contains(X)]
    assert np.all(inside >= lo - 1e-9) and np.all(inside <= hi + 1e-9)


def test_rotated_frames_nested():
    sh = shift_lattice(np.array([[1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]]))
    F3, F12 = rotated_frames(3, sh), rotated_frames(12, sh)
    assert len(F12) == 4 * len(F3)
    for f in F3:
        assert np.min(np.linalg.norm(F12 - f, axis=1)) <= 1e-12


def test_plane_family():
    A = heisenberg_plus_r()
    fam = plane_family(A, (A.basis(2), A.basis(3)))
    assert isinstance(fam, GroupPlaneFamily) and fam.exhaustive
    X = np.array([[1.0, 2.0, 0.5, 0.0], [1.0, 2.0, -3.0, 4.0], [0.0, 1.0, 0.0, 0.0]])
    planes = fam.planes(X)
    assert len(planes) == 2  # the first two points share a leaf
    for p in planes:
        uv = np.random.default_rng(0).normal(size=(4, 2))
        assert np.abs(p.distance(p.embed(uv))).max() <= 1e-12
        assert np.allclose(p.chart(p.embed(uv)), uv)
    with pytest.raises(ConditionFails):
        plane_family(A, (A.basis(0), A.basis(1)))
