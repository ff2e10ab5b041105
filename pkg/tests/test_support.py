import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.distance import pdist

from planecover.liealg import heisenberg_plus_r
from planecover.nilgroup import plane_family
from planecover.support import (Hull, KHat, PlanarSet, chart_diameter, convex_hull, dk_bound, khat, klein_distance,
                                monotone_chain, set_diameter, shrinking_check, slice_hull)
from planecover.warped import PlaneChart, WarpedPlaneFamily, cylindrical_lattice

pts2 = st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=60).map(
    lambda L: np.array(L, dtype=float) / 10)


def test_hull_examples():
    h = convex_hull(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
    assert h.contains([[0.25, 0.25]])[0] and not h.contains([[0.75, 0.75]])[0]
    single = convex_hull(np.array([[0.3, 0.4]]))
    assert len(single.vertices) == 1 and single.contains([[0.3, 0.4]])[0]
    seg = convex_hull(np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]]))
    assert len(seg.vertices) == 2 and seg.contains([[0.25, 0.25]])[0] and not seg.contains([[0.25, 0.3]])[0]
    assert not Hull(np.zeros((0, 2))).contains([[0, 0]])[0]
    with pytest.raises(ValueError):
        PlanarSet(np.array([[1.0, 0.0]]), "hyperbolic-klein")


@given(pts2)
def test_hull_properties(P):
    h = convex_hull(P)
    assert np.array_equal(convex_hull(h.vertices).vertices, h.vertices)  # idempotent
    assert h.contains(P).all()
    # convex combinations of vertices stay inside
    w = np.random.default_rng(len(P)).dirichlet(np.ones(len(h.vertices)), size=20)
    assert h.contains(w @ h.vertices, 1e-10).all()
    assert h.diameter() == pytest.approx(set_diameter(P) if len(P) > 1 else 0.0, abs=1e-12)


def test_hull_matches_scipy(rng):
    from scipy.spatial import ConvexHull

    P = rng.normal(size=(100, 2))
    h = convex_hull(P)
    ref = P[ConvexHull(P).vertices]
    assert len(h.vertices) == len(ref)
    assert {tuple(v) for v in h.vertices} == {tuple(v) for v in ref}
    assert h.diameter() == pytest.approx(pdist(P).max())


@given(st.integers(0, 2**31 - 1))
def test_klein_hull_diameter(seed):
    r = np.random.default_rng(seed)
    rad = np.sqrt(r.uniform(0, 0.9, 100))
    th = r.uniform(0, 2 * math.pi, 100)
    P = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
    h = convex_hull(PlanarSet(P, "hyperbolic-klein"))
    assert abs(h.diameter() - set_diameter(P, "hyperbolic")) <= 1e-6


def test_klein_distance():
    assert klein_distance([0, 0], [math.tanh(1.0), 0]) == pytest.approx(1.0)


LAT = cylindrical_lattice((-1.5, 1.5), (0, 1.5), 13, 7, 8)
BALL_K = LAT[np.linalg.norm(LAT, axis=1) <= 1.0 + 1e-9]


def test_khat_examples():
    fam = WarpedPlaneFamily("euclidean")
    assert not KHat(np.zeros((0, 3)), fam).contains(LAT).any()
    kh = khat(BALL_K, fam)
    inner = LAT[np.linalg.norm(LAT, axis=1) <= 0.5]
    assert kh.contains(inner).all()
    with pytest.raises(ValueError):
        KHat(BALL_K, WarpedPlaneFamily("euclidean", np.zeros(0))).contains(LAT)


@given(st.integers(0, 2**31 - 1))
def test_khat_monotonicity(seed):
    r = np.random.default_rng(seed)
    fam_sparse = WarpedPlaneFamily("euclidean", np.array([0.0]))
    fam_dense = WarpedPlaneFamily("euclidean", np.arange(4) * math.pi / 4)
    K = LAT[r.random(len(LAT)) < 0.3]
    K2 = np.vstack([K, LAT[r.random(len(LAT)) < 0.2]])
    a, b = KHat(K, fam_sparse).contains(LAT), KHat(K, fam_dense).contains(LAT)
    assert not np.any(b & ~a)  # densifying planes never grows K-hat
    c = KHat(K2, fam_dense).contains(LAT)
    assert not np.any(b & ~c)  # monotone in K


def test_hyperbolic_khat_uses_klein_hulls():
    fam = WarpedPlaneFamily("hyperbolic")
    kh = KHat(BALL_K, fam)
    acc = kh.contains(LAT)
    assert kh.contains(BALL_K).all()
    # the hyperbolic hull of a chart ball is not the chart ball: it bulges toward large t
    assert acc.sum() >= len(BALL_K)
    plane = PlaneChart(0.0, "hyperbolic")
    h = slice_hull(plane, BALL_K)
    assert h.geometry == "hyperbolic-klein" and not h.empty


def test_dk_bound_and_shrinking():
    A = heisenberg_plus_r()
    fam = plane_family(A, (A.basis(2), A.basis(3)))
    ax = np.linspace(-1, 1, 5)
    G = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), -1).reshape(-1, 4)
    K = G[np.linalg.norm(G, axis=1) <= 1 + 1e-9]
    acc = KHat(K, fam).contains(G)
    b = dk_bound(K, fam, G[acc], measured=chart_diameter(G[acc]))
    assert b.holds and b.bound == pytest.approx(2 * b.D_K + b.diam_K)
    one = dk_bound(K[:1], fam, K[:1])
    assert one.D_K == 0 and one.bound == 0
    Ks = [G[np.linalg.norm(G, axis=1) <= r + 1e-9] for r in (1.0, 0.5, 0.0)]
    sr = shrinking_check(Ks, fam, G)
    assert sr.monotone and sr.diameters[-1] == 0.0
    const = shrinking_check([K, K], fam, G)
    assert const.diameters[0] == const.diameters[1]
    with pytest.raises(ValueError):
        shrinking_check([Ks[1], Ks[0]], fam, G)
    assert shrinking_check([K, np.zeros((0, 4))], fam, G).diameters[-1] == 0


def test_monotone_chain_collinear():
    P = np.array([[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1]], dtype=float)
    assert len(monotone_chain(P)) == 4
