"""Convex hulls in flat and hyperbolic planes and the support set K-hat.

A plane is anything with ``geometry`` ("flat" or "hyperbolic"),
``distance(X)`` (ambient chart distance of points to the plane) and
``chart(X)`` (2D intrinsic chart coordinates of points near the plane).
Hyperbolic planes additionally give ``klein(uv)``; hulls of hyperbolic sets
are computed in the Klein disk, where geodesics are straight chords.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

HULL_TOL = 1e-10
INCIDENCE_TOL = 1e-6


class Plane(Protocol):
    geometry: str

    def distance(self, X: np.ndarray) -> np.ndarray: ...

    def chart(self, X: np.ndarray) -> np.ndarray: ...


class PlaneFamily(Protocol):
    def planes(self, X: np.ndarray | None = None) -> Sequence[Plane]: ...


# -- planar hulls ---------------------------------------------------------------


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain), collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2))))
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def klein_distance(p, q) -> np.ndarray:
    """Hyperbolic distance between points of the Klein disk (broadcasting)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    num = 1.0 - np.sum(p * q, axis=-1)
    den = np.sqrt((1.0 - np.sum(p * p, axis=-1)) * (1.0 - np.sum(q * q, axis=-1)))
    return np.arccosh(np.maximum(num / den, 1.0))


@dataclass(frozen=True, eq=False)
class PlanarSet:
    points: np.ndarray
    geometry: str = "flat"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.geometry not in ("flat", "hyperbolic-klein"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "hyperbolic-klein" and len(pts) and np.max(np.sum(pts**2, axis=1)) >= 1.0:
            raise ValueError("Klein-model points must lie strictly inside the unit disk")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True, eq=False)
class Hull:
    """Convex polygon given by counter-clockwise vertices (may be a point or a segment)."""

    vertices: np.ndarray
    geometry: str = "flat"

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0

    def contains(self, X, tol: float = HULL_TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        V = self.vertices
        if len(V) == 0:
            return np.zeros(len(X), dtype=bool)
        if len(V) == 1:
            return np.linalg.norm(X - V[0], axis=1) <= tol
        if len(V) == 2:
            return _segment_distance(X, V[0], V[1]) <= tol
        inside = np.ones(len(X), dtype=bool)
        for a, b in zip(V, np.roll(V, -1, axis=0)):
            e = b - a
            # signed distance to the left of edge a->b
            d = (e[0] * (X[:, 1] - a[1]) - e[1] * (X[:, 0] - a[0])) / np.hypot(*e)
            inside &= d >= -tol
        return inside

    def distance(self, p, q) -> np.ndarray:
        if self.geometry == "flat":
            return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)
        return klein_distance(p, q)

    def diameter(self) -> float:
        V = self.vertices
        if len(V) < 2:
            return 0.0
        i, j = np.triu_indices(len(V), 1)
        return float(self.distance(V[i], V[j]).max())


def _segment_distance(X, a, b):
    e = b - a
    L2 = float(e @ e)
    if L2 == 0.0:
        return np.linalg.norm(X - a, axis=1)
    s = np.clip(((X - a) @ e) / L2, 0.0, 1.0)
    return np.linalg.norm(X - (a + s[:, None] * e), axis=1)


def convex_hull(S: PlanarSet | np.ndarray, geometry: str | None = None) -> Hull:
    if not isinstance(S, PlanarSet):
        S = PlanarSet(np.asarray(S), geometry or "flat")
    return Hull(monotone_chain(S.points), S.geometry)


def set_diameter(points, geometry: str = "flat") -> float:
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        return 0.0
    if geometry == "flat":
        return float(pdist(P).max())
    i, j = np.triu_indices(len(P), 1)
    return float(klein_distance(P[i], P[j]).max())


def chart_diameter(points) -> float:
    """Euclidean diameter of a point cloud of any dimension (uses hull vertices when possible)."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        return 0.0
    if len(P) > 200 and P.shape[1] <= 4:
        try:
            P = P[ConvexHull(P).vertices]
        except (QhullError, ValueError):
            pass
    return float(pdist(P).max())


# -- K-hat ----------------------------------------------------------------------


def _hull_coords(plane, uv: np.ndarray) -> np.ndarray:
    return plane.klein(uv) if plane.geometry == "hyperbolic" else uv


def slice_hull(plane, K: np.ndarray, slab: float = INCIDENCE_TOL) -> Hull:
    """Hull (in the plane's chart, Klein coordinates if hyperbolic) of K points within ``slab``."""
    geometry = "hyperbolic-klein" if plane.geometry == "hyperbolic" else "flat"
    if len(K) == 0:
        return Hull(np.zeros((0, 2)), geometry)
    near = plane.distance(K) <= slab
    if not near.any():
        return Hull(np.zeros((0, 2)), geometry)
    return convex_hull(PlanarSet(_hull_coords(plane, plane.chart(K[near])), geometry))


@dataclass(eq=False)
class KHat:
    """Sampled support set: intersection over planes of (complement of plane) or (hull of K slice)."""

    K: np.ndarray
    family: PlaneFamily
    tol: float = INCIDENCE_TOL
    slab: float = INCIDENCE_TOL
    hull_tol: float = 1e-9

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float)

    @property
    def empty(self) -> bool:
        return self.K.size == 0

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.empty:
            return np.zeros(len(X), dtype=bool)
        accept = np.ones(len(X), dtype=bool)
        planes = self.family.planes(X)
        if len(planes) == 0:
            raise ValueError("plane family is empty")
        for plane in planes:
            on = (plane.distance(X) <= self.tol) & accept
            if not on.any():
                continue
            hull = slice_hull(plane, self.K, self.slab)
            idx = np.flatnonzero(on)
            inside = hull.contains(_hull_coords(plane, plane.chart(X[idx])), self.hull_tol)
            accept[idx[~inside]] = False
        return accept

    def __call__(self, X) -> np.ndarray:
        return self.contains(X)


def khat(K, family: PlaneFamily, tol: float = INCIDENCE_TOL, slab: float = INCIDENCE_TOL) -> KHat:
    K = np.asarray(K, dtype=float)
    if K.size and len(family.planes(None)) == 0 and not getattr(family, "exhaustive", False):
        raise ValueError("plane family is empty")
    return KHat(K, family, tol, slab)


def occupancy(kh, grid: np.ndarray) -> np.ndarray:
    """Accepted grid points."""
    grid = np.asarray(grid, dtype=float)
    return grid[kh.contains(grid)]


@dataclass(frozen=True)
class DKBound:
    D_K: float
    diam_K: float
    bound: float
    measured: float | None = None

    @property
    def holds(self) -> bool:
        return self.measured is None or self.measured <= self.bound + 1e-9


def dk_bound(K, family: PlaneFamily, sample_points=None, slab: float = INCIDENCE_TOL,
             measured: float | None = None) -> DKBound:
    """Sampled D_K (max intrinsic diameter of K's plane slices) and the bound 2 D_K + diam K.

    The planes used are ``family.planes(sample_points)``; for families that
    produce the planes through given points, pass the group sample there.
    """
    K = np.asarray(K, dtype=float)
    planes = family.planes(sample_points)
    if len(planes) == 0:
        raise ValueError("empty plane sample")
    DK = 0.0
    for plane in planes:
        DK = max(DK, slice_hull(plane, K, slab).diameter())
    dK = chart_diameter(K)
    return DKBound(DK, dK, 2.0 * DK + dK, measured)


@dataclass
class ShrinkingResult:
    diameters: list = field(default_factory=list)
    sizes: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        d = self.diameters
        return all(b <= a + 1e-12 for a, b in zip(d, d[1:]))


def _is_subset(A: np.ndarray, B: np.ndarray, tol: float = 1e-12) -> bool:
    if len(A) == 0:
        return True
    if len(B) == 0:
        return False
    keys = {tuple(np.round(b / tol).astype(np.int64)) for b in B} if tol > 0 else set(map(tuple, B))
    return all(tuple(np.round(a / tol).astype(np.int64)) in keys for a in A)


def shrinking_check(Ks: Iterable, family: PlaneFamily, grid: np.ndarray,
                    slab: float = INCIDENCE_TOL, check_nested: bool = True) -> ShrinkingResult:
    """Diameters of the sampled K-hat for a nested sequence of point clouds."""
    Ks = [np.asarray(K, dtype=float).reshape(-1, np.asarray(grid).shape[1]) for K in Ks]
    if check_nested:
        for a, b in zip(Ks, Ks[1:]):
            if not _is_subset(b, a, 1e-9):
                raise ValueError("sequence is not nested")
    res = ShrinkingResult()
    for K in Ks:
        pts = occupancy(KHat(K, family, slab=slab), grid)
        res.diameters.append(chart_diameter(pts))
        res.sizes.append(len(pts))
    return res
