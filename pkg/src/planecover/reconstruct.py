"""Plane-by-plane inversion and support-theorem verification reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import NonEscaping
from .support import KHat, chart_diameter, slice_hull
from .xray import Phantom, QuadSettings, Sinogram, sinogram_plane, xray_transform


@dataclass(eq=False)
class Image:
    values: np.ndarray  # values[i, j] at (xs[i], ys[j])
    xs: np.ndarray
    ys: np.ndarray

    @property
    def pixel(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])


def _uniform(a: np.ndarray, name: str):
    d = np.diff(a)
    if len(a) < 2 or np.abs(d - d[0]).max() > 1e-9 * max(abs(d[0]), 1e-300):
        raise ValueError(f"{name} grid must be uniform with at least two points")
    return float(d[0])


def ramp_filter(n_pad: int, spacing: float) -> np.ndarray:
    """Frequency response of the band-limited ramp (Ram-Lak), from its sampled kernel."""
    k = np.fft.fftfreq(n_pad, d=1.0 / n_pad).astype(int)
    h = np.zeros(n_pad)
    h[0] = 0.25 / spacing**2
    odd = k % 2 == 1
    h[odd] = -1.0 / (math.pi * k[odd] * spacing) ** 2
    return np.real(np.fft.fft(h)) * spacing


def filtered_backprojection(S: Sinogram, n_pixels: int | None = None, extent: float | None = None) -> Image:
    """Parallel-beam FBP onto a square chart grid; angles must cover [0, pi) uniformly."""
    if S.geometry.get("geometry", "flat") != "flat":
        raise ValueError("filtered backprojection is only defined for flat charts")
    ds = _uniform(S.offsets, "offset")
    _uniform(S.angles, "angle") if len(S.angles) > 1 else None
    n_off, n_ang = S.values.shape
    n_pad = max(64, int(2 ** math.ceil(math.log2(2 * n_off))))
    H = ramp_filter(n_pad, ds)
    padded = np.zeros((n_pad, n_ang))
    padded[:n_off] = S.values
    q = np.real(np.fft.ifft(np.fft.fft(padded, axis=0) * H[:, None], axis=0))[:n_off]
    n_pixels = n_pixels or n_off
    extent = extent if extent is not None else float(max(abs(S.offsets[0]), abs(S.offsets[-1])))
    xs = np.linspace(-extent, extent, n_pixels)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    img = np.zeros_like(X)
    for j, th in enumerate(S.angles):
        s = X * math.cos(th) + Y * math.sin(th)
        img += np.interp(s, S.offsets, q[:, j], left=0.0, right=0.0)
    img *= math.pi / n_ang
    return Image(img, xs, xs.copy())


def write_pgm(path, img: np.ndarray):
    """8-bit binary PGM, rows = second axis so the image reads with y up."""
    a = np.asarray(img, dtype=float).T[::-1]
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros_like(a) if hi <= lo else (a - lo) / (hi - lo)
    data = np.round(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())


# -- verification -------------------------------------------------------------


@dataclass
class VerifyConfig:
    n_offsets: int = 128
    n_angles: int = 180
    extent: float | None = None
    avoid_margin: float = 0.05
    recon_tol: float = 0.05
    quad_factor: float = 10.0
    n_free_geodesics: int = 0
    free_horizon: float = 12.0
    seed: int = 0
    tolerance_scale: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _line_avoids(plane, K, offsets, angles, margin):
    """Mask of chart lines (offset, angle) that stay ``margin`` away from the hull of K's slice.

    A line misses a convex set iff all hull vertices lie strictly on one side;
    using the hull rather than the raw points is conservative for sparse K.
    """
    P, TH = np.meshgrid(offsets, angles, indexing="ij")
    hull = slice_hull(plane, K, margin)
    if hull.empty:
        return np.ones(P.shape, dtype=bool)
    V = hull.vertices
    if plane.geometry == "flat":
        n = np.stack([np.cos(TH), np.sin(TH)], axis=-1).reshape(-1, 2)
        d = V @ n.T - P.reshape(-1)
        ok = (d.min(axis=0) > margin) | (d.max(axis=0) < -margin)
        return ok.reshape(P.shape)
    # Klein -> Poincare disk, then move each line to a diameter and use
    # sinh(signed distance) = 2 <w, e> / (1 - |w|^2)
    k = V[:, 0] + 1j * V[:, 1]
    w = k / (1 + np.sqrt(1 - np.abs(k) ** 2))
    lim = math.sinh(margin)
    out = np.ones(P.shape, dtype=bool)
    for i, p in enumerate(offsets):
        for j, th in enumerate(angles):
            e = complex(math.cos(th), math.sin(th))
            a = math.tanh(p / 2) * e
            w0 = (w - a) / (1 - np.conj(a) * w)
            sd = 2 * (w0 * np.conj(e)).real / (1 - np.abs(w0) ** 2)
            out[i, j] = sd.min() > lim or sd.max() < -lim
    return out


@dataclass
class PlaneCheck:
    label: str
    max_avoiding: float
    n_avoiding: int
    recon_residual: float | None
    phantom_outside_hull: float


@dataclass
class VerificationReport:
    hypothesis_max: float
    hypothesis_threshold: float
    hypothesis_pass: bool
    conclusion_residual: float
    conclusion_threshold: float
    conclusion_pass: bool
    support_in_khat: bool
    khat_size: int
    khat_diameter: float
    planes: list = field(default_factory=list)
    free_geodesics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        if not self.hypothesis_pass:
            return "hypothesis-violated"
        return "pass" if (self.conclusion_pass and self.support_in_khat) else "fail"

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "planes"}
        out["planes"] = [p.__dict__ for p in self.planes]
        out["status"] = self.status
        return out


def support_verification(f: Phantom, K, geometry, config: VerifyConfig | None = None,
                         khat_grid=None, image_dir=None) -> VerificationReport:
    """Run the hypothesis / conclusion checks of the support theorem on a geometry handle.

    ``geometry`` supplies ``planes()`` (the sampled planes), ``family()`` (the
    plane family for K-hat) and optionally ``free_geodesic(rng, horizon)``.
    """
    cfg = config or VerifyConfig()
    K = np.asarray(K, dtype=float).reshape(-1, f.dim)
    amp = f.amplitude_scale
    planes = geometry.planes()
    extent = cfg.extent or geometry.extent(f, K)
    offsets = np.linspace(-extent, extent, cfg.n_offsets)
    angles = np.arange(cfg.n_angles) * (math.pi / cfg.n_angles)

    hyp_max, quad_err, recon_res, outside_max = 0.0, 0.0, 0.0, 0.0
    checks = []
    for k, plane in enumerate(planes):
        S = sinogram_plane(f, plane, offsets, angles)
        quad_err = max(quad_err, S.error)
        avoid = _line_avoids(plane, K, offsets, angles, cfg.avoid_margin)
        m = float(np.abs(S.values[avoid]).max()) if avoid.any() else 0.0
        hyp_max = max(hyp_max, m)
        hull = slice_hull(plane, K, cfg.avoid_margin)
        # exact phantom on the plane outside the hull of K's slice
        g = np.linspace(-extent, extent, 81)
        UV = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        hc = plane.klein(UV) if plane.geometry == "hyperbolic" else UV
        out_mask = ~hull.contains(hc, 1e-9)
        vals = np.abs(f(plane.embed(UV)))
        outside = float(vals[out_mask].max()) if out_mask.any() else 0.0
        outside_max = max(outside_max, outside)
        rr = None
        if plane.geometry == "flat":
            img = filtered_backprojection(S, extent=extent)
            mask = ~_dilated_contains(hull, img.points(), 3 * img.pixel)
            rr = float(np.abs(img.values.ravel()[mask]).max() / max(amp, 1e-300)) if mask.any() else 0.0
            recon_res = max(recon_res, rr)
            if image_dir is not None:
                write_pgm(f"{image_dir}/plane_{k:03d}.pgm", img.values)
        checks.append(PlaneCheck(getattr(plane, "label", str(k)), m, int(avoid.sum()), rr, outside))

    free = {}
    if cfg.n_free_geodesics and hasattr(geometry, "free_geodesic"):
        rng = np.random.default_rng(cfg.seed)
        used = skipped = 0
        fmax = 0.0
        for _ in range(cfg.n_free_geodesics):
            gamma = geometry.free_geodesic(rng, cfg.free_horizon)
            if len(K):
                from scipy.spatial import cKDTree

                dmin = cKDTree(K).query(gamma.points)[0].min()
                if dmin <= cfg.avoid_margin:
                    continue
            try:
                v = xray_transform(f, gamma, QuadSettings(), full_output=True)
            except NonEscaping:
                skipped += 1
                continue
            used += 1
            quad_err = max(quad_err, v.error)
            fmax = max(fmax, abs(v.value))
        hyp_max = max(hyp_max, fmax)
        free = {"used": used, "non_escaping_skipped": skipped, "max_abs": fmax}

    threshold = cfg.quad_factor * max(quad_err, 1e-13 * max(amp, 1.0)) * cfg.tolerance_scale
    hyp_pass = hyp_max <= threshold
    conc_thr = cfg.recon_tol * cfg.tolerance_scale
    conc_res = max(recon_res, outside_max / max(amp, 1e-300))
    conc_pass = conc_res <= conc_thr

    fam = geometry.family()
    kh = KHat(K, fam, slab=cfg.avoid_margin if getattr(fam, "exhaustive", False) is False else 1e-6)
    grid = khat_grid if khat_grid is not None else geometry.grid(K)
    inside = kh.contains(grid)
    supp_pts = grid[f.in_support(grid)]
    supp_ok = bool(kh.contains(supp_pts).all()) if len(supp_pts) else True
    notes = ["thresholds are artifact-level settings (quadrature floor x factor, FBP residual fraction)"]
    if not hyp_pass:
        notes.append("data do not vanish on geodesics avoiding K: conclusion not asserted")
    return VerificationReport(hyp_max, threshold, hyp_pass, conc_res, conc_thr, conc_pass, supp_ok,
                              int(inside.sum()), chart_diameter(grid[inside]), checks, free, notes)


def _dilated_contains(hull, pts, pad):
    """Points within ``pad`` of a flat hull."""
    if hull.empty:
        return np.zeros(len(pts), dtype=bool)
    V = hull.vertices
    if len(V) <= 2:
        from .support import _segment_distance

        a, b = V[0], V[-1]
        return _segment_distance(pts, a, b) <= pad
    return hull.contains(pts, pad)


# -- geometry handles -----------------------------------------------------------


@dataclass(eq=False)
class WarpedGeometry:
    """Warped manifold with sinogram planes E_alpha at ``n_planes`` equally spaced angles.

    K-hat uses the exhaustive family (the plane through each query point), so
    K and the occupancy grid should be sampled on the same alpha lattice.
    """

    metric: object
    n_planes: int = 4
    lattice: dict = field(default_factory=lambda: {"n_t": 25, "n_r": 13, "n_alpha": 8})

    def planes(self):
        from .warped import PlaneChart

        return [PlaneChart(k * math.pi / self.n_planes, self.metric.variant) for k in range(self.n_planes)]

    def family(self):
        from .warped import WarpedPlaneFamily

        return WarpedPlaneFamily(self.metric.variant, None)

    def extent(self, f: Phantom, K) -> float:
        c, R = f.support_ball
        reach = float(np.linalg.norm(c)) + R
        if len(K):
            reach = max(reach, float(np.linalg.norm(K, axis=1).max()))
        return reach + 0.5

    def grid(self, K) -> np.ndarray:
        from .warped import cylindrical_lattice

        D = float(np.linalg.norm(K, axis=1).max()) if len(K) else 1.0
        L = self.lattice
        return cylindrical_lattice((-D - 0.5, D + 0.5), (0.0, D + 0.5), L["n_t"], L["n_r"], L["n_alpha"])

    def free_geodesic(self, rng, horizon: float):
        from .warped import geodesic_integrate

        p0 = (float(rng.uniform(-1, 1)), float(rng.uniform(0.5, 2.5)), float(rng.uniform(0, 2 * math.pi)))
        v0 = rng.normal(size=3)
        return geodesic_integrate(self.metric, p0, v0, horizon, step=0.02, t_min=-horizon, cartesian=True)


@dataclass(eq=False)
class GroupGeometry:
    """Two-step group with the plane cover by translates of F = Exp(span pair)."""

    algebra: object
    pair: tuple
    translations: np.ndarray | None = None
    grid_points: int = 11

    def _family(self, translations):
        from .nilgroup import plane_family

        return plane_family(self.algebra, self.pair, translations)

    def planes(self):
        tr = self.translations if self.translations is not None else np.zeros((1, self.algebra.n))
        return self._family(tr).planes()

    def family(self):
        return self._family(None)

    def extent(self, f: Phantom, K) -> float:
        c, R = f.support_ball
        reach = float(np.linalg.norm(c)) + R
        if len(K):
            reach = max(reach, float(np.linalg.norm(K, axis=1).max()))
        return reach + 0.5

    def grid(self, K) -> np.ndarray:
        lo, hi = K.min(axis=0) - 0.5, K.max(axis=0) + 0.5
        axes = [np.linspace(a, b, self.grid_points) for a, b in zip(lo, hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.algebra.n)

    def free_geodesic(self, rng, horizon: float):
        from .nilgroup import geodesic_flow

        A = self.algebra
        v0 = rng.normal(size=A.n)
        v0 /= A.norm(v0)
        p0 = rng.uniform(-2, 2, size=A.n)
        return geodesic_flow(A, p0, v0, horizon, step=0.02, t_min=-horizon)
