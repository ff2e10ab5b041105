"""Command-line front door: ``planecover <command> --config run.json --out DIR``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .nilgroup import HorizonExceeded
from .paths import NonEscaping
from .config import (ConfigError, build_algebra, build_grid, build_K, build_manifold, build_phantom,
                     config_summary, load_config)

log = logging.getLogger("planecover")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("algebra", "geodesic", "escape", "xray", "khat", "verify", "demo-noninjective")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


class Artifacts:
    """Serialized writer into the output directory; keeps a list for the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name: str, obj):
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def csv(self, name: str, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])

    def manifest(self, cfg, args, status: str):
        entries = []
        for name in self.files:
            p = self.out / name
            entries.append({"file": name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        self.json("manifest.json", {
            "tool": "planecover", "version": __version__, "command": cfg.command,
            "config_sha256": cfg.sha256, "config": cfg.raw, "seed": args.seed if args.seed is not None else cfg.seed,
            "threads": args.threads, "tolerance_scale": args.tolerance_scale, "status": status,
            "artifacts": entries,
        })


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# -- commands -------------------------------------------------------------------


def cmd_algebra(cfg, args, art: Artifacts):
    from .liealg import summary

    A = build_algebra(cfg.section)
    s = summary(A)
    s["algebra"] = A.to_dict()
    art.json("algebra.json", s)
    ok = s["jacobi_residual"] <= 1e-12 * args.tolerance_scale
    if s.get("dimension_condition") is not None:
        ok &= bool(s["plane_certified"])
    return ok, {"series_dims": s.get("series_dims"), "dimension_condition": s.get("dimension_condition")}


def cmd_geodesic(cfg, args, art: Artifacts):
    sec = cfg.section
    kind, obj = build_manifold(sec.manifold)
    if kind == "group":
        from .nilgroup import geodesic_flow, heisenberg_geodesic

        gamma = geodesic_flow(obj, sec.p0, sec.v0, sec.T, sec.step, sec.t_min, sec.energy_tol)
        E = gamma.extra["energy"]
        n = obj.n
        art.csv("trace.csv", ["t", *(f"p{i + 1}" for i in range(n)), *(f"v{i + 1}" for i in range(n)), "energy"],
                ([t, *p, *v, e] for t, p, v, e in zip(gamma.times, gamma.points, gamma.extra["body_velocity"], E)))
        report = {"energy_drift": gamma.extra["energy_drift"], "step": gamma.extra["step"]}
        if sec.closed_form_check:
            p0 = np.asarray(sec.p0, dtype=float)
            ref = heisenberg_geodesic(p0[0], 0.0, p0[2])
            report["closed_form_sup_error"] = float(np.abs(gamma.points - ref.position(gamma.times)).max())
    else:
        from .warped import geodesic_integrate, write_trace

        gamma = geodesic_integrate(obj, sec.p0, sec.v0, sec.T, sec.step, sec.t_min, sec.cartesian, sec.energy_tol)
        write_trace(art.path("trace.csv"), gamma)
        report = {"energy_drift": gamma.extra["energy_drift"], "step": gamma.extra["step"],
                  "charts_used": sorted(set(gamma.extra["charts"]))}
    art.json("geodesic.json", report)
    ok = report["energy_drift"] <= sec.energy_tol * args.tolerance_scale
    if "closed_form_sup_error" in report:
        ok &= report["closed_form_sup_error"] <= 1e-6 * args.tolerance_scale
    return ok, report


def cmd_escape(cfg, args, art: Artifacts):
    from .nilgroup import escape_profile

    sec = cfg.section
    A = build_algebra(sec.algebra)
    rows, maxima = [], []
    for r in sec.radii:
        prof = escape_profile(A, float(r), sec.num_samples, sec.step, sec.horizon, threads=args.threads)
        maxima.append(prof.max_exit_time)
        for d, t in zip(prof.directions, prof.exit_times):
            rows.append([float(r), *d, float(t)])
    art.csv("escape.csv", ["r", *(f"d{i + 1}" for i in range(A.n)), "exit_time"], rows)
    finite = all(math.isfinite(m) for m in maxima)
    monotone = all(b >= a for a, b in zip(maxima, maxima[1:]))
    rep = {"radii": sec.radii, "max_exit_time": maxima, "all_exit": finite, "monotone": monotone}
    art.json("escape.json", rep)
    return finite and monotone, rep


def cmd_xray(cfg, args, art: Artifacts):
    from .reconstruct import filtered_backprojection, write_pgm
    from .warped import PlaneChart
    from .xray import sinogram_plane, xray_transform

    sec = cfg.section
    f = build_phantom(sec.phantom)
    if sec.mode == "sinogram":
        plane = PlaneChart(float(sec.plane.get("alpha0", 0.0)), sec.plane.get("variant", "euclidean"))
        o = sec.offsets
        offsets = np.linspace(o["min"], o["max"], int(o["n"]))
        angles = np.arange(sec.n_angles) * (math.pi / sec.n_angles)
        S = sinogram_plane(f, plane, offsets, angles)
        art.csv("sinogram.csv", [f"a{j}" for j in range(len(angles))], S.values.tolist())
        art.json("sinogram.json", S.header())
        rep = {"max_abs": float(np.abs(S.values).max()), "error_estimate": S.error}
        if sec.write_pgm:
            write_pgm(art.path("sinogram.pgm"), S.values)
            if plane.geometry == "flat":
                img = filtered_backprojection(S)
                write_pgm(art.path("reconstruction.pgm"), img.values)
        return bool(np.all(np.isfinite(S.values))), rep
    if sec.mode != "single":
        raise ConfigError(f"unknown xray mode {sec.mode!r}")
    if sec.manifold is None:
        raise ConfigError("xray single mode needs a manifold")
    kind, obj = build_manifold(sec.manifold)
    rows = []
    for g in sec.geodesics:
        h = float(g.get("horizon", 10.0))
        if kind == "group":
            from .nilgroup import geodesic_flow

            gamma = geodesic_flow(obj, g["p0"], g["v0"], h, t_min=-h)
        else:
            from .warped import geodesic_integrate

            gamma = geodesic_integrate(obj, g["p0"], g["v0"], h, t_min=-h, cartesian=g.get("cartesian", False))
        v = xray_transform(f, gamma, full_output=True)
        rows.append([v.value, v.error])
    art.csv("xray.csv", ["value", "error_estimate"], rows)
    return True, {"count": len(rows)}


def cmd_khat(cfg, args, art: Artifacts):
    from .support import KHat, chart_diameter, dk_bound, shrinking_check

    sec = cfg.section
    kind, obj = build_manifold(sec.manifold)
    dim = 3 if kind == "warped" else obj.n
    K = build_K(sec.K, kind, dim)
    grid = build_grid(sec.grid or sec.K.get("lattice", {}), kind, dim)
    rep = {"K_size": int(len(K))}
    ok = True
    if sec.mode == "paraboloid":
        from .nilgroup import paraboloid_khat, shift_lattice

        sh = shift_lattice(K, **(sec.shifts or {}))
        prev = None
        rep["frames"] = []
        detail = []
        for rot in sec.rotations:
            P = paraboloid_khat(K, int(rot), sh)
            acc = P.contains(grid)
            contains_K = bool(P.contains(K).all())
            full = P.summary()
            detail.append({"rotations": int(rot), **full})
            entry = {"rotations": int(rot), "accepted": int(acc.sum()), "contains_K": contains_K,
                     "frame_count": full["frame_count"], "bounding_box": full["bounding_box"]}
            if prev is not None:
                entry["subset_of_previous"] = bool(not np.any(acc & ~prev))
                ok &= entry["subset_of_previous"]
            ok &= contains_K
            prev = acc
            rep["frames"].append(entry)
        art.json("frames.json", detail)
        art.csv("occupancy.csv", [f"x{i + 1}" for i in range(dim)], grid[prev].tolist())
    else:
        if kind == "warped":
            from .warped import WarpedPlaneFamily, check_ball, origin_radius

            fam = WarpedPlaneFamily(obj.variant, None)
        else:
            from .liealg import dimension_condition, find_commuting_pair
            from .nilgroup import plane_family

            i = dimension_condition(obj)
            if i is None:
                raise ConfigError("algebra fails the dimension condition: no plane cover")
            fam = plane_family(obj, find_commuting_pair(obj, i), None)
        kh = KHat(K, fam, slab=sec.slab)
        acc = kh.contains(grid)
        pts = grid[acc]
        rep.update(accepted=int(acc.sum()), diameter=chart_diameter(pts))
        art.csv("occupancy.csv", [f"x{i + 1}" for i in range(dim)], pts.tolist())
        if kind == "warped":
            D = origin_radius(K)
            inside, rmax = check_ball(kh, grid, D)
            rep.update(D=D, max_radius=rmax, in_ball=inside)
            if sec.check_ball and obj.variant == "euclidean":
                ok &= inside
        else:
            b = dk_bound(K, fam, grid[acc] if acc.any() else K, sec.slab, rep["diameter"])
            rep.update(D_K=b.D_K, diam_K=b.diam_K, bound=b.bound, bound_holds=b.holds)
            ok &= b.holds
        if sec.shrinking:
            c = np.asarray(sec.K.get("center", [0.0] * dim), dtype=float)
            Ks = [grid[np.linalg.norm(grid - c, axis=1) <= r + 1e-9] for r in sec.shrinking]
            sr = shrinking_check(Ks, fam, grid, sec.slab)
            rep.update(shrinking_radii=sec.shrinking, shrinking_diameters=sr.diameters, shrinking_monotone=sr.monotone)
            ok &= sr.monotone
    art.json("khat.json", rep)
    return ok, rep


def cmd_verify(cfg, args, art: Artifacts):
    from .reconstruct import GroupGeometry, VerifyConfig, WarpedGeometry, support_verification

    sec = cfg.section
    kind, obj = build_manifold(sec.manifold)
    dim = 3 if kind == "warped" else obj.n
    f = build_phantom(sec.phantom)
    K = build_K(sec.K, kind, dim)
    grid_spec = sec.grid or sec.K.get("lattice", {})
    grid = build_grid(grid_spec, kind, dim)
    settings = dict(sec.settings)
    settings.setdefault("seed", args.seed if args.seed is not None else cfg.seed)
    settings["tolerance_scale"] = args.tolerance_scale
    vc = VerifyConfig.from_dict(settings)
    if kind == "warped":
        geo = WarpedGeometry(obj, sec.n_planes)
    else:
        from .liealg import dimension_condition, find_commuting_pair

        i = dimension_condition(obj)
        if i is None:
            raise ConfigError("algebra fails the dimension condition: no plane cover")
        geo = GroupGeometry(obj, find_commuting_pair(obj, i))
    img_dir = art.out / "planes"
    img_dir.mkdir(exist_ok=True)
    rep = support_verification(f, K, geo, vc, khat_grid=grid, image_dir=img_dir)
    for p in sorted(img_dir.iterdir()):
        art.files.append(f"planes/{p.name}")
    d = rep.to_dict()
    art.json("report.json", d)
    return d["status"] == "pass", {"status": d["status"]}


def cmd_demo(cfg, args, art: Artifacts):
    from .xray import even_bump, odd_bump, product_sphere_demo

    sec = cfg.section
    base = {"odd": odd_bump, "even": even_bump}.get(sec.f0)
    if base is None:
        raise ConfigError(f"f0 must be 'odd' or 'even', got {sec.f0!r}")
    f0 = lambda u: base(u, sec.amplitude)  # noqa: E731
    seed = args.seed if args.seed is not None else cfg.seed
    d = product_sphere_demo(f0, sec.samples, seed)
    art.csv("demo.csv", ["x0", "a", "xray"], [[*p, v] for p, v in zip(d.params, d.values)])
    rep = {"max_abs_xray": d.max_abs_xray, "max_abs_f": d.max_abs_f, "samples": sec.samples, "f0": sec.f0}
    art.json("demo.json", rep)
    ok = True
    if sec.f0 == "odd":
        ok = d.max_abs_xray <= 1e-8 * args.tolerance_scale and d.max_abs_f > 0
    return ok, rep


HANDLERS = {
    "algebra": cmd_algebra, "geodesic": cmd_geodesic, "escape": cmd_escape, "xray": cmd_xray,
    "khat": cmd_khat, "verify": cmd_verify, "demo-noninjective": cmd_demo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="planecover", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--tolerance-scale", type=float, default=1.0)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1 or not args.tolerance_scale > 0:
        log.error("--threads must be >= 1 and --tolerance-scale > 0")
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except OSError as e:
        log.error("cannot read config: %s", e)
        return EXIT_IO
    try:
        art = Artifacts(Path(args.out))
        ok, summary = HANDLERS[args.command](cfg, args, art)
        art.json("config.json", config_summary(cfg))
        art.manifest(cfg, args, "ok" if ok else "check-failed")
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except OSError as e:
        log.error("I/O error: %s", e)
        return EXIT_IO
    except (NonEscaping, HorizonExceeded, FloatingPointError) as e:
        log.error("numerical failure: %s", e)
        return EXIT_CHECK
    except (ValueError, KeyError, TypeError) as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    print(json.dumps({"command": args.command, "ok": bool(ok), **summary}, sort_keys=True, default=_jsonable))
    return EXIT_OK if ok else EXIT_CHECK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
