"""JSON run configurations and builders for the objects they describe."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _from(cls, d: dict):
    if not isinstance(d, dict):
        raise ConfigError(f"{cls.__name__}: expected an object, got {type(d).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as e:
        raise ConfigError(f"{cls.__name__}: {e}") from None


@dataclass
class GeodesicConfig:
    manifold: dict
    p0: list
    v0: list
    T: float = 20.0
    t_min: float = 0.0
    step: float = 0.01
    cartesian: bool = False
    energy_tol: float = 1e-8
    closed_form_check: bool = False  # Heisenberg only: compare with the x-family closed form


@dataclass
class EscapeConfig:
    algebra: dict
    radii: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    num_samples: int = 64
    step: float = 0.01
    horizon: float | None = None


@dataclass
class XrayConfig:
    phantom: dict
    mode: str = "sinogram"  # sinogram | single
    plane: dict = field(default_factory=lambda: {"variant": "euclidean", "alpha0": 0.0})
    offsets: dict = field(default_factory=lambda: {"min": -2.0, "max": 2.0, "n": 64})
    n_angles: int = 90
    manifold: dict | None = None
    geodesics: list = field(default_factory=list)  # for mode=single: [{p0, v0, horizon}]
    write_pgm: bool = True


@dataclass
class KhatConfig:
    manifold: dict
    K: dict
    mode: str = "plane-cover"  # plane-cover | paraboloid
    grid: dict | None = None
    slab: float = 1e-6
    rotations: list = field(default_factory=lambda: [1])
    shifts: dict | None = None
    shrinking: list | None = None  # radii of a nested sequence of balls
    check_ball: bool = True


@dataclass
class VerifySection:
    manifold: dict
    phantom: dict
    K: dict
    n_planes: int = 4
    grid: dict | None = None
    settings: dict = field(default_factory=dict)


@dataclass
class DemoConfig:
    f0: str = "odd"
    amplitude: float = 5.0
    samples: int = 100


SECTIONS = {
    "algebra": None,
    "geodesic": GeodesicConfig,
    "escape": EscapeConfig,
    "xray": XrayConfig,
    "khat": KhatConfig,
    "verify": VerifySection,
    "demo-noninjective": DemoConfig,
}


@dataclass
class RunConfig:
    command: str
    section: object
    raw: dict
    sha256: str
    seed: int = 0

    def to_dict(self) -> dict:
        return self.raw


def load_config(path, command: str | None = None) -> RunConfig:
    """Read and validate a config; ``command`` overrides/checks the file's ``command``."""
    try:
        data = Path(path).read_bytes()
    except OSError:
        raise
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e}") from None
    return parse_config(raw, command, hashlib.sha256(data).hexdigest())


def parse_config(raw: dict, command: str | None = None, sha256: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    cmd = command or raw.get("command")
    if cmd not in SECTIONS:
        raise ConfigError(f"unknown command {cmd!r}")
    if command and raw.get("command") not in (None, command):
        raise ConfigError(f"config is for {raw.get('command')!r}, not {command!r}")
    body = raw.get(cmd.replace("-", "_"), {})
    cls = SECTIONS[cmd]
    if cls is None:
        if "algebra" not in raw:
            raise ConfigError("algebra config needs an 'algebra' object")
        section = raw["algebra"]
    else:
        section = _from(cls, body)
    if sha256 is None:
        sha256 = hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return RunConfig(cmd, section, raw, sha256, seed)


# -- builders -------------------------------------------------------------------


def build_algebra(d: dict):
    from .liealg import algebra_from_dict

    try:
        return algebra_from_dict(d)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad algebra description: {e}") from None


def build_manifold(d: dict):
    """('group', LieAlgebra) or ('warped', WarpedMetric)."""
    kind = d.get("kind")
    if kind == "group":
        return "group", build_algebra(d["algebra"])
    if kind == "warped":
        from .warped import WarpedMetric

        try:
            return "warped", WarpedMetric.from_dict(d)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
    raise ConfigError(f"manifold kind must be 'group' or 'warped', got {kind!r}")


def build_phantom(d):
    from .xray import Phantom

    try:
        return Phantom.from_dict(d)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ConfigError(f"bad phantom: {e}") from None


def _lattice(spec: dict, dim: int):
    lo = np.asarray(spec.get("min", [-1.5] * dim), dtype=float)
    hi = np.asarray(spec.get("max", [1.5] * dim), dtype=float)
    n = spec.get("n", 7)
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def build_grid(spec: dict, kind: str, dim: int) -> np.ndarray:
    """Cube lattice for groups; cylindrical (t, r, alpha) lattice for warped manifolds."""
    if kind == "warped":
        from .warped import cylindrical_lattice

        try:
            return cylindrical_lattice(spec.get("t_range", (-1.5, 1.5)), spec.get("r_range", (0.0, 1.5)),
                                       spec.get("n_t", 13), spec.get("n_r", 7), spec.get("n_alpha", 8))
        except TypeError as e:
            raise ConfigError(f"bad grid: {e}") from None
    return _lattice(spec, dim)


def build_K(spec: dict, kind: str, dim: int) -> np.ndarray:
    """Point cloud for K: explicit points, a CSV file, or a shape cut from a lattice."""
    if "points" in spec:
        K = np.asarray(spec["points"], dtype=float)
        return K.reshape(-1, dim)
    if "file" in spec:
        return np.loadtxt(spec["file"], delimiter=",", ndmin=2)
    shape = spec.get("shape", "ball")
    base = build_grid(spec.get("lattice", {}), kind, dim)
    c = np.asarray(spec.get("center", [0.0] * dim), dtype=float)
    if shape == "ball":
        return base[np.linalg.norm(base - c, axis=1) <= spec.get("radius", 1.0) + 1e-9]
    if shape == "box":
        h = np.asarray(spec.get("half_widths", [1.0] * dim), dtype=float)
        return base[np.all(np.abs(base - c) <= h + 1e-9, axis=1)]
    if shape == "ellipsoid":
        ax = np.asarray(spec.get("axes", [1.0] * dim), dtype=float)
        return base[np.sum(((base - c) / ax) ** 2, axis=1) <= 1 + 1e-9]
    raise ConfigError(f"unknown K shape {shape!r}")


def config_summary(cfg: RunConfig) -> dict:
    sec = cfg.section
    return {"command": cfg.command, "sha256": cfg.sha256, "seed": cfg.seed,
            "section": sec if isinstance(sec, dict) else asdict(sec)}
