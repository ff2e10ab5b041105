"""Diameters of K-hat for shrinking balls, on the warped manifold and on H + R."""

import numpy as np

from planecover.liealg import find_commuting_pair, heisenberg_plus_r
from planecover.nilgroup import plane_family
from planecover.support import shrinking_check
from planecover.warped import WarpedPlaneFamily, cylindrical_lattice


def main():
    lat = cylindrical_lattice((-1.5, 1.5), (0, 1.5), 25, 13, 8)
    radii = [1.0, 0.5, 0.25, 0.125]
    Ks = [lat[np.linalg.norm(lat, axis=1) <= r + 1e-9] for r in radii]
    for variant in ("euclidean", "hyperbolic"):
        res = shrinking_check(Ks, WarpedPlaneFamily(variant), lat)
        print(variant, dict(zip(radii, np.round(res.diameters, 4).tolist())), "monotone:", res.monotone)
    A = heisenberg_plus_r()
    fam = plane_family(A, find_commuting_pair(A, 1))
    ax = np.linspace(-1, 1, 9)
    G = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), -1).reshape(-1, 4)
    Ks = [G[np.linalg.norm(G, axis=1) <= r + 1e-9] for r in radii]
    res = shrinking_check(Ks, fam, G)
    print("heisenberg+r", dict(zip(radii, np.round(res.diameters, 4).tolist())), "monotone:", res.monotone)


if __name__ == "__main__":
    main()
