"""Support verification on the warped euclidean manifold: a passing phantom,
a phantom that leaks outside K, and the status as K grows.
"""

import json

import numpy as np

from planecover.reconstruct import VerifyConfig, WarpedGeometry, support_verification
from planecover.warped import WarpedMetric, cylindrical_lattice
from planecover.xray import Bump, Phantom

LAT = cylindrical_lattice((-1.5, 1.5), (0, 1.5), 13, 7, 8)


def ball(r):
    return LAT[np.linalg.norm(LAT, axis=1) <= r + 1e-9]


def main():
    geo = WarpedGeometry(WarpedMetric("euclidean"), n_planes=2)
    cfg = VerifyConfig(n_offsets=64, n_angles=60)
    inside = Phantom((Bump((0.2, 0.1, 0.0), 0.5),))
    leaky = Phantom(inside.bumps + (Bump((1.0, 0.0, 0.0), 0.3),))
    rows = []
    for name, f in (("inside", inside), ("leaky", leaky)):
        for r in (0.5, 0.75, 1.0, 1.25):
            rep = support_verification(f, ball(r), geo, cfg, khat_grid=LAT)
            rows.append({"phantom": name, "K_radius": r, "status": rep.status,
                         "hypothesis_max": rep.hypothesis_max, "threshold": rep.hypothesis_threshold,
                         "support_in_khat": rep.support_in_khat})
            print(f"{name:7s} r={r:4.2f} {rep.status:20s} max|Xf| off K = {rep.hypothesis_max:.2e}")
    print(json.dumps(rows, indent=1))


if __name__ == "__main__":
    main()
