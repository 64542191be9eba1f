"""Period matrix of a surface at successive meshes, with and without Richardson extrapolation.

    python3 scripts/omega_convergence.py --spec pillow_g2 --meshes 4 8 16 32
"""
import argparse
import sys

import numpy as np

from flatdimers.hodge import mesh_doubling, period_matrix
from flatdimers.surface import load_surface


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default="pillow_g2")
    p.add_argument("--meshes", type=int, nargs="+", default=[4, 8, 16, 32])
    args = p.parse_args()
    s = load_surface(args.spec)
    d = mesh_doubling(s, tuple(args.meshes))
    print("mesh,entry,re,im,richardson_re,richardson_im,bilinear_residual")
    for m, om in zip(d["meshes"], d["omega"]):
        P = period_matrix(s, m)
        for (i, j), z in np.ndenumerate(om):
            if i <= j:
                r = P.omega[i, j]
                print(f"{m},{i}{j},{z.real:.12f},{z.imag:.12f},{r.real:.12f},{r.imag:.12f},"
                      f"{P.bilinear_residual:.3e}")
    print("# successive-difference ratios:", " ".join(f"{x:.3f}" for x in d["ratios"]), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
