"""Maximize the normalized sigma_k on the unit disc and compare with 2 pi k."""
import argparse
import math
import time

from steklov_lab.mesh import build_disc_mesh
from steklov_lab.optimize import maximize_normalized_eigenvalue, refined_value


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--refine", type=int, default=5)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2])
    args = ap.parse_args()
    mesh = build_disc_mesh(args.refine)
    for k in args.k:
        t0 = time.perf_counter()
        est = maximize_normalized_eigenvalue(mesh, k=k)
        coarse, fine, corrected = refined_value(mesh, None, est.density, k)
        target = 2 * math.pi * k
        print(f"k={k}: raw {est.value / target:.5f}, refined {fine / target:.5f}, "
              f"corrected {corrected / target:.5f} of 2 pi k ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
