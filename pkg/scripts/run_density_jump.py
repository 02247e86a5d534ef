"""Cylinder with a density that collapses on the bottom circle, against the Steklov-Neumann half."""
import argparse

from steklov_lab import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=float, nargs="+", default=[1.0, 1e-2, 1e-4, 1e-6])
    ap.add_argument("--k-max", type=int, default=3)
    ap.add_argument("--modulus", type=float, default=1.0)
    ap.add_argument("--refine", type=int, default=3)
    ap.add_argument("--out", default="runs/density-jump")
    args = ap.parse_args()
    run = ex.run_density_jump(args.grid, args.k_max, args.modulus, args.refine)
    out = ex.write_run(run, args.out)
    for k in range(1, args.k_max + 1):
        values = " ".join(f"{v:.5f}" for v in run.values(k))
        print(f"k={k}: sigma_k {values} (reference {run.predicted[k]:.5f})")
    for note in run.notes:
        print(note)
    print(f"written to {out}")


if __name__ == "__main__":
    main()
