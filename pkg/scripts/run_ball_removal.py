"""Disc minus a small ball with Neumann on the cut, compared with the disc spectrum."""
import argparse

from steklov_lab import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    ap.add_argument("--k-max", type=int, default=3)
    ap.add_argument("--refine", type=int, default=3)
    ap.add_argument("--variant", default="boundary", choices=["boundary", "interior"])
    ap.add_argument("--out", default="runs/ball-removal")
    args = ap.parse_args()
    run = ex.run_ball_removal(args.grid, args.k_max, args.refine, args.variant)
    out = ex.write_run(run, args.out)
    for k in range(1, args.k_max + 1):
        print(f"k={k}: relative errors " + " ".join(f"{e:.2e}" for e in ex.secondary_values(run, k)))
    print(f"written to {out}")


if __name__ == "__main__":
    main()
