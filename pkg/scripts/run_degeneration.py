"""Conformal-supremum estimates along a degenerating family, written to a run directory."""
import argparse
import math

from steklov_lab import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="cylinder-modulus", choices=ex.FAMILIES)
    ap.add_argument("--grid", type=float, nargs="+", default=[4, 2, 1, 0.5, 0.25, 0.1])
    ap.add_argument("--direction", default="to-zero", choices=["to-zero", "to-infinity"])
    ap.add_argument("--k", type=int, nargs="+", default=[1])
    ap.add_argument("--refine", type=int, default=1)
    ap.add_argument("--out", default="runs/degeneration")
    args = ap.parse_args()
    schedule = ex.DegenerationSchedule(args.family, args.grid, args.direction, k_list=args.k,
                                       refinement=args.refine)
    run = ex.run_degeneration(schedule)
    out = ex.write_run(run, args.out)
    for k in schedule.k_list:
        values = " ".join(f"{v / (2 * math.pi):.4f}" for v in run.values(k))
        print(f"k={k}: estimates / 2 pi = {values}; extrapolated {run.extrapolated[k] / (2 * math.pi):.4f}; "
              f"predicted {run.predicted[k] / (2 * math.pi):.4f}")
    print(f"written to {out}")


if __name__ == "__main__":
    main()
