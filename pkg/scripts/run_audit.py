"""Upper-bound audit on random smooth densities for every audit shape."""
import argparse
import sys

from steklov_lab import experiments as ex
from steklov_lab.optimize import BoundViolation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--k-max", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--refine", type=int, default=2)
    ap.add_argument("--bundle", default="runs/audit-violations")
    args = ap.parse_args()
    for shape in ex.AUDIT_SHAPES:
        try:
            rep = ex.run_bound_audit(shape, args.trials, args.k_max, args.seed, args.refine,
                                     bundle_dir=args.bundle)
        except BoundViolation as err:
            print(f"AUDIT FAILURE: {err}", file=sys.stderr)
            return 1
        ratios = ", ".join(f"k={k} {r:.4f}" for k, r in sorted(rep.max_ratio.items()))
        print(f"{shape}: max ratio {ratios}; refinement corrections {rep.fem_corrections}")
        for key, val in rep.informational.items():
            print(f"{shape}: {key} = {val:.4f} (informational)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
