"""Command line entry point: ``steklov-lab <subcommand> [options]``.

Options can also come from a JSON or TOML file given with ``--config``;
explicit flags win over the file. Exit codes: 0 success, 1 audit failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io as sio
from .mesh import (MeshError, all_steklov, build_annulus_mesh, build_disc_mesh, build_disc_minus_boundary_ball,
                   build_flat_cylinder_mesh, build_half_disc_mesh, build_moebius_mesh, build_rectangle_mesh,
                   partition_boundary)
from .optimize import BoundViolation, OptimizerOptions, estimate_mixed_supremum, maximize_normalized_eigenvalue
from .spectrum import (BoundaryPencil, CompositionTable, SpectrumError, brute_force_limit, degeneration_limit,
                       mixed_spectrum)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("steklov_lab")

SHAPES = ("disc", "half-disc", "annulus", "rectangle", "cylinder", "moebius", "ball")


class UsageError(Exception):
    pass


def build_problem(shape: str, refinement: int, modulus: float = 1.0, inner: float = 0.3, eps: float = 0.1,
                  width: float = math.pi, height: float = 1.0):
    """(mesh, partition) for a named shape; mixed shapes mark their Neumann part."""
    if shape == "disc":
        mesh = build_disc_mesh(refinement)
        return mesh, all_steklov(mesh)
    if shape == "half-disc":
        mesh = build_half_disc_mesh(refinement)
        return mesh, partition_boundary(mesh, lambda p: p[:, 1] > 1e-9)
    if shape == "annulus":
        mesh = build_annulus_mesh(inner, refinement)
        return mesh, all_steklov(mesh)
    if shape == "rectangle":
        mesh = build_rectangle_mesh(width, height, refinement)
        return mesh, partition_boundary(mesh, lambda p: p[:, 1] > height - 1e-9)
    if shape == "cylinder":
        mesh = build_flat_cylinder_mesh(modulus, refinement)
        return mesh, all_steklov(mesh)
    if shape == "moebius":
        mesh = build_moebius_mesh(modulus, refinement)
        return mesh, all_steklov(mesh)
    if shape == "ball":
        mesh = build_disc_minus_boundary_ball(eps, refinement)
        centre = np.array([1.0, 0.0])
        return mesh, partition_boundary(mesh, lambda p: np.linalg.norm(p - centre, axis=1) > eps)
    raise UsageError(f"unknown shape {shape!r}; choose from {', '.join(SHAPES)}")


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list:
    return [int(v) for v in _floats(text)]


def load_config(path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as err:
        raise UsageError(f"cannot read config {p}: {err}") from None
    try:
        if p.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as err:
        raise UsageError(f"invalid config {p}: {err}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {p} must hold a table of options")
    return {k.replace("-", "_"): v for k, v in data.items()}


COMMAND_DEFAULTS = {
    "degenerate": {"refine": 1},
    "audit": {"refine": 2, "shape": "all"},
}

DEFAULTS = {
    "shape": "disc", "refine": 3, "k": 1, "modulus": 1.0, "inner": 0.3, "eps": 0.1, "seed": 0, "iters": 300,
    "family": "cylinder-modulus", "grid": None, "direction": "to-zero", "k_max": 3, "variant": "boundary",
    "trials": 50, "tables": None, "discs": 0, "out": None, "plots": True,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="steklov-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON or TOML file with option values")
        p.add_argument("--out", help="output file or run directory")
        return p

    def shape_opts(p):
        p.add_argument("--shape", choices=SHAPES)
        p.add_argument("--refine", type=int)
        p.add_argument("--modulus", type=float)
        p.add_argument("--inner", type=float)
        p.add_argument("--eps", type=float)

    p = common(sub.add_parser("mesh", help="build a mesh and write it as OFF"))
    shape_opts(p)
    p = common(sub.add_parser("spectrum", help="eigenvalues at the uniform density"))
    shape_opts(p)
    p.add_argument("--k", type=int, help="highest index to report")
    p = common(sub.add_parser("optimize", help="estimate the conformal supremum of sigma_bar_k"))
    shape_opts(p)
    p.add_argument("--k", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p = common(sub.add_parser("degenerate", help="run a degeneration schedule"))
    p.add_argument("--family", choices=ex.FAMILIES + ("cylinder", "moebius", "collar"))
    p.add_argument("--grid")
    p.add_argument("--direction", choices=("to-zero", "to-infinity"))
    p.add_argument("--k", help="comma separated indices")
    p.add_argument("--refine", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    p = common(sub.add_parser("ball-removal", help="disc minus a small ball, Neumann on the cut"))
    p.add_argument("--grid")
    p.add_argument("--k-max", type=int)
    p.add_argument("--variant", choices=("boundary", "interior"))
    p.add_argument("--refine", type=int)
    p.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    p = common(sub.add_parser("density-jump", help="cylinder with a small weight on one circle"))
    p.add_argument("--grid")
    p.add_argument("--k-max", type=int)
    p.add_argument("--modulus", type=float)
    p.add_argument("--refine", type=int)
    p.add_argument("--no-plots", dest="plots", action="store_const", const=False)
    p = common(sub.add_parser("audit", help="upper-bound audit on random densities"))
    p.add_argument("--shape", help="disc, annulus, cylinder, moebius or all")
    p.add_argument("--trials", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--refine", type=int)
    p = common(sub.add_parser("limits", help="evaluate the degeneration limit on value tables"))
    p.add_argument("--tables", help="JSON file with a list of per-component tables")
    p.add_argument("--k", type=int)
    p.add_argument("--discs", type=int)
    return ap


def _options(ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    opts.update(COMMAND_DEFAULTS.get(ns.command, {}))
    if getattr(ns, "config", None):
        cfg = load_config(ns.config)
        unknown = sorted(set(cfg) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        opts.update(cfg)
    for key, val in vars(ns).items():
        if key in ("config", "command", "verbose") or val is None:
            continue
        opts[key] = val
    return opts


def _emit_csv(rows, header, out):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_mesh(o):
    mesh, part = build_problem(o["shape"], o["refine"], o["modulus"], o["inner"], o["eps"])
    if o["out"]:
        sio.write_off(mesh, o["out"])
    print(f"{mesh.name}: {mesh.n_dofs} dofs, {len(mesh.triangles)} faces, {len(mesh.boundary_vertices)} "
          f"boundary vertices, chi={mesh.euler_characteristic}, max edge {mesh.max_edge_length:.4g}")
    return 0


def cmd_spectrum(o):
    mesh, part = build_problem(o["shape"], o["refine"], o["modulus"], o["inner"], o["eps"])
    spec = mixed_spectrum(mesh, part, count=int(o["k"]))
    if o["out"]:
        Path(o["out"]).parent.mkdir(parents=True, exist_ok=True)
        sio.write_spectrum_csv(spec, o["out"])
    else:
        rows = [(k, repr(float(s)), repr(float(s * spec.boundary_length)), int(c))
                for k, (s, c) in enumerate(zip(spec.eigenvalues, spec.clusters))]
        _emit_csv(rows, ["k", "sigma", "sigma_bar", "cluster_id"], None)
    return 0


def cmd_optimize(o):
    mesh, part = build_problem(o["shape"], o["refine"], o["modulus"], o["inner"], o["eps"])
    opts = OptimizerOptions(max_iters=int(o["iters"]), seed=int(o["seed"]))
    k = int(o["k"])
    if part.is_pure_steklov:
        est = maximize_normalized_eigenvalue(mesh, part, k, opts)
    else:
        est = estimate_mixed_supremum(mesh, part, k, opts)
    print(f"sigma_bar_{k} estimate {est.value:.10g} (uniform {est.uniform_value:.10g}, "
          f"2*pi*k = {2 * math.pi * k:.10g}, converged={est.converged})")
    if o["out"]:
        out = Path(o["out"])
        out.mkdir(parents=True, exist_ok=True)
        sio.write_trace_csv(est.trace, out / "trace.csv")
        sio.write_density(mesh, est.density, out / "density.off-density")
        sio.write_spectrum_csv(BoundaryPencil(mesh, part).solve(est.density, k + 2), out / "spectrum.csv")
        (out / "config.json").write_text(json.dumps({key: o[key] for key in sorted(o)}, indent=2, default=str) + "\n")
    return 0


FAMILY_ALIASES = {"cylinder": "cylinder-modulus", "moebius": "moebius-modulus", "collar": "collar-truncation"}


def cmd_degenerate(o):
    if o["grid"] is None:
        raise UsageError("degenerate needs --grid")
    family = FAMILY_ALIASES.get(o["family"], o["family"])
    schedule = ex.DegenerationSchedule(family, _floats(o["grid"]), o["direction"], _ints(o["k"]), int(o["refine"]),
                                       int(o["seed"]), int(o["iters"]))
    run = ex.run_degeneration(schedule)
    for k in schedule.k_list:
        vals = ", ".join(f"{v / (2 * math.pi):.4f}" for v in run.values(k))
        print(f"k={k}: estimates / 2pi = [{vals}]  predicted limit / 2pi = {run.predicted[k] / (2 * math.pi):.4f}"
              f"  extrapolated / 2pi = {run.extrapolated[k] / (2 * math.pi):.4f}")
    if o["out"]:
        ex.write_run(run, o["out"], plots=bool(o["plots"]))
    return 0


def cmd_ball(o):
    if o["grid"] is None:
        raise UsageError("ball-removal needs --grid")
    run = ex.run_ball_removal(_floats(o["grid"]), int(o["k_max"]), int(o["refine"]), o["variant"])
    for k in range(1, int(o["k_max"]) + 1):
        errs = ", ".join(f"{e:.3e}" for e in ex.secondary_values(run, k))
        print(f"k={k}: relative errors [{errs}]")
    if o["out"]:
        ex.write_run(run, o["out"], plots=bool(o["plots"]))
    return 0


def cmd_jump(o):
    if o["grid"] is None:
        raise UsageError("density-jump needs --grid")
    run = ex.run_density_jump(_floats(o["grid"]), int(o["k_max"]), float(o["modulus"]), int(o["refine"]))
    for k in range(1, int(o["k_max"]) + 1):
        gaps = ", ".join(f"{g:.3e}" for g in ex.secondary_values(run, k))
        print(f"k={k}: reference {run.predicted[k]:.6f}, gaps [{gaps}]")
    for note in run.notes:
        print(note)
    if o["out"]:
        ex.write_run(run, o["out"], plots=bool(o["plots"]))
    return 0


def cmd_audit(o):
    if o["shape"] == "all":
        shapes = ex.AUDIT_SHAPES
    elif o["shape"] in ex.AUDIT_SHAPES:
        shapes = (o["shape"],)
    else:
        raise UsageError(f"audit shape must be one of {', '.join(ex.AUDIT_SHAPES)} or all")
    refine = int(o["refine"])
    bundle = Path(o["out"]) / "violations" if o["out"] else None
    rows = []
    for shape in shapes:
        try:
            rep = ex.run_bound_audit(shape, int(o["trials"]), int(o["k_max"]), int(o["seed"]), refine,
                                     bundle_dir=bundle)
        except BoundViolation as err:
            print(f"AUDIT FAILURE: {err}", file=sys.stderr)
            return 1
        for k in sorted(rep.max_ratio):
            rows.append((shape, k, repr(rep.bounds[k]), repr(rep.max_ratio[k])))
        for key, val in rep.informational.items():
            print(f"{shape}: {key} = {val:.4f} (informational)")
        if rep.fem_corrections:
            print(f"{shape}: {rep.fem_corrections} raw overshoots resolved by the refinement correction")
    _emit_csv(rows, ["shape", "k", "bound", "max_ratio"], Path(o["out"]) / "audit.csv" if o["out"] else None)
    return 0


def cmd_limits(o):
    if o["tables"] is None:
        raise UsageError("limits needs --tables")
    data = load_json_tables(o["tables"])
    table = CompositionTable.from_lists(data, int(o["discs"]))
    k = int(o["k"])
    value = degeneration_limit(table, k)
    check = brute_force_limit(table, k)
    print(f"limit value {value!r} (brute force {check!r})")
    return 0 if value == check else 1


def load_json_tables(path) -> list:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read tables from {path}: {err}") from None
    if isinstance(data, dict):
        data = data.get("tables")
    if not isinstance(data, list) or not all(isinstance(t, list) for t in data):
        raise UsageError("tables must be a list of lists of numbers")
    return data


COMMANDS = {
    "mesh": cmd_mesh, "spectrum": cmd_spectrum, "optimize": cmd_optimize, "degenerate": cmd_degenerate,
    "ball-removal": cmd_ball, "density-jump": cmd_jump, "audit": cmd_audit, "limits": cmd_limits,
}


def main(argv=None) -> int:
    ap = _parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        opts = _options(ns)
        return COMMANDS[ns.command](opts)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (MeshError, SpectrumError, ex.ExperimentError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
