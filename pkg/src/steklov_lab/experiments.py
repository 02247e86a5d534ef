"""End-to-end experiments: degeneration schedules, ball removal, density jumps, bound audits.

Every experiment returns an :class:`ExperimentRun` whose records depend only
on its config (and seed), so serial and pooled runs give identical CSVs.
Grid points are dispatched to a process pool whose size comes from the
``STEKLOV_WORKERS`` environment variable (default: available CPUs).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as sio
from .fem import BoundaryDensity
from .mesh import (CollarChart, SurfaceMesh, all_steklov, build_annulus_mesh, build_collar_mesh,
                   build_disc_mesh, build_disc_minus_boundary_ball, build_flat_cylinder_mesh,
                   build_graded_cylinder_mesh, build_moebius_mesh, partition_boundary)
from .optimize import (BoundViolation, ConformalSupremumEstimate, OptimizerOptions, bubble_densities,
                       estimate_mixed_supremum, maximize_normalized_eigenvalue, refined_value,
                       smooth_random_field)
from .oracle import disc_steklov
from .spectrum import BoundaryPencil, CompositionTable, degeneration_limit, mixed_spectrum

__all__ = [
    "ExperimentError",
    "DegenerationSchedule",
    "StepRecord",
    "ExperimentRun",
    "AuditReport",
    "run_degeneration",
    "estimate_friedlander_nadirashvili",
    "run_ball_removal",
    "run_density_jump",
    "run_bound_audit",
    "richardson_limit",
    "secondary_values",
    "family_mesh",
    "write_run",
    "worker_count",
    "cli_main",
]

log = logging.getLogger(__name__)

FAMILIES = ("cylinder-modulus", "moebius-modulus", "collar-truncation")
COLLAR_FRACTION = 0.8


class ExperimentError(RuntimeError):
    pass


def worker_count() -> int:
    env = os.environ.get("STEKLOV_WORKERS")
    if env:
        n = int(env)
        if n < 1:
            raise ExperimentError("STEKLOV_WORKERS must be >= 1")
        return n
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _map(fn, items, workers: Optional[int] = None):
    """Ordered map over a process pool; falls back to a plain loop for one worker."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# -- degeneration -------------------------------------------------------------


@dataclass
class DegenerationSchedule:
    family: str
    parameter_grid: Sequence[float]
    direction: str = "to-zero"
    k_list: Sequence[int] = (1,)
    refinement: int = 1
    seed: int = 0
    max_iters: int = 300
    edges_per_mode: int = 16

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ExperimentError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.direction not in ("to-zero", "to-infinity"):
            raise ExperimentError("direction must be 'to-zero' or 'to-infinity'")
        grid = [float(p) for p in self.parameter_grid]
        if len(grid) < 4:
            raise ExperimentError("a degeneration grid needs at least 4 points")
        if any(p <= 0 for p in grid):
            raise ExperimentError("grid values must be positive")
        steps = np.diff(grid)
        if self.direction == "to-zero" and not np.all(steps < 0):
            raise ExperimentError("a to-zero grid must be strictly decreasing")
        if self.direction == "to-infinity" and not np.all(steps > 0):
            raise ExperimentError("a to-infinity grid must be strictly increasing")
        if not self.k_list or any(int(k) < 1 for k in self.k_list):
            raise ExperimentError("k_list needs indices >= 1")
        self.parameter_grid = tuple(grid)
        self.k_list = tuple(int(k) for k in self.k_list)

    def limiting_space(self) -> CompositionTable:
        """Every family here degenerates to a single disc bubble with nothing else surviving."""
        return CompositionTable((), disc_count=1)

    def options(self) -> OptimizerOptions:
        return OptimizerOptions(max_iters=self.max_iters, edges_per_mode=self.edges_per_mode, seed=self.seed)


@dataclass
class StepRecord:
    """One (parameter, k) result.

    ``value`` is the optimized normalized eigenvalue for degenerations and the
    raw eigenvalue for ball removal and density jumps. ``secondary`` is the
    uniform-density value, the relative error against the disc, or the gap to
    the Steklov-Neumann reference, respectively.
    """

    parameter: float
    k: int
    value: float
    secondary: float
    converged: bool
    spectrum_file: str = ""
    density_file: str = ""

    @property
    def sigma_bar_estimate(self) -> float:
        return self.value


@dataclass
class ExperimentRun:
    kind: str
    config: dict
    records: list = field(default_factory=list)
    predicted: dict = field(default_factory=dict)
    extrapolated: dict = field(default_factory=dict)
    started: float = 0.0
    finished: float = 0.0
    artifacts: dict = field(default_factory=dict, repr=False)
    notes: list = field(default_factory=list)

    def values(self, k: int) -> np.ndarray:
        return np.array([r.value for r in self.records if r.k == k])

    def parameters(self, k: int) -> np.ndarray:
        return np.array([r.parameter for r in self.records if r.k == k])


def family_mesh(family: str, parameter: float, refinement: int) -> tuple:
    """(mesh, partition, focus point for bubble seeds) for one grid point."""
    if family == "cylinder-modulus":
        mesh = build_graded_cylinder_mesh(parameter, refinement)
        return mesh, all_steklov(mesh), (math.pi, 0.0)
    if family == "moebius-modulus":
        mesh = build_moebius_mesh(parameter, refinement)
        return mesh, all_steklov(mesh), (0.5 * math.pi, -0.5 * parameter)
    if family == "collar-truncation":
        chart = CollarChart.from_geodesic(parameter)
        mesh = build_collar_mesh(chart, COLLAR_FRACTION * chart.width, refinement)
        part = partition_boundary(mesh, lambda p: np.abs(p[:, 1]) < 1e-12)
        return mesh, part, (math.pi, 0.0)
    raise ExperimentError(f"unknown family {family!r}")


def _bubble_widths(family: str, parameter: float) -> list:
    scale = parameter if family != "collar-truncation" else 1.0
    scale = min(scale, 2.0)
    return [0.3 * scale, 0.1 * scale, 0.03 * scale]


def _degeneration_point(args):
    schedule, parameter = args
    mesh, part, focus = family_mesh(schedule.family, parameter, schedule.refinement)
    pencil = BoundaryPencil(mesh, part)
    seeds = bubble_densities(mesh, focus, _bubble_widths(schedule.family, parameter))
    out = []
    for k in schedule.k_list:
        try:
            if part.is_pure_steklov:
                est = maximize_normalized_eigenvalue(mesh, part, k, schedule.options(), pencil, seeds)
            else:
                est = estimate_mixed_supremum(mesh, part, k, schedule.options(), pencil, seeds)
        except BoundViolation as err:
            raise BoundViolation(f"{err} (parameter {parameter!r})", err.mesh, err.density) from None
        spec = pencil.solve(est.density, min(k + 6, pencil.size - 1))
        out.append((k, est, spec))
    return parameter, out


def richardson_limit(parameters: Sequence[float], values: Sequence[float], direction: str = "to-zero") -> float:
    """Extrapolate the last three (parameter, value) pairs to the degenerate end.

    The quadratic through the three points is evaluated at 0 in the variable
    h (to-zero) or 1/h (to-infinity); for geometric grids this is classical
    Richardson extrapolation, and it also handles uneven grids.
    """
    if len(values) < 3:
        raise ExperimentError("Richardson extrapolation needs three points")
    x = np.asarray(parameters[-3:], dtype=float)
    if direction == "to-infinity":
        x = 1.0 / x
    y = np.asarray(values[-3:], dtype=float)
    # Lagrange form at 0
    total = 0.0
    for i in range(3):
        w = 1.0
        for j in range(3):
            if j != i:
                w *= (0.0 - x[j]) / (x[i] - x[j])
        total += w * y[i]
    return float(total)


def run_degeneration(schedule: DegenerationSchedule, workers: Optional[int] = None) -> ExperimentRun:
    """Optimize sigma_bar_k at every grid point and compare with the predicted limit."""
    run = ExperimentRun("degeneration", {"schedule": asdict(schedule)}, started=time.time())
    results = _map(_degeneration_point, [(schedule, p) for p in schedule.parameter_grid], workers)
    for parameter, per_k in results:
        mesh = family_mesh(schedule.family, parameter, schedule.refinement)[0]
        for k, est, spec in per_k:
            tag = f"{schedule.family}-{parameter!r}-k{k}"
            run.records.append(StepRecord(parameter, k, est.value, est.uniform_value, est.converged,
                                          f"spectra/{tag}.csv", f"densities/{tag}.off-density"))
            run.artifacts[tag] = (mesh, est, spec)
    limit_space = schedule.limiting_space()
    for k in schedule.k_list:
        run.predicted[k] = degeneration_limit(limit_space, k)
        run.extrapolated[k] = richardson_limit(run.parameters(k), run.values(k), schedule.direction)
    run.finished = time.time()
    return run


def estimate_friedlander_nadirashvili(schedule: DegenerationSchedule, k: int,
                                      workers: Optional[int] = None) -> dict:
    """Minimum over the modulus grid of the estimated conformal suprema, plus the end trend.

    Estimates are lower bounds of each conformal supremum, so the minimum is
    an estimate of the infimum over classes that can sit slightly low.
    """
    if k not in schedule.k_list:
        schedule = DegenerationSchedule(**{**asdict(schedule), "k_list": (k,)})
    run = run_degeneration(schedule, workers)
    p, v = run.parameters(k), run.values(k)
    i = int(np.argmin(v))
    x = np.log(p[-3:])
    slope = float(np.polyfit(x, v[-3:], 1)[0])
    return {"k": k, "min": float(v[i]), "argmin": float(p[i]), "at_endpoint": i in (0, len(v) - 1),
            "end_slope": slope, "predicted": run.predicted[k], "run": run,
            "caveat": "grid minimum of lower-bound estimates"}


# -- ball removal -------------------------------------------------------------


def _ball_problem(variant: str, eps: float, refinement: int):
    if variant == "boundary":
        mesh = build_disc_minus_boundary_ball(eps, refinement)
        centre = np.array([1.0, 0.0])
        return mesh, partition_boundary(mesh, lambda p: np.linalg.norm(p - centre, axis=1) > eps)
    if variant == "interior":
        mesh = build_annulus_mesh(eps, refinement)
        return mesh, partition_boundary(mesh, lambda p: np.linalg.norm(p, axis=1) > 0.5 * (1 + eps))
    raise ExperimentError(f"unknown ball variant {variant!r}")


def _ball_point(args):
    # meshes hold closures that do not pickle, so workers return spectra only
    variant, eps, refinement, k_max = args
    mesh, part = _ball_problem(variant, eps, refinement)
    return mixed_spectrum(mesh, part, count=k_max)


def run_ball_removal(radius_grid: Sequence[float], k_max: int = 3, refinement: int = 3,
                     variant: str = "boundary", workers: Optional[int] = None) -> ExperimentRun:
    """Disc minus a ball of radius eps (Neumann on the cut) against the disc spectrum."""
    radii = [float(e) for e in radius_grid]
    if any(e <= 0 or e >= 1 for e in radii):
        raise ExperimentError("ball radii must lie in (0, 1)")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ExperimentError("ball radii must be strictly decreasing")
    cfg = {"radius_grid": radii, "k_max": k_max, "refinement": refinement, "variant": variant}
    run = ExperimentRun("ball-removal", cfg, started=time.time())
    if variant not in ("boundary", "interior"):
        raise ExperimentError(f"unknown ball variant {variant!r}")
    spectra = _map(_ball_point, [(variant, e, refinement, k_max) for e in radii], workers)
    for eps, spec in zip(radii, spectra):
        mesh, _ = _ball_problem(variant, eps, refinement)
        for k in range(1, k_max + 1):
            tag = f"ball-{variant}-{eps!r}"
            err = abs(spec.eigenvalues[k] - disc_steklov(k)) / disc_steklov(k)
            run.records.append(StepRecord(eps, k, float(spec.eigenvalues[k]), float(err), True,
                                          f"spectra/{tag}.csv"))
            run.artifacts[tag] = (mesh, None, spec)
    run.predicted = {k: disc_steklov(k) for k in range(1, k_max + 1)}
    run.finished = time.time()
    return run


def secondary_values(run: ExperimentRun, k: int) -> np.ndarray:
    """The ``secondary`` column for index k in grid order (disc errors, jump gaps)."""
    return np.array([r.secondary for r in run.records if r.k == k])


# -- density jump -------------------------------------------------------------


def run_density_jump(delta_grid: Sequence[float], k_max: int = 3, modulus: float = 1.0,
                     refinement: int = 3) -> ExperimentRun:
    """sigma_k of the cylinder with weight 1 on the top circle and delta^(1/2) on the bottom.

    The comparison value is the Steklov-Neumann spectrum of the upper half
    (Steklov on the top circle, Neumann on the cut).
    """
    deltas = [float(d) for d in delta_grid]
    if any(not 0 < d <= 1 for d in deltas):
        raise ExperimentError("deltas must lie in (0, 1]")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ExperimentError("deltas must be strictly decreasing")
    h = float(modulus)
    cfg = {"delta_grid": deltas, "k_max": k_max, "modulus": h, "refinement": refinement}
    run = ExperimentRun("density-jump", cfg, started=time.time())
    mesh = build_flat_cylinder_mesh(h, refinement)
    top = mesh.dof_coordinates()[mesh.boundary_vertices][:, 1] > 0.5 * h
    pencil = BoundaryPencil(mesh)
    half = build_flat_cylinder_mesh(0.5 * h, refinement)
    half_part = partition_boundary(half, lambda p: p[:, 1] > 0.25 * h)
    reference = mixed_spectrum(half, half_part, count=k_max)
    run.predicted = {k: float(reference.eigenvalues[k]) for k in range(1, k_max + 1)}
    for d in deltas:
        if d < 1e-10:
            run.notes.append(f"delta={d!r} refused: boundary mass too ill-conditioned")
            continue
        w = np.where(top, 1.0, math.sqrt(d))
        spec = pencil.solve(BoundaryDensity(w), k_max + 1)
        for k in range(1, k_max + 1):
            run.records.append(StepRecord(d, k, float(spec.eigenvalues[k]),
                                          run.predicted[k] - float(spec.eigenvalues[k]), True,
                                          f"spectra/jump-{d!r}.csv"))
        run.artifacts[f"jump-{d!r}"] = (mesh, BoundaryDensity(w), spec)
    run.finished = time.time()
    return run


# -- bound audit --------------------------------------------------------------


AUDIT_SHAPES = ("disc", "annulus", "cylinder", "moebius")


def audit_mesh(shape: str, refinement: int = 2) -> SurfaceMesh:
    if shape == "disc":
        return build_disc_mesh(refinement)
    if shape == "annulus":
        return build_annulus_mesh(0.3, refinement)
    if shape == "cylinder":
        return build_flat_cylinder_mesh(1.0, refinement)
    if shape == "moebius":
        return build_moebius_mesh(1.0, refinement)
    raise ExperimentError(f"unknown audit shape {shape!r}")


@dataclass
class AuditReport:
    shape: str
    trials: int
    k_max: int
    bounds: dict
    max_ratio: dict
    passed: bool
    informational: dict = field(default_factory=dict)
    fem_corrections: int = 0


def run_bound_audit(shape: str, trials: int = 50, k_max: int = 4, seed: int = 0, refinement: int = 2,
                    amplitude: float = 3.0, bundle_dir: Optional[Path] = None) -> AuditReport:
    """Check the topological upper bound on ``trials`` random smooth densities.

    The discrete value is a Galerkin overestimate, so a raw overshoot is
    re-examined on one uniform refinement with the O(h^2) correction; only a
    corrected value beyond 1e-6 relative counts as a violation. It writes the
    mesh and the offending density to ``bundle_dir`` (when given) and raises
    :class:`BoundViolation`. ``max_ratio`` holds the audited ratios.
    """
    if trials < 1:
        raise ExperimentError("trials must be >= 1")
    mesh = audit_mesh(shape, refinement)
    pencil = BoundaryPencil(mesh)
    rng = np.random.default_rng(seed)
    bounds = {k: mesh.topology.steklov_upper_bound(k) for k in range(1, k_max + 1)}
    worst = {k: 0.0 for k in bounds}
    mb_first = 0.0
    corrections = 0
    for trial in range(trials):
        density = BoundaryDensity(np.exp(smooth_random_field(mesh, rng, amplitude=amplitude)))
        spec = pencil.solve(density, k_max + 1)
        for k in bounds:
            ratio = spec.sigma_bar(k) / bounds[k]
            if ratio > 1 + 1e-6:
                corrections += 1
                ratio = refined_value(mesh, None, density, k)[2] / bounds[k]
                log.info("%s trial %d: raw overshoot on k=%d, corrected ratio %.6f", shape, trial, k, ratio)
            worst[k] = max(worst[k], ratio)
            if ratio > 1 + 1e-6:
                if bundle_dir is not None:
                    bundle = Path(bundle_dir)
                    bundle.mkdir(parents=True, exist_ok=True)
                    sio.write_off(mesh, bundle / f"{shape}.off")
                    sio.write_density(mesh, density, bundle / f"{shape}-trial{trial}.off-density")
                raise BoundViolation(f"{shape}: sigma_bar_{k} / bound = {ratio!r} on trial {trial}",
                                     mesh, density)
        mb_first = max(mb_first, spec.sigma_bar(1))
    info = {}
    if shape == "moebius":
        info["sigma_bar_1_over_2pi_sqrt3"] = mb_first / (2 * math.pi * math.sqrt(3))
    return AuditReport(shape, trials, k_max, bounds, worst, True, info, corrections)


# -- persistence ----------------------------------------------------------------


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _plot(run: ExperimentRun, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "steklov-lab"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in sorted({r.k for r in run.records}):
        ax.plot(run.parameters(k), run.values(k), "o-", label=f"k={k}")
        if k in run.predicted:
            ax.axhline(run.predicted[k], ls="--", lw=0.8, color="grey")
    if run.kind in ("degeneration", "density-jump", "ball-removal"):
        ax.set_xscale("log")
    ax.set_xlabel("parameter")
    ax.set_ylabel("value")
    ax.set_title(run.kind)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_run(run: ExperimentRun, out_dir, plots: bool = True) -> Path:
    """Persist a run: config.json, report.csv, spectra/, densities/, plots/."""
    out = Path(out_dir)
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    (out / "densities").mkdir(exist_ok=True)
    (out / "config.json").write_text(json.dumps(run.config, indent=2, sort_keys=True, default=_json_default) + "\n")
    for tag, (mesh, est, spec) in sorted(run.artifacts.items()):
        sio.write_spectrum_csv(spec, out / "spectra" / f"{tag}.csv")
        density = est.density if isinstance(est, ConformalSupremumEstimate) else est
        if density is not None:
            sio.write_density(mesh, density, out / "densities" / f"{tag}.off-density")
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "k", "value", "secondary", "converged", "predicted", "extrapolated"])
        for r in run.records:
            w.writerow([repr(r.parameter), r.k, repr(float(r.value)), repr(float(r.secondary)),
                        int(r.converged), repr(float(run.predicted.get(r.k, float("nan")))),
                        repr(float(run.extrapolated.get(r.k, float("nan"))))])
    meta = {"kind": run.kind, "started": run.started, "finished": run.finished, "notes": run.notes}
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n")
    if plots:
        (out / "plots").mkdir(exist_ok=True)
        _plot(run, out / "plots" / f"{run.kind}.svg")
    return out


def cli_main(argv=None) -> int:
    from .cli import main

    return main(argv)
