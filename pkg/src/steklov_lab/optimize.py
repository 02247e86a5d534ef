"""Lower-bound estimates of conformal suprema by ascent over boundary densities.

The variable is the log of the per-vertex boundary weight w = rho^(1/2) on the
Steklov vertices; the interior conformal factor never enters. Each accepted
step increases the true normalized eigenvalue, so the reported value is a
certified value of the discrete problem and a lower bound of the supremum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .fem import BoundaryDensity
from .mesh import BoundaryPartition, SurfaceMesh, all_steklov, partition_boundary, refine
from .spectrum import BoundaryPencil, SpectrumError, cluster_of

__all__ = [
    "BoundViolation",
    "ClusteredEigenvalueError",
    "OptimizerOptions",
    "ConformalSupremumEstimate",
    "eigenvalue_gradient",
    "maximize_normalized_eigenvalue",
    "estimate_mixed_supremum",
    "smooth_random_field",
    "density_basis",
    "bubble_densities",
    "prolong_density",
    "refined_value",
]

log = logging.getLogger(__name__)


class BoundViolation(RuntimeError):
    """A normalized eigenvalue exceeded the topological upper bound."""

    def __init__(self, message, mesh=None, density=None):
        super().__init__(message)
        self.mesh = mesh
        self.density = density


class ClusteredEigenvalueError(SpectrumError):
    pass


@dataclass
class OptimizerOptions:
    max_iters: int = 400
    initial_step: float = 0.1
    min_step: float = 1e-7
    shrink: float = 0.5
    multiplicity_rtol: float = 1e-3
    normalize_length: bool = True
    seed: int = 0
    perturbation: float = 0.05
    ratio_cap: float = 1e4
    stall_window: int = 25
    stall_rtol: float = 1e-7
    extra_modes: int = 4
    edges_per_mode: int = 24
    hull_first: bool = False
    restarts: int = 0
    restart_amplitude: float = 2.0
    audit_bounds: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.ratio_cap <= 1:
            raise ValueError("ratio cap must exceed 1")


@dataclass
class ConformalSupremumEstimate:
    k: int
    value: float
    density: BoundaryDensity
    trace: list = field(default_factory=list)
    converged: bool = False
    uniform_value: float = float("nan")
    cap_hit: bool = False
    fem_corrections: int = 0

    def trace_rows(self):
        """Rows (iter, sigma_bar, step, cluster_size, weight_ratio)."""
        return [tuple(r) for r in self.trace]


def smooth_random_field(mesh: SurfaceMesh, rng: np.random.Generator, n_modes: int = 6,
                        amplitude: float = 1.0) -> np.ndarray:
    """Smooth random function on ``mesh.boundary_vertices`` built loop by loop.

    Each loop gets a random trigonometric polynomial in its normalized
    arclength with coefficients decaying like 1/m.
    """
    loop_id, s = mesh.boundary_loop_coordinates
    out = np.zeros(len(s))
    for li in np.unique(loop_id):
        sel = loop_id == li
        for m in range(1, n_modes + 1):
            a, b = rng.normal(size=2) / m
            out[sel] += a * np.cos(2 * np.pi * m * s[sel]) + b * np.sin(2 * np.pi * m * s[sel])
    scale = np.abs(out).max()
    return amplitude * out / scale if scale > 0 else out


def density_basis(mesh: SurfaceMesh, pencil: BoundaryPencil, edges_per_mode: int = 24) -> np.ndarray:
    """Orthonormal per-loop Fourier basis for log-weights at the Steklov vertices.

    The phase is the vertex position along its loop (not arclength), so on a
    graded mesh the admissible features shrink where the mesh does. A loop
    carrying n Steklov vertices gets the constant plus cos/sin up to order
    max(1, n // edges_per_mode); every feature then spans many edges and the
    discrete eigenvalue stays a faithful proxy for the continuous one.
    """
    pos = np.zeros(len(mesh.boundary_vertices))
    loop_id = np.zeros(len(mesh.boundary_vertices), dtype=int)
    for li, loop in enumerate(mesh.boundary_loops):
        at = np.searchsorted(mesh.boundary_vertices, loop)
        pos[at] = np.arange(len(loop)) / len(loop)
        loop_id[at] = li
    idx = pencil.edges.weight_index
    loop_id, s = loop_id[idx], pos[idx]
    cols = []
    for li in np.unique(loop_id):
        sel = (loop_id == li).astype(float)
        cols.append(sel)
        order = max(1, int(sel.sum()) // edges_per_mode)
        for m in range(1, order + 1):
            cols.append(sel * np.cos(2 * np.pi * m * s))
            cols.append(sel * np.sin(2 * np.pi * m * s))
    Q, R = np.linalg.qr(np.array(cols).T)
    keep = np.abs(np.diag(R)) > 1e-10 * np.abs(np.diag(R)).max()
    return Q[:, keep]


def bubble_densities(mesh: SurfaceMesh, center, widths, floor: float = 1.2e-4) -> list:
    """Cauchy-profile densities w = eps^2 / (s^2 + eps^2) around a boundary point.

    ``s`` is arclength along the boundary loop through the vertex nearest to
    ``center`` (a parameter-plane point); other loops sit at ``floor``. These
    are the boundary traces of a disc's uniform density pushed through a
    concentrating Moebius map, the standard way to realize a disc bubble.
    """
    coords = mesh.dof_coordinates()[mesh.boundary_vertices]
    c = np.asarray(center, dtype=float)
    at = int(np.argmin(np.linalg.norm(coords[:, : len(c)] - c, axis=1)))
    loop_id, s = mesh.boundary_loop_coordinates
    li = loop_id[at]
    on = loop_id == li
    loop_len = float(mesh.boundary_loop_lengths[li])
    d = np.abs(s - s[at]) * loop_len
    d = np.minimum(d, loop_len - d)
    out = []
    for eps in widths:
        w = np.where(on, eps ** 2 / (d ** 2 + eps ** 2), 0.0)
        out.append(BoundaryDensity(np.maximum(w, floor)))
    return out


def _mode_gradients(pencil: BoundaryPencil, w: np.ndarray, spectrum, indices) -> np.ndarray:
    """Rows: d(sigma_j * L)/d(w) for each requested eigenvector j."""
    e = pencil.edges
    L = spectrum.boundary_length
    dL = e.length_gradient()
    rows = []
    for j in indices:
        v = spectrum.eigenvectors[:, j]
        sig = spectrum.eigenvalues[j]
        va, vb = v[e.i], v[e.j]
        f = e.lengths / 12.0
        q = np.zeros(e.size)
        np.add.at(q, e.i, f * (3 * va * va + 2 * va * vb + vb * vb))
        np.add.at(q, e.j, f * (va * va + 2 * va * vb + 3 * vb * vb))
        rows.append(-sig * q * L + sig * dL)
    return np.array(rows)


def eigenvalue_gradient(mesh: SurfaceMesh, partition: Optional[BoundaryPartition], density: BoundaryDensity,
                        k: int, pencil: Optional[BoundaryPencil] = None, rtol: float = 1e-6) -> np.ndarray:
    """Gradient of the normalized k-th eigenvalue w.r.t. the weights at the Steklov vertices.

    Exact for the discrete pencil when sigma_k is simple; a clustered
    eigenvalue is not differentiable and raises.
    """
    pencil = pencil or BoundaryPencil(mesh, partition)
    w = pencil.steklov_weights(density)
    spec = pencil.solve(w, min(k + 3, pencil.size - 1))
    members = cluster_of(spec.eigenvalues, k, rtol)
    if len(members) > 1:
        raise ClusteredEigenvalueError(
            f"sigma_{k} is clustered with indices {members.tolist()}; use subgradient path")
    return _mode_gradients(pencil, w, spec, [k])[0]


def _min_norm_hull(G: np.ndarray) -> np.ndarray:
    """Minimum-norm point of the convex hull of the rows of G (small NNLS)."""
    m = len(G)
    if m == 1:
        return G[0]
    A = np.vstack([G.T, 1e3 * np.ones((1, m))])
    b = np.concatenate([np.zeros(G.shape[1]), [1e3]])
    lam, _ = nnls(A, b)
    lam /= lam.sum()
    return lam @ G


def _bound_for(mesh: SurfaceMesh, partition: BoundaryPartition, k: int) -> Optional[float]:
    if not partition.is_pure_steklov:
        return None
    if len(np.unique(mesh.connected_components)) != 1:
        return None
    return mesh.topology.steklov_upper_bound(k)


class _Auditor:
    """Hard upper-bound check at every iterate.

    The P1 value is a Ritz (upper) approximation of the continuous eigenvalue
    for the same density, so a raw value above the bound is first re-measured
    with one refinement and Richardson extrapolation; only a corrected value
    above the bound is a violation.
    """

    def __init__(self, mesh, partition, pencil, k, bound):
        self.mesh, self.partition, self.pencil, self.k, self.bound = mesh, partition, pencil, k, bound
        self.fine = None
        self.corrections = 0

    def __call__(self, value, x):
        if self.bound is None or value <= self.bound * (1 + 1e-6):
            return
        density = _full_density(self.mesh, self.pencil, np.exp(x))
        if self.fine is None:
            fine_mesh = refine(self.mesh)
            self.fine = (fine_mesh, BoundaryPencil(fine_mesh))
        fine_mesh, fine_pencil = self.fine
        fine_val = fine_pencil.solve(prolong_density(self.mesh, fine_mesh, density), self.k + 2).sigma_bar(self.k)
        corrected = fine_val + (fine_val - value) / 3.0
        self.corrections += 1
        if corrected > self.bound * (1 + 1e-6):
            raise BoundViolation(
                f"sigma_bar_{self.k} = {corrected!r} (mesh value {value!r}) exceeds the topological bound "
                f"{self.bound!r} on {self.mesh.name}", self.mesh, density)


class _Ascent:
    """Projected log-weight ascent for one (mesh, partition, k)."""

    def __init__(self, mesh, partition, k, opts, pencil):
        if k < 1:
            raise SpectrumError("k must be >= 1")
        self.mesh, self.k, self.opts = mesh, k, opts
        self.pencil = pencil or BoundaryPencil(mesh, partition)
        self.count = min(k + 1 + opts.extra_modes, self.pencil.size - 1)
        if k + 1 > self.count:
            raise SpectrumError("requested modes exceed discrete space")
        self.B = density_basis(mesh, self.pencil, opts.edges_per_mode)
        self.log_cap = math.log(opts.ratio_cap)
        self.audit = _Auditor(mesh, partition, self.pencil, k,
                              _bound_for(mesh, partition, k) if opts.audit_bounds else None)
        self.evals = 0

    def evaluate(self, x):
        self.evals += 1
        spec = self.pencil.solve(np.exp(x), self.count)
        f = spec.eigenvalues[self.k] * spec.boundary_length
        self.audit(f, x)
        return f, spec

    def normalize(self, x):
        if self.opts.normalize_length:
            x = x - math.log(self.pencil.length(np.exp(x)))
        return x

    def start_points(self, starts):
        """Log-weight starting points: the perturbed uniform density, random fields, then ``starts``."""
        opts = self.opts
        rng = np.random.default_rng(opts.seed)
        idx = self.pencil.edges.weight_index
        out = []
        if opts.perturbation > 0:
            out.append(self.B @ (self.B.T @ smooth_random_field(self.mesh, rng, amplitude=opts.perturbation)[idx]))
        for _ in range(opts.restarts):
            out.append(self.B @ (self.B.T @ smooth_random_field(self.mesh, rng, amplitude=opts.restart_amplitude)[idx]))
        for d in starts:
            x = np.log(self.pencil.steklov_weights(d))
            if x.max() - x.min() > self.log_cap:
                raise SpectrumError("starting density exceeds the weight-ratio cap")
            out.append(x)
        return [self.normalize(x) for x in out]

    def run(self, x, f, spec):
        opts, B, k = self.opts, self.B, self.k
        history = [f]
        trace = [(0, f, 0.0, 1, float(np.exp(x.max() - x.min())))]
        converged = False
        cap_hit = False
        for it in range(1, opts.max_iters + 1):
            members = cluster_of(spec.eigenvalues, k, opts.multiplicity_rtol)
            w = np.exp(x)
            # chain rule to log-weights, then project onto the admissible directions
            G = (_mode_gradients(self.pencil, w, spec, members) * w) @ B
            if len(members) == 1:
                directions = [G[0]]
            else:
                upper = [p for p, j in enumerate(members) if j >= k]
                hull = _min_norm_hull(G[upper])
                if opts.hull_first:
                    directions = [hull, G.mean(axis=0)] + [G[p] for p in upper]
                else:
                    directions = [G.mean(axis=0), hull] + [G[p] for p in upper]
            accepted = False
            step_used = 0.0
            for dc in directions:
                d = B @ dc
                norm = np.abs(d).max()
                if not norm > 0:
                    continue
                d = d / norm
                s = opts.initial_step
                while s >= opts.min_step:
                    x_try = self.normalize(x + s * d)
                    if x_try.max() - x_try.min() > self.log_cap:
                        cap_hit = True
                        s *= opts.shrink
                        continue
                    f_try, spec_try = self.evaluate(x_try)
                    if f_try > f * (1 + 1e-13):
                        accepted = True
                        break
                    s *= opts.shrink
                if accepted:
                    step_used = s
                    break
            if not accepted:
                converged = True
                break
            x, f, spec = x_try, f_try, spec_try
            history.append(f)
            trace.append((it, f, step_used, len(members), float(np.exp(x.max() - x.min()))))
            if len(history) > opts.stall_window:
                old = history[-1 - opts.stall_window]
                if f - old <= opts.stall_rtol * abs(f):
                    converged = True
                    break
        return x, f, trace, converged and not cap_hit, cap_hit


def _ascent(mesh: SurfaceMesh, partition: BoundaryPartition, k: int, opts: OptimizerOptions,
            pencil: Optional[BoundaryPencil] = None, starts=()) -> ConformalSupremumEstimate:
    asc = _Ascent(mesh, partition, k, opts, pencil)
    x0 = asc.normalize(np.zeros(asc.pencil.size))
    f0, spec0 = asc.evaluate(x0)
    best = (x0, f0, [(0, f0, 0.0, 1, 1.0)], True, False)
    candidates = [(x0, f0, spec0)] if opts.perturbation <= 0 else []
    for x in asc.start_points(starts):
        f, spec = asc.evaluate(x)
        candidates.append((x, f, spec))
    for x, f, spec in candidates:
        res = asc.run(x, f, spec)
        if res[1] > best[1]:
            best = res
    x, f, trace, converged, cap_hit = best
    density = _full_density(mesh, asc.pencil, np.exp(x))
    log.debug("k=%d %s: %.6f after %d evals (converged=%s)", k, mesh.name, f, asc.evals, converged)
    return ConformalSupremumEstimate(k, float(f), density, trace, converged, float(f0), cap_hit,
                                     asc.audit.corrections)


def _full_density(mesh: SurfaceMesh, pencil: BoundaryPencil, w_steklov: np.ndarray) -> BoundaryDensity:
    """Extend Steklov-vertex weights to every boundary vertex (1 on Neumann-only vertices)."""
    w = np.ones(len(mesh.boundary_vertices))
    w[pencil.edges.weight_index] = w_steklov
    return BoundaryDensity(w)


def maximize_normalized_eigenvalue(mesh: SurfaceMesh, partition: Optional[BoundaryPartition] = None, k: int = 1,
                                   opts: Optional[OptimizerOptions] = None,
                                   pencil: Optional[BoundaryPencil] = None, starts=()) -> ConformalSupremumEstimate:
    """Estimate sup of sigma_k * L over boundary densities (a lower bound of the conformal supremum).

    The ascent runs from the uniform density (after the seeded perturbation),
    from ``opts.restarts`` random smooth densities and from every density in
    ``starts``; the best end point wins and is never worse than uniform.
    """
    partition = partition if partition is not None else all_steklov(mesh)
    return _ascent(mesh, partition, k, opts or OptimizerOptions(), pencil, starts)


def estimate_mixed_supremum(mesh: SurfaceMesh, partition: BoundaryPartition, k: int = 1,
                            opts: Optional[OptimizerOptions] = None,
                            pencil: Optional[BoundaryPencil] = None, starts=()) -> ConformalSupremumEstimate:
    """Same ascent for the Steklov-Neumann problem; lengths count the Steklov part only."""
    return _ascent(mesh, partition, k, opts or OptimizerOptions(), pencil, starts)


def prolong_density(coarse: SurfaceMesh, fine: SurfaceMesh, density: BoundaryDensity) -> BoundaryDensity:
    """Carry boundary weights from ``coarse`` to ``refine(coarse)`` by linear interpolation."""
    nv = len(coarse.vertices)
    wd = np.zeros(coarse.n_dofs)
    wd[coarse.boundary_vertices] = density.weights
    d_c = coarse.dof_of_vertex
    d_f = fine.dof_of_vertex
    out = np.zeros(fine.n_dofs)
    out[d_f[:nv]] = wd[d_c]
    e = coarse.edges
    out[d_f[nv:]] = 0.5 * (wd[d_c[e[:, 0]]] + wd[d_c[e[:, 1]]])
    return BoundaryDensity(out[fine.boundary_vertices])


def refined_value(mesh: SurfaceMesh, partition_selector, density: BoundaryDensity, k: int) -> tuple:
    """Normalized sigma_k of ``density`` on ``mesh`` and on one uniform refinement.

    Returns (coarse, fine, richardson) with the O(h^2) extrapolation
    fine + (fine - coarse) / 3. ``partition_selector`` is a boundary selector
    (or None for the pure Steklov problem) so the partition can be rebuilt on
    the finer mesh.
    """
    def part(m):
        return all_steklov(m) if partition_selector is None else partition_boundary(m, partition_selector)

    coarse_val = BoundaryPencil(mesh, part(mesh)).solve(density, k + 2).sigma_bar(k)
    fine = refine(mesh)
    fine_density = prolong_density(mesh, fine, density)
    fine_val = BoundaryPencil(fine, part(fine)).solve(fine_density, k + 2).sigma_bar(k)
    return coarse_val, fine_val, fine_val + (fine_val - coarse_val) / 3.0
