"""Steklov and Steklov-Neumann spectra, normalization, and composition laws.

A :class:`BoundaryPencil` caches everything that does not depend on the
boundary density (stiffness, Schur complement, edge bookkeeping), so repeated
solves for new densities cost one small dense generalized eigenproblem.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .fem import (BoundaryDensity, DtNOperator, SteklovEdges, assemble_stiffness, boundary_mass_dense,
                  generalized_eigh, maybe_dump, schur_dtn)
from .mesh import BoundaryPartition, MeshError, SurfaceMesh, all_steklov

__all__ = [
    "SpectrumError",
    "SteklovSpectrum",
    "MixedSpectrum",
    "BoundaryPencil",
    "CompositionTable",
    "steklov_spectrum",
    "mixed_spectrum",
    "cluster_ids",
    "normalized_value",
    "combine_disjoint",
    "degeneration_limit",
    "brute_force_disjoint",
    "brute_force_limit",
    "DISC_VALUE",
]

CLUSTER_RTOL = 1e-6


class SpectrumError(MeshError):
    pass


def cluster_ids(values: np.ndarray, rtol: float = CLUSTER_RTOL) -> np.ndarray:
    """Consecutive eigenvalues within ``rtol`` (relative) share a cluster id."""
    values = np.asarray(values, dtype=float)
    if not len(values):
        return np.zeros(0, dtype=int)
    scale = max(np.abs(values).max(), 1e-300)
    ids = np.zeros(len(values), dtype=int)
    for i in range(1, len(values)):
        a, b = values[i - 1], values[i]
        tol = rtol * max(abs(a), abs(b), 1e-9 * scale)
        ids[i] = ids[i - 1] + (0 if b - a <= tol else 1)
    return ids


def cluster_of(values: np.ndarray, k: int, rtol: float) -> np.ndarray:
    """Indices of the cluster that contains index k."""
    ids = cluster_ids(values, rtol)
    return np.flatnonzero(ids == ids[k])


@dataclass(frozen=True, eq=False)
class SteklovSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    boundary_length: float
    steklov_vertices: np.ndarray
    mass: np.ndarray = field(repr=False)

    @property
    def normalized(self) -> np.ndarray:
        return self.eigenvalues * self.boundary_length

    @property
    def clusters(self) -> np.ndarray:
        return cluster_ids(self.eigenvalues)

    def sigma_bar(self, k: int) -> float:
        return float(self.eigenvalues[k] * self.boundary_length)


@dataclass(frozen=True, eq=False)
class MixedSpectrum(SteklovSpectrum):
    """Spectrum of a Steklov-Neumann problem; lengths refer to the Steklov part only."""

    @property
    def steklov_length(self) -> float:
        return self.boundary_length


class BoundaryPencil:
    """The pencil (DtN, M(w)) for one mesh and boundary partition."""

    def __init__(self, mesh: SurfaceMesh, partition: Optional[BoundaryPartition] = None,
                 dense_limit: int = 2000):
        self.mesh = mesh
        self.partition = partition if partition is not None else all_steklov(mesh)
        self.stiffness = assemble_stiffness(mesh)
        self.dtn: DtNOperator = schur_dtn(self.stiffness, self.partition, mesh)
        self.edges = SteklovEdges.from_partition(mesh, self.partition)
        self.dense_limit = dense_limit
        maybe_dump(f"{mesh.name}-stiffness", self.stiffness)
        maybe_dump(f"{mesh.name}-dtn", self.dtn.matrix)

    @property
    def size(self) -> int:
        return self.edges.size

    def steklov_weights(self, density) -> np.ndarray:
        """Weights at the Steklov vertices from a density (or pass-through array)."""
        if isinstance(density, BoundaryDensity):
            if len(density.weights) != len(self.mesh.boundary_vertices):
                raise SpectrumError("density does not match the mesh boundary")
            return density.weights[self.edges.weight_index]
        w = np.asarray(density, dtype=float)
        if w.shape != (self.size,):
            raise SpectrumError("weights must have one entry per Steklov vertex")
        return w

    def mass(self, w: np.ndarray) -> np.ndarray:
        return boundary_mass_dense(self.edges, w)

    def length(self, w: np.ndarray) -> float:
        e = self.edges
        return float(np.sum(e.lengths * 0.5 * (w[e.i] + w[e.j])))

    def solve(self, density, count: int, spectrum_type=SteklovSpectrum) -> SteklovSpectrum:
        """Lowest ``count`` eigenpairs of DtN v = sigma M(w) v."""
        w = self.steklov_weights(density)
        if np.any(w <= 0):
            raise SpectrumError("density must be positive on the Steklov boundary")
        if count >= self.size:
            raise SpectrumError("requested modes exceed discrete space")
        M = self.mass(w)
        vals, vecs = generalized_eigh(self.dtn.matrix, M, count, self.dense_limit)
        return spectrum_type(vals, vecs, self.length(w), self.edges.steklov_vertices, M)

    def extend(self, spectrum: SteklovSpectrum, index: int) -> np.ndarray:
        """Harmonic extension of eigenvector ``index`` to all dofs."""
        return self.dtn.harmonic_extension(spectrum.eigenvectors[:, index], self.stiffness)


def steklov_spectrum(mesh: SurfaceMesh, density: Optional[BoundaryDensity] = None, count: int = 6,
                     pencil: Optional[BoundaryPencil] = None) -> SteklovSpectrum:
    """First ``count + 1`` Steklov eigenpairs (sigma_0 .. sigma_count)."""
    pencil = pencil or BoundaryPencil(mesh)
    density = density if density is not None else BoundaryDensity.uniform(mesh)
    return pencil.solve(density, count + 1)


def mixed_spectrum(mesh: SurfaceMesh, partition: BoundaryPartition, density: Optional[BoundaryDensity] = None,
                   count: int = 6, pencil: Optional[BoundaryPencil] = None) -> MixedSpectrum:
    """First ``count + 1`` Steklov-Neumann eigenpairs; Neumann vertices join the interior block."""
    pencil = pencil or BoundaryPencil(mesh, partition)
    density = density if density is not None else BoundaryDensity.uniform(mesh)
    return pencil.solve(density, count + 1, MixedSpectrum)


def normalized_value(sigma: float, length: float) -> float:
    if not length > 0:
        raise SpectrumError("boundary length must be positive")
    return sigma * length


# -- composition laws ----------------------------------------------------------


def DISC_VALUE(r: int) -> float:
    """Conformal supremum of the r-th normalized eigenvalue of the disc, 2*pi*r."""
    return 2 * math.pi * r


@dataclass(frozen=True)
class CompositionTable:
    """Per-component value tables V_i[k] (V_i[0] = 0) plus the number of disc bubbles."""

    component_tables: tuple
    disc_count: int = 0

    def __post_init__(self):
        tables = tuple(tuple(float(v) for v in t) for t in self.component_tables)
        for t in tables:
            if not t or t[0] != 0.0:
                raise SpectrumError("each table must start with V[0] = 0")
            if any(b < a for a, b in zip(t, t[1:])):
                raise SpectrumError("tables must be non-decreasing")
        if self.disc_count < 0:
            raise SpectrumError("disc count must be non-negative")
        object.__setattr__(self, "component_tables", tables)

    @classmethod
    def from_lists(cls, tables: Sequence[Sequence[float]], disc_count: int = 0) -> "CompositionTable":
        return cls(tuple(tuple(t) for t in tables), disc_count)


def _best_assignment(tables: Sequence[Sequence[float]], k: int):
    """Exact max of sum_i tables[i][k_i] over sum_i k_i = k (k_i within table range).

    Dynamic programming over components with rational arithmetic, so the
    result is the correctly rounded maximum regardless of summation order.
    Returns None when no assignment exists.
    """
    best = {0: (Fraction(0), ())}
    for t in tables:
        vals = [Fraction(v) for v in t]
        nxt: dict = {}
        for used, (acc, parts) in best.items():
            for idx in range(0, min(len(vals) - 1, k - used) + 1):
                key = used + idx
                cand = acc + vals[idx]
                if key not in nxt or cand > nxt[key][0]:
                    nxt[key] = (cand, parts + (idx,))
        best = nxt
    return best.get(k)


def combine_disjoint(tables: CompositionTable, k: int) -> float:
    """Best split of index k across components of a disjoint union.

    Every part is a positive index on a chosen subset of components; leaving a
    component out is the same as giving it index 0 since V[0] = 0.
    """
    if k < 1:
        raise SpectrumError("k must be >= 1")
    if not tables.component_tables:
        raise SpectrumError("at least one component is required")
    res = _best_assignment(tables.component_tables, k)
    if res is None:
        raise SpectrumError(f"k={k} exceeds the indices available in the tables")
    return float(res[0])


def degeneration_limit(tables: CompositionTable, k: int) -> float:
    """Limit of the conformal supremum along a degenerating sequence.

    Surviving components contribute V_i[k_i]; each of the ``disc_count``
    collapsed collars contributes a disc bubble 2*pi*r_i; indices sum to k.
    """
    if k < 1:
        raise SpectrumError("k must be >= 1")
    discs = [[DISC_VALUE(r) for r in range(k + 1)]] * tables.disc_count
    all_tables = list(tables.component_tables) + discs
    if not all_tables:
        raise SpectrumError("need at least one component or disc")
    res = _best_assignment(all_tables, k)
    if res is None:
        raise SpectrumError(f"k={k} exceeds the indices available in the tables")
    return float(res[0])


def _enumerate(tables, k):
    ranges = [range(len(t)) for t in tables]
    for combo in itertools.product(*ranges):
        if sum(combo) == k:
            yield combo


def brute_force_disjoint(tables: CompositionTable, k: int) -> float:
    """Enumeration cross-check for :func:`combine_disjoint`."""
    best = None
    for combo in _enumerate(tables.component_tables, k):
        if not any(combo):
            continue
        v = math.fsum(t[i] for t, i in zip(tables.component_tables, combo))
        best = v if best is None else max(best, v)
    if best is None:
        raise SpectrumError(f"k={k} exceeds the indices available in the tables")
    return best


def brute_force_limit(tables: CompositionTable, k: int) -> float:
    """Enumeration cross-check for :func:`degeneration_limit`."""
    discs = [[DISC_VALUE(r) for r in range(k + 1)]] * tables.disc_count
    all_tables = list(tables.component_tables) + discs
    best = None
    for combo in _enumerate(all_tables, k):
        v = math.fsum(t[i] for t, i in zip(all_tables, combo))
        best = v if best is None else max(best, v)
    if best is None:
        raise SpectrumError(f"k={k} exceeds the indices available in the tables")
    return best
