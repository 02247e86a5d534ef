"""Numerical lab for Steklov and Steklov-Neumann spectra on triangulated surfaces."""
from .fem import BoundaryDensity
from .mesh import (BoundaryPartition, MeshError, SurfaceMesh, SurfaceTopology, all_steklov, build_disc_mesh,
                   partition_boundary, refine)
from .optimize import ConformalSupremumEstimate, OptimizerOptions, maximize_normalized_eigenvalue
from .spectrum import (BoundaryPencil, CompositionTable, MixedSpectrum, SteklovSpectrum, combine_disjoint,
                       degeneration_limit, mixed_spectrum, steklov_spectrum)

__version__ = "0.1.0"

__all__ = [
    "BoundaryDensity",
    "BoundaryPartition",
    "BoundaryPencil",
    "CompositionTable",
    "ConformalSupremumEstimate",
    "MeshError",
    "MixedSpectrum",
    "OptimizerOptions",
    "SteklovSpectrum",
    "SurfaceMesh",
    "SurfaceTopology",
    "all_steklov",
    "build_disc_mesh",
    "combine_disjoint",
    "degeneration_limit",
    "maximize_normalized_eigenvalue",
    "mixed_spectrum",
    "partition_boundary",
    "refine",
    "steklov_spectrum",
]
