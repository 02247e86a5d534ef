"""P1 assembly of the Dirichlet energy, density-weighted boundary mass and the DtN map.

The Dirichlet energy of a surface is conformally invariant, so the stiffness
matrix depends on edge lengths only through angles (cotangent weights). A
metric rho*g inside a conformal class enters the Steklov problem only through
the boundary weight rho^(1/2), carried by :class:`BoundaryDensity`.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BoundaryPartition, MeshError, SurfaceMesh

__all__ = [
    "AssemblyError",
    "BoundaryDensity",
    "SteklovEdges",
    "DtNOperator",
    "assemble_stiffness",
    "assemble_boundary_mass",
    "boundary_mass_dense",
    "schur_dtn",
    "cotangent_weights",
    "dump_matrix",
    "maybe_dump",
    "generalized_eigh",
]


class AssemblyError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """Positive boundary weights w = rho^(1/2), one per entry of ``mesh.boundary_vertices``."""

    weights: np.ndarray
    region_tags: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise AssemblyError("boundary density weights must be finite and positive")
        object.__setattr__(self, "weights", w)
        if self.region_tags is not None:
            tags = np.asarray(self.region_tags).reshape(-1)
            if tags.shape != w.shape:
                raise AssemblyError("region_tags must align with weights")
            object.__setattr__(self, "region_tags", tags)

    @classmethod
    def uniform(cls, mesh: SurfaceMesh, value: float = 1.0) -> "BoundaryDensity":
        return cls(np.full(len(mesh.boundary_vertices), float(value)))

    @classmethod
    def piecewise(cls, mesh: SurfaceMesh, tags: np.ndarray, values: dict) -> "BoundaryDensity":
        """Constant weight per region tag (tags indexed like ``boundary_vertices``)."""
        tags = np.asarray(tags)
        return cls(np.array([values[t] for t in tags.tolist()], dtype=float), tags)

    def scaled_metric(self, c: float) -> "BoundaryDensity":
        """Density of the metric c*rho*g: boundary weights scale by sqrt(c)."""
        return BoundaryDensity(self.weights * np.sqrt(c), self.region_tags)


def cotangent_weights(face_lengths: np.ndarray) -> np.ndarray:
    """Half-cotangents of the angle at each corner, from the three side lengths.

    ``face_lengths[:, c]`` is the side opposite corner c; the returned
    ``w[:, c]`` is the coupling weight of that opposite edge.
    """
    a, b, c = face_lengths[:, 0], face_lengths[:, 1], face_lengths[:, 2]
    # Kahan's stable Heron formula on sorted sides
    s = np.sort(face_lengths, axis=1)[:, ::-1]
    x, y, z = s[:, 0], s[:, 1], s[:, 2]
    prod = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    if np.any(prod <= 0):
        raise AssemblyError(f"degenerate triangle (zero area) at face {int(np.argmax(prod <= 0))}")
    area4 = np.sqrt(prod)  # 4 * area
    cot = np.stack([(b * b + c * c - a * a), (c * c + a * a - b * b), (a * a + b * b - c * c)], axis=1)
    return 0.5 * cot / area4[:, None]


def assemble_stiffness(mesh: SurfaceMesh) -> sp.csr_matrix:
    """Cotangent stiffness matrix on the identified vertex set (dofs)."""
    L = mesh.face_lengths
    try:
        w = cotangent_weights(L)
    except AssemblyError as err:
        raise AssemblyError(f"{err} of mesh {mesh.name!r}") from None
    t = mesh.dof_triangles
    rows, cols, vals = [], [], []
    for c in range(3):
        i, j = t[:, (c + 1) % 3], t[:, (c + 2) % 3]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w[:, c], -w[:, c], w[:, c], w[:, c]]
    n = mesh.n_dofs
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    K = K.tocsr()
    K.sum_duplicates()
    K.sort_indices()
    return K


@dataclass(frozen=True, eq=False)
class SteklovEdges:
    """Steklov edges expressed in local indices of the Steklov vertex list.

    ``weight_index`` maps each Steklov vertex to its slot in ``mesh.boundary_vertices``.
    """

    steklov_vertices: np.ndarray
    i: np.ndarray
    j: np.ndarray
    lengths: np.ndarray
    weight_index: np.ndarray

    @classmethod
    def from_partition(cls, mesh: SurfaceMesh, partition: BoundaryPartition) -> "SteklovEdges":
        sv = partition.steklov_vertices
        loc = np.searchsorted(sv, partition.steklov_edges)
        widx = np.searchsorted(mesh.boundary_vertices, sv)
        return cls(sv, loc[:, 0], loc[:, 1], partition.steklov_lengths, widx)

    @property
    def size(self) -> int:
        return len(self.steklov_vertices)

    def length_gradient(self) -> np.ndarray:
        """d(total weighted length)/d(w) at each Steklov vertex."""
        g = np.zeros(self.size)
        np.add.at(g, self.i, 0.5 * self.lengths)
        np.add.at(g, self.j, 0.5 * self.lengths)
        return g


def boundary_mass_dense(edges: SteklovEdges, w: np.ndarray) -> np.ndarray:
    """Consistent weighted boundary mass on the Steklov vertices.

    ``w`` holds the weights at the Steklov vertices. Per edge, the integral of
    w*phi_a*phi_b with linear w is exact: L/12 [[3wa+wb, wa+wb], [wa+wb, wa+3wb]].
    """
    n = edges.size
    wa, wb = w[edges.i], w[edges.j]
    Lf = edges.lengths / 12.0
    M = np.zeros((n, n))
    np.add.at(M, (edges.i, edges.i), Lf * (3 * wa + wb))
    np.add.at(M, (edges.j, edges.j), Lf * (wa + 3 * wb))
    off = Lf * (wa + wb)
    np.add.at(M, (edges.i, edges.j), off)
    np.add.at(M, (edges.j, edges.i), off)
    return M


def _lumped_mass(edges: SteklovEdges, w: np.ndarray) -> np.ndarray:
    m = np.zeros(edges.size)
    wa, wb = w[edges.i], w[edges.j]
    np.add.at(m, edges.i, edges.lengths * (2 * wa + wb) / 6.0)
    np.add.at(m, edges.j, edges.lengths * (wa + 2 * wb) / 6.0)
    return np.diag(m)


def assemble_boundary_mass(mesh: SurfaceMesh, partition: BoundaryPartition, density: BoundaryDensity,
                           lumped: bool = False) -> sp.csr_matrix:
    """Weighted boundary mass as a sparse matrix over all dofs (zero off the Steklov part)."""
    if len(density.weights) != len(mesh.boundary_vertices):
        raise AssemblyError("density does not match the mesh boundary")
    edges = SteklovEdges.from_partition(mesh, partition)
    w = density.weights[edges.weight_index]
    Ms = _lumped_mass(edges, w) if lumped else boundary_mass_dense(edges, w)
    sv = edges.steklov_vertices
    Ms = sp.coo_matrix(Ms)
    n = mesh.n_dofs
    return sp.csr_matrix((Ms.data, (sv[Ms.row], sv[Ms.col])), shape=(n, n))


@dataclass(frozen=True, eq=False)
class DtNOperator:
    """Discrete Dirichlet-to-Neumann map on the Steklov vertices.

    ``interior_factor`` is the sparse LU of the interior block (interior and
    Neumann vertices); it is only read after construction.
    """

    matrix: np.ndarray
    steklov_vertices: np.ndarray
    interior_vertices: np.ndarray
    interior_factor: Optional[object] = None

    def harmonic_extension(self, boundary_values: np.ndarray, K: sp.spmatrix) -> np.ndarray:
        """Discrete harmonic extension of Steklov-vertex values (natural BC on Neumann part)."""
        n = K.shape[0]
        u = np.zeros(n)
        u[self.steklov_vertices] = boundary_values
        if len(self.interior_vertices):
            KIS = K[self.interior_vertices][:, self.steklov_vertices]
            u[self.interior_vertices] = -self.interior_factor.solve(KIS @ boundary_values)
        return u


def _components_without_steklov(mesh: SurfaceMesh, steklov: np.ndarray) -> list:
    labels = mesh.connected_components
    pinned = set(labels[steklov].tolist())
    return sorted(set(labels.tolist()) - pinned)


def schur_dtn(K: sp.spmatrix, partition: BoundaryPartition, mesh: Optional[SurfaceMesh] = None) -> DtNOperator:
    """DtN = K_SS - K_SI K_II^{-1} K_IS with I = interior and Neumann vertices."""
    S = partition.steklov_vertices
    if len(S) == 0:
        raise AssemblyError("zero-capacity Steklov boundary")
    if mesh is not None:
        lost = _components_without_steklov(mesh, S)
        if lost:
            raise AssemblyError(f"Steklov set fails to pin the kernel: component(s) {lost} have no Steklov boundary")
    K = sp.csr_matrix(K)
    n = K.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[S] = False
    I = np.flatnonzero(mask)
    KSS = K[S][:, S].toarray()
    if len(I) == 0:
        return DtNOperator(0.5 * (KSS + KSS.T), S, I, None)
    KII = K[I][:, I].tocsc()
    KIS = K[I][:, S].toarray()
    try:
        lu = spla.splu(KII, permc_spec="COLAMD")
    except RuntimeError as err:
        raise AssemblyError("Steklov set fails to pin the kernel (singular interior block)") from err
    X = lu.solve(KIS)
    if not np.all(np.isfinite(X)):
        raise AssemblyError("Steklov set fails to pin the kernel (singular interior block)")
    D = KSS - KIS.T @ X
    return DtNOperator(0.5 * (D + D.T), S, I, lu)


def dump_matrix(path, matrix, comment: str = "") -> None:
    """Write a matrix in Matrix Market coordinate format (debugging aid)."""
    import scipy.io

    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment, precision=17)


def maybe_dump(name: str, matrix) -> None:
    """Dump ``matrix`` when STEKLOV_DUMP_DIR is set; otherwise do nothing."""
    target = os.environ.get("STEKLOV_DUMP_DIR")
    if target:
        os.makedirs(target, exist_ok=True)
        dump_matrix(os.path.join(target, f"{name}.mtx"), matrix)


def generalized_eigh(A: np.ndarray, B: np.ndarray, count: int, dense_limit: int = 2000):
    """Lowest ``count`` eigenpairs of A v = s B v (A symmetric PSD, B SPD).

    Dense LAPACK up to ``dense_limit`` unknowns, shift-invert Lanczos above.
    Eigenvectors are B-orthonormal.
    """
    n = A.shape[0]
    if count > n:
        raise MeshError("requested modes exceed discrete space")
    if n <= dense_limit:
        vals, vecs = scipy.linalg.eigh(A, B, subset_by_index=[0, count - 1], check_finite=False)
    else:
        scale = np.abs(np.diag(A)).max() / max(np.abs(np.diag(B)).max(), 1e-300)
        vals, vecs = spla.eigsh(A, k=count, M=B, sigma=-1e-3 * scale, which="LM")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return vals, vecs
