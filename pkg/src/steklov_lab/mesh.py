"""Triangulated surfaces with boundary and the model geometries used in the lab.

Vertices live in a parameter plane (or in R^3 for imported meshes). Surfaces
that are not planar, such as flat cylinders, Moebius bands and hyperbolic
collars, are stored as a rectangle of parameters together with explicit vertex
identifications and per-edge metric lengths. Everything downstream (assembly,
boundary mass) reads edge lengths only, so the parameter coordinates never
have to be an isometric embedding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "MeshError",
    "SurfaceTopology",
    "SurfaceMesh",
    "BoundaryPartition",
    "CollarChart",
    "collar_width",
    "collar_metric_factor",
    "build_disc_mesh",
    "build_half_disc_mesh",
    "build_annulus_mesh",
    "build_rectangle_mesh",
    "build_flat_cylinder_mesh",
    "build_graded_cylinder_mesh",
    "build_moebius_mesh",
    "build_collar_mesh",
    "build_disc_minus_boundary_ball",
    "refine",
    "partition_boundary",
    "all_steklov",
    "disjoint_union",
]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceTopology:
    genus: int
    boundary_components: int
    orientable: bool = True

    def __post_init__(self):
        if self.genus < 0:
            raise MeshError("genus must be non-negative")
        if self.boundary_components < 1:
            raise MeshError("surface must have non-empty boundary")

    @property
    def euler_characteristic(self) -> int:
        if self.orientable:
            return 2 - 2 * self.genus - self.boundary_components
        # genus is that of the orientable double cover, which has 2l boundary circles
        return (2 - 2 * self.genus - 2 * self.boundary_components) // 2

    def steklov_upper_bound(self, k: int) -> float:
        """Upper bound on the normalized k-th Steklov eigenvalue for this topology."""
        g, l = self.genus, self.boundary_components
        if self.orientable:
            return 2.0 * math.pi * k * (g + l)
        return 4.0 * math.pi * k * (g + 2 * l)


def _edge_key(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return np.stack([lo, hi], axis=1)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Triangulated surface with boundary.

    ``identifications`` is an (p, 2) integer array of vertex pairs glued
    together (the second vertex of each pair is merged into the first).
    ``edge_lengths`` maps each raw edge in ``edges`` order to its metric
    length; when absent, lengths come from the vertex coordinates.
    ``length_factor``, when given, is a conformal length factor evaluated at
    parameter points and is used to recompute edge lengths after refinement.
    ``snap`` projects new boundary vertices back onto an analytic boundary.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    topology: SurfaceTopology
    identifications: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    edge_lengths: Optional[np.ndarray] = None
    length_factor: Optional[Callable[[np.ndarray], np.ndarray]] = None
    snap: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "mesh"

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        glue = np.asarray(self.identifications, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "identifications", glue)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be an (m, 3) array")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise MeshError("triangle index out of range")
        if self.edge_lengths is not None:
            el = np.ascontiguousarray(self.edge_lengths, dtype=float)
            if el.shape != (len(self.edges),):
                raise MeshError("edge_lengths must align with mesh.edges")
            if np.any(el <= 0):
                raise MeshError("metric edge lengths must be positive")
            object.__setattr__(self, "edge_lengths", el)
        self._check_manifold()

    # -- raw (unidentified) structure ------------------------------------

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique raw edges as sorted vertex pairs, lexicographically ordered."""
        t = self.triangles
        e = np.concatenate([_edge_key(t[:, 1], t[:, 2]), _edge_key(t[:, 2], t[:, 0]),
                            _edge_key(t[:, 0], t[:, 1])])
        return np.unique(e, axis=0)

    @cached_property
    def _face_edge_index(self) -> np.ndarray:
        """(m, 3) index into ``edges`` for the edge opposite each corner."""
        t = self.triangles
        n = len(self.vertices)
        codes = self.edges[:, 0] * n + self.edges[:, 1]
        out = np.empty(t.shape, dtype=np.int64)
        for c in range(3):
            a, b = t[:, (c + 1) % 3], t[:, (c + 2) % 3]
            key = np.minimum(a, b) * n + np.maximum(a, b)
            out[:, c] = np.searchsorted(codes, key)
        return out

    @cached_property
    def raw_edge_lengths(self) -> np.ndarray:
        if self.edge_lengths is not None:
            return self.edge_lengths
        p = self.vertices
        return np.linalg.norm(p[self.edges[:, 0]] - p[self.edges[:, 1]], axis=1)

    @cached_property
    def face_lengths(self) -> np.ndarray:
        """(m, 3) metric lengths of the edge opposite each corner."""
        return self.raw_edge_lengths[self._face_edge_index]

    # -- identified structure ---------------------------------------------

    @cached_property
    def dof_of_vertex(self) -> np.ndarray:
        """Dof index per raw vertex, numbered by the smallest glued vertex."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        n = len(self.vertices)
        if not len(self.identifications):
            return np.arange(n, dtype=np.int64)
        g = self.identifications
        graph = coo_matrix((np.ones(len(g)), (g[:, 0], g[:, 1])), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        # relabel so that dof order follows the first vertex of each class
        first = np.full(labels.max() + 1, n, dtype=np.int64)
        np.minimum.at(first, labels, np.arange(n))
        rank = np.empty_like(first)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return rank[labels]

    @cached_property
    def n_dofs(self) -> int:
        return int(self.dof_of_vertex.max()) + 1 if len(self.vertices) else 0

    @cached_property
    def dof_triangles(self) -> np.ndarray:
        return self.dof_of_vertex[self.triangles]

    @cached_property
    def _dof_edge_table(self):
        """Per raw face edge: dof key, count of incident faces, raw vertex pair."""
        t = self.triangles
        d = self.dof_of_vertex
        raw_a = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
        raw_b = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
        keys = _edge_key(d[raw_a], d[raw_b])
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        return uniq, inv.ravel(), counts, raw_a, raw_b

    def _check_manifold(self):
        if not len(self.triangles):
            raise MeshError("mesh has no triangles")
        dt = self.dof_triangles
        if np.any((dt[:, 0] == dt[:, 1]) | (dt[:, 1] == dt[:, 2]) | (dt[:, 0] == dt[:, 2])):
            raise MeshError("identifications collapse a triangle")
        _, _, counts, _, _ = self._dof_edge_table
        if np.any(counts > 2):
            raise MeshError("non-manifold edge (more than two incident faces)")

    @cached_property
    def dof_edges(self) -> np.ndarray:
        return self._dof_edge_table[0]

    @cached_property
    def _boundary_raw(self):
        uniq, inv, counts, raw_a, raw_b = self._dof_edge_table
        once = counts[inv] == 1
        return raw_a[once], raw_b[once]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Boundary edges as oriented dof pairs, ordered loop by loop."""
        return np.concatenate([np.stack([lp, np.roll(lp, -1)], axis=1) for lp in self.boundary_loops])

    @cached_property
    def boundary_edge_lengths(self) -> np.ndarray:
        lookup = self._boundary_length_lookup
        e = self.boundary_edges
        return np.array([lookup[(min(a, b), max(a, b))] for a, b in e])

    @cached_property
    def boundary_edge_midpoints(self) -> np.ndarray:
        lookup = self._boundary_mid_lookup
        return np.array([lookup[(min(a, b), max(a, b))] for a, b in self.boundary_edges])

    @cached_property
    def _boundary_length_lookup(self) -> dict:
        ra, rb = self._boundary_raw
        n = len(self.vertices)
        codes = self.edges[:, 0] * n + self.edges[:, 1]
        idx = np.searchsorted(codes, np.minimum(ra, rb) * n + np.maximum(ra, rb))
        lengths = self.raw_edge_lengths[idx]
        d = self.dof_of_vertex
        return {(int(min(d[a], d[b])), int(max(d[a], d[b]))): float(L) for a, b, L in zip(ra, rb, lengths)}

    @cached_property
    def _boundary_mid_lookup(self) -> dict:
        ra, rb = self._boundary_raw
        p = self.vertices
        d = self.dof_of_vertex
        return {(int(min(d[a], d[b])), int(max(d[a], d[b]))): 0.5 * (p[a] + p[b]) for a, b in zip(ra, rb)}

    @cached_property
    def boundary_loops(self) -> list:
        """Boundary as a list of closed dof cycles (first vertex not repeated)."""
        ra, rb = self._boundary_raw
        d = self.dof_of_vertex
        a, b = d[ra], d[rb]
        nbrs: dict = {}
        for u, v in zip(a.tolist(), b.tolist()):
            nbrs.setdefault(u, []).append(v)
            nbrs.setdefault(v, []).append(u)
        if any(len(v) != 2 for v in nbrs.values()):
            raise MeshError("boundary is not a disjoint union of simple closed curves")
        loops = []
        seen = set()
        for start in sorted(nbrs):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            prev, cur = start, min(nbrs[start])
            while cur != start:
                loop.append(cur)
                seen.add(cur)
                n0, n1 = nbrs[cur]
                prev, cur = cur, (n1 if n0 == prev else n0)
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Sorted dof indices of boundary vertices; densities are indexed in this order."""
        return np.unique(np.concatenate(self.boundary_loops))

    @cached_property
    def boundary_loop_lengths(self) -> np.ndarray:
        """Metric length of each entry of ``boundary_loops``."""
        sizes = np.cumsum([len(lp) for lp in self.boundary_loops])[:-1]
        return np.array([part.sum() for part in np.split(self.boundary_edge_lengths, sizes)])

    @cached_property
    def boundary_loop_coordinates(self) -> tuple:
        """(loop index, normalized arclength in [0, 1)) for each entry of ``boundary_vertices``."""
        lookup = self._boundary_length_lookup
        loop_id = np.zeros(len(self.boundary_vertices), dtype=int)
        s_out = np.zeros(len(self.boundary_vertices))
        for li, loop in enumerate(self.boundary_loops):
            seg = np.array([lookup[(min(a, b), max(a, b))] for a, b in zip(loop, np.roll(loop, -1))])
            s = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / seg.sum()
            pos = np.searchsorted(self.boundary_vertices, loop)
            loop_id[pos] = li
            s_out[pos] = s
        return loop_id, s_out

    @property
    def boundary_length(self) -> float:
        return float(self.boundary_edge_lengths.sum())

    @cached_property
    def euler_characteristic(self) -> int:
        return int(self.n_dofs - len(self.dof_edges) + len(self.triangles))

    @cached_property
    def connected_components(self) -> np.ndarray:
        """Component label per dof."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        e = self.dof_edges
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.n_dofs, self.n_dofs))
        _, labels = connected_components(g, directed=False)
        return labels

    @property
    def max_edge_length(self) -> float:
        return float(self.raw_edge_lengths.max())

    def dof_coordinates(self) -> np.ndarray:
        """One representative coordinate per dof (first raw vertex mapped to it)."""
        out = np.empty((self.n_dofs, self.vertices.shape[1]))
        out[self.dof_of_vertex[::-1]] = self.vertices[::-1]
        return out

    def check_triangle_inequality(self) -> bool:
        a, b, c = self.face_lengths.T
        return bool(np.all((a < b + c) & (b < a + c) & (c < a + b)))

    def scaled(self, factor: float) -> "SurfaceMesh":
        """Homothetic copy: every metric length multiplied by ``factor``."""
        return SurfaceMesh(self.vertices * factor, self.triangles, self.topology,
                           self.identifications, self.raw_edge_lengths * factor,
                           name=self.name)


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Split of the boundary edges into Steklov and Neumann parts (dof pairs)."""

    steklov_edges: np.ndarray
    neumann_edges: np.ndarray
    steklov_lengths: np.ndarray
    neumann_lengths: np.ndarray

    @cached_property
    def steklov_vertices(self) -> np.ndarray:
        return np.unique(self.steklov_edges)

    @property
    def steklov_length(self) -> float:
        return float(self.steklov_lengths.sum())

    @property
    def is_pure_steklov(self) -> bool:
        return len(self.neumann_edges) == 0


def partition_boundary(mesh: SurfaceMesh, selector) -> BoundaryPartition:
    """Mark boundary edges as Steklov where ``selector`` is true.

    ``selector`` receives the (e, d) array of boundary-edge midpoints in
    parameter coordinates and returns a boolean mask. A plain boolean array of
    length e is accepted too.
    """
    mids = mesh.boundary_edge_midpoints
    mask = selector(mids) if callable(selector) else selector
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.shape != (len(mids),):
        raise MeshError("selector must produce one flag per boundary edge")
    if not mask.any():
        raise MeshError("zero-capacity Steklov boundary")
    e, L = mesh.boundary_edges, mesh.boundary_edge_lengths
    return BoundaryPartition(e[mask], e[~mask], L[mask], L[~mask])


def all_steklov(mesh: SurfaceMesh) -> BoundaryPartition:
    return partition_boundary(mesh, lambda m: np.ones(len(m), dtype=bool))


# -- construction helpers ---------------------------------------------------


def _zip_rows(inner: np.ndarray, inner_s: np.ndarray, outer: np.ndarray, outer_s: np.ndarray,
              periodic: bool) -> list:
    """Triangulate the band between two vertex rows ordered by a parameter.

    For periodic rows the parameters are angles in [0, 2*pi) and the strip
    wraps around; otherwise both rows span the same parameter interval.
    """
    tris = []
    if periodic:
        inner = np.append(inner, inner[0])
        inner_s = np.append(inner_s, inner_s[0] + 2 * np.pi)
        outer = np.append(outer, outer[0])
        outer_s = np.append(outer_s, outer_s[0] + 2 * np.pi)
    ni, no = len(inner) - 1, len(outer) - 1
    i = j = 0
    while i < ni or j < no:
        if i == ni:
            adv_outer = True
        elif j == no:
            adv_outer = False
        else:
            adv_outer = outer_s[j + 1] <= inner_s[i + 1]
        if adv_outer:
            tris.append((inner[i], outer[j], outer[j + 1]))
            j += 1
        else:
            tris.append((inner[i], outer[j], inner[i + 1]))
            i += 1
    return tris


def _orient_ccw(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = points[:, :2]
    a, b, c = p[tris[:, 0]], p[tris[:, 1]], p[tris[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    out = tris.copy()
    flip = cross < 0
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _polar_rings(radii: Sequence[float], counts: Sequence[int], center=(0.0, 0.0),
                 sector: Optional[tuple] = None):
    """Concentric rings (optionally a sector) triangulated by zipping neighbours.

    A first radius of 0 places a single centre vertex with a fan around it.
    """
    cx, cy = center
    pts: list = []
    rows = []
    for r, n in zip(radii, counts):
        if r == 0.0:
            ang = np.array([0.0])
        elif sector is None:
            ang = 2 * np.pi * np.arange(n) / n
        else:
            ang = np.linspace(sector[0], sector[1], n + 1)
        idx = np.arange(len(pts), len(pts) + len(ang))
        pts.extend(zip(cx + r * np.cos(ang), cy + r * np.sin(ang)))
        rows.append((idx, ang, r))
    tris = []
    periodic = sector is None
    for (ia, sa, ra), (ib, sb, rb) in zip(rows[:-1], rows[1:]):
        if ra == 0.0:
            c = ia[0]
            if periodic:
                tris.extend((c, ib[j], ib[(j + 1) % len(ib)]) for j in range(len(ib)))
            else:
                tris.extend((c, ib[j], ib[j + 1]) for j in range(len(ib) - 1))
        else:
            tris.extend(_zip_rows(ia, sa, ib, sb, periodic))
    pts = np.array(pts)
    return pts, _orient_ccw(pts, np.array(tris, dtype=np.int64))


def _unit_circle_snap(points: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(points, axis=1, keepdims=True)
    return points / r


def build_disc_mesh(refinement: int, radius: float = 1.0) -> SurfaceMesh:
    """Unit disc from concentric rings: ring j carries 6j vertices, 3*2^(r-1) rings."""
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_rings = 3 * 2 ** (refinement - 1)
    radii = [radius * j / n_rings for j in range(n_rings + 1)]
    counts = [1] + [6 * j for j in range(1, n_rings + 1)]
    pts, tris = _polar_rings(radii, counts)
    snap = (lambda p: radius * _unit_circle_snap(p))
    return SurfaceMesh(pts, tris, SurfaceTopology(0, 1), snap=snap, name="disc")


def build_half_disc_mesh(refinement: int) -> SurfaceMesh:
    """Upper half of the unit disc, same ring spacing as ``build_disc_mesh``."""
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_rings = 3 * 2 ** (refinement - 1)
    radii = [j / n_rings for j in range(n_rings + 1)]
    counts = [1] + [3 * j for j in range(1, n_rings + 1)]
    pts, tris = _polar_rings(radii, counts, sector=(0.0, np.pi))

    def snap(p):
        out = p.copy()
        on_arc = p[:, 1] > 1e-12
        out[on_arc] = _unit_circle_snap(p[on_arc])
        return out

    return SurfaceMesh(pts, tris, SurfaceTopology(0, 1), snap=snap, name="half-disc")


def build_annulus_mesh(inner_radius: float, refinement: int) -> SurfaceMesh:
    """Planar annulus inner_radius < |x| < 1 with geometrically graded rings."""
    if not 0 < inner_radius < 1:
        raise MeshError("inner radius must lie in (0, 1)")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_ang = 18 * 2 ** (refinement - 1)
    dlog = 2 * np.pi / n_ang
    n_rad = max(1, int(math.ceil(-math.log(inner_radius) / dlog)))
    radii = np.exp(np.linspace(math.log(inner_radius), 0.0, n_rad + 1))
    radii[-1] = 1.0
    pts, tris = _polar_rings(list(radii), [n_ang] * len(radii))
    r0 = inner_radius

    def snap(p):
        r = np.linalg.norm(p, axis=1)
        target = np.where(np.abs(r - 1) < np.abs(r - r0), 1.0, r0)
        return p * (target / r)[:, None]

    return SurfaceMesh(pts, tris, SurfaceTopology(0, 2), snap=snap, name="annulus")


def _grid(nx: int, ny: int, x: np.ndarray, y: np.ndarray):
    X, Y = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    # alternate the diagonal so the grid has no preferred direction
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    alt = ((ii + jj) % 2 == 0).ravel()
    t1 = np.where(alt[:, None], np.stack([a, b, c], 1), np.stack([a, b, d], 1))
    t2 = np.where(alt[:, None], np.stack([a, c, d], 1), np.stack([b, c, d], 1))
    tris = np.concatenate([t1, t2])
    return pts, idx, _orient_ccw(pts, tris)


def build_rectangle_mesh(width: float, height: float, refinement: int) -> SurfaceMesh:
    """Rectangle [0, width] x [0, height] with near-square cells."""
    if width <= 0 or height <= 0:
        raise MeshError("rectangle sides must be positive")
    nx = 8 * 2 ** (refinement - 1)
    ny = max(1, int(round(nx * height / width)))
    pts, _, tris = _grid(nx, ny, np.linspace(0, width, nx + 1), np.linspace(0, height, ny + 1))
    return SurfaceMesh(pts, tris, SurfaceTopology(0, 1), name="rectangle")


def _periodic_strip(n_theta: int, t_values: np.ndarray, theta_span: float):
    pts, idx, tris = _grid(n_theta, len(t_values) - 1, np.linspace(0, theta_span, n_theta + 1), t_values)
    return pts, idx, tris


def _circumferential_count(refinement: int) -> int:
    return 16 * 2 ** (refinement - 1)


def build_flat_cylinder_mesh(modulus: float, refinement: int) -> SurfaceMesh:
    """Flat cylinder of circumference 2*pi and height ``modulus``.

    Stored as the parameter rectangle [0, 2pi] x [0, h] with the two vertical
    sides glued vertex by vertex.
    """
    h = float(modulus)
    if not h > 0:
        raise MeshError("cylinder modulus must be positive")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_theta = _circumferential_count(refinement)
    dtheta = 2 * np.pi / n_theta
    n_t = max(1, int(math.ceil(h / dtheta - 1e-9)))
    pts, idx, tris = _periodic_strip(n_theta, np.linspace(0.0, h, n_t + 1), 2 * np.pi)
    glue = np.stack([idx[0], idx[-1]], axis=1)
    mesh = SurfaceMesh(pts, tris, SurfaceTopology(0, 2), glue, name="cylinder")
    return SurfaceMesh(pts, tris, SurfaceTopology(0, 2), glue, mesh.raw_edge_lengths, name="cylinder")


def _graded_coordinates(length: float, smin: float, smax: float, growth: float) -> np.ndarray:
    """Points on [0, length] whose spacing grows linearly from ``smin`` up to ``smax``."""
    xs = [0.0]
    while xs[-1] < length:
        xs.append(xs[-1] + min(smax, smin + growth * xs[-1]))
    xs = np.array(xs)
    return xs * (length / xs[-1])


def build_graded_cylinder_mesh(modulus: float, refinement: int, focus_ratio: float = 0.005,
                               growth: float = 0.1) -> SurfaceMesh:
    """Flat cylinder of height ``modulus`` refined toward the boundary point (pi, 0).

    Cells have size ``focus_ratio * modulus`` at the focus and grow by
    ``growth`` per unit distance until they reach the base size
    min(modulus / 4, 0.1) / 2^(refinement - 1). Concentrated densities at
    the focus (disc bubbles) are then resolved without a globally fine grid.
    """
    h = float(modulus)
    if not h > 0:
        raise MeshError("cylinder modulus must be positive")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    smax = min(h / 4.0, 0.1) / 2 ** (refinement - 1)
    smin = min(focus_ratio * h, smax)
    half = _graded_coordinates(np.pi, smin, smax, growth)
    theta = np.concatenate([np.pi - half[::-1], np.pi + half[1:]])
    ts = _graded_coordinates(h, smin, smax, growth)
    pts, idx, tris = _grid(len(theta) - 1, len(ts) - 1, theta, ts)
    glue = np.stack([idx[0], idx[-1]], axis=1)
    mesh = SurfaceMesh(pts, tris, SurfaceTopology(0, 2), glue, name="cylinder")
    return SurfaceMesh(pts, tris, SurfaceTopology(0, 2), glue, mesh.raw_edge_lengths, name="cylinder")


def build_moebius_mesh(modulus: float, refinement: int) -> SurfaceMesh:
    """Flat Moebius band whose orientable double cover is the cylinder of height ``modulus``.

    Parameter rectangle [0, pi] x [-h/2, h/2] with (0, t) glued to (pi, -t);
    the boundary is a single circle of length 2*pi.
    """
    h = float(modulus)
    if not h > 0:
        raise MeshError("Moebius modulus must be positive")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_theta = _circumferential_count(refinement) // 2
    dtheta = np.pi / n_theta
    n_t = max(2, int(math.ceil(h / dtheta - 1e-9)))
    t = np.linspace(-h / 2, h / 2, n_t + 1)
    pts, idx, tris = _periodic_strip(n_theta, t, np.pi)
    glue = np.stack([idx[0], idx[-1][::-1]], axis=1)
    top = SurfaceTopology(0, 1, orientable=False)
    mesh = SurfaceMesh(pts, tris, top, glue, name="moebius")
    return SurfaceMesh(pts, tris, top, glue, mesh.raw_edge_lengths, name="moebius")


# -- hyperbolic collars -----------------------------------------------------


def collar_width(l: float) -> float:
    """Width of the standard collar around a closed geodesic of length ``l``."""
    if not l > 0:
        raise MeshError("geodesic length must be positive")
    return (math.pi / l) * (math.pi - 2.0 * math.atan(math.sinh(l / 2.0)))


def collar_metric_factor(l: float, t) -> np.ndarray:
    """Conformal factor of the collar metric, multiplying dt^2 + dtheta^2."""
    return (l / (2 * np.pi * np.cos(l * np.asarray(t, dtype=float) / (2 * np.pi)))) ** 2


STRIP_TYPES = ("boundary-collar", "interior-collar", "crossing-strip")


@dataclass(frozen=True)
class CollarChart:
    geodesic_length: float
    width: float
    strip_type: str = "boundary-collar"

    def __post_init__(self):
        if not self.geodesic_length > 0 or not self.width > 0:
            raise MeshError("collar length and width must be positive")
        if self.strip_type not in STRIP_TYPES:
            raise MeshError(f"unknown strip type {self.strip_type!r}")

    @classmethod
    def from_geodesic(cls, l: float, strip_type: str = "boundary-collar") -> "CollarChart":
        return cls(l, collar_width(l), strip_type)

    def length_factor(self, points: np.ndarray) -> np.ndarray:
        """Length factor (square root of the metric factor) at (theta, t) points."""
        return np.sqrt(collar_metric_factor(self.geodesic_length, points[..., 1]))


def _midpoint_lengths(vertices: np.ndarray, edges: np.ndarray, factor) -> np.ndarray:
    a, b = vertices[edges[:, 0]], vertices[edges[:, 1]]
    return np.linalg.norm(a - b, axis=1) * factor(0.5 * (a + b))


def build_collar_mesh(chart: CollarChart, truncation: float, refinement: int) -> SurfaceMesh:
    """Mesh of the truncated collar in (theta, t) coordinates with the collar metric.

    boundary-collar covers 0 <= t <= a, the other two types -a <= t <= a; the
    crossing strip keeps theta = 0 and theta = 2pi as separate boundary arcs.
    Edge lengths use the length factor at edge midpoints.
    """
    a = float(truncation)
    if not 0 < a < chart.width:
        raise MeshError(f"truncation {a} must lie in (0, collar width {chart.width})")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_theta = _circumferential_count(refinement)
    dtheta = 2 * np.pi / n_theta
    t0 = 0.0 if chart.strip_type == "boundary-collar" else -a
    n_t = max(1, int(math.ceil((a - t0) / dtheta - 1e-9)))
    t = np.linspace(t0, a, n_t + 1)
    pts, idx, tris = _periodic_strip(n_theta, t, 2 * np.pi)
    if chart.strip_type == "crossing-strip":
        glue = np.zeros((0, 2), dtype=np.int64)
        top = SurfaceTopology(0, 1)
    else:
        glue = np.stack([idx[0], idx[-1]], axis=1)
        top = SurfaceTopology(0, 2)
    probe = SurfaceMesh(pts, tris, top, glue, name="collar")
    lengths = _midpoint_lengths(pts, probe.edges, chart.length_factor)
    return SurfaceMesh(pts, tris, top, glue, lengths, length_factor=chart.length_factor,
                       name=f"collar-{chart.strip_type}")


# -- disc with a boundary ball removed ----------------------------------------


def build_disc_minus_boundary_ball(eps: float, refinement: int) -> SurfaceMesh:
    """Unit disc minus the ball of radius ``eps`` centred at the boundary point (1, 0).

    Meshed by rays from (1, 0): a ray at angle phi leaves the disc at distance
    -2 cos(phi), so equal angular steps give equal steps along the circle.
    Radii are graded geometrically away from the cut so elements stay shape
    regular at every scale between eps and 2.
    """
    if not 0 < eps < 1:
        raise MeshError("ball radius must lie in (0, 1)")
    if refinement < 1:
        raise MeshError("refinement must be >= 1")
    n_rays = 48 * 2 ** (refinement - 1)
    phi0 = math.acos(-eps / 2.0)
    phis = np.linspace(phi0, 2 * np.pi - phi0, n_rays + 1)
    dphi = phis[1] - phis[0]
    radii = [eps]
    while radii[-1] < 2.0:
        radii.append(radii[-1] * (1.0 + dphi))
    radii = np.array(radii)
    pts = []
    rows = []
    count = 0
    for j, phi in enumerate(phis):
        if j in (0, n_rays):
            rs = np.array([eps])
        else:
            R = -2.0 * math.cos(phi)
            inner = radii[radii < R]
            if len(inner) > 1 and R - inner[-1] < 0.5 * inner[-1] * dphi:
                inner = inner[:-1]
            rs = np.append(inner, R)
        xy = np.stack([1.0 + rs * math.cos(phi), rs * math.sin(phi)], axis=1)
        # the last point of every ray (and both corners) lies on the unit circle
        xy[-1] = _unit_circle_snap(xy[-1:])[0]
        pts.append(xy)
        rows.append((np.arange(count, count + len(rs)), rs))
        count += len(rs)
    pts = np.concatenate(pts)
    tris = []
    for (ia, ra), (ib, rb) in zip(rows[:-1], rows[1:]):
        tris.extend(_zip_rows(ia, ra, ib, rb, periodic=False))
    tris = _orient_ccw(pts, np.array(tris, dtype=np.int64))

    def snap(p):
        out = p.copy()
        r_centre = np.linalg.norm(p, axis=1)
        r_cut = np.linalg.norm(p - np.array([1.0, 0.0]), axis=1)
        on_circle = np.abs(r_centre - 1) <= np.abs(r_cut - eps)
        out[on_circle] = p[on_circle] / r_centre[on_circle, None]
        cut = ~on_circle
        out[cut] = np.array([1.0, 0.0]) + (p[cut] - np.array([1.0, 0.0])) * (eps / r_cut[cut])[:, None]
        return out

    return SurfaceMesh(pts, tris, SurfaceTopology(0, 1), snap=snap, name="disc-minus-ball")


# -- refinement ----------------------------------------------------------------


def refine(mesh: SurfaceMesh) -> SurfaceMesh:
    """Uniform 1-to-4 subdivision.

    Identified edges get identified midpoints. New boundary vertices are
    snapped when the mesh knows its analytic boundary; metric edge lengths
    are re-evaluated from the length factor when there is one and otherwise
    halved (midpoint edges are half the parallel side, exact for flat faces).
    """
    verts = mesh.vertices
    edges = mesh.edges
    nv = len(verts)
    mid = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    if mesh.snap is not None:
        d = mesh.dof_of_vertex
        bset = {(min(a, b), max(a, b)) for a, b in mesh.boundary_edges.tolist()}
        on_b = np.array([(min(d[a], d[b]), max(d[a], d[b])) in bset for a, b in edges])
        if on_b.any():
            mid[on_b] = mesh.snap(mid[on_b])
    new_verts = np.concatenate([verts, mid])
    fe = mesh._face_edge_index  # edge opposite corner c
    t = mesh.triangles
    m0, m1, m2 = nv + fe[:, 0], nv + fe[:, 1], nv + fe[:, 2]
    new_tris = np.concatenate([
        np.stack([t[:, 0], m2, m1], 1),
        np.stack([m2, t[:, 1], m0], 1),
        np.stack([m1, m0, t[:, 2]], 1),
        np.stack([m0, m1, m2], 1),
    ])
    # glue midpoints of raw edges that map to the same identified edge
    d = mesh.dof_of_vertex
    dkey = _edge_key(d[edges[:, 0]], d[edges[:, 1]])
    order = np.lexsort((dkey[:, 1], dkey[:, 0]))
    glue = [tuple(p) for p in mesh.identifications.tolist()]
    for i, j in zip(order[:-1], order[1:]):
        if dkey[i, 0] == dkey[j, 0] and dkey[i, 1] == dkey[j, 1]:
            glue.append((nv + i, nv + j))
    glue = np.array(glue, dtype=np.int64).reshape(-1, 2)

    lengths = None
    if mesh.length_factor is not None:
        probe = SurfaceMesh(new_verts, new_tris, mesh.topology, glue, name=mesh.name)
        lengths = _midpoint_lengths(new_verts, probe.edges, mesh.length_factor)
    elif mesh.edge_lengths is not None:
        probe = SurfaceMesh(new_verts, new_tris, mesh.topology, glue, name=mesh.name)
        half = 0.5 * mesh.edge_lengths
        lookup = {}
        for e, L in zip(range(len(edges)), half):
            a, b = edges[e]
            lookup[(min(a, nv + e), max(a, nv + e))] = L
            lookup[(min(b, nv + e), max(b, nv + e))] = L
        for f in range(len(t)):
            for c in range(3):
                # midpoint edge opposite corner c is parallel to the face edge opposite c
                p, q = nv + fe[f, (c + 1) % 3], nv + fe[f, (c + 2) % 3]
                lookup[(min(p, q), max(p, q))] = 0.5 * mesh.edge_lengths[fe[f, c]]
        lengths = np.array([lookup[(a, b)] for a, b in probe.edges.tolist()])
    return SurfaceMesh(new_verts, new_tris, mesh.topology, glue, lengths,
                       length_factor=mesh.length_factor, snap=mesh.snap, name=mesh.name)


def disjoint_union(a: SurfaceMesh, b: SurfaceMesh, offset: float = 3.0) -> SurfaceMesh:
    """Two meshes side by side as one (disconnected) mesh."""
    shift = np.zeros(a.vertices.shape[1])
    shift[0] = offset + a.vertices[:, 0].max() - b.vertices[:, 0].min()
    verts = np.concatenate([a.vertices, b.vertices + shift])
    tris = np.concatenate([a.triangles, b.triangles + len(a.vertices)])
    glue = np.concatenate([a.identifications, b.identifications + len(a.vertices)])
    top = SurfaceTopology(a.topology.genus + b.topology.genus,
                          a.topology.boundary_components + b.topology.boundary_components,
                          a.topology.orientable and b.topology.orientable)
    probe = SurfaceMesh(verts, tris, top, glue, name="union")
    # edges of a keep their order; b's edges come after since indices are larger
    lengths = np.concatenate([a.raw_edge_lengths, b.raw_edge_lengths])
    assert len(lengths) == len(probe.edges)
    return SurfaceMesh(verts, tris, top, glue, lengths, name=f"{a.name}+{b.name}")
