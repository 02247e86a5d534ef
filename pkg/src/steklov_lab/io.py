"""Plain-text persistence: OFF meshes with intrinsic lengths, spectrum CSVs, density dumps.

OFF files carry two extra comment records so a mesh round-trips exactly:
``#edgelen i j L`` for every raw edge length and ``#glue i j`` for every
vertex identification. Floats are written with ``repr`` so reading back is
bit-identical.
"""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Union

import numpy as np

from .fem import BoundaryDensity
from .mesh import MeshError, SurfaceMesh, SurfaceTopology
from .spectrum import SteklovSpectrum, cluster_ids

__all__ = [
    "write_off",
    "read_off",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_density",
    "read_density",
    "write_trace_csv",
]

PathLike = Union[str, Path]


def _f(x: float) -> str:
    return repr(float(x))


def write_off(mesh: SurfaceMesh, path: PathLike) -> None:
    buf = _io.StringIO()
    buf.write("OFF\n")
    buf.write(f"#name {mesh.name}\n")
    buf.write(f"#topology {mesh.topology.genus} {mesh.topology.boundary_components} "
              f"{int(mesh.topology.orientable)}\n")
    verts = np.asarray(mesh.vertices, dtype=float)
    pts3 = np.zeros((len(verts), 3))
    pts3[:, : verts.shape[1]] = verts
    buf.write(f"{len(verts)} {len(mesh.triangles)} 0\n")
    for p in pts3:
        buf.write(" ".join(_f(c) for c in p) + "\n")
    for t in mesh.triangles:
        buf.write(f"3 {int(t[0])} {int(t[1])} {int(t[2])}\n")
    if mesh.edge_lengths is not None:
        for (i, j), L in zip(mesh.edges, mesh.raw_edge_lengths):
            buf.write(f"#edgelen {int(i)} {int(j)} {_f(L)}\n")
    for i, j in mesh.identifications:
        buf.write(f"#glue {int(i)} {int(j)}\n")
    Path(path).write_text(buf.getvalue())


def read_off(path: PathLike) -> SurfaceMesh:
    """Read a mesh written by :func:`write_off` (plain OFF files also load)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "OFF":
        raise MeshError(f"{path}: not an OFF file")
    name, topo = "mesh", None
    lengths, glue, body = [], [], []
    for line in lines[1:]:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            parts = s[1:].split()
            if parts[0] == "edgelen":
                lengths.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif parts[0] == "glue":
                glue.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "name":
                name = " ".join(parts[1:])
            elif parts[0] == "topology":
                topo = SurfaceTopology(int(parts[1]), int(parts[2]), bool(int(parts[3])))
            continue
        body.append(s)
    nv, nf, _ = (int(v) for v in body[0].split()[:3])
    pts = np.array([[float(c) for c in body[1 + i].split()[:3]] for i in range(nv)])
    if np.all(pts[:, 2] == 0):
        pts = pts[:, :2]
    tris = []
    for i in range(nf):
        parts = body[1 + nv + i].split()
        if int(parts[0]) != 3:
            raise MeshError(f"{path}: only triangular faces are supported")
        tris.append([int(p) for p in parts[1:4]])
    tris = np.array(tris, dtype=int)
    glue_arr = np.array(glue, dtype=np.int64).reshape(-1, 2)
    if topo is None:
        raise MeshError(f"{path}: missing #topology record")
    mesh = SurfaceMesh(pts, tris, topo, glue_arr, name=name)
    if lengths:
        table = {(min(i, j), max(i, j)): L for i, j, L in lengths}
        try:
            raw = np.array([table[(int(i), int(j))] for i, j in mesh.edges])
        except KeyError as err:
            raise MeshError(f"{path}: #edgelen records do not cover edge {err.args[0]}") from None
        mesh = SurfaceMesh(pts, tris, topo, glue_arr, raw, name=name)
    return mesh


def write_spectrum_csv(spectrum: SteklovSpectrum, path: PathLike) -> None:
    """Columns k, sigma, sigma_bar, cluster_id with round-trip float formatting."""
    ids = cluster_ids(spectrum.eigenvalues)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "sigma", "sigma_bar", "cluster_id"])
        for k, (s, c) in enumerate(zip(spectrum.eigenvalues, ids)):
            w.writerow([k, _f(s), _f(s * spectrum.boundary_length), int(c)])


def read_spectrum_csv(path: PathLike) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "k": np.array([int(r["k"]) for r in rows]),
        "sigma": np.array([float(r["sigma"]) for r in rows]),
        "sigma_bar": np.array([float(r["sigma_bar"]) for r in rows]),
        "cluster_id": np.array([int(r["cluster_id"]) for r in rows]),
    }


def write_density(mesh: SurfaceMesh, density: BoundaryDensity, path: PathLike) -> None:
    """One line per boundary vertex: dof index and weight."""
    lines = [f"# boundary density for {mesh.name}: dof weight"]
    for v, w in zip(mesh.boundary_vertices, density.weights):
        lines.append(f"{int(v)} {_f(w)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_density(mesh: SurfaceMesh, path: PathLike) -> BoundaryDensity:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    dofs = np.array([int(r[0]) for r in rows])
    if not np.array_equal(dofs, mesh.boundary_vertices):
        raise MeshError(f"{path}: density does not match the boundary of {mesh.name}")
    return BoundaryDensity(np.array([float(r[1]) for r in rows]))


def write_trace_csv(trace, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "sigma_bar", "step", "cluster_size", "weight_ratio"])
        for it, val, step, size, ratio in trace:
            w.writerow([int(it), _f(val), _f(step), int(size), _f(ratio)])
