import math

import numpy as np
import pytest

from steklov_lab import io as sio
from steklov_lab.mesh import (CollarChart, MeshError, SurfaceTopology, all_steklov, build_annulus_mesh,
                              build_collar_mesh, build_disc_mesh, build_disc_minus_boundary_ball,
                              build_flat_cylinder_mesh, build_graded_cylinder_mesh, build_half_disc_mesh,
                              build_moebius_mesh, build_rectangle_mesh, collar_metric_factor, collar_width,
                              disjoint_union, partition_boundary, refine)


def _vef(mesh):
    return mesh.n_dofs - len(mesh.dof_edges) + len(mesh.triangles)


@pytest.mark.parametrize("builder, chi, loops", [
    (lambda: build_disc_mesh(2), 1, 1),
    (lambda: build_half_disc_mesh(2), 1, 1),
    (lambda: build_rectangle_mesh(2.0, 1.0, 1), 1, 1),
    (lambda: build_annulus_mesh(0.4, 1), 0, 2),
    (lambda: build_flat_cylinder_mesh(1.0, 1), 0, 2),
    (lambda: build_graded_cylinder_mesh(0.5, 1), 0, 2),
    (lambda: build_moebius_mesh(1.0, 1), 0, 1),
    (lambda: build_collar_mesh(CollarChart.from_geodesic(1.0), 3.0, 1), 0, 2),
    (lambda: build_disc_minus_boundary_ball(0.2, 1), 1, 1),
])
def test_euler_characteristic_and_loops(builder, chi, loops):
    mesh = builder()
    assert _vef(mesh) == chi
    assert mesh.euler_characteristic == chi
    assert mesh.topology.euler_characteristic == chi
    assert len(mesh.boundary_loops) == loops


def test_disc_topology():
    mesh = build_disc_mesh(1)
    assert mesh.topology == SurfaceTopology(0, 1, True)


def test_moebius_is_nonorientable_genus_zero():
    mesh = build_moebius_mesh(0.7, 2)
    assert not mesh.topology.orientable
    assert mesh.topology.genus == 0
    assert len(mesh.identifications) > 0


def test_cylinder_boundary_length():
    mesh = build_flat_cylinder_mesh(1.0, 2)
    assert mesh.boundary_length == pytest.approx(4 * math.pi, rel=1e-12)
    np.testing.assert_allclose(mesh.boundary_loop_lengths, [2 * math.pi] * 2, rtol=1e-12)


def test_thin_cylinder_accepted():
    mesh = build_flat_cylinder_mesh(0.01, 1)
    assert mesh.check_triangle_inequality()
    assert _vef(mesh) == 0


@pytest.mark.parametrize("builder", [build_flat_cylinder_mesh, build_moebius_mesh])
def test_nonpositive_modulus_rejected(builder):
    with pytest.raises(MeshError):
        builder(0.0, 1)
    with pytest.raises(MeshError):
        builder(-1.0, 1)


def test_disc_max_edge_decreases():
    h = [build_disc_mesh(r).max_edge_length for r in range(1, 5)]
    assert all(b < a for a, b in zip(h, h[1:]))


def test_disc_perimeter_error_decreases_with_order_two():
    errors = [2 * math.pi - build_disc_mesh(r).boundary_length for r in range(1, 6)]
    assert all(e > 0 for e in errors)
    assert all(b < a for a, b in zip(errors, errors[1:]))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert min(orders) >= 1.9


def test_refine_counts_and_topology():
    mesh = build_disc_mesh(2)
    fine = refine(mesh)
    assert len(fine.triangles) == 4 * len(mesh.triangles)
    assert len(fine.boundary_vertices) == 2 * len(mesh.boundary_vertices)
    assert _vef(fine) == _vef(mesh)
    # new boundary vertices lie on the unit circle
    r = np.linalg.norm(fine.dof_coordinates()[fine.boundary_vertices], axis=1)
    np.testing.assert_allclose(r, 1.0, atol=1e-14)


def test_refine_moebius_keeps_topology():
    mesh = build_moebius_mesh(1.0, 1)
    fine = refine(mesh)
    assert _vef(fine) == 0
    assert len(fine.boundary_loops) == 1
    assert fine.boundary_length == pytest.approx(mesh.boundary_length, rel=1e-12)


def test_collar_width_values():
    # frozen from the closed form; the commonly quoted 6.852 is within 1e-3
    assert collar_width(1.0) == pytest.approx(6.851281, abs=1e-6)
    # independent evaluation of the closed form
    expected = (math.pi / 1.0) * (math.pi - 2 * math.atan(math.sinh(0.5)))
    assert collar_width(1.0) == pytest.approx(expected, rel=1e-15)
    assert collar_width(0.01) > 100 * collar_width(1.0)
    assert collar_width(10.0) < 0.05 * collar_width(1.0)


def test_collar_width_decreasing():
    ls = np.geomspace(0.01, 10, 200)
    w = np.array([collar_width(l) for l in ls])
    assert np.all(np.diff(w) < 0)


def test_collar_width_rejects_nonpositive():
    with pytest.raises(MeshError):
        collar_width(0.0)


def test_collar_metric_factor():
    assert collar_metric_factor(1.0, 0.0) == pytest.approx((1 / (2 * math.pi)) ** 2, rel=1e-14)
    assert collar_metric_factor(1.0, 0.0) == pytest.approx(0.02533, abs=1e-5)
    t = np.linspace(0, 0.99 * collar_width(1.0), 50)
    assert np.all(np.diff(collar_metric_factor(1.0, t)) > 0)


def test_collar_mesh_valid_and_truncation_checked():
    chart = CollarChart.from_geodesic(1.0)
    mesh = build_collar_mesh(chart, 3.0, 1)
    assert mesh.check_triangle_inequality()
    assert refine(mesh).check_triangle_inequality()
    with pytest.raises(MeshError):
        build_collar_mesh(chart, chart.width, 1)
    with pytest.raises(MeshError):
        build_collar_mesh(chart, chart.width + 1, 1)


def test_collar_longest_edge_grows_toward_width():
    chart = CollarChart.from_geodesic(1.0)
    longest = [build_collar_mesh(chart, f * chart.width, 1).max_edge_length for f in (0.5, 0.8, 0.95, 0.99)]
    assert all(b > a for a, b in zip(longest, longest[1:]))


def test_collar_strip_types():
    chart = CollarChart.from_geodesic(0.5, "crossing-strip")
    mesh = build_collar_mesh(chart, 2.0, 1)
    assert mesh.topology.boundary_components == 1
    assert len(mesh.boundary_loops) == 1
    chart = CollarChart.from_geodesic(0.5, "interior-collar")
    assert len(build_collar_mesh(chart, 2.0, 1).boundary_loops) == 2
    with pytest.raises(MeshError):
        CollarChart(1.0, 1.0, "bogus")


def test_partition_boundary():
    mesh = build_disc_mesh(2)
    part = all_steklov(mesh)
    assert part.is_pure_steklov
    half = partition_boundary(mesh, lambda p: p[:, 1] > 0)
    total = len(half.steklov_edges) + len(half.neumann_edges)
    assert total == len(mesh.boundary_edges)
    assert half.steklov_length + half.neumann_lengths.sum() == pytest.approx(mesh.boundary_length)
    with pytest.raises(MeshError, match="zero-capacity Steklov boundary"):
        partition_boundary(mesh, lambda p: np.zeros(len(p), dtype=bool))
    with pytest.raises(MeshError):
        partition_boundary(mesh, np.ones(3, dtype=bool))


def test_off_round_trip_bit_exact(tmp_path):
    for mesh in (build_moebius_mesh(1.0, 1), build_collar_mesh(CollarChart.from_geodesic(1.0), 3.0, 1),
                 build_disc_mesh(1)):
        path = tmp_path / f"{mesh.name}.off"
        sio.write_off(mesh, path)
        back = sio.read_off(path)
        np.testing.assert_array_equal(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)
        np.testing.assert_array_equal(back.identifications, mesh.identifications)
        np.testing.assert_array_equal(back.raw_edge_lengths, mesh.raw_edge_lengths)
        assert back.topology == mesh.topology
        sio.write_off(back, tmp_path / "again.off")
        assert (tmp_path / "again.off").read_text() == path.read_text()


def test_disjoint_union_components():
    mesh = disjoint_union(build_disc_mesh(1), build_disc_mesh(1))
    assert len(set(mesh.connected_components.tolist())) == 2
    assert mesh.boundary_length == pytest.approx(2 * build_disc_mesh(1).boundary_length)


def test_triangle_index_out_of_range():
    with pytest.raises(MeshError):
        build_disc_mesh(0)
    from steklov_lab.mesh import SurfaceMesh
    with pytest.raises(MeshError):
        SurfaceMesh(np.zeros((3, 2)), np.array([[0, 1, 3]]), SurfaceTopology(0, 1))
