import numpy as np
import pytest
import scipy.io
import scipy.linalg

from steklov_lab.fem import (AssemblyError, BoundaryDensity, assemble_boundary_mass, assemble_stiffness,
                             cotangent_weights, dump_matrix, schur_dtn)
from steklov_lab.mesh import (SurfaceMesh, SurfaceTopology, all_steklov, build_annulus_mesh, build_disc_mesh,
                              build_moebius_mesh, partition_boundary)
from steklov_lab.spectrum import BoundaryPencil


def _triangle(points):
    return SurfaceMesh(np.asarray(points, float), np.array([[0, 1, 2]]), SurfaceTopology(0, 1))


def test_right_isosceles_cotangents():
    mesh = _triangle([[0, 0], [1, 0], [0, 1]])
    w = cotangent_weights(mesh.face_lengths)[0]
    # corner 0 is the right angle, corners 1 and 2 are 45 degrees
    np.testing.assert_allclose(w, [0.0, 0.5, 0.5], atol=1e-15)
    K = assemble_stiffness(mesh).toarray()
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    np.testing.assert_allclose(K, expected, atol=1e-15)


def test_degenerate_triangle_named():
    mesh = _triangle([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(AssemblyError, match="face 0"):
        assemble_stiffness(mesh)


@pytest.mark.parametrize("mesh", [build_disc_mesh(2), build_annulus_mesh(0.3, 1), build_moebius_mesh(1.0, 1)],
                         ids=["disc", "annulus", "moebius"])
def test_stiffness_kernel_and_symmetry(mesh):
    K = assemble_stiffness(mesh)
    assert abs(K - K.T).max() == 0
    np.testing.assert_allclose(K @ np.ones(mesh.n_dofs), 0.0, atol=1e-12)
    evals = np.linalg.eigvalsh(K.toarray())
    assert np.sum(evals < 1e-10) == 1


def test_stiffness_scale_invariant():
    mesh = build_disc_mesh(2)
    K1 = assemble_stiffness(mesh).toarray()
    K2 = assemble_stiffness(mesh.scaled(3.7)).toarray()
    np.testing.assert_allclose(K1, K2, atol=1e-13)


def test_mass_partition_of_unity_and_linearity():
    mesh = build_disc_mesh(2)
    part = all_steklov(mesh)
    one = np.ones(mesh.n_dofs)
    M = assemble_boundary_mass(mesh, part, BoundaryDensity.uniform(mesh))
    assert one @ M @ one == pytest.approx(mesh.boundary_length, rel=1e-13)
    M2 = assemble_boundary_mass(mesh, part, BoundaryDensity.uniform(mesh, 2.0))
    np.testing.assert_allclose(M2.toarray(), 2 * M.toarray(), rtol=1e-14)


def test_mass_total_is_weighted_length():
    mesh = build_disc_mesh(2)
    part = all_steklov(mesh)
    w = np.linspace(0.5, 2.0, len(mesh.boundary_vertices))
    M = assemble_boundary_mass(mesh, part, BoundaryDensity(w))
    pencil = BoundaryPencil(mesh)
    one = np.ones(mesh.n_dofs)
    assert one @ M @ one == pytest.approx(pencil.length(pencil.steklov_weights(BoundaryDensity(w))), rel=1e-13)


def test_mass_is_exact_for_linear_weights():
    # one edge of length 2 with w going 1 -> 3: integral of w phi_a^2 = L (3 wa + wb) / 12
    mesh = _triangle([[0, 0], [2, 0], [0, 1]])
    part = partition_boundary(mesh, lambda p: np.abs(p[:, 1]) < 1e-12)
    w = np.ones(3)
    w[np.searchsorted(mesh.boundary_vertices, 0)] = 1.0
    w[np.searchsorted(mesh.boundary_vertices, 1)] = 3.0
    M = assemble_boundary_mass(mesh, part, BoundaryDensity(w)).toarray()
    assert M[0, 0] == pytest.approx(2 * (3 * 1 + 3) / 12)
    assert M[1, 1] == pytest.approx(2 * (1 + 9) / 12)
    assert M[0, 1] == pytest.approx(2 * 4 / 12)


def test_neumann_rows_are_zero():
    mesh = build_disc_mesh(2)
    part = partition_boundary(mesh, lambda p: p[:, 1] > 0)
    M = assemble_boundary_mass(mesh, part, BoundaryDensity.uniform(mesh)).toarray()
    on_steklov = np.zeros(mesh.n_dofs, dtype=bool)
    on_steklov[part.steklov_vertices] = True
    assert np.all(M[~on_steklov] == 0)
    assert np.all(M[:, ~on_steklov] == 0)


def test_nonpositive_density_rejected():
    with pytest.raises(AssemblyError):
        BoundaryDensity(np.array([1.0, 0.0, 2.0]))
    with pytest.raises(AssemblyError):
        BoundaryDensity(np.array([1.0, -1.0]))


def test_single_triangle_dtn_equals_stiffness():
    mesh = _triangle([[0, 0], [1, 0], [0.3, 0.8]])
    K = assemble_stiffness(mesh)
    dtn = schur_dtn(K, all_steklov(mesh), mesh)
    np.testing.assert_allclose(dtn.matrix, K.toarray(), atol=1e-15)


@pytest.mark.parametrize("mesh", [build_disc_mesh(2), build_annulus_mesh(0.3, 1), build_moebius_mesh(1.0, 1)],
                         ids=["disc", "annulus", "moebius"])
def test_dtn_kernel_symmetry_psd(mesh):
    dtn = schur_dtn(assemble_stiffness(mesh), all_steklov(mesh), mesh).matrix
    np.testing.assert_allclose(dtn @ np.ones(len(dtn)), 0.0, atol=1e-10)
    assert np.linalg.norm(dtn - dtn.T) <= 1e-12 * np.linalg.norm(dtn)
    evals = np.linalg.eigvalsh(dtn)
    assert evals.min() >= -1e-10 * np.abs(evals).max()


def test_schur_matches_full_pencil():
    mesh = build_disc_mesh(1)
    part = partition_boundary(mesh, lambda p: p[:, 0] > -0.5)
    density = BoundaryDensity(np.linspace(0.7, 1.4, len(mesh.boundary_vertices)))
    K = assemble_stiffness(mesh).toarray()
    M = assemble_boundary_mass(mesh, part, density).toarray()
    # full pencil: finite eigenvalues of K v = s M v via the pencil (M, K + M), mu = 1 / (1 + s)
    mu = scipy.linalg.eigh(M, K + M, eigvals_only=True)
    finite = np.sort(1.0 / mu[mu > 1e-12] - 1.0)
    reduced = BoundaryPencil(mesh, part).solve(density, len(part.steklov_vertices) - 1).eigenvalues
    m = len(reduced)
    np.testing.assert_allclose(reduced, finite[:m], rtol=1e-9, atol=1e-9)


def test_unpinned_component_reported():
    from steklov_lab.mesh import disjoint_union
    mesh = disjoint_union(build_disc_mesh(1), build_disc_mesh(1))
    part = partition_boundary(mesh, lambda p: p[:, 0] < 1.5)
    with pytest.raises(AssemblyError, match="fails to pin the kernel"):
        schur_dtn(assemble_stiffness(mesh), part, mesh)


def test_matrix_market_dump(tmp_path):
    K = assemble_stiffness(build_disc_mesh(1))
    dump_matrix(tmp_path / "k.mtx", K)
    back = scipy.io.mmread(str(tmp_path / "k.mtx"))
    np.testing.assert_array_equal(back.toarray(), K.toarray())


def test_assembly_is_bit_reproducible():
    mesh = build_disc_mesh(3)
    a = assemble_stiffness(mesh)
    b = assemble_stiffness(build_disc_mesh(3))
    assert np.array_equal(a.data, b.data) and np.array_equal(a.indices, b.indices)
