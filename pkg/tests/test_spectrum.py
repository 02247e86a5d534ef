import math

import numpy as np
import pytest

from steklov_lab.fem import BoundaryDensity
from steklov_lab.mesh import (all_steklov, build_annulus_mesh, build_disc_mesh, build_flat_cylinder_mesh,
                              build_half_disc_mesh, build_moebius_mesh, build_rectangle_mesh, disjoint_union,
                              partition_boundary)
from steklov_lab.oracle import (annulus_neumann_inner, disc_steklov, flat_cylinder_steklov, moebius_steklov,
                                sloshing_rectangle)
from steklov_lab.spectrum import (BoundaryPencil, CompositionTable, SpectrumError, brute_force_disjoint,
                                  brute_force_limit, cluster_ids, combine_disjoint, degeneration_limit,
                                  mixed_spectrum, normalized_value, steklov_spectrum)


def _rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


def _richardson(coarse, fine, order=2):
    return fine + (fine - coarse) / (2 ** order - 1)


def test_disc_spectrum_matches_oracle():
    spec = steklov_spectrum(build_disc_mesh(4), count=6)
    expected = [disc_steklov(k) for k in range(7)]
    assert abs(spec.eigenvalues[0]) <= 1e-9 * spec.eigenvalues[1]
    assert np.all(_rel(spec.eigenvalues[1:], expected[1:]) < 5e-3)
    assert spec.sigma_bar(1) == pytest.approx(2 * math.pi, rel=2e-3)


def test_first_eigenvector_is_constant_and_mass_orthonormal():
    mesh = build_disc_mesh(3)
    spec = steklov_spectrum(mesh, BoundaryDensity(np.linspace(0.5, 1.5, len(mesh.boundary_vertices))), count=5)
    v0 = spec.eigenvectors[:, 0]
    np.testing.assert_allclose(v0, v0[0], rtol=1e-8)
    gram = spec.eigenvectors.T @ spec.mass @ spec.eigenvectors
    assert np.abs(gram - np.eye(len(gram))).max() <= 1e-8


@pytest.mark.parametrize("name, builder, oracle, selector", [
    ("cylinder", lambda r: build_flat_cylinder_mesh(1.0, r), lambda k: flat_cylinder_steklov(1.0, k), None),
    ("moebius", lambda r: build_moebius_mesh(1.0, r), lambda k: moebius_steklov(1.0, k), None),
    ("sloshing", lambda r: build_rectangle_mesh(math.pi, 1.0, r + 1), lambda k: sloshing_rectangle(math.pi, 1.0, k),
     lambda p: p[:, 1] > 1 - 1e-12),
    ("annulus-neumann", lambda r: build_annulus_mesh(0.3, r), lambda k: annulus_neumann_inner(0.3, k),
     lambda p: np.linalg.norm(p, axis=1) > 0.65),
])
def test_oracles_with_richardson(name, builder, oracle, selector):
    vals = []
    for r in (2, 3):
        mesh = builder(r)
        if selector is None:
            vals.append(steklov_spectrum(mesh, count=5).eigenvalues)
        else:
            vals.append(mixed_spectrum(mesh, partition_boundary(mesh, selector), count=5).eigenvalues)
    extrapolated = _richardson(vals[0][1:], vals[1][1:])
    expected = [oracle(k) for k in range(1, 6)]
    assert np.all(_rel(extrapolated, expected) < 5e-3), name


def test_cylinder_second_branch_is_two_over_h():
    spec = steklov_spectrum(build_flat_cylinder_mesh(1.0, 2), count=6)
    # with h = 1 the n = 0 antisymmetric mode 2/h = 2 appears at index 5
    assert spec.eigenvalues[5] == pytest.approx(2.0, rel=1e-12)


def test_half_disc_equals_even_disc_modes():
    mesh = build_half_disc_mesh(4)
    part = partition_boundary(mesh, lambda p: p[:, 1] > 1e-12)
    spec = mixed_spectrum(mesh, part, count=4)
    np.testing.assert_allclose(spec.eigenvalues[1:5], [1, 2, 3, 4], rtol=2e-2)
    assert spec.steklov_length == pytest.approx(math.pi, rel=1e-3)


def test_sloshing_first_value():
    mesh = build_rectangle_mesh(math.pi, 1.0, 4)
    spec = mixed_spectrum(mesh, partition_boundary(mesh, lambda p: p[:, 1] > 1 - 1e-12), count=1)
    assert spec.eigenvalues[1] == pytest.approx(0.7616, rel=1e-3)


def test_empty_neumann_matches_pure_steklov():
    mesh = build_disc_mesh(3)
    a = steklov_spectrum(mesh, count=6).eigenvalues
    b = mixed_spectrum(mesh, all_steklov(mesh), count=6).eigenvalues
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_homothety():
    mesh = build_disc_mesh(2)
    w = np.linspace(0.4, 2.5, len(mesh.boundary_vertices))
    d = BoundaryDensity(w)
    base = steklov_spectrum(mesh, d, count=5)
    scaled = steklov_spectrum(mesh, d.scaled_metric(9.0), count=5)
    np.testing.assert_allclose(scaled.eigenvalues[1:], base.eigenvalues[1:] / 3.0, rtol=1e-10)
    np.testing.assert_allclose(scaled.normalized[1:], base.normalized[1:], rtol=1e-10)


def test_too_many_modes_requested():
    mesh = build_disc_mesh(1)
    with pytest.raises(SpectrumError, match="requested modes exceed discrete space"):
        steklov_spectrum(mesh, count=len(mesh.boundary_vertices))


def test_union_spectrum_is_sorted_merge():
    a, b = build_disc_mesh(2), build_annulus_mesh(0.5, 1)
    n = 8
    su = steklov_spectrum(disjoint_union(a, b), count=n).eigenvalues
    sa = steklov_spectrum(a, count=n).eigenvalues
    sb = steklov_spectrum(b, count=n).eigenvalues
    merged = np.sort(np.concatenate([sa, sb]))[: n + 1]
    np.testing.assert_allclose(su, merged, atol=1e-9, rtol=1e-9)


def test_union_law_at_optimal_scaling():
    """Giving each component boundary length V_i[k_i] realises the composition value."""
    a, b = build_disc_mesh(2), build_annulus_mesh(0.5, 1)
    union = disjoint_union(a, b)
    pencil = BoundaryPencil(union)
    na = len(a.boundary_vertices)
    Va = steklov_spectrum(a, count=8).eigenvalues * a.boundary_length
    Vb = steklov_spectrum(b, count=8).eigenvalues * b.boundary_length
    Va[0] = Vb[0] = 0.0
    for k in range(2, 7):
        # both components carry a positive index; the union keeps one zero mode per component
        ka = max(range(1, k), key=lambda i: Va[i] + Vb[k - i])
        target = Va[ka] + Vb[k - ka]
        w = np.empty(len(union.boundary_vertices))
        w[:na] = Va[ka] / a.boundary_length
        w[na:] = Vb[k - ka] / b.boundary_length
        spec = pencil.solve(BoundaryDensity(w), k + 1)
        assert spec.sigma_bar(k) == pytest.approx(target, rel=1e-9)
        # no other split of the boundary length does better
        for share in np.linspace(0.05, 0.95, 19):
            w[:na] = share / a.boundary_length
            w[na:] = (1 - share) / b.boundary_length
            assert pencil.solve(BoundaryDensity(w), k + 1).sigma_bar(k) <= target * (1 + 1e-9)
        tables = CompositionTable.from_lists([Va[: k + 1], Vb[: k + 1]])
        assert combine_disjoint(tables, k) == pytest.approx(max(target, Va[k], Vb[k]), rel=1e-12)


def test_normalized_value():
    assert normalized_value(1.0, 2 * math.pi) == 2 * math.pi
    assert normalized_value(0.0, 3.0) == 0.0
    with pytest.raises(SpectrumError):
        normalized_value(1.0, 0.0)


def test_cluster_ids():
    ids = cluster_ids(np.array([0.0, 1.0, 1.0 + 1e-9, 2.0, 2.0 + 1e-3]))
    assert ids.tolist() == [0, 1, 1, 2, 3]


# -- composition laws ---------------------------------------------------------


def test_combine_disjoint_examples():
    t = CompositionTable.from_lists([[0, 3, 7], [0, 4, 5]])
    assert combine_disjoint(t, 2) == 7
    single = CompositionTable.from_lists([[0, 1.5, 2.5, 9.0]])
    for k in (1, 2, 3):
        assert combine_disjoint(single, k) == single.component_tables[0][k]
    disc = [2 * math.pi * r for r in range(7)]
    many = CompositionTable.from_lists([disc, disc, disc])
    for k in range(1, 7):
        assert combine_disjoint(many, k) == pytest.approx(2 * math.pi * k, rel=1e-15)


def test_degeneration_limit_examples():
    only_disc = CompositionTable((), disc_count=1)
    for k in range(1, 6):
        assert degeneration_limit(only_disc, k) == pytest.approx(2 * math.pi * k, rel=1e-15)
    t = CompositionTable.from_lists([[0, 9, 13]], disc_count=1)
    assert degeneration_limit(t, 2) == pytest.approx(9 + 2 * math.pi, rel=1e-15)
    assert degeneration_limit(t, 2) == pytest.approx(15.28, abs=5e-3)
    for tables in ([[0, 3.0]], [[0, 7.0], [0, 5.0]]):
        ct = CompositionTable.from_lists(tables, disc_count=1)
        assert degeneration_limit(ct, 1) == max(max(tb[1] for tb in tables), 2 * math.pi)


def test_composition_errors():
    with pytest.raises(SpectrumError):
        combine_disjoint(CompositionTable.from_lists([[0, 1]]), 3)
    with pytest.raises(SpectrumError):
        combine_disjoint(CompositionTable.from_lists([[0, 1]]), 0)
    with pytest.raises(SpectrumError):
        CompositionTable.from_lists([[1, 2]])
    with pytest.raises(SpectrumError):
        CompositionTable.from_lists([[0, 3, 2]])
    with pytest.raises(SpectrumError):
        degeneration_limit(CompositionTable.from_lists([[0, 1]]), 2)


def test_dp_matches_brute_force_small(rng):
    for _ in range(50):
        tables = [np.concatenate([[0], np.sort(rng.uniform(0, 100, rng.integers(1, 7)))])
                  for _ in range(rng.integers(1, 5))]
        ct = CompositionTable.from_lists(tables, disc_count=int(rng.integers(0, 3)))
        k = int(rng.integers(1, 7))
        try:
            expected = brute_force_disjoint(ct, k)
        except SpectrumError:
            with pytest.raises(SpectrumError):
                combine_disjoint(ct, k)
        else:
            assert combine_disjoint(ct, k) == expected
        if ct.disc_count:
            assert degeneration_limit(ct, k) == brute_force_limit(ct, k)


def test_pencil_reuse_is_deterministic():
    mesh = build_disc_mesh(2)
    pencil = BoundaryPencil(mesh)
    d = BoundaryDensity(np.linspace(1, 2, len(mesh.boundary_vertices)))
    a = pencil.solve(d, 5).eigenvalues
    b = pencil.solve(d, 5).eigenvalues
    assert np.array_equal(a, b)
