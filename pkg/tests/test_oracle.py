import math

import numpy as np
import pytest
from scipy.optimize import brentq

from steklov_lab.oracle import (DISC, annulus_neumann_inner, disc_steklov, flat_cylinder_branches,
                                flat_cylinder_steklov, map_collar_to_annulus, map_strip_to_disc, moebius_steklov,
                                sloshing_rectangle)


def test_disc_values():
    assert disc_steklov(0) == 0
    assert disc_steklov(1) == 1
    assert 2 * math.pi * disc_steklov(1) == pytest.approx(2 * math.pi)
    assert disc_steklov(4) == 2
    assert DISC.values(7).tolist() == [0, 1, 1, 2, 2, 3, 3]


def test_sloshing_values():
    assert sloshing_rectangle(math.pi, 1.0, 1) == pytest.approx(0.76159, abs=1e-5)
    assert sloshing_rectangle(math.pi, 1.0, 0) == 0
    assert sloshing_rectangle(2.0, 50.0, 3) == pytest.approx(3 * math.pi / 2, rel=1e-12)


def test_sloshing_against_mode_equation():
    # cos(qx) cosh(qy) on [0, L] x [0, h]: the Neumann walls force q = k pi / L and sigma = q tanh(q h)
    L, h = 2.5, 0.7
    for k in range(1, 6):
        q = k * math.pi / L
        u = lambda y: math.cosh(q * y)
        du = lambda y: q * math.sinh(q * y)
        assert sloshing_rectangle(L, h, k) == pytest.approx(du(h) / u(h), rel=1e-12)


def test_cylinder_branches():
    assert flat_cylinder_branches(0, 0.5) == (0.0, 4.0)
    lo, hi = flat_cylinder_branches(1, 2.0)
    assert lo == pytest.approx(0.7616, abs=1e-4)
    assert hi == pytest.approx(1.3130, abs=1e-4)


def test_cylinder_branches_solve_mode_problem():
    # profile a cosh(n(t - h/2)) or a sinh(n(t - h/2)); sigma is -u'(0)/u(0) at the bottom circle
    h = 1.3
    for n in range(1, 5):
        for profile, expected in ((lambda t: math.cosh(n * (t - h / 2)), flat_cylinder_branches(n, h)[0]),
                                  (lambda t: math.sinh(n * (t - h / 2)), flat_cylinder_branches(n, h)[1])):
            eps = 1e-6
            deriv = (profile(eps) - profile(-eps)) / (2 * eps)
            assert -deriv / profile(0.0) == pytest.approx(expected, rel=1e-8)


def test_cylinder_sorted_union():
    h = 1.0
    vals = [0.0, 2.0 / h]
    for n in range(1, 30):
        lo, hi = flat_cylinder_branches(n, h)
        vals += [lo, lo, hi, hi]
    vals.sort()
    for k in range(40):
        assert flat_cylinder_steklov(h, k) == pytest.approx(vals[k], rel=1e-14)


def test_cylinder_small_height_branch_vanishes():
    assert all(n * math.tanh(n * 1e-6 / 2) < 1e-5 for n in range(1, 5))
    assert flat_cylinder_steklov(1e-3, 1) < 1e-3


def test_moebius_is_invariant_subsequence():
    h = 0.8
    cover = [0.0]
    for n in range(1, 40):
        lo, hi = flat_cylinder_branches(n, h)
        cover += [hi, hi] if n % 2 else [lo, lo]
    cover.sort()
    for k in range(20):
        assert moebius_steklov(h, k) == pytest.approx(cover[k], rel=1e-14)


def test_annulus_neumann_inner_mode_equation():
    # u = (r^n + c r^-n) cos(n theta) with u_r(r0) = 0 gives c = r0^(2n)
    r0 = 0.3
    for k in range(1, 7):
        n = (k + 1) // 2
        c = r0 ** (2 * n)
        sigma = n * (1 - c) / (1 + c)
        assert annulus_neumann_inner(r0, k) == pytest.approx(sigma, rel=1e-14)


@pytest.mark.parametrize("fn", [
    lambda k: flat_cylinder_steklov(0.7, k),
    lambda k: moebius_steklov(0.7, k),
    lambda k: sloshing_rectangle(1.0, 0.3, k),
    disc_steklov,
    lambda k: annulus_neumann_inner(0.5, k),
], ids=["cylinder", "moebius", "sloshing", "disc", "annulus"])
def test_oracles_non_decreasing(fn):
    vals = [fn(k) for k in range(30)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_oracle_input_errors():
    with pytest.raises(ValueError):
        disc_steklov(-1)
    with pytest.raises(ValueError):
        sloshing_rectangle(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        flat_cylinder_steklov(0.0, 1)


def test_collar_map():
    assert map_collar_to_annulus(0.0, 0.0) == pytest.approx(1 + 0j)
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(np.abs(map_collar_to_annulus(t, 1.1)), np.exp(-t), rtol=1e-14)
    alpha = 0.4
    theta = np.linspace(0, 2 * np.pi, 9)
    np.testing.assert_allclose(np.abs(map_collar_to_annulus(alpha, theta)), math.exp(-alpha), rtol=1e-14)


def _d4(g, h):
    # fourth-order central difference
    return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h)


def _cauchy_riemann_residual(f, t, theta, h=1e-3):
    """Relative residual of df/dt = i df/dtheta, the holomorphy condition in theta + i t."""
    dt = _d4(lambda s: f(t + s, theta), h)
    dth = _d4(lambda s: f(t, theta + s), h)
    return np.abs(dt - 1j * dth) / np.abs(dth)


def test_collar_map_is_conformal():
    T, TH = np.meshgrid(np.linspace(0, 2, 11), np.linspace(0, 2 * np.pi, 11))
    # exact derivatives: df/dtheta = i f, df/dt = -f
    f = map_collar_to_annulus(T, TH)
    np.testing.assert_allclose(-f, 1j * (1j * f), atol=1e-15)
    assert _cauchy_riemann_residual(map_collar_to_annulus, T, TH).max() < 1e-10


def test_strip_map():
    assert map_strip_to_disc(0.0, np.pi) == pytest.approx(0)
    assert map_strip_to_disc(0.0, 0.0) == pytest.approx(-1)
    assert map_strip_to_disc(0.0, 2 * np.pi) == pytest.approx(1)
    t = np.linspace(-20, 20, 401)
    for theta in (0.0, 2 * np.pi):
        assert np.max(np.abs(np.abs(map_strip_to_disc(t, theta)) - 1)) < 1e-12
    T, TH = np.meshgrid(np.linspace(-3, 3, 13), np.linspace(0.1, 2 * np.pi - 0.1, 13))
    assert np.all(np.abs(map_strip_to_disc(T, TH)) < 1)
    assert _cauchy_riemann_residual(map_strip_to_disc, T, TH).max() < 1e-10


def test_sloshing_root_table():
    # the first sloshing value on L = pi, h = 1 solves sigma = tanh(1) independently via root finding
    root = brentq(lambda s: s - math.tanh(1.0), 0.1, 2.0, xtol=1e-14)
    assert sloshing_rectangle(math.pi, 1.0, 1) == pytest.approx(root, abs=1e-12)
