"""Closed-form reference spectra and the explicit conformal charts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "OracleSpectrum",
    "disc_steklov",
    "sloshing_rectangle",
    "flat_cylinder_steklov",
    "flat_cylinder_branches",
    "annulus_neumann_inner",
    "moebius_steklov",
    "map_collar_to_annulus",
    "map_strip_to_disc",
    "DISC",
]


@dataclass(frozen=True)
class OracleSpectrum:
    problem: str
    generator: Callable[[int], float]
    note: str = ""

    def __call__(self, k: int) -> float:
        return self.generator(k)

    def values(self, count: int) -> np.ndarray:
        return np.array([self.generator(k) for k in range(count)])


def disc_steklov(k: int) -> float:
    """k-th Steklov eigenvalue of the unit disc: 0, 1, 1, 2, 2, ..."""
    if k < 0:
        raise ValueError("index must be non-negative")
    return float((k + 1) // 2)


def sloshing_rectangle(L: float, h: float, k: int) -> float:
    """Sloshing eigenvalue of [0, L] x [0, h], Steklov on one side of length L."""
    if L <= 0 or h <= 0:
        raise ValueError("rectangle sides must be positive")
    if k < 0:
        raise ValueError("index must be non-negative")
    q = k * math.pi / L
    return q * math.tanh(q * h)


def flat_cylinder_branches(n: int, h: float) -> tuple:
    """Eigenvalue pair of the circular mode n on S^1(2pi) x [0, h].

    n = 0 gives (0, 2/h); n >= 1 gives (n tanh(nh/2), n coth(nh/2)), the
    t-symmetric and t-antisymmetric profiles.
    """
    if n == 0:
        return 0.0, 2.0 / h
    x = n * h / 2.0
    return n * math.tanh(x), n / math.tanh(x)


def flat_cylinder_steklov(h: float, k: int) -> float:
    """k-th Steklov eigenvalue of the flat cylinder of circumference 2pi and height h."""
    if h <= 0:
        raise ValueError("height must be positive")
    if k < 0:
        raise ValueError("index must be non-negative")
    n_max = 1
    while True:
        vals = list(flat_cylinder_branches(0, h))
        for n in range(1, n_max + 1):
            lo, hi = flat_cylinder_branches(n, h)
            vals += [lo, lo, hi, hi]
        vals.sort()
        # every value from modes above n_max is at least (n_max+1) tanh((n_max+1)h/2)
        floor = flat_cylinder_branches(n_max + 1, h)[0]
        if k < len(vals) and vals[k] <= floor:
            return vals[k]
        n_max *= 2


def moebius_steklov(h: float, k: int) -> float:
    """k-th Steklov eigenvalue of the flat Moebius band whose double cover has height h.

    Eigenfunctions are the cover's modes invariant under (theta, t) -> (theta + pi, -t):
    odd n with the t-antisymmetric profile, even n with the symmetric one.
    """
    if h <= 0:
        raise ValueError("height must be positive")
    vals = [0.0]
    n = 1
    while len(vals) <= k + 2 or vals[k] > n * math.tanh(n * h / 2.0):
        lo, hi = flat_cylinder_branches(n, h)
        vals += [hi, hi] if n % 2 else [lo, lo]
        vals.sort()
        n += 1
    return vals[k]


def annulus_neumann_inner(inner_radius: float, k: int) -> float:
    """Disc with a Neumann hole of radius r0 at the centre, Steklov on |z| = 1.

    Mode n gives n (1 - r0^(2n)) / (1 + r0^(2n)); n = 0 gives 0. Each n >= 1 twice.
    """
    if k == 0:
        return 0.0
    n = (k + 1) // 2
    q = inner_radius ** (2 * n)
    return n * (1 - q) / (1 + q)


def map_collar_to_annulus(t, theta):
    """Collar chart (t, theta) -> exp(i(theta + i t)); t = 0 lands on the unit circle."""
    return np.exp(1j * (np.asarray(theta) + 1j * np.asarray(t)))


def map_strip_to_disc(t, theta):
    """Strip chart (t, theta), theta in [0, 2pi] -> tan((theta - pi + i t) / 4)."""
    return np.tan((np.asarray(theta) - np.pi + 1j * np.asarray(t)) / 4.0)


DISC = OracleSpectrum("disc", disc_steklov, "separation of variables r^n cos/sin(n theta)")
