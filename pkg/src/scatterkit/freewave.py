"""Free regular solution of the radial equation and its zeros.

For V = 0 the regular solution at energy E = k^2 is

    psi(r) = N(ell, k) * s_ell(k r),   s_ell(x) = sqrt(pi x / 2) J_{ell+1/2}(x),

with N chosen so that psi ~ r^(ell+1) near the origin.  Real ell with
2 ell + 1 > 0 is supported throughout via Bessel functions of real order
lam = ell + 1/2.  The positive zeros of s_ell (equivalently of J_lam) are
the free nodal radii x_{lam,n} / k.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma, jv, jvp, yv, yvp

from .errors import DomainError

__all__ = [
    "riccati_s",
    "riccati_c",
    "regular_normalization",
    "free_regular_psi",
    "free_zero",
    "count_free_zeros",
]


def _check_ell(ell: float) -> float:
    lam = ell + 0.5
    if lam <= 0.0:
        raise DomainError("need 2*ell + 1 > 0")
    return lam


def riccati_s(ell: float, x):
    """s_ell(x) = sqrt(pi x/2) J_{ell+1/2}(x) and its derivative in x."""
    lam = _check_ell(ell)
    x = np.asarray(x, dtype=float)
    root = np.sqrt(0.5 * np.pi * x)
    s = root * jv(lam, x)
    ds = root * jvp(lam, x) + 0.25 * np.pi * jv(lam, x) / root
    return s, ds


def riccati_c(ell: float, x):
    """c_ell(x) = -sqrt(pi x/2) Y_{ell+1/2}(x) and its derivative in x.

    Asymptotically s -> sin(x - ell pi/2) and c -> cos(x - ell pi/2).
    """
    lam = _check_ell(ell)
    x = np.asarray(x, dtype=float)
    root = np.sqrt(0.5 * np.pi * x)
    c = -root * yv(lam, x)
    dc = -root * yvp(lam, x) - 0.25 * np.pi * yv(lam, x) / root
    return c, dc


def regular_normalization(ell: float, k: float) -> float:
    """N with N * s_ell(k r) = r^(ell+1) (1 + O(r^2)) near the origin.

    Generalizes (2 ell + 1)!! / k^(ell+1) to real ell.
    """
    lam = _check_ell(ell)
    return gamma(lam + 1.0) * 2.0 ** (ell + 1.0) / (math.sqrt(math.pi) * k ** (ell + 1.0))


def free_regular_psi(ell: float, energy: float, r):
    """Closed-form regular solution for V = 0 at positive energy."""
    if energy <= 0.0:
        raise DomainError("free closed form implemented for E > 0 only")
    k = math.sqrt(energy)
    s, ds = riccati_s(ell, k * np.asarray(r, dtype=float))
    n = regular_normalization(ell, k)
    return n * s, n * k * ds


def _jv_sign(lam: float, x: np.ndarray) -> np.ndarray:
    return np.sign(jv(lam, x))


def free_zero(ell: float, n: int) -> float:
    """n-th positive zero x_{lam,n} of s_ell (n >= 1).

    Consecutive zeros of J_lam are separated by more than 3 for lam > 0,
    so a unit-step scan cannot skip one.
    """
    lam = _check_ell(ell)
    if n < 1:
        raise DomainError("zero index n must be >= 1")
    # no zeros below lam; McMahon gives the rough upper scale
    x = max(lam, 1e-3)
    found = 0
    step = 1.0
    f_prev = jv(lam, x)
    for _ in range(100000):
        x_next = x + step
        f_next = jv(lam, x_next)
        if f_prev == 0.0:
            found += 1
            if found == n:
                return x
        elif f_prev * f_next < 0.0:
            found += 1
            if found == n:
                return brentq(lambda t: jv(lam, t), x, x_next, xtol=1e-14, rtol=1e-15)
        x, f_prev = x_next, f_next
    raise DomainError("free zero scan failed to converge")


def count_free_zeros(ell: float, x_max: float) -> int:
    """Number of positive zeros of s_ell in (0, x_max]."""
    lam = _check_ell(ell)
    if x_max <= lam:
        return 0
    grid = np.arange(max(lam, 1e-3), x_max + 1.0, 1.0)
    grid[-1] = x_max
    if grid[-1] <= grid[0]:
        return 0
    signs = _jv_sign(lam, grid)
    flips = int(np.sum(signs[:-1] * signs[1:] < 0.0))
    zeros_on_grid = int(np.sum(signs == 0.0))
    return flips + zeros_on_grid
