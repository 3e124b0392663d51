"""JWKB phase shifts and classical turning points.

The JWKB phase shift (no Coulomb component, lam = ell + 1/2, E = k^2) is

    delta = lim_{r->inf} [ int_{r_t}^r K dr' - int_{lam/k}^r K_free dr' ],
    K = sqrt(k^2 - V(r) - lam^2/r^2),   K_free = sqrt(k^2 - lam^2/r^2),

with r_t the (assumed unique) turning point K(r_t) = 0.  Both integrands
tend to k, so the divergent parts cancel; here the free integral is done in
closed form, the interacting one with a sqrt substitution at the turning
point, and the remainder beyond a large radius as the difference
-V / (K + K_free), which inherits the potential's decay.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from ..errors import DomainError, TurningPointError
from ..potentials import RadialPotential

__all__ = ["turning_point", "jwkb_phase_shift"]


def _f(potential, lam, k, r):
    return k * k - float(potential.evaluate(r)) - (lam / r) ** 2


def turning_point(potential: RadialPotential, lam: float, k: float,
                  r_hi: float | None = None, n_scan: int = 400) -> float:
    """Unique root of k^2 - V(r) - lam^2/r^2 = 0.

    Scans a log grid (augmented with the potential's discontinuities) for
    sign changes; exactly one is required, otherwise a TurningPointError
    lists every bracketing pair found.
    """
    if lam <= 0.0 or k <= 0.0:
        raise DomainError("need lam > 0 and k > 0")
    r_free = lam / k
    r_lo = 1e-3 * r_free
    if r_hi is None:
        r_hi = max(50.0 * r_free, 3.0 * potential.negligible_radius(1e-10), 10.0)
    grid = np.geomspace(r_lo, r_hi, n_scan)
    extra = [b for b in potential.discontinuities() if r_lo < b < r_hi]
    if extra:
        eps = 1e-12
        grid = np.unique(np.concatenate(
            [grid, [b * (1 - eps) for b in extra], [b * (1 + eps) for b in extra]]))
    vals = k * k - np.asarray(potential.evaluate(grid)) - (lam / grid) ** 2
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0.0)[0]
    brackets = [(float(grid[i]), float(grid[i + 1])) for i in flips]
    if len(brackets) != 1:
        raise TurningPointError(
            f"expected one turning point, found {len(brackets)} sign changes",
            brackets=brackets)
    lo, hi = brackets[0]
    return brentq(lambda r: _f(potential, lam, k, r), lo, hi, xtol=1e-14)


def _free_action(lam, k, r):
    """int_{lam/k}^{r} sqrt(k^2 - lam^2/r'^2) dr' in closed form."""
    x = k * r
    return math.sqrt(max(x * x - lam * lam, 0.0)) - lam * math.acos(min(lam / x, 1.0))


def jwkb_phase_shift(potential: RadialPotential, lam: float, k: float,
                     r_infinity: float | None = None) -> float:
    """JWKB phase shift for a single-turning-point potential.

    The sqrt singularity at the turning point is removed by r = r_t + u^2;
    beyond ``r_infinity`` (chosen from the potential's decay) the
    integrand difference is evaluated as -V / (K + K_free) and integrated
    to infinity.  Raises TurningPointError if the turning point is not
    unique.
    """
    rt = turning_point(potential, lam, k)
    r_free = lam / k
    if r_infinity is None:
        r_infinity = max(3.0 * max(rt, r_free),
                         potential.negligible_radius(1e-11 * k),
                         rt + 5.0)

    def k_local(r):
        return math.sqrt(max(_f(potential, lam, k, r), 0.0))

    u_max = math.sqrt(r_infinity - rt)
    main, _ = quad(lambda u: 2.0 * u * k_local(rt + u * u), 0.0, u_max,
                   limit=300,
                   points=[math.sqrt(b - rt)
                           for b in potential.discontinuities() if rt < b < r_infinity]
                   or None)

    def tail_diff(r):
        v = float(potential.evaluate(r))
        kv = k_local(r)
        kf = math.sqrt(max(k * k - (lam / r) ** 2, 0.0))
        return -v / (kv + kf) if kv + kf > 0.0 else 0.0

    tail, _ = quad(tail_diff, r_infinity, np.inf, limit=200)
    return main - _free_action(lam, k, r_infinity) + tail
