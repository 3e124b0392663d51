"""Independent reference implementations used only by the test suite.

Everything here deliberately avoids the production code paths: the
transfer-matrix solver works with closed-form sin/cos/sinh/cosh pieces,
the Dirichlet solver is a fixed-step Numerov shooter, and the quadrature
oracles call scipy.integrate.quad directly on closed-form integrands.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

_TINY = 1e-13


class TransferMatrixSWave:
    """Closed-form s-wave solution for piecewise-constant potentials.

    Regions are (a_{j-1}, a_j) with constant V_j (a_0 = 0, V = 0 beyond
    the last breakpoint).  In each region psi = A sin(mu x) + B cos(mu x)
    (mu^2 = E - V > 0), the sinh/cosh analogue for mu^2 < 0, or a linear
    function at mu = 0, propagated by exact 2x2 matrices.
    """

    def __init__(self, breakpoints, values):
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.values = tuple(float(v) for v in values)

    def _regions(self, r_max, energy):
        edges = [0.0] + [b for b in self.breakpoints if b < r_max] + [r_max]
        vals = list(self.values[: len(edges) - 1])
        while len(vals) < len(edges) - 1:
            vals.append(0.0)
        return edges, [energy - v for v in vals]

    @staticmethod
    def _step(mu2, d):
        if mu2 > _TINY:
            mu = math.sqrt(mu2)
            c, s = math.cos(mu * d), math.sin(mu * d)
            return np.array([[c, s / mu], [-mu * s, c]])
        if mu2 < -_TINY:
            k = math.sqrt(-mu2)
            ch, sh = math.cosh(k * d), math.sinh(k * d)
            return np.array([[ch, sh / k], [k * sh, ch]])
        return np.array([[1.0, d], [0.0, 1.0]])

    def state(self, energy, r):
        """(psi, psi') at radius r with psi ~ r near the origin."""
        edges, mu2s = self._regions(r + 1.0, energy)
        y = np.array([0.0, 1.0])
        for lo, hi, mu2 in zip(edges[:-1], edges[1:], mu2s):
            if r <= hi:
                return self._step(mu2, r - lo) @ y
            y = self._step(mu2, hi - lo) @ y
        return y

    def zeros(self, energy, r_max):
        """All zeros of psi in (0, r_max), in closed form per region."""
        edges, mu2s = self._regions(r_max, energy)
        y = np.array([0.0, 1.0])
        out = []
        for lo, hi, mu2 in zip(edges[:-1], edges[1:], mu2s):
            psi0, dpsi0 = y
            d = hi - lo
            if mu2 > _TINY:
                mu = math.sqrt(mu2)
                # psi(lo + t) = psi0 cos(mu t) + (dpsi0/mu) sin(mu t)
                phase0 = math.atan2(psi0, dpsi0 / mu)
                # zeros where mu t + phase0 = m pi
                m = math.ceil((phase0 + 1e-14 * mu) / math.pi)
                while True:
                    t = (m * math.pi - phase0) / mu
                    if t >= d - 1e-14:
                        break
                    if t > 1e-14:
                        out.append(lo + t)
                    m += 1
            elif mu2 < -_TINY:
                k = math.sqrt(-mu2)
                # psi = psi0 cosh(k t) + (dpsi0/k) sinh(k t): at most one zero
                q = -psi0 / (psi0 + dpsi0 / k) if abs(psi0 + dpsi0 / k) > 0 else None
                # solve psi0 cosh + (dpsi0/k) sinh = 0 -> tanh(k t) = -psi0 k/dpsi0
                if abs(dpsi0) > 0 and abs(psi0 * k / dpsi0) < 1.0:
                    t = math.atanh(-psi0 * k / dpsi0) / k
                    if 1e-14 < t < d - 1e-14:
                        out.append(lo + t)
                del q
            else:
                if abs(dpsi0) > 0:
                    t = -psi0 / dpsi0
                    if 1e-14 < t < d - 1e-14:
                        out.append(lo + t)
            y = self._step(mu2, d) @ y
        return np.asarray(out)

    def nth_zero(self, energy, n, r_max=400.0):
        z = self.zeros(energy, r_max)
        if z.size < n:
            return None
        return float(z[n - 1])

    def nodal_line(self, n, energies, r_max=400.0):
        return np.array([self.nth_zero(E, n, r_max) for E in energies])

    def phase_shift(self, k):
        """delta(0, k) on the branch fixed by node counting (Levinson)."""
        if not self.breakpoints:
            return 0.0
        R = self.breakpoints[-1]
        psi, dpsi = self.state(k * k, R)
        alpha = psi * math.sin(k * R) + (dpsi / k) * math.cos(k * R)
        beta = psi * math.cos(k * R) - (dpsi / k) * math.sin(k * R)
        delta_p = math.atan2(beta, alpha)
        n_v = len(self.zeros(k * k, R))
        n_free = math.floor(k * R / math.pi)
        d_est = math.pi * (n_v - n_free)
        m = round((d_est - delta_p) / (2.0 * math.pi))
        return delta_p + 2.0 * math.pi * m

    def dirichlet_eigenvalue(self, R, n, e_lo, e_hi):
        """n-th Dirichlet eigenvalue on [0, R] by bisection on node count."""
        def nodes(E):
            return len(self.zeros(E, R)) + (1 if abs(self.state(E, R)[0]) < 1e-300 else 0)

        lo, hi = e_lo, e_hi
        if nodes(lo) >= n or nodes(hi) < n:
            raise ValueError("eigenvalue bracket does not isolate n")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if nodes(mid) >= n:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-13 * (1.0 + abs(hi)):
                break
        return brentq(lambda E: self.state(E, R)[0], lo - 1e-9, hi + 1e-9,
                      xtol=1e-14)


def square_well_delta(v0, a, k):
    """Closed-form s-wave phase shift of the attractive square well.

    tan(k a + delta) = (k / k') tan(k' a), k' = sqrt(k^2 + v0); the
    branch is fixed by node counting exactly as in the transfer oracle.
    """
    return TransferMatrixSWave((a,), (-v0,)).phase_shift(k)


def numerov_dirichlet(potential, ell, R, n, n_grid=20000, e_lo=None, e_hi=None):
    """Fixed-step Numerov shooting for the n-th Dirichlet eigenvalue.

    Completely independent of the adaptive production integrator: a
    uniform grid, the classic three-point recurrence, and bisection on
    the sign/nodes of psi(R).
    """
    h = R / n_grid
    r = np.linspace(h, R, n_grid)
    vr = np.array([float(potential.evaluate(x)) for x in r])
    cff = ell * (ell + 1.0)

    def psi_R_nodes(E):
        f = cff / r ** 2 + vr - E
        w = 1.0 - (h * h / 12.0) * f
        psi = np.empty(n_grid)
        psi[0] = h ** (ell + 1.0)
        psi[1] = (2.0 * h) ** (ell + 1.0)
        nodes = 0
        for i in range(1, n_grid - 1):
            psi[i + 1] = ((12.0 - 10.0 * w[i]) * psi[i] - w[i - 1] * psi[i - 1]) / w[i + 1]
            if psi[i + 1] * psi[i] < 0.0:
                nodes += 1
            if abs(psi[i + 1]) > 1e280:
                psi[: i + 2] *= 1e-280
        return psi[-1], nodes

    if e_lo is None:
        e_lo = min(0.0, float(np.min(vr))) * 1.01 - 0.1
    if e_hi is None:
        e_hi = (free_zero_estimate(ell, n) / R) ** 2 * 4.0 + 10.0
    lo, hi = e_lo, e_hi
    if psi_R_nodes(lo)[1] >= n or psi_R_nodes(hi)[1] < n:
        raise ValueError("Numerov bracket does not isolate the eigenvalue")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if psi_R_nodes(mid)[1] >= n:
            hi = mid
        else:
            lo = mid
    return brentq(lambda E: psi_R_nodes(E)[0], lo, hi, xtol=1e-12)


def free_zero_estimate(ell, n):
    """McMahon-style estimate of the n-th free nodal abscissa."""
    return (n + 0.5 * ell) * math.pi
