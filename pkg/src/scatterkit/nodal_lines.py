"""Nodal lines r_n over energy, angular momentum, and mixed domains.

The n-th zero r_n(ell, E) of the regular solution defines a line that is
strictly decreasing in E at fixed ell and strictly increasing in ell at
fixed E, with the exact derivatives

    dr_n/dE   = - int_0^{r_n} psi^2 dr' / (psi'(r_n))^2
    dr_n/dell = (2 ell + 1) int_0^{r_n} psi^2 / r'^2 dr' / (psi'(r_n))^2.

Tracing is continuation based: each energy (or ell) step reuses the
previous radius to size the integration window, and the parameter grid is
refined until consecutive radii differ by less than a few percent, which
keeps brackets valid and the inverse line well sampled near steep spots.
A line is flagged "diverged" at the first path point whose radius passes
the tracing cap (thresholds genuinely push r_n to infinity) or whose zero
no longer exists inside the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError, MonotonicityError
from .freewave import free_zero
from .potentials import RadialPotential
from .radial_solver import SolverConfig, _DEFAULT, _Propagation

__all__ = [
    "ZeroLine",
    "InverseLine",
    "SpectralData",
    "LineDerivatives",
    "trace_fixed_l_line",
    "trace_mixed_line",
    "line_derivative_exact",
    "invert_line",
    "spectral_data_at",
]

SEGMENT_FIXED_ELL = "fixed_ell"
SEGMENT_FIXED_E = "fixed_E"


@dataclass(frozen=True)
class ZeroLine:
    """One traced nodal line.

    ``segment`` labels each path point as part of the fixed-ell sweep or
    the fixed-E sweep (pure lines carry a single label; mixed lines start
    with the fixed-ell part, whose last point shares the junction radius
    with the first fixed-E point).  ``diverged`` marks points where the
    zero left the tracing cap; their radius is NaN.
    """

    n: int
    kind: str                      # "fixed_ell" | "fixed_E" | "mixed"
    ells: np.ndarray
    energies: np.ndarray
    radii: np.ndarray
    diverged: np.ndarray
    segment: tuple[str, ...]
    r_cap: float

    def __post_init__(self):
        sizes = {self.ells.size, self.energies.size, self.radii.size,
                 self.diverged.size, len(self.segment)}
        if len(sizes) != 1:
            raise DomainError("inconsistent path arrays")

    def good(self) -> np.ndarray:
        return ~self.diverged

    def segment_mask(self, label: str) -> np.ndarray:
        return np.array([s == label for s in self.segment])

    def check_monotone(self) -> bool:
        """Strict monotonicity along both sweep directions (good points)."""
        ok = True
        for label, key, sign in ((SEGMENT_FIXED_ELL, self.energies, -1),
                                 (SEGMENT_FIXED_E, self.ells, +1)):
            m = self.segment_mask(label) & self.good()
            if np.sum(m) < 2:
                continue
            order = np.argsort(key[m])
            r_sorted = self.radii[m][order]
            d = np.diff(r_sorted) * sign
            ok = ok and bool(np.all(d > 0.0))
        return ok


@dataclass(frozen=True)
class InverseLine:
    """Monotone samples of the inverse of a nodal line, E(r) or ell(r)."""

    r_grid: np.ndarray
    values: np.ndarray
    kind: str                      # "energy" | "ell" | "radius"
    derivatives: np.ndarray

    def interpolant(self) -> PchipInterpolator:
        return PchipInterpolator(self.r_grid, self.values)

    def swapped(self) -> "InverseLine":
        """Exchange axes (the inverse of the inverse, for round trips)."""
        x = self.values
        y = self.r_grid
        if x[0] > x[-1]:
            x, y = x[::-1], y[::-1]
        dydx = np.gradient(y, x)
        return InverseLine(r_grid=x.copy(), values=y.copy(), kind="radius",
                           derivatives=dydx)


@dataclass(frozen=True)
class SpectralData:
    """Dirichlet spectral data on [0, R]: eigenvalues and norming constants."""

    R: float
    eigenvalues: tuple[float, ...]
    norming: tuple[float, ...]

    def __post_init__(self):
        if any(r <= 0.0 for r in self.norming):
            raise DomainError("norming constants must be positive")
        e = np.asarray(self.eigenvalues)
        if e.size > 1 and np.any(np.diff(e) <= 0.0):
            raise DomainError("eigenvalues must be strictly increasing")


@dataclass(frozen=True)
class LineDerivatives:
    dr_dE: float
    dr_dell: float


def _nth_zero(potential, ell, E, n, r_limit, r_hint=None, cfg=_DEFAULT):
    """Radius of the n-th zero at (ell, E), or None if it exceeds r_limit.

    Without a continuation hint the first window comes from the free
    estimate x_{lam,n} / k; the window grows geometrically until the
    zero appears or the cap is reached.
    """
    k_osc = math.sqrt(max(E - potential.lower_bound(), 0.04))
    wave = 2.0 * math.pi / k_osc
    if r_hint is not None and np.isfinite(r_hint):
        dom = min(r_limit, max(1.6 * r_hint, r_hint + 3.0 * wave))
    else:
        r_est = free_zero(ell, n) / k_osc
        dom = min(r_limit, max(2.0 * r_est, r_est + 3.0 * wave,
                               1.5 * potential.support_scale()))
    for _ in range(40):
        prop = _Propagation(potential, ell, E, dom, cfg, dense=False)
        zeros = prop.zeros
        if zeros.size >= n:
            return float(zeros[n - 1])
        if dom >= r_limit:
            return None
        dom = min(r_limit, 1.7 * dom + wave)
    return None


def _de_floor(E0, E1):
    return 1e-10 * (abs(E0) + abs(E1) + 1.0)


def _continue_sweep(eval_radius, grid, r_cap, refine_rel, max_points=6000):
    """Generic continuation along one parameter.

    ``eval_radius(x, hint)`` returns the zero radius at parameter x or
    None.  Returns (xs, rs, diverged_flag_row or None); tracing stops at
    the first divergence.
    """
    xs, rs = [], []
    x0 = grid[0]
    r0 = eval_radius(x0, None)
    if r0 is None or r0 > r_cap:
        return [x0], [math.nan], True
    xs.append(x0)
    rs.append(r0)
    for x_target in grid[1:]:
        stack = [x_target]
        while stack:
            if len(xs) >= max_points:
                raise IntegrationError("line tracing exceeded the point budget")
            x_next = stack[-1]
            r_prev = rs[-1]
            r_next = eval_radius(x_next, r_prev)
            lost = r_next is None or r_next > r_cap
            small = abs(xs[-1] - x_next) <= _de_floor(xs[-1], x_next)
            if lost:
                if small:
                    return xs + [x_next], rs + [math.nan], True
                stack.append(0.5 * (xs[-1] + x_next))
                continue
            if abs(r_next - r_prev) > refine_rel * min(r_prev, r_next) and not small:
                stack.append(0.5 * (xs[-1] + x_next))
                continue
            xs.append(x_next)
            rs.append(r_next)
            stack.pop()
    return xs, rs, False


def trace_fixed_l_line(potential: RadialPotential, ell: float, n: int,
                       e_grid, r_cap: float | None = None,
                       config: SolverConfig | None = None,
                       refine_rel: float = 0.05) -> ZeroLine:
    """Trace r_n(ell, E) over a descending energy grid.

    The grid is refined in place so consecutive radii differ by less than
    ``refine_rel``; the default cap is 50x the potential's support scale.
    Losing the n-th zero (divergence at a threshold, or at E -> 0 when
    n exceeds the bound-state count) flags the final point and stops.
    """
    if n < 1:
        raise DomainError("zero index n must be >= 1")
    e_grid = np.asarray(e_grid, dtype=float)
    if e_grid.size < 2 or np.any(np.diff(e_grid) >= 0.0):
        raise DomainError("e_grid must be strictly descending")
    cfg = config or _DEFAULT
    if r_cap is None:
        r_cap = 50.0 * potential.support_scale()

    def eval_radius(E, hint):
        return _nth_zero(potential, ell, E, n, 1.05 * r_cap, hint, cfg)

    es, rs, lost = _continue_sweep(eval_radius, e_grid, r_cap, refine_rel)
    es = np.asarray(es)
    rs = np.asarray(rs)
    flags = np.zeros(es.size, dtype=bool)
    if lost:
        flags[-1] = True
    return ZeroLine(n=n, kind="fixed_ell",
                    ells=np.full(es.size, float(ell)), energies=es, radii=rs,
                    diverged=flags, segment=(SEGMENT_FIXED_ELL,) * es.size,
                    r_cap=float(r_cap))


def trace_mixed_line(potential: RadialPotential, ell0: float, E0: float,
                     n: int, e_grid, ell_grid, r_cap: float | None = None,
                     config: SolverConfig | None = None,
                     refine_rel: float = 0.05,
                     junction_tol: float = 1e-9) -> ZeroLine:
    """Trace the two-part mixed line over {E >= E0, ell0} u {E0, ell >= ell0}.

    Part one sweeps energy down to E0 (radii grow toward the junction
    r_0 = r_n(ell0, E0)); part two sweeps ell upward from ell0.  Both
    parts compute the junction independently and must agree to
    ``junction_tol`` (relative).
    """
    e_grid = np.asarray(e_grid, dtype=float)
    ell_grid = np.asarray(ell_grid, dtype=float)
    if e_grid.size < 1 or np.any(e_grid < E0 - 1e-12):
        raise DomainError("e_grid must lie in [E0, inf)")
    if np.any(np.diff(e_grid) >= 0.0):
        raise DomainError("e_grid must be strictly descending")
    if abs(e_grid[-1] - E0) > 1e-12 * (1.0 + abs(E0)):
        e_grid = np.append(e_grid, E0)
    if ell_grid.size < 1 or np.any(ell_grid < ell0 - 1e-12):
        raise DomainError("ell_grid must lie in [ell0, inf)")
    if np.any(np.diff(ell_grid) <= 0.0):
        raise DomainError("ell_grid must be strictly ascending")
    if abs(ell_grid[0] - ell0) > 1e-12 * (1.0 + abs(ell0)):
        ell_grid = np.insert(ell_grid, 0, ell0)
    cfg = config or _DEFAULT
    if r_cap is None:
        r_cap = 50.0 * potential.support_scale()

    part1 = trace_fixed_l_line(potential, ell0, n, e_grid, r_cap, cfg, refine_rel)
    if part1.diverged[-1]:
        raise IntegrationError("mixed line diverged before reaching E0")

    def eval_radius(ell, hint):
        return _nth_zero(potential, ell, E0, n, 1.05 * r_cap, hint, cfg)

    ls, rs, lost = _continue_sweep(eval_radius, ell_grid, r_cap, refine_rel)
    r0a = part1.radii[-1]
    r0b = rs[0]
    if not np.isfinite(r0b) or abs(r0a - r0b) > junction_tol * max(1.0, abs(r0a)):
        raise IntegrationError(
            f"junction mismatch: {r0a!r} (energy part) vs {r0b!r} (ell part)")
    ells = np.concatenate([part1.ells, ls])
    energies = np.concatenate([part1.energies, np.full(len(ls), float(E0))])
    radii = np.concatenate([part1.radii, rs])
    flags = np.concatenate([part1.diverged, np.zeros(len(ls), dtype=bool)])
    if lost:
        flags[-1] = True
    segment = (SEGMENT_FIXED_ELL,) * part1.radii.size + (SEGMENT_FIXED_E,) * len(ls)
    return ZeroLine(n=n, kind="mixed", ells=ells, energies=energies,
                    radii=radii, diverged=flags, segment=segment,
                    r_cap=float(r_cap))


def line_derivative_exact(potential: RadialPotential, ell: float, E: float,
                          r_zero: float, config: SolverConfig | None = None,
                          ) -> LineDerivatives:
    """Exact-integral derivatives of the line through a traced point.

    Evaluates the quadratures int psi^2 and int psi^2/r^2 together with
    the integration (auxiliary states of the same solve), so the results
    inherit the step-control accuracy.
    """
    cfg = config or _DEFAULT
    prop = _Propagation(potential, ell, E, r_zero * 1.02 + 0.1, cfg, quads=True)
    zeros = prop.zeros
    if zeros.size == 0:
        raise DomainError("no zero found near the requested radius")
    i = int(np.argmin(np.abs(zeros - r_zero)))
    if abs(zeros[i] - r_zero) > 1e-6 * (1.0 + r_zero):
        raise DomainError(f"{r_zero} is not a zero of the trace (nearest {zeros[i]})")
    rz = zeros[i]
    y = prop.state(rz, true_scale=False)[0]
    dpsi2 = y[1] * y[1]
    if dpsi2 == 0.0:
        raise IntegrationError("zero is not simple; derivative undefined")
    return LineDerivatives(dr_dE=-y[2] / dpsi2,
                           dr_dell=(2.0 * ell + 1.0) * y[3] / dpsi2)


def _repair_monotone(x, y, tol_rel=1e-8):
    """Nudge tiny monotonicity violations; fail loudly on real ones."""
    d = np.diff(y)
    if d.size == 0:
        return y
    increasing = np.median(d) > 0.0
    bad = d <= 0.0 if increasing else d >= 0.0
    if not np.any(bad):
        return y
    scale = np.max(np.abs(y)) + 1e-300
    if np.max(np.abs(d[bad])) > tol_rel * scale:
        raise MonotonicityError("line is not monotone beyond repair tolerance")
    out = y.copy()
    eps = tol_rel * scale
    for i in range(1, out.size):
        if increasing and out[i] <= out[i - 1]:
            out[i] = out[i - 1] + eps
        elif not increasing and out[i] >= out[i - 1]:
            out[i] = out[i - 1] - eps
    return out


def invert_line(line: ZeroLine, segment: str | None = None) -> InverseLine:
    """Invert a traced line into monotone samples against radius.

    Uses shape-preserving (monotone cubic) interpolation for derivative
    estimates; overshooting interpolants would imprint spurious
    discontinuity signals on the third derivative.
    """
    if line.kind == "mixed" and segment is None:
        raise DomainError("mixed line: pick segment 'fixed_ell' or 'fixed_E'")
    label = segment or line.kind
    if label not in (SEGMENT_FIXED_ELL, SEGMENT_FIXED_E):
        raise DomainError(f"unknown segment {label!r}")
    m = line.segment_mask(label) & line.good()
    r = line.radii[m]
    v = line.energies[m] if label == SEGMENT_FIXED_ELL else line.ells[m]
    if r.size < 4:
        raise DomainError("need at least 4 good points to invert a line")
    order = np.argsort(r)
    r, v = r[order], v[order]
    if np.any(np.diff(r) <= 0.0):
        keep = np.concatenate([[True], np.diff(r) > 0.0])
        r, v = r[keep], v[keep]
    v = _repair_monotone(r, v)
    interp = PchipInterpolator(r, v)
    return InverseLine(r_grid=r, values=v,
                       kind="energy" if label == SEGMENT_FIXED_ELL else "ell",
                       derivatives=interp.derivative()(r))


def spectral_data_at(potential: RadialPotential, ell: float, R: float,
                     n_max: int, config: SolverConfig | None = None,
                     ) -> SpectralData:
    """Dirichlet spectral data {E_n*, rho_n} on [0, R] from the nodal lines.

    E_n* solves r_n(ell, E) = R; rho_n = -dr_n/dE there, always positive.
    Lines that never cross R inside the search window are dropped, so the
    result can be shorter than n_max.
    """
    if R <= 0.0 or n_max < 1:
        raise DomainError("need R > 0 and n_max >= 1")
    cfg = config or _DEFAULT
    e_floor = potential.lower_bound() * 1.0001 - 1e-6
    eigenvalues, norming = [], []
    for n in range(1, n_max + 1):
        def f(E):
            r = _nth_zero(potential, ell, E, n, 3.0 * R + 1.0, R, cfg)
            return (r - R) if r is not None else 3.0 * R

        e_guess = (free_zero(ell, n) / R) ** 2
        hi = e_guess
        for _ in range(60):
            if f(hi) < 0.0:
                break
            hi *= 2.0
        else:
            break
        lo = e_guess / 2.0
        for _ in range(200):
            if lo <= e_floor:
                lo = e_floor
                break
            if f(lo) > 0.0:
                break
            lo = lo * 0.5 if lo > 0.25 * abs(e_floor) + 1e-9 else lo - 0.25 * (abs(e_floor) + 1.0)
        if f(lo) <= 0.0:
            break
        e_star = brentq(f, lo, hi, xtol=1e-12 * (1.0 + abs(hi)))
        rho = -line_derivative_exact(potential, ell, e_star, R, cfg).dr_dE
        eigenvalues.append(e_star)
        norming.append(rho)
    return SpectralData(R=float(R), eigenvalues=tuple(eigenvalues),
                        norming=tuple(norming))
