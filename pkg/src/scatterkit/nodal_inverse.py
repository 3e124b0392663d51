"""Reconstruction of piecewise-constant potentials from a single nodal line.

For a piecewise-constant potential the inverse line E(r) of any nodal
line is smooth except at the potential's breakpoints, where the third
derivative jumps by

    E'''(a+) - E'''(a-) = -2 E'(a) [V(a+) - V(a-)],

so locating third-derivative jumps recovers every discontinuity, and an
outside-in sweep (the tail is known to vanish) rebuilds the potential.
The same relation transported to the r(E) parameterization reads

    r'''(E_a+) - r'''(E_a-) = 2 (r'(E_a))^3 [V(r(E_a+)) - V(r(E_a-))].

Jumps are located by scanning one-sided least-squares fits on each side
of every sample boundary (two-sided stencils would smear the jump) and
quantified by a broken-polynomial regression across the flagged cluster.
This module also carries the numerical probes of the uniqueness theorems
(Wronskian identity, kernel diagonal, Volterra kernel bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError, ReconstructionError, ResolutionError
from .freewave import free_zero
from .nodal_lines import SEGMENT_FIXED_ELL, InverseLine, ZeroLine
from .potentials import PiecewiseConstantPotential, RadialPotential
from .radial_solver import SolverConfig, _DEFAULT, _default_r_start

__all__ = [
    "DiscontinuityEvent",
    "JunctionEstimate",
    "UniquenessProbe",
    "detect_discontinuities",
    "third_derivative_ratio",
    "reconstruct_piecewise",
    "reconstruct_from_rE_line",
    "junction_discontinuity",
    "wronskian_residual",
]


@dataclass(frozen=True)
class DiscontinuityEvent:
    """One detected jump of the scanned third derivative.

    ``jump_d3`` and ``slope_d1`` refer to the scanned curve (E(r) for the
    inverse-line route, r(E) for the direct route); ``inferred_jump`` is
    always the potential step V(a+) - V(a-) at ``location`` = a.
    ``confidence`` is the jump statistic over the noise floor.
    """

    location: float
    jump_d3: float
    slope_d1: float
    inferred_jump: float
    confidence: float


@dataclass(frozen=True)
class JunctionEstimate:
    """Potential step hidden at the junction radius of a mixed line."""

    r0: float
    v: float
    V0: float
    residual: float
    reliable: bool


@dataclass(frozen=True)
class UniquenessProbe:
    """Numerical samples of the uniqueness-theorem machinery.

    wronskian_residual  |direct Wronskian - quadrature| per path sample
    dv_overlap          int_0^{r(E)} dV psi1 psi2 dr' per path sample
    kernel_diag         K(r,r) = 2 (dr/dE)^2 psi1'(r) psi2'(r) per sample
    volterra_norm       sup |K_1(r,r')| over the probed rectangle (NaN
                        when the Volterra probe was skipped)
    """

    energies: np.ndarray
    radii: np.ndarray
    wronskian_residual: np.ndarray
    dv_overlap: np.ndarray
    kernel_diag: np.ndarray
    volterra_norm: float

    def kernel_sign_constant(self) -> bool:
        k = self.kernel_diag[np.isfinite(self.kernel_diag)]
        return bool(k.size) and (np.all(k > 0.0) or np.all(k < 0.0))


class _SideFit:
    """One-sided least-squares quintic, centered and scaled for conditioning.

    A plain cubic's fourth-derivative truncation bias swamps the jump
    statistic wherever the line is steeply curved; degree 5 pushes the
    bias two orders in the local spacing below that.
    """

    __slots__ = ("coef", "x0", "s")

    def __init__(self, x, y):
        self.x0 = float(np.mean(x))
        self.s = max(float(np.max(x) - np.min(x)), 1e-300)
        t = (np.asarray(x) - self.x0) / self.s
        self.coef = np.polyfit(t, np.asarray(y), 5)

    def value(self, x):
        return float(np.polyval(self.coef, (x - self.x0) / self.s))

    def d1(self, x):
        return float(np.polyval(np.polyder(self.coef), (x - self.x0) / self.s)) / self.s

    def d2(self, x):
        return float(np.polyval(np.polyder(self.coef, 2), (x - self.x0) / self.s)) / self.s ** 2

    def d3(self, x):
        return float(np.polyval(np.polyder(self.coef, 3), (x - self.x0) / self.s)) / self.s ** 3


def _side_fits(x, y, i, window):
    left = _SideFit(x[i - window + 1:i + 1], y[i - window + 1:i + 1])
    right = _SideFit(x[i + 1:i + window + 1], y[i + 1:i + window + 1])
    return left, right


def _jump_scan(x, y, window, power):
    """Step statistic at every interior sample boundary, in potential units.

    Boundary i separates the left window [i-window+1, i] from the right
    window [i+1, i+window]; both one-sided fits are contaminated only
    when the window straddles a discontinuity, so the statistic rises
    over a cluster of boundaries around each true break.  Each side's
    third derivative is read at its own window center (no extrapolation).
    The jump is converted to a potential step with -jump / (2 slope^power)
    (power 1 on the E(r) axis, power 3 on the r(E) axis), which makes the
    statistic scale-free along steep lines.
    """
    m = len(x)
    need = 2 * window + 4
    if m < need:
        raise ResolutionError(
            f"line has {m} samples; need at least {need} for window {window}",
            needed_points=need)
    lo = window - 1
    hi = m - window - 1
    idx = np.arange(lo, hi)
    jumps = np.empty(idx.size)
    steps = np.empty(idx.size)
    for j, i in enumerate(idx):
        left, right = _side_fits(x, y, i, window)
        mid = 0.5 * (x[i] + x[i + 1])
        jumps[j] = right.d3(mid) - left.d3(mid)
        slope = 0.5 * (left.d1(mid) + right.d1(mid))
        steps[j] = -jumps[j] / (2.0 * slope ** power) if slope != 0.0 else math.inf
    return idx, jumps, steps


def _default_floor(steps):
    """10x the median |step| over the smoothest quartile of the scan."""
    a = np.sort(np.abs(steps[np.isfinite(steps)]))
    quart = a[: max(1, a.size // 4)]
    return 10.0 * float(np.median(quart))


def _hinge_fit(x, y, i_lo, i_hi, window):
    """Location and jump from a broken-polynomial (hinge) regression.

    On a window spanning the whole above-floor cluster the curve is
    modeled as two quintics joined with continuous value, first, and
    second derivative at the break a:

        quintic(x) + c3 (x-a)^3_+ + c4 (x-a)^4_+ + c5 (x-a)^5_+ .

    This is exact for a piecewise-analytic curve through quintic order,
    so the cubic hinge coefficient is an unbiased read of the
    third-derivative jump (6 c3).  The break location minimizes the
    residual over a candidate grid, with a parabolic touch-up.
    """
    m = len(x)
    lo = max(0, i_lo - window + 1)
    hi = min(m, i_hi + window + 2)
    xs = np.asarray(x[lo:hi], dtype=float)
    ys = np.asarray(y[lo:hi], dtype=float)
    x0 = xs.mean()
    s = max(xs.max() - x0, x0 - xs.min(), 1e-300)
    t = (xs - x0) / s
    base = np.vander(t, 6, increasing=True)

    c_lo = x[max(lo + 4, i_lo - 1)]
    c_hi = x[min(hi - 5, i_hi + 2)]
    if not c_lo < c_hi:
        c_lo, c_hi = x[max(i_lo - 1, 0)], x[min(i_hi + 2, m - 1)]

    def solve(a):
        ta = (a - x0) / s
        dt = np.clip(t - ta, 0.0, None)
        design = np.column_stack([base, dt ** 3, dt ** 4, dt ** 5])
        coef, res, *_ = np.linalg.lstsq(design, ys, rcond=None)
        resid = float(res[0]) if res.size else float(
            np.sum((design @ coef - ys) ** 2))
        return coef, resid

    cands = np.linspace(c_lo, c_hi, 120)
    resids = np.array([solve(a)[1] for a in cands])
    j = int(np.argmin(resids))
    a = cands[j]
    if 0 < j < cands.size - 1:
        r0, r1, r2 = resids[j - 1], resids[j], resids[j + 1]
        denom = r0 - 2.0 * r1 + r2
        if denom > 0.0:
            a = cands[j] + 0.5 * (r0 - r2) / denom * (cands[1] - cands[0])
            a = min(max(a, cands[j - 1]), cands[j + 1])
    coef, _ = solve(a)
    jump = 6.0 * coef[6] / s ** 3
    ta = (a - x0) / s
    dpoly = np.polyder(coef[5::-1])            # smooth part, highest first
    slope = float(np.polyval(dpoly, ta)) / s
    return a, jump, slope


def _local_background(steps, window):
    """Rolling median of |steps|, wide enough that one event cannot tilt it."""
    from scipy.ndimage import median_filter

    a = np.abs(steps)
    a[~np.isfinite(a)] = 0.0
    size = min(max(10 * window + 1, 21), max(a.size // 2 * 2 - 1, 3))
    return median_filter(a, size=size, mode="nearest")


def _scan_events(x, y, noise_floor, window, power, prominence=8.0):
    """Cluster boundaries whose step statistic clears the floor.

    A cluster survives only when its peak also stands ``prominence``
    above the local background (rejecting the broad bias bumps a smooth
    but strongly curved line produces); the hinge regression over the
    cluster extent then pins the location and the jump.

    Returns (a, jump, slope, step, confidence) tuples and the floor used.
    """
    idx, jumps, steps = _jump_scan(x, y, window, power)
    floor = _default_floor(steps) if noise_floor is None else float(noise_floor)
    bg = _local_background(steps, window)
    above = np.abs(steps) > np.maximum(floor, prominence * bg)
    above[:2] = False
    above[-2:] = False
    # clusters closer than one window are contaminated halves of one event
    runs = []
    j = 0
    while j < idx.size:
        if not above[j]:
            j += 1
            continue
        j_end = j
        while j_end + 1 < idx.size and above[j_end + 1]:
            j_end += 1
        if runs and j - runs[-1][1] <= window:
            runs[-1] = (runs[-1][0], j_end)
        else:
            runs.append((j, j_end))
        j = j_end + 1
    events = []
    for j0, j1 in runs:
        a, jump, slope = _hinge_fit(x, y, int(idx[j0]), int(idx[j1]), window)
        # second, tighter pass at the located break reduces the smooth-part
        # underfit where the line is strongly curved
        ib = int(np.searchsorted(x, a)) - 1
        if window - 1 <= ib <= len(x) - window - 2:
            a, jump, slope = _hinge_fit(x, y, ib, ib, window)
        if slope == 0.0:
            continue
        step = -jump / (2.0 * slope ** power)
        # the scan statistic can spike on fit wobble; the refined step is
        # the real magnitude and must clear the floor itself
        if abs(step) <= floor:
            continue
        conf = abs(step) / floor if floor > 0.0 else math.inf
        events.append((a, jump, slope, step, conf))
    return events, floor


def detect_discontinuities(inverse_line: InverseLine,
                           noise_floor: float | None = None,
                           window: int = 10) -> tuple[DiscontinuityEvent, ...]:
    """Locate potential discontinuities on an inverse line E(r).

    ``noise_floor`` is the minimum detectable |potential step|; by default
    it is data driven, 10x the median fluctuation of the step statistic
    over the smoothest quartile of the line.  Each event's potential step
    follows from V(a+) - V(a-) = -jump(E''') / (2 E'(a)).
    """
    if inverse_line.kind != "energy":
        raise DomainError("discontinuity detection expects an E(r) inverse line")
    x, y = inverse_line.r_grid, inverse_line.values
    raw, _ = _scan_events(x, y, noise_floor, window, power=1)
    events = [DiscontinuityEvent(location=a, jump_d3=jump, slope_d1=slope,
                                 inferred_jump=step, confidence=conf)
              for a, jump, slope, step, conf in raw]
    return tuple(sorted(events, key=lambda e: e.location))


def third_derivative_ratio(inverse_line: InverseLine, window: int = 10):
    """Plot data for -E'''(r) / (2 E'(r)), estimated with one-sided fits.

    Returns (radii, ratio) midway between samples; the curve steps by the
    potential jump at each breakpoint.
    """
    x, y = inverse_line.r_grid, inverse_line.values
    m = len(x)
    if m < 2 * window + 4:
        raise ResolutionError("line too sparse for the ratio curve",
                              needed_points=2 * window + 4)
    rs, ratio = [], []
    for i in range(window - 1, m - window):
        fit = _SideFit(x[i - window + 1:i + 1], y[i - window + 1:i + 1])
        r_mid = x[i]
        rs.append(r_mid)
        ratio.append(-fit.d3(r_mid) / (2.0 * fit.d1(r_mid)))
    return np.asarray(rs), np.asarray(ratio)


def _assemble(events, min_confidence):
    for ev in events:
        if ev.confidence < min_confidence:
            raise ReconstructionError(
                f"event at r={ev.location:.6g} has confidence "
                f"{ev.confidence:.2f} < {min_confidence:.2f}")
    breakpoints = [ev.location for ev in events]
    v = 0.0
    values_desc = []
    for ev in sorted(events, key=lambda e: -e.location):
        v = v - ev.inferred_jump          # V(a-) = V(a+) - [V(a+) - V(a-)]
        values_desc.append(v)
    return PiecewiseConstantPotential(tuple(breakpoints),
                                      tuple(reversed(values_desc)))


def reconstruct_piecewise(inverse_line: InverseLine, events,
                          min_confidence: float = 5.0,
                          ) -> PiecewiseConstantPotential:
    """Rebuild the potential from detected events, sweeping outside in.

    The tail beyond the outermost event is zero by assumption; each event
    then fixes the value one interval further in.  Events below
    ``min_confidence`` abort with a ReconstructionError naming them.
    """
    events = tuple(sorted(events, key=lambda e: e.location))
    if not events:
        return PiecewiseConstantPotential((), ())
    del inverse_line  # reconstruction needs only the events
    return _assemble(events, min_confidence)


def reconstruct_from_rE_line(line: ZeroLine, noise_floor: float | None = None,
                             window: int = 10, min_confidence: float = 5.0,
                             ) -> PiecewiseConstantPotential:
    """Reconstruct directly from the traced r(E) samples.

    Scans d^3 r / dE^3 for jumps; since r decreases in E, the high-E side
    of a jump sits at smaller radius, so the potential step is
    V(a+) - V(a-) = -jump(r''') / (2 (dr/dE)^3).
    """
    m = line.good() & line.segment_mask(SEGMENT_FIXED_ELL)
    E = line.energies[m]
    r = line.radii[m]
    order = np.argsort(E)
    E, r = E[order], r[order]
    raw, _ = _scan_events(E, r, noise_floor, window, power=3)
    events = []
    for e_a, jump, slope, step, conf in raw:
        a_loc = float(np.interp(e_a, E, r))
        events.append(DiscontinuityEvent(
            location=a_loc, jump_d3=jump, slope_d1=slope,
            inferred_jump=step, confidence=conf))
    events.sort(key=lambda ev: ev.location)
    if not events:
        return PiecewiseConstantPotential((), ())
    return _assemble(tuple(events), min_confidence)


def junction_discontinuity(mixed_line: ZeroLine, n: int, ell0: float,
                           origin_value_excluding_junction: float = 0.0,
                           tail_fraction: float = 0.3,
                           residual_tol: float = 0.05) -> JunctionEstimate:
    """Estimate the potential step hidden at the mixed-line junction.

    Near the origin the zeros obey r_n = j / sqrt(E - V0 - v) with j the
    n-th free nodal abscissa, equivalently d ln r_n / dE = -1/(2(E-V0-v)).
    Integrating that relation between consecutive high-energy samples
    gives a per-pair closed-form estimate of C = V0 + v,

        C = (E2 - rho E1) / (1 - rho),   rho = (r1 / r2)^2,

    whose spread is the quoted residual.  The caller supplies the bare
    origin value V0 accumulated from all other recovered discontinuities;
    v is the remainder.
    """
    m = mixed_line.good() & mixed_line.segment_mask(SEGMENT_FIXED_ELL)
    E = mixed_line.energies[m]
    r = mixed_line.radii[m]
    order = np.argsort(E)[::-1]                 # high E first (small r)
    E, r = E[order], r[order]
    n_tail = max(6, int(tail_fraction * E.size))
    E, r = E[:n_tail], r[:n_tail]
    if E.size < 6:
        raise ResolutionError("mixed line too short for the junction fit",
                              needed_points=6)
    rho = (r[:-1] / r[1:]) ** 2
    est = (E[1:] - rho * E[:-1]) / (1.0 - rho)
    c_hat = float(np.median(est))
    residual = float(np.median(np.abs(est - c_hat))) / (1.0 + abs(c_hat))
    # consistency with the small-r closed form r = j / sqrt(E - C)
    j = free_zero(ell0, n)
    c_algebraic = float(np.median(E - (j / r) ** 2))
    drift = abs(c_algebraic - c_hat) / (1.0 + abs(c_hat))
    reliable = residual < residual_tol and drift < max(10.0 * residual_tol, 0.5)
    good = ~mixed_line.diverged
    r0 = float(mixed_line.radii[good & mixed_line.segment_mask(SEGMENT_FIXED_ELL)][-1])
    return JunctionEstimate(r0=r0, v=c_hat - origin_value_excluding_junction,
                            V0=origin_value_excluding_junction,
                            residual=residual, reliable=reliable)


def _pair_series(pot1, pot2, ell, E, r0):
    v1 = float(pot1.evaluate(r0))
    v2 = float(pot2.evaluate(r0))
    a1 = (v1 - E) / (4.0 * ell + 6.0)
    a2 = (v2 - E) / (4.0 * ell + 6.0)
    rl = r0 ** (ell + 1.0)
    tl = 2.0 * ell
    return np.array([
        rl * (1.0 + a1 * r0 * r0),
        (ell + 1.0) * r0 ** ell + a1 * (ell + 3.0) * r0 ** (ell + 2.0),
        rl * (1.0 + a2 * r0 * r0),
        (ell + 1.0) * r0 ** ell + a2 * (ell + 3.0) * r0 ** (ell + 2.0),
        (v1 - v2) * r0 ** (tl + 3.0) / (tl + 3.0),
        r0 ** (tl + 3.0) / (tl + 3.0),
    ])


def _pair_solve(pot1, pot2, ell, E, r_end, cfg, t_eval=None):
    """Integrate both regular solutions plus the coupling quadratures.

    State: [psi1, psi1', psi2, psi2', int dV psi1 psi2, int psi1^2].
    """
    cff = ell * (ell + 1.0)
    v1, v2 = pot1.evaluate, pot2.evaluate
    r0 = _default_r_start(pot1, E, r_end)
    r0 = min(r0, _default_r_start(pot2, E, r_end))
    y = _pair_series(pot1, pot2, ell, E, r0)

    def rhs(r, s):
        p1, q1, p2, q2 = s[0], s[1], s[2], s[3]
        w1 = v1(r)
        w2 = v2(r)
        cf = cff / (r * r) - E
        return (q1, (cf + w1) * p1, q2, (cf + w2) * p2,
                (w1 - w2) * p1 * p2, p1 * p1)

    pts = sorted({r0, r_end}
                 | {b for b in pot1.discontinuities() if r0 < b < r_end}
                 | {b for b in pot2.discontinuities() if r0 < b < r_end})
    k_osc = math.sqrt(max(E - min(pot1.lower_bound(), pot2.lower_bound()), 0.0))
    ms = 0.45 * math.pi / k_osc if k_osc > 0.0 else (r_end - r0) / 8.0
    out_t, out_y = [], []
    for i, (lo, hi) in enumerate(zip(pts[:-1], pts[1:])):
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=cfg.rtol,
                        atol=max(1e-290, cfg.atol * max(abs(y[0]), abs(y[1]), 1e-30)),
                        max_step=min(ms, hi - lo), dense_output=t_eval is not None)
        if not sol.success:
            raise IntegrationError(f"pair integration failed: {sol.message}", lo)
        if t_eval is not None:
            # half-open segments so boundary points are collected once
            sel = [t for t in t_eval
                   if (lo <= t if i == 0 else lo < t) and t <= hi]
            if sel:
                out_t.extend(sel)
                out_y.append(sol.sol(np.asarray(sel)))
        y = sol.y[:, -1]
    if t_eval is not None:
        return y, np.asarray(out_t), np.concatenate(out_y, axis=1)
    return y


def wronskian_residual(pot1: RadialPotential, pot2: RadialPotential, ell: float,
                       line: ZeroLine, n_samples: int = 30,
                       config: SolverConfig | None = None,
                       volterra: bool = True) -> UniquenessProbe:
    """Probe the Wronskian identity and the uniqueness kernel along a line.

    At each sampled path point (E, r(E)) of ``line`` (traced for pot1),
    the Wronskian psi1' psi2 - psi1 psi2' is computed two independent
    ways: directly from the pair of traces and as the quadrature
    int_0^r dV psi1 psi2.  Their difference is the identity residual.
    The kernel diagonal uses dr/dE of pot1's line.  Diagnostics only;
    nothing is thrown for large values.
    """
    cfg = config or _DEFAULT
    good = line.good() & line.segment_mask(SEGMENT_FIXED_ELL)
    E_all = line.energies[good]
    r_all = line.radii[good]
    if E_all.size == 0:
        raise DomainError("line has no usable fixed-ell points")
    step = max(1, E_all.size // n_samples)
    E_s, r_s = E_all[::step], r_all[::step]
    resid = np.empty(E_s.size)
    overlap = np.empty(E_s.size)
    kdiag = np.empty(E_s.size)
    for i, (E, r) in enumerate(zip(E_s, r_s)):
        y = _pair_solve(pot1, pot2, ell, E, r, cfg)
        w_direct = y[1] * y[2] - y[0] * y[3]
        resid[i] = abs(w_direct - y[4])
        overlap[i] = y[4]
        dr_dE = -y[5] / (y[1] * y[1])
        kdiag[i] = 2.0 * dr_dE ** 2 * y[1] * y[3]
    v_norm = math.nan
    if volterra and E_s.size >= 4:
        v_norm = _volterra_sup(pot1, pot2, ell, E_s, r_s, cfg)
    return UniquenessProbe(energies=E_s, radii=r_s, wronskian_residual=resid,
                           dv_overlap=overlap, kernel_diag=kdiag,
                           volterra_norm=v_norm)


def _volterra_sup(pot1, pot2, ell, E_s, r_s, cfg, n_r=4, n_rp=7):
    """Coarse sup of |K_1(r,r')| = |d K/dr / K(r,r)| on the probed rectangle.

    K(r,r') = d^2/dE^2 [psi1 psi2](E(r), r') via 5-point stencils; the
    r-derivative follows from the chain rule with E'(r) of the line.
    """
    picks = np.unique(np.linspace(E_s.size // 4, E_s.size - 1, n_r).astype(int))
    sup = 0.0
    for i in picks:
        E0, r0 = float(E_s[i]), float(r_s[i])
        rp = np.linspace(0.2 * r0, 0.95 * r0, n_rp)
        h = 3e-3 * (abs(E0) + 1.0)
        f = np.empty((5, n_rp))
        y_mid = None
        for m in range(-2, 3):
            y_end, _, ys = _pair_solve(pot1, pot2, ell, E0 + m * h, r0, cfg,
                                       t_eval=rp)
            f[m + 2] = ys[0] * ys[2]
            if m == 0:
                y_mid = y_end
        d3 = (-f[0] + 2.0 * f[1] - 2.0 * f[3] + f[4]) / (2.0 * h ** 3)
        dr_dE = -y_mid[5] / (y_mid[1] * y_mid[1])
        k_diag = 2.0 * dr_dE ** 2 * y_mid[1] * y_mid[3]
        if k_diag == 0.0:
            continue
        k1 = d3 * (1.0 / dr_dE) / k_diag
        sup = max(sup, float(np.max(np.abs(k1))))
    return sup
