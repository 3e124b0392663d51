"""Regular solution of the radial equation, phase shifts, bound states.

The equation integrated here is (units hbar = 2m = 1, E = k^2)

    psi'' = ( ell (ell + 1) / r^2 + V(r) - E ) psi,

with the Cauchy condition psi ~ r^(ell+1) at the origin.  Real ell with
2 ell + 1 > 0 is supported; the centrifugal coefficient ell(ell+1) equals
(ell + 1/2)^2 - 1/4 identically.

Integration uses adaptive embedded Runge-Kutta stepping (DOP853) with
event detection for the zeros of psi.  Steps are clipped at potential
discontinuities, and the state is rescaled between segments when the
r^(ell+1) start would otherwise underflow, so large ell is safe.  Zeros
come out of root polishing on the dense output and are reliable to
roughly the relative integration tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .freewave import count_free_zeros, riccati_c, riccati_s
from .potentials import ClosedFormPotential, PiecewiseConstantPotential, RadialPotential

__all__ = [
    "SolverConfig",
    "RegularSolutionTrace",
    "PhaseShiftSample",
    "BoundStateSet",
    "integrate_regular",
    "phase_shift",
    "count_bound_states",
]

_RESCALE_HI = 1e120
_RESCALE_LO = 1e-120


@dataclass(frozen=True)
class SolverConfig:
    """Step-control and matching knobs for the radial integrator.

    r_start / r_match of None mean "choose from the potential's scales".
    ``atol`` is interpreted relative to the solution amplitude at each
    segment entry, so tiny r^(ell+1) starts keep full relative accuracy.
    """

    r_start: float | None = None
    r_match: float | None = None
    rtol: float = 1e-11
    atol: float = 1e-13
    max_step: float | None = None
    residual_tol: float = 1e-6

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise DomainError("tolerances must be positive")
        if self.r_start is not None and self.r_start <= 0.0:
            raise DomainError("r_start must be positive")
        if (self.r_start is not None and self.r_match is not None
                and not self.r_start < self.r_match):
            raise DomainError("need r_start < r_match")


_DEFAULT = SolverConfig()


@dataclass(frozen=True)
class RegularSolutionTrace:
    """Sampled regular solution psi_ell(E, r) with its ordered zeros.

    ``zeros`` excludes the origin, is strictly increasing, and every zero
    is simple (|psi'| bounded away from zero there).
    """

    ell: float
    energy: float
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    zeros: np.ndarray
    dpsi_at_zeros: np.ndarray

    def node_count(self, r: float | None = None) -> int:
        if r is None:
            return int(self.zeros.size)
        return int(np.searchsorted(self.zeros, r, side="right"))


@dataclass(frozen=True)
class PhaseShiftSample:
    """Phase shift delta(ell, k) on the continuous branch with delta(inf)=0.

    ``residual`` combines the spread between two matching radii and the
    size of the potential at the matching radius; values above the
    configured tolerance flag an unreliable extraction.
    """

    ell: float
    k: float
    delta: float
    residual: float


@dataclass(frozen=True)
class BoundStateSet:
    ell: float
    energies: tuple[float, ...]

    def __post_init__(self):
        if any(e >= 0.0 for e in self.energies):
            raise DomainError("bound-state energies must be negative")

    @property
    def count(self) -> int:
        return len(self.energies)


def _check_ell(ell: float):
    if 2.0 * ell + 1.0 <= 0.0:
        raise DomainError("need 2*ell + 1 > 0")


def _default_r_start(potential: RadialPotential, E: float, r_max: float) -> float:
    r0 = min(1e-3, 0.05 / math.sqrt(abs(E) + 1.0), 0.25 * r_max)
    disc = potential.discontinuities()
    if disc:
        r0 = min(r0, 0.5 * disc[0])
    return r0


def _series_state(potential, ell, E, r0, quads):
    """Two-term series start psi = r^(l+1) (1 + a r^2), a = (V - E)/(4l+6)."""
    v0 = float(potential.evaluate(r0))
    a = (v0 - E) / (4.0 * ell + 6.0)
    rl = r0 ** (ell + 1.0)
    psi = rl * (1.0 + a * r0 * r0)
    dpsi = (ell + 1.0) * r0 ** ell + a * (ell + 3.0) * r0 ** (ell + 2.0)
    if not quads:
        return np.array([psi, dpsi])
    tl = 2.0 * ell
    i1 = r0 ** (tl + 3.0) / (tl + 3.0) + 2.0 * a * r0 ** (tl + 5.0) / (tl + 5.0)
    i2 = r0 ** (tl + 1.0) / (tl + 1.0) + 2.0 * a * r0 ** (tl + 3.0) / (tl + 3.0)
    return np.array([psi, dpsi, i1, i2])


def _segment_points(potential, ell, E, r0, r1):
    pts = {r0, r1}
    pts.update(b for b in potential.discontinuities() if r0 < b < r1)
    # split where the centrifugal barrier ends so the state can be rescaled
    if ell > 0.5:
        k2 = E - potential.lower_bound()
        if k2 > 0.0:
            rt = 0.85 * (ell + 0.5) / math.sqrt(k2)
            if r0 * 1.5 < rt < r1 / 1.2:
                pts.add(rt)
    return sorted(pts)


def _const_on_segment(potential, lo, hi):
    if isinstance(potential, PiecewiseConstantPotential):
        return float(potential.evaluate(0.5 * (lo + hi)))
    if isinstance(potential, ClosedFormPotential) and potential.kind in ("zero", "square_well"):
        return float(potential.evaluate(0.5 * (lo + hi)))
    return None


def _make_rhs(potential, cff, E, lo, hi, quads):
    vc = _const_on_segment(potential, lo, hi)
    if vc is not None:
        w = vc - E
        if quads:
            def rhs(r, y):
                p = y[0]
                return (y[1], (cff / (r * r) + w) * p, p * p, p * p / (r * r))
        else:
            def rhs(r, y):
                return (y[1], (cff / (r * r) + w) * y[0])
        return rhs
    ev = potential.evaluate
    if quads:
        def rhs(r, y):
            p = y[0]
            return (y[1], (cff / (r * r) + ev(r) - E) * p, p * p, p * p / (r * r))
    else:
        def rhs(r, y):
            return (y[1], (cff / (r * r) + ev(r) - E) * y[0])
    return rhs


def _psi_event(r, y):
    return y[0]


class _Propagation:
    """One outward integration, kept as per-segment dense solutions.

    Stored per segment: the solve_ivp result and the power-of-two exponent
    relating its (rescaled) state to the true Cauchy normalization.
    """

    def __init__(self, potential, ell, E, r_end, cfg, quads=False, dense=True):
        _check_ell(ell)
        if not np.isfinite(E):
            raise DomainError("energy must be finite")
        self.potential = potential
        self.ell = float(ell)
        self.energy = float(E)
        self.quads = quads
        self.dense = dense
        self.r_start = cfg.r_start or _default_r_start(potential, E, r_end)
        if not self.r_start < r_end:
            raise DomainError("r_end must exceed r_start")
        cff = self.ell * (self.ell + 1.0)
        k_osc = math.sqrt(max(E - potential.lower_bound(), 0.0))

        y = _series_state(potential, self.ell, E, self.r_start, quads)
        self.segments = []      # (lo, hi, OdeSolution, exponent)
        self.zero_list = []
        exponent = 0
        pts = _segment_points(potential, self.ell, E, self.r_start, r_end)
        for lo, hi in zip(pts[:-1], pts[1:]):
            amp = max(abs(y[0]), abs(y[1]))
            if amp == 0.0:
                raise IntegrationError("solution vanished identically", lo)
            if not (_RESCALE_LO < amp < _RESCALE_HI):
                shift = int(math.floor(math.log2(amp)))
                y = y.copy()
                y[0] = math.ldexp(y[0], -shift)
                y[1] = math.ldexp(y[1], -shift)
                if quads:
                    y[2] = math.ldexp(y[2], -2 * shift)
                    y[3] = math.ldexp(y[3], -2 * shift)
                exponent += shift
                amp = max(abs(y[0]), abs(y[1]))
            atol = max(1e-290, cfg.atol * amp)
            if cfg.max_step is not None:
                ms = cfg.max_step
            elif E <= potential.lower_bound() or k_osc == 0.0:
                ms = max((hi - lo) / 8.0, 1e-6)
            else:
                ms = min(0.45 * math.pi / k_osc, hi - lo)
            sol = solve_ivp(
                _make_rhs(potential, cff, E, lo, hi, quads),
                (lo, hi), y, method="DOP853",
                rtol=cfg.rtol, atol=atol, max_step=ms,
                dense_output=dense, events=_psi_event)
            if not sol.success:
                raise IntegrationError(
                    f"radial integration failed: {sol.message}",
                    last_good_radius=float(sol.t[-1]) if sol.t.size else lo)
            self.segments.append((lo, hi, sol.sol, exponent))
            for rz in sol.t_events[0]:
                if not self.zero_list or rz > self.zero_list[-1][0] * (1 + 1e-13):
                    self.zero_list.append((float(rz), exponent))
            y = sol.y[:, -1]
        self.final_state = y
        self.final_exponent = exponent
        self.r_end = r_end

    @property
    def zeros(self):
        return np.array([z for z, _ in self.zero_list])

    def _locate(self, r):
        if not self.dense:
            raise DomainError("propagation was run without dense output")
        for lo, hi, dense, expo in self.segments:
            if lo <= r <= hi * (1 + 1e-15):
                return dense, expo
        raise DomainError(f"radius {r} outside integrated range")

    def state(self, r, true_scale=True):
        """(psi, dpsi[, I1, I2]) at radius r, in true normalization."""
        dense, expo = self._locate(r)
        y = dense(min(r, dense.t_max))
        if not true_scale:
            return y, expo
        out = y.copy()
        out[0] = math.ldexp(y[0], expo)
        out[1] = math.ldexp(y[1], expo)
        if self.quads:
            out[2] = math.ldexp(y[2], 2 * expo)
            out[3] = math.ldexp(y[3], 2 * expo)
        return out

    def node_count(self, r):
        return sum(1 for z, _ in self.zero_list if z <= r)

    def sample_grid(self, points_per_wave=12, max_points=20000, r_eval=None):
        k_osc = math.sqrt(max(self.energy - self.potential.lower_bound(), 0.0))
        extra = np.sort(np.asarray(r_eval, dtype=float)) if r_eval is not None else None
        rs, ps, ds = [], [], []
        for lo, hi, dense, expo in self.segments:
            if k_osc > 0.0:
                h = (2.0 * math.pi / k_osc) / points_per_wave
            else:
                h = (hi - lo) / 16.0
            n = int(min(max(9, math.ceil((hi - lo) / h) + 1), max_points))
            t = np.linspace(lo, hi, n)
            if extra is not None:
                ins = extra[(extra > lo) & (extra < hi)]
                if ins.size:
                    t = np.unique(np.concatenate([t, ins]))
            y = dense(t)
            scale = math.ldexp(1.0, expo)
            start = 1 if rs else 0
            rs.append(t[start:])
            ps.append(y[0, start:] * scale)
            ds.append(y[1, start:] * scale)
        return np.concatenate(rs), np.concatenate(ps), np.concatenate(ds)


def integrate_regular(potential: RadialPotential, ell: float, E: float,
                      r_max: float, config: SolverConfig | None = None,
                      r_eval=None) -> RegularSolutionTrace:
    """Integrate the regular solution out to r_max.

    The trace carries the solution in the true Cauchy normalization
    psi ~ r^(ell+1); its zeros are bracketed by the integrator's event
    detection and polished on the dense output.  Radii passed in
    ``r_eval`` are inserted into the sampling grid exactly.

    Raises IntegrationError with the last good radius when the stepper
    fails (stiff underflow), and DomainError for bad arguments.
    """
    cfg = config or _DEFAULT
    prop = _Propagation(potential, ell, E, r_max, cfg)
    grid, psi, dpsi = prop.sample_grid(r_eval=r_eval)
    zeros = prop.zeros
    dz = np.array([prop.state(z)[1] for z in zeros])
    scale = float(np.max(np.abs(dpsi))) if dpsi.size else 1.0
    if np.any(np.abs(dz) <= 1e-14 * scale):
        raise IntegrationError("degenerate (non-simple) zero detected")
    return RegularSolutionTrace(ell=float(ell), energy=float(E), grid=grid,
                                psi=psi, dpsi=dpsi, zeros=zeros,
                                dpsi_at_zeros=dz)


def _match_delta(prop: _Propagation, ell: float, k: float, r: float) -> float:
    """Principal-value phase from matching (psi, psi') at radius r."""
    y = prop.state(r, true_scale=False)[0]
    psi, dpsi = y[0], y[1]
    x = k * r
    s, ds = riccati_s(ell, x)
    c, dc = riccati_c(ell, x)
    a_s = (dpsi * c - psi * k * dc) / k
    a_c = (psi * k * ds - dpsi * s) / k
    return math.atan2(a_c, a_s)


def _branch_correct(delta_p: float, n_nodes: int, n_free: int) -> float:
    """Select the branch continuous in k and anchored at delta(inf) = 0.

    The node-count difference estimates delta to within less than pi,
    which pins the 2*pi ambiguity left by the two-component matching.
    """
    d_est = math.pi * (n_nodes - n_free)
    m = round((d_est - delta_p) / (2.0 * math.pi))
    return delta_p + 2.0 * math.pi * m


def default_match_radius(potential: RadialPotential, ell: float, k: float,
                         r_start: float) -> float:
    """Matching radius: far enough out that the potential tail is negligible.

    The free Riccati pair solves the matching exactly anywhere V
    vanishes, so the only requirements are a negligible tail integral
    and clearing the centrifugal region; 5x the support scale is kept as
    a floor for potentials that actually reach somewhere.
    """
    sup = potential.support_radius()
    scale_floor = 0.0 if sup == 0.0 else 5.0 * potential.support_scale()
    return max(scale_floor,
               potential.negligible_radius(1e-12 * max(k, 1.0)),
               (ell + 0.5) / k + 4.0 / k,
               10.0 * r_start)


def phase_shift(potential: RadialPotential, ell: float, k: float,
                config: SolverConfig | None = None) -> PhaseShiftSample:
    """Extract delta(ell, k) by matching to the free oscillatory pair.

    The quoted residual is |delta(r_match) - delta(r_match')| for two
    matching radii a quarter wave apart, plus |V(r_match)| / (k^2 + 1);
    both vanish when the matching radius truly sits outside the potential.
    """
    if k <= 0.0:
        raise DomainError("wave number must be positive")
    cfg = config or _DEFAULT
    E = k * k
    r_start = cfg.r_start or _default_r_start(potential, E, 1.0)
    rm = cfg.r_match or default_match_radius(potential, ell, k, r_start)
    r2 = rm + 0.26 * 2.0 * math.pi / k
    prop = _Propagation(potential, ell, E, r2 * 1.001, cfg)

    deltas = []
    for r in (rm, r2):
        dp = _match_delta(prop, ell, k, r)
        deltas.append(_branch_correct(dp, prop.node_count(r),
                                      count_free_zeros(ell, k * r)))
    d1, d2 = deltas
    spread = abs((d2 - d1 + math.pi) % (2.0 * math.pi) - math.pi)
    residual = spread + abs(float(potential.evaluate(rm))) / (E + 1.0)
    return PhaseShiftSample(ell=float(ell), k=float(k), delta=d1,
                            residual=float(residual))


def _node_count_at(potential, ell, E, r_cut, cfg) -> int:
    prop = _Propagation(potential, ell, E, r_cut, cfg, dense=False)
    return len(prop.zero_list)


def count_bound_states(potential: RadialPotential, ell: float,
                       config: SolverConfig | None = None,
                       r_cut: float | None = None,
                       energy_tol: float = 1e-9) -> BoundStateSet:
    """Count and locate the bound states at angular momentum ell.

    N is the node count of the E = 0 regular solution out to r_cut (taken
    well beyond the potential's reach).  Each energy is then pinned by
    bisection on the node count of negative-energy solutions: the n-th
    zero escapes through r_cut as E decreases through E_n, and the leak
    rate exp(-2 kappa r_cut) makes the finite-r_cut bias negligible for
    states that are not extremely shallow.
    """
    _check_ell(ell)
    cfg = config or _DEFAULT
    if r_cut is None:
        r_cut = potential.negligible_radius(1e-12) + 30.0
    n_states = _node_count_at(potential, ell, 0.0, r_cut, cfg)
    if n_states == 0:
        return BoundStateSet(ell=float(ell), energies=())
    e_floor = potential.lower_bound()
    e_floor = e_floor * 1.0001 - 1e-6
    energies = []
    for n in range(1, n_states + 1):
        lo, hi = e_floor, 0.0
        if _node_count_at(potential, ell, lo, r_cut, cfg) >= n:
            raise IntegrationError("bound-state bracket floor is too high")
        while hi - lo > energy_tol:
            mid = 0.5 * (lo + hi)
            if _node_count_at(potential, ell, mid, r_cut, cfg) >= n:
                hi = mid
            else:
                lo = mid
        energies.append(0.5 * (lo + hi))
    return BoundStateSet(ell=float(ell), energies=tuple(sorted(energies)))
