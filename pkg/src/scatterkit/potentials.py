"""Radial potentials V(r) and their integrability diagnostics.

Units follow hbar = 2m = 1: lengths in L, potentials and energies in 1/L^2.
Every potential here is immutable after construction and safe to share
between threads.

The admissible class is fixed by the integrability condition

    int_b^inf |V| dr < inf  (b > 0)   and   int_0^inf r |V| dr < inf,

which `check_integrability` probes numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError

__all__ = [
    "RadialPotential",
    "PiecewiseConstantPotential",
    "ClosedFormPotential",
    "TabulatedPotential",
    "IntegrabilityReport",
    "zero_potential",
    "square_well",
    "exponential_potential",
    "gaussian_potential",
    "bargmann_transparent",
    "check_integrability",
    "potential_from_dict",
]


class RadialPotential:
    """Common interface of all radial potentials."""

    def evaluate(self, r):
        raise NotImplementedError

    def __call__(self, r):
        return self.evaluate(r)

    def discontinuities(self) -> tuple[float, ...]:
        """Radii where V (or its derivative) jumps; solvers clip steps here."""
        return ()

    def support_radius(self) -> float | None:
        """Radius beyond which V is exactly zero, or None."""
        return None

    def support_scale(self) -> float:
        """Characteristic radial extent, used for solver defaults."""
        return 1.0

    def lower_bound(self) -> float:
        """A lower bound on min V, used to bracket bound-state searches."""
        rs = np.linspace(1e-3, 4.0 * self.support_scale(), 512)
        return min(0.0, float(np.min(self.evaluate(rs))))

    def negligible_radius(self, tol: float = 1e-12) -> float:
        """Radius R with (estimated) int_R^inf |V| dr below ``tol``."""
        sup = self.support_radius()
        if sup is not None:
            return sup
        # generic fallback: expand until a one-decade quadrature is tiny
        r = max(1.0, 2.0 * self.support_scale())
        for _ in range(60):
            seg, _ = quad(lambda x: abs(float(self.evaluate(x))), r, 2.0 * r, limit=100)
            if seg < 0.5 * tol:
                return r
            r *= 1.5
        return r

    def to_dict(self) -> dict:
        raise NotImplementedError


def _as_float_tuple(seq) -> tuple[float, ...]:
    return tuple(float(v) for v in seq)


@dataclass(frozen=True)
class PiecewiseConstantPotential(RadialPotential):
    """Piecewise constant V: value ``values[j]`` on (a_{j-1}, a_j), a_0 = 0.

    The tail beyond the last breakpoint is exactly zero.  Evaluation at a
    breakpoint returns the right-limit value, which matches the outside-in
    sweep direction used in the nodal reconstruction.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _as_float_tuple(self.breakpoints))
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if len(self.breakpoints) != len(self.values):
            raise DomainError("breakpoints and values must have equal length")
        a = np.asarray(self.breakpoints)
        if a.size and (np.any(a <= 0.0) or np.any(np.diff(a) <= 0.0)):
            raise DomainError("breakpoints must be strictly increasing and positive")

    def evaluate(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise DomainError("radius must be nonnegative")
        if not self.breakpoints:
            out = np.zeros_like(r_arr)
            return float(out) if np.isscalar(r) else out
        table = np.asarray(self.values + (0.0,))
        idx = np.searchsorted(np.asarray(self.breakpoints), r_arr, side="right")
        out = table[idx]
        return float(out) if np.isscalar(r) else out

    def discontinuities(self):
        return self.breakpoints

    def support_radius(self):
        return self.breakpoints[-1] if self.breakpoints else 0.0

    def support_scale(self):
        return self.breakpoints[-1] if self.breakpoints else 1.0

    def lower_bound(self):
        return min((0.0,) + self.values)

    def to_dict(self):
        return {"kind": "piecewise_constant",
                "breakpoints": list(self.breakpoints), "values": list(self.values)}


_CLOSED_FORM_KINDS = ("zero", "square_well", "exponential", "gaussian",
                      "bargmann_transparent")


@dataclass(frozen=True)
class ClosedFormPotential(RadialPotential):
    """A potential given by a named closed form.

    kinds and parameters:
      zero                  ()           V = 0
      square_well           (V0, a)      V = -V0 for r < a, 0 beyond
      exponential           (A, mu)      V = A exp(-mu r)
      gaussian              (A, sigma)   V = A exp(-r^2 / (2 sigma^2))
      bargmann_transparent  (kappa, c)   V = -2 d^2/dr^2 ln(1 + c I(r)),
                                         I(r) = int_0^r sinh^2(kappa t) dt
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _CLOSED_FORM_KINDS:
            raise DomainError(f"unknown closed-form kind {self.kind!r}")
        object.__setattr__(self, "params", _as_float_tuple(self.params))

    def evaluate(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise DomainError("radius must be nonnegative")
        out = self._eval_array(r_arr)
        return float(out) if np.isscalar(r) else out

    def _eval_array(self, r):
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "square_well":
            v0, a = self.params
            return np.where(r < a, -v0, 0.0)
        if self.kind == "exponential":
            amp, mu = self.params
            return amp * np.exp(-mu * r)
        if self.kind == "gaussian":
            amp, sigma = self.params
            return amp * np.exp(-0.5 * (r / sigma) ** 2)
        # bargmann_transparent, in a cancellation-free form.  With
        # Y = exp(-2 kappa r), P = 1 - c r / 2,
        #   sinh(2 kappa r) Y = (1 - Y^2)/2,   sinh(kappa r)^2 Y = (1 - Y)^2/4,
        # and V = -2c [kappa sh2 P + c hh] Y / (P Y + c sh2 / (4 kappa))^2.
        kappa, c = self.params
        y = np.exp(-2.0 * kappa * r)
        sh2 = -np.expm1(-4.0 * kappa * r) / 2.0
        hh = np.expm1(-2.0 * kappa * r) ** 2 / 4.0
        p = 1.0 - 0.5 * c * r
        num = c * (kappa * sh2 * p + c * hh)
        den = (p * y + c * sh2 / (4.0 * kappa)) ** 2
        return -2.0 * num * y / den

    def discontinuities(self):
        if self.kind == "square_well":
            return (self.params[1],)
        return ()

    def support_radius(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "square_well":
            return self.params[1]
        return None

    def support_scale(self):
        if self.kind == "zero":
            return 1.0
        if self.kind == "square_well":
            return self.params[1]
        if self.kind == "exponential":
            return 1.0 / self.params[1]
        if self.kind == "gaussian":
            return self.params[1]
        kappa, c = self.params
        # the well sits where c * exp(2 kappa r) ~ 8 kappa
        center = max(0.0, 0.5 * math.log(max(8.0 * kappa / c, 1.0))) / kappa
        return center + 1.0 / kappa

    def lower_bound(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "square_well":
            return -self.params[0]
        if self.kind in ("exponential", "gaussian"):
            return min(0.0, self.params[0])
        kappa, _ = self.params
        # depth of the transparent well stays above -4.5 kappa^2
        return -4.5 * kappa ** 2

    def negligible_radius(self, tol: float = 1e-12):
        if self.kind == "zero":
            return 0.0
        if self.kind == "square_well":
            return self.params[1]
        if self.kind == "exponential":
            amp, mu = self.params
            if amp == 0.0:
                return 0.0
            return max(1.0 / mu, math.log(abs(amp) / (mu * tol) + 1.0) / mu)
        if self.kind == "gaussian":
            amp, sigma = self.params
            if amp == 0.0:
                return 0.0
            r = 3.0 * sigma
            for _ in range(40):  # solve |A| sigma^2 exp(-r^2/2s^2)/r = tol
                r_new = sigma * math.sqrt(2.0 * math.log(
                    max(abs(amp) * sigma * sigma / (tol * r), 1.000001)))
                if abs(r_new - r) < 1e-9 * sigma:
                    break
                r = max(r_new, sigma)
            return r
        kappa, c = self.params
        # |V| ~ 32 kappa^3 (r + 1) exp(-2 kappa (r - center)); iterate
        r = self.support_scale() + 1.0 / kappa
        for _ in range(40):
            arg = 16.0 * kappa ** 2 * (r + 1.0 / kappa) / (min(c, 1.0) * tol)
            r_new = self.support_scale() + 0.5 * math.log(max(arg, 2.0)) / kappa
            if abs(r_new - r) < 1e-9 * (1.0 + r):
                break
            r = r_new
        return r

    def to_dict(self):
        d = {"kind": self.kind}
        names = {"square_well": ("V0", "a"), "exponential": ("A", "mu"),
                 "gaussian": ("A", "sigma"),
                 "bargmann_transparent": ("kappa", "c")}
        if self.kind in names:
            for name, val in zip(names[self.kind], self.params):
                d[name] = val
        return d


@dataclass(frozen=True)
class TabulatedPotential(RadialPotential):
    """Piecewise-linear interpolation of (r, V) samples.

    Below the first sample the first value is held constant; beyond the
    last sample the potential is exactly zero.  Linear interpolation
    preserves sign and boundedness, which is all the round-trip tests need.
    """

    r_samples: tuple[float, ...]
    v_samples: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "r_samples", _as_float_tuple(self.r_samples))
        object.__setattr__(self, "v_samples", _as_float_tuple(self.v_samples))
        r = np.asarray(self.r_samples)
        if r.size < 2:
            raise DomainError("need at least two samples")
        if r[0] < 0.0 or np.any(np.diff(r) <= 0.0):
            raise DomainError("sample radii must be strictly increasing and nonnegative")

    def evaluate(self, r):
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr < 0.0):
            raise DomainError("radius must be nonnegative")
        out = np.interp(r_arr, self.r_samples, self.v_samples,
                        left=self.v_samples[0])
        out = np.where(r_arr > self.r_samples[-1], 0.0, out)
        return float(out) if np.isscalar(r) else out

    def support_radius(self):
        return self.r_samples[-1]

    def support_scale(self):
        return self.r_samples[-1]

    def lower_bound(self):
        return min(0.0, min(self.v_samples))

    def to_dict(self):
        return {"kind": "tabulated",
                "samples": [[r, v] for r, v in zip(self.r_samples, self.v_samples)]}


def zero_potential() -> ClosedFormPotential:
    return ClosedFormPotential("zero")


def square_well(v0: float, a: float) -> ClosedFormPotential:
    """Attractive square well V(r) = -v0 for r < a (v0 > 0 is the depth)."""
    if a <= 0.0:
        raise DomainError("well radius must be positive")
    return ClosedFormPotential("square_well", (v0, a))


def exponential_potential(amp: float, mu: float) -> ClosedFormPotential:
    if mu <= 0.0:
        raise DomainError("decay rate mu must be positive")
    return ClosedFormPotential("exponential", (amp, mu))


def gaussian_potential(amp: float, sigma: float) -> ClosedFormPotential:
    if sigma <= 0.0:
        raise DomainError("width sigma must be positive")
    return ClosedFormPotential("gaussian", (amp, sigma))


def bargmann_transparent(kappa: float, c: float) -> ClosedFormPotential:
    """One-bound-state potential V = -2 (ln(1 + c int_0^r sinh^2(kappa t) dt))''.

    Supports exactly one s-wave bound state, at E = -kappa^2 for every
    c > 0.  Its s-wave phase shift equals 2 arctan(kappa / k) on the branch
    anchored at delta -> 0 for k -> inf (and delta(0+) = pi by Levinson).
    """
    if kappa <= 0.0 or c <= 0.0:
        raise DomainError("kappa and c must be positive")
    return ClosedFormPotential("bargmann_transparent", (kappa, c))


def potential_from_dict(d: dict) -> RadialPotential:
    """Build a potential from its dictionary description (see to_dict)."""
    try:
        kind = d["kind"]
    except (KeyError, TypeError):
        raise DomainError("potential description needs a 'kind' field") from None
    if kind == "piecewise_constant":
        return PiecewiseConstantPotential(tuple(d["breakpoints"]), tuple(d["values"]))
    if kind == "tabulated":
        samples = d["samples"]
        return TabulatedPotential(tuple(s[0] for s in samples),
                                  tuple(s[1] for s in samples))
    if kind == "zero":
        return zero_potential()
    if kind == "square_well":
        return square_well(d["V0"], d["a"])
    if kind == "exponential":
        return exponential_potential(d["A"], d["mu"])
    if kind == "gaussian":
        return gaussian_potential(d["A"], d["sigma"])
    if kind == "bargmann_transparent":
        return bargmann_transparent(d["kappa"], d["c"])
    raise DomainError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True)
class IntegrabilityReport:
    """Numerical probe of the admissibility condition.

    tail_integral   estimate of int_b^inf |V| dr
    origin_integral estimate of int_0^inf r |V| dr (truncated at the cutoff)
    passes          True when neither integral triggers the divergence test
    diagnostics     human-readable notes
    """

    tail_integral: float
    origin_integral: float
    passes: bool
    diagnostics: str


def _abs_quad(f, a, b, points=()):
    pts = sorted(p for p in points if a < p < b)
    val, _ = quad(f, a, b, points=pts or None, limit=300)
    return val


def _growing(seq, factor=1.10):
    """True when every successive refinement grows by more than 10%."""
    return all(seq[i + 1] > factor * seq[i] and seq[i] > 0.0
               for i in range(len(seq) - 1))


def check_integrability(potential: RadialPotential, b: float = 1.0,
                        r_cut: float = 50.0) -> IntegrabilityReport:
    """Probe both integrals of the admissibility condition.

    Divergence heuristic: an integral is declared divergent when three
    successive dyadic refinements of its cutoff (upper cutoff doubled, or
    origin cutoff halved) each grow the value by more than 10%.
    """
    if not (0.0 < b < r_cut):
        raise DomainError("need 0 < b < r_cut")
    notes = []
    absV = lambda r: abs(float(potential.evaluate(r)))
    r_absV = lambda r: r * abs(float(potential.evaluate(r)))
    pts = potential.discontinuities()
    sup = potential.support_radius()
    hi = r_cut if sup is None else min(r_cut, sup)

    # tail integral int_b^inf |V|
    if sup is not None and sup <= b:
        tail_vals = [0.0] * 4
    else:
        tail_vals = [_abs_quad(absV, b, hi * 2.0 ** j, pts) for j in range(4)]
    tail_diverges = _growing(tail_vals)
    tail = tail_vals[-1]
    if sup is None and not tail_diverges:
        rr = hi * 8.0
        rem = _abs_quad(absV, rr, 4.0 * rr)
        tail += rem
        if rem > 1e-6 * (abs(tail) + 1e-300):
            notes.append(f"tail remainder beyond r={rr:g} estimated {rem:.3g}")

    # origin integral int_0^inf r |V|, probed at both ends
    eps0 = min(b, potential.support_scale()) / 2.0
    lo_vals = [_abs_quad(r_absV, eps0 * 2.0 ** (-j), hi, pts) for j in range(4)]
    if sup is not None and sup <= hi:
        hi_vals = [lo_vals[-1]] * 4
    else:
        hi_vals = [_abs_quad(r_absV, eps0, hi * 2.0 ** j, pts) for j in range(4)]
    origin_diverges = _growing(lo_vals) or _growing(hi_vals)
    if origin_diverges:
        origin = max(lo_vals[-1], hi_vals[-1])
        which = "origin end" if _growing(lo_vals) else "large-r end"
        notes.append(f"origin integral diverging at the {which}")
    else:
        fine_eps = eps0 / 8.0
        hi_top = hi if (sup is not None and sup <= hi) else hi * 8.0
        head, _ = quad(r_absV, 0.0, fine_eps, limit=100)
        origin = _abs_quad(r_absV, fine_eps, hi_top, pts) + head

    if tail_diverges:
        notes.append("tail integral diverging")
    passes = not (tail_diverges or origin_diverges)
    if passes and not notes:
        notes.append("both integrals finite")
    return IntegrabilityReport(tail_integral=float(tail),
                               origin_integral=float(origin),
                               passes=passes,
                               diagnostics="; ".join(notes))
