"""Data carriers for the semiclassical (JWKB / Born) inversion pipeline.

Conventions: E = k^2 and lam = ell + 1/2 throughout this subpackage.
The mixed data domain is {delta(ell0, k), k >= k0} u {delta(ell, k0),
ell >= ell0}, stored as the two branches of a PhaseShiftTable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

__all__ = ["PhaseShiftTable", "TurningPointCurve", "BornTransform"]

_MAX_PHASE_JUMP = 0.5 * np.pi


def _ascending(name, arr):
    a = np.asarray(arr, dtype=float)
    if a.size and np.any(np.diff(a) <= 0.0):
        raise DomainError(f"{name} grid must be strictly ascending")
    return a


def _continuous(name, deltas):
    d = np.asarray(deltas, dtype=float)
    if d.size > 1 and np.max(np.abs(np.diff(d))) > _MAX_PHASE_JUMP:
        raise DomainError(
            f"{name} branch has a phase jump above pi/2; unwrap the branch first")
    return d


@dataclass(frozen=True)
class PhaseShiftTable:
    """Mixed phase-shift data set with its two anchors.

    fixed_l branch: delta(ell0, k) sampled on ascending k >= k0.
    fixed_E branch: delta(lam - 1/2, k0) sampled on ascending lam >= lam0.
    Both branches must be continuous (no jumps above pi/2 between
    neighbouring samples).
    """

    ell0: float
    k0: float
    fixed_l_k: np.ndarray
    fixed_l_delta: np.ndarray
    fixed_e_lam: np.ndarray
    fixed_e_delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fixed_l_k", _ascending("fixed_l k", self.fixed_l_k))
        object.__setattr__(self, "fixed_l_delta",
                           _continuous("fixed_l", self.fixed_l_delta))
        object.__setattr__(self, "fixed_e_lam",
                           _ascending("fixed_E lambda", self.fixed_e_lam))
        object.__setattr__(self, "fixed_e_delta",
                           _continuous("fixed_E", self.fixed_e_delta))
        if self.fixed_l_k.size != self.fixed_l_delta.size:
            raise DomainError("fixed_l branch arrays differ in length")
        if self.fixed_e_lam.size != self.fixed_e_delta.size:
            raise DomainError("fixed_E branch arrays differ in length")
        if self.fixed_l_k.size and self.fixed_l_k[0] < self.k0 * (1 - 1e-9):
            raise DomainError("fixed_l branch must start at k0")
        if self.fixed_e_lam.size and self.fixed_e_lam[0] < self.lam0 * (1 - 1e-9):
            raise DomainError("fixed_E branch must start at lam0 = ell0 + 1/2")

    @property
    def lam0(self) -> float:
        return self.ell0 + 0.5


@dataclass(frozen=True)
class TurningPointCurve:
    """Turning-point radii r(lam, k0) or r(lam0, k) from Abel inversion.

    kind "fixed_energy": parameter is lam, radii increase with lam.
    kind "fixed_l":      parameter is k, radii decrease with k.
    ``free_reference`` is the free turning point lam/k at each sample.
    ``hypothesis_ok`` records whether the expected monotonicity held;
    a False value flags a violated single-turning-point hypothesis
    rather than raising.  ``truncation_error`` estimates the relative
    contribution of the modeled tail beyond the data.
    """

    kind: str
    parameter: np.ndarray
    radii: np.ndarray
    free_reference: np.ndarray
    anchor: float                       # k0 (fixed_energy) or lam0 (fixed_l)
    hypothesis_ok: bool = True
    truncation_error: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed_energy", "fixed_l"):
            raise DomainError(f"unknown curve kind {self.kind!r}")
        p = np.asarray(self.parameter, dtype=float)
        r = np.asarray(self.radii, dtype=float)
        f = np.asarray(self.free_reference, dtype=float)
        if not (p.size == r.size == f.size):
            raise DomainError("curve arrays differ in length")
        if np.any(r <= 0.0):
            raise DomainError("turning radii must be positive")
        object.__setattr__(self, "parameter", p)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "free_reference", f)

    def monotone_ok(self) -> bool:
        d = np.diff(self.radii)
        return bool(np.all(d > 0.0) if self.kind == "fixed_energy"
                    else np.all(d < 0.0))

    def potential_samples(self):
        """(r, V(r)) implied by the turning condition k^2 - V - lam^2/r^2 = 0."""
        if self.kind == "fixed_energy":
            k0 = self.anchor
            v = k0 ** 2 * (1.0 - (self.free_reference / self.radii) ** 2)
        else:
            lam0 = self.anchor
            k = self.parameter
            v = k ** 2 - (lam0 / self.radii) ** 2
        order = np.argsort(self.radii)
        return self.radii[order], v[order]


@dataclass(frozen=True)
class BornTransform:
    """Samples of the sine transform g(q) = int_0^inf sin(qr) r V(r) dr."""

    q_grid: np.ndarray
    g: np.ndarray
    source: str = "from_potential"

    def __post_init__(self):
        q = _ascending("q", self.q_grid)
        g = np.asarray(self.g, dtype=float)
        if q.size != g.size:
            raise DomainError("q grid and g values differ in length")
        object.__setattr__(self, "q_grid", q)
        object.__setattr__(self, "g", g)
