"""Born-approximation relations between phase shifts and the sine transform.

The first-order quantities are

    g(q) = int_0^inf sin(q r) r V(r) dr,
    r V(r) = (2/pi) int_0^inf sin(q r) g(q) dq,

with the fixed-energy data supplying g on [0, 2 k0] and the fixed-ell
branch extending it through g(2k) = -d(k delta(0,k))/dk.  Oscillatory
integrals against a known potential go through QUADPACK's sine-weighted
rules (cycle integration with extrapolation); the inverse transform of a
tabulated g integrates its cubic spline against sin(qr) in closed form
per interval and models the truncated tail with a few cosine modes of
q g(q) located by FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import sici

from ..errors import StageError
from ..potentials import RadialPotential, TabulatedPotential
from .abel import _phase_spline
from .tables import BornTransform

__all__ = ["born_g_from_potential", "born_extend_and_invert",
           "BornInversionResult"]


def born_g_from_potential(potential: RadialPotential, q_grid) -> BornTransform:
    """Sine transform g(q) of r V(r) by oscillation-aware quadrature."""
    q_grid = np.asarray(q_grid, dtype=float)
    sup = potential.support_radius()
    edges = [0.0] + [b for b in potential.discontinuities()]
    if sup is not None and (not edges or edges[-1] < sup):
        edges.append(sup)
    g = np.empty(q_grid.size)
    rv = lambda r: r * float(potential.evaluate(r))
    for i, q in enumerate(q_grid):
        if q == 0.0:
            g[i] = 0.0
            continue
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += quad(rv, lo, hi, weight="sin", wvar=q, limit=300)[0]
        if sup is None:
            total += quad(rv, edges[-1], np.inf, weight="sin", wvar=q,
                          limit=300)[0]
        g[i] = total
    return BornTransform(q_grid=q_grid, g=g, source="from_potential")


def _spline_sin_integral(spline: CubicSpline, r: float) -> float:
    """int sin(r q) * spline(q) dq over the spline's span, in closed form.

    Repeated integration by parts terminates for cubic pieces:
    int p sin = [-p cos/r + p' sin/r^2 + p'' cos/r^3 - p''' sin/r^4].
    For r small enough that no oscillation fits in the span, plain
    Gauss-Legendre on the smooth integrand is used instead.
    """
    x = spline.x
    span = x[-1] - x[0]
    if r == 0.0:
        return 0.0
    if r * span < 1.0:
        from .abel import _gauss
        return _gauss(lambda q: np.sin(r * q) * spline(q), x[0], x[-1], 200)
    c = spline.c
    a, b = x[:-1], x[1:]

    def boundary(q, dq):
        p = ((c[0] * dq + c[1]) * dq + c[2]) * dq + c[3]
        p1 = (3.0 * c[0] * dq + 2.0 * c[1]) * dq + c[2]
        p2 = 6.0 * c[0] * dq + 2.0 * c[1]
        p3 = 6.0 * c[0]
        s, co = np.sin(r * q), np.cos(r * q)
        return (-p * co / r + p1 * s / r ** 2 + p2 * co / r ** 3
                - p3 * s / r ** 4)

    return float(np.sum(boundary(b, b - a) - boundary(a, np.zeros_like(a))))


def _mode_lsq(qs, hs, freqs):
    cols = [np.cos(a * qs) for a in freqs] + [np.sin(a * qs) for a in freqs]
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, hs, rcond=None)
    rss = float(np.sum((hs - design @ coef) ** 2))
    return coef, rss


def _cos_tail_fit(q, g, n_modes=3):
    """Frequencies and amplitudes of q g(q) ~ sum c_j cos(a_j q) at large q.

    The dominant frequencies (the outermost potential discontinuities)
    seed from an FFT periodogram of the last 40% of the table and are
    polished by least-squares residual minimization: a frequency error
    da shifts the modeled tail phase by da * q_top, so bin-level accuracy
    is not enough.  Only the cosine amplitudes are returned; sine parts
    of q g(q) decay like 1/q and integrate to a negligible remainder.
    """
    sel = q >= q[0] + 0.6 * (q[-1] - q[0])
    qs, hs = q[sel], (q * g)[sel]
    scale = float(np.max(np.abs(q * g))) + 1e-300
    if np.max(np.abs(hs)) < 1e-10 * scale or qs.size < 32:
        return np.empty(0), np.empty(0)
    n_fft = 4096
    qu = np.linspace(qs[0], qs[-1], n_fft)
    hu = CubicSpline(qs, hs)(qu)
    spec = np.abs(np.fft.rfft(hu * np.hanning(n_fft)))
    freq = 2.0 * math.pi * np.fft.rfftfreq(n_fft, qu[1] - qu[0])
    peaks = []
    for j in range(2, spec.size - 2):
        if spec[j] > spec[j - 1] and spec[j] > spec[j + 1]:
            peaks.append((float(spec[j]), j))
    peaks.sort(reverse=True)
    if not peaks:
        return np.empty(0), np.empty(0)
    top = peaks[0][0]
    freqs = []
    for amp, j in peaks[: 4 * n_modes]:
        if amp < 0.05 * top:
            break
        d = 0.5 * (spec[j - 1] - spec[j + 1]) / (
            spec[j - 1] - 2.0 * spec[j] + spec[j + 1])
        a = float(freq[j] + d * (freq[1] - freq[0]))
        if a > 0.0 and all(abs(a - f) > 0.2 for f in freqs):
            freqs.append(a)
        if len(freqs) == n_modes:
            break
    if not freqs:
        return np.empty(0), np.empty(0)
    # coordinate-descent polish of each frequency on the LSQ residual
    bin_w = freq[1] - freq[0]
    for _ in range(3):
        for jf in range(len(freqs)):
            lo, hi = freqs[jf] - bin_w, freqs[jf] + bin_w
            for _ in range(24):                 # ternary search
                m1 = lo + (hi - lo) / 3.0
                m2 = hi - (hi - lo) / 3.0
                f1 = freqs.copy()
                f1[jf] = m1
                f2 = freqs.copy()
                f2[jf] = m2
                if _mode_lsq(qs, hs, f1)[1] < _mode_lsq(qs, hs, f2)[1]:
                    hi = m2
                else:
                    lo = m1
            freqs[jf] = 0.5 * (lo + hi)
    coef, rss = _mode_lsq(qs, hs, freqs)
    if rss > 0.5 * float(np.sum(hs ** 2)):
        return np.empty(0), np.empty(0)
    return np.asarray(freqs), coef[: len(freqs)]


def _cos_tail_integral(r, freqs, amps, q_top):
    """(2/pi) int_{q_top}^inf sin(r q) sum c_j cos(a_j q) / q dq via Si."""
    total = 0.0
    for a, cj in zip(freqs, amps):
        s_plus = sici((r + a) * q_top)[0]
        s_minus = sici((r - a) * q_top)[0]
        val = 0.5 * (0.5 * math.pi * (np.sign(r + a) + np.sign(r - a))
                     - s_plus - s_minus)
        total += cj * val
    return (2.0 / math.pi) * total


@dataclass(frozen=True)
class BornInversionResult:
    """Inverse sine transform of the (extended) Born data."""

    potential: TabulatedPotential
    seam_mismatch: float
    q_grid: np.ndarray
    g: np.ndarray


def born_extend_and_invert(q_grid, g_values, k_grid, delta_values,
                           r_grid=None, seam_tol: float = 0.1,
                           smoothing=None) -> BornInversionResult:
    """Extend g(q) beyond 2 k0 with the fixed-ell branch, then invert.

    g on (2 k0, inf) is -d(k delta(0,k))/dk evaluated at q = 2k; the
    combined table is spline-integrated against sin(qr) exactly and the
    truncated tail handled by the cosine-mode fit of q g(q).  A seam
    mismatch at q = 2 k0 beyond ``seam_tol`` (relative) raises
    StageError("extend"); the mismatch magnitude is always reported.
    """
    q_grid = np.asarray(q_grid, dtype=float)
    g_values = np.asarray(g_values, dtype=float)
    k_grid = np.asarray(k_grid, dtype=float)
    delta_values = np.asarray(delta_values, dtype=float)
    if q_grid.size < 8 or k_grid.size < 8:
        raise StageError("extend", "need at least 8 samples per branch")
    k0 = k_grid[0]
    if q_grid[-1] < 2.0 * k0 * (1.0 - 1e-6):
        raise StageError("extend",
                         f"fixed-energy g(q) must reach q = 2 k0 = {2 * k0:.6g}")
    kd_spline = _phase_spline(k_grid, k_grid * delta_values, smoothing)
    dkd = kd_spline.derivative()
    q_ext = 2.0 * k_grid
    g_ext = -dkd(k_grid)
    g_at_seam = float(np.interp(2.0 * k0, q_grid, g_values))
    seam = abs(g_at_seam - float(g_ext[0]))
    g_scale = float(np.max(np.abs(g_values))) + 1e-300
    if seam > seam_tol * g_scale:
        raise StageError("extend",
                         f"seam mismatch at q = 2 k0: {seam:.3g} "
                         f"({seam / g_scale:.1%} of max |g|)")
    keep = q_grid < 2.0 * k0 * (1.0 - 1e-12)
    q_all = np.concatenate([q_grid[keep], q_ext])
    g_all = np.concatenate([g_values[keep], g_ext])

    try:
        spline = CubicSpline(q_all, g_all)
        freqs, amps = _cos_tail_fit(q_all, g_all)
        if r_grid is None:
            r_grid = np.linspace(0.05, 8.0, 320)
        r_grid = np.asarray(r_grid, dtype=float)
        q_top = q_all[-1]
        rv = np.empty(r_grid.size)
        for i, r in enumerate(r_grid):
            main = (2.0 / math.pi) * _spline_sin_integral(spline, r)
            rv[i] = main + (_cos_tail_integral(r, freqs, amps, q_top)
                            if freqs.size else 0.0)
        v = rv / r_grid
        potential = TabulatedPotential(tuple(r_grid), tuple(v))
    except StageError:
        raise
    except Exception as exc:
        raise StageError("invert", str(exc)) from exc
    return BornInversionResult(potential=potential, seam_mismatch=seam,
                               q_grid=q_all, g=g_all)
