"""Discontinuity detection, reconstruction, junction steps, uniqueness probes."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from scatterkit import (InverseLine, PiecewiseConstantPotential,
                        ReconstructionError, ResolutionError, detect_discontinuities,
                        invert_line, junction_discontinuity, reconstruct_from_rE_line,
                        reconstruct_piecewise, square_well, third_derivative_ratio,
                        trace_fixed_l_line, trace_mixed_line, wronskian_residual,
                        zero_potential)
from scatterkit.nodal_lines import _nth_zero


def _inverse_from(r, values):
    return InverseLine(r_grid=np.asarray(r), values=np.asarray(values),
                       kind="energy", derivatives=np.gradient(values, r))


def test_detector_on_synthetic_break():
    # exp(-x) plus a cubic hinge at 2.0037: the third derivative jumps by
    # +3 there; the floor is pinned because on exact synthetic data the
    # default data-driven floor sits at roundoff scale and faithfully
    # reports nano-scale structure
    x = np.arange(1.0, 3.0, 0.008)
    y = np.exp(-x) + 0.5 * np.clip(x - 2.0037, 0.0, None) ** 3
    events = detect_discontinuities(_inverse_from(x, y), noise_floor=1e-3)
    assert len(events) == 1
    ev = events[0]
    assert abs(ev.location - 2.0037) < 2e-3
    assert abs(ev.jump_d3 - 3.0) < 1e-2
    # inferred step follows -jump / (2 E')
    assert abs(ev.inferred_jump - (-3.0 / (2.0 * -math.exp(-2.0037)))) < 0.05 * 11.0


def test_detector_no_events_on_smooth_line():
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(80.0, 0.3, 20), r_cap=12.0,
                              refine_rel=0.004)
    events = detect_discontinuities(invert_line(line))
    assert events == ()


def test_detector_resolution_error():
    x = np.linspace(1.0, 2.0, 12)
    with pytest.raises(ResolutionError):
        detect_discontinuities(_inverse_from(x, 1.0 / x ** 2))


def test_pcpot_events_and_reconstruction(pcpot_dense_line):
    inverse = invert_line(pcpot_dense_line)
    events = detect_discontinuities(inverse)
    assert len(events) == 2
    assert abs(events[0].location - 2.0) < 0.02
    assert abs(events[1].location - 3.0) < 0.02
    assert abs(events[0].inferred_jump - 1.0) < 0.02
    assert abs(events[1].inferred_jump - 1.0) < 0.02
    rec = reconstruct_piecewise(inverse, events)
    assert abs(rec.values[0] + 2.0) < 0.02
    assert abs(rec.values[1] + 1.0) < 0.02
    assert rec.evaluate(10.0) == 0.0


def test_ratio_curve_free_closed_form():
    # for V = 0, E(r) = pi^2/r^2 gives -E'''/(2E') = -6/r^2 exactly
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(90.0, 0.8, 12), r_cap=20.0,
                              refine_rel=0.01)
    rr, ratio = third_derivative_ratio(invert_line(line))
    # window-fit truncation at ~1% sampling dominates the residual
    np.testing.assert_allclose(ratio, -6.0 / rr ** 2, rtol=5e-3)


def test_ratio_curve_pcpot(pcpot_dense_line):
    # plot-level check: the curve is finite and steps at the breakpoints
    # (quantitative jump reads come from detect_discontinuities); the
    # bands below stay clear of the one-window contamination zone
    inverse = invert_line(pcpot_dense_line)
    rr, ratio = third_derivative_ratio(inverse)
    assert np.all(np.isfinite(ratio))

    def extrapolated(a, side):
        if side == "left":
            band = (rr > a - 0.3) & (rr < a - 0.1)
        else:
            band = (rr > a + 0.14) & (rr < a + 0.34)
        coef = np.polyfit(rr[band], ratio[band], 1)
        return np.polyval(coef, a)

    jump2 = extrapolated(2.0, "right") - extrapolated(2.0, "left")
    jump3 = extrapolated(3.0, "right") - extrapolated(3.0, "left")
    assert 0.6 < jump2 < 1.4
    assert 0.3 < jump3 < 1.4


def test_single_step_well_round_trip():
    pot = PiecewiseConstantPotential((1.0,), (-1.0,))
    line = trace_fixed_l_line(pot, 0, 1, np.geomspace(120.0, 0.02, 30),
                              r_cap=8.0, refine_rel=0.004)
    events = detect_discontinuities(invert_line(line))
    assert len(events) == 1
    assert abs(events[0].location - 1.0) < 0.01
    assert abs(events[0].inferred_jump - 1.0) < 0.01


def test_reconstruct_no_events_gives_zero():
    rec = reconstruct_piecewise(None, ())
    assert rec.breakpoints == ()
    assert rec.evaluate(1.23) == 0.0


def test_reconstruct_rejects_low_confidence():
    from scatterkit import DiscontinuityEvent
    ev = DiscontinuityEvent(location=1.0, jump_d3=1.0, slope_d1=-1.0,
                            inferred_jump=0.5, confidence=1.2)
    with pytest.raises(ReconstructionError):
        reconstruct_piecewise(None, (ev,))


def test_cross_route_equivalence(pcpot_dense_line):
    # Eq.-equivalent reconstructions from E(r) jumps and from r(E) jumps;
    # honest independent implementations agree at the few-percent level
    # (the r(E) route reads the curve near its bound-state blow-up)
    rec1 = reconstruct_piecewise(invert_line(pcpot_dense_line),
                                 detect_discontinuities(invert_line(pcpot_dense_line)))
    rec2 = reconstruct_from_rE_line(pcpot_dense_line)
    assert len(rec2.breakpoints) == 2
    np.testing.assert_allclose(rec2.breakpoints, rec1.breakpoints, atol=5e-3)
    np.testing.assert_allclose(rec2.values, rec1.values, atol=5e-2)


def test_junction_step_recovered():
    # build a single-step potential, place the junction exactly on the step
    w, a = 0.8, 2.0
    pot = PiecewiseConstantPotential((a,), (-w,))
    e0 = brentq(lambda e: _nth_zero(pot, 0.0, e, 1, 30.0) - a, 0.05, 30.0,
                xtol=1e-12)
    line = trace_mixed_line(pot, 0.0, e0, 1, np.geomspace(60.0, e0, 12),
                            np.linspace(0.0, 3.0, 4), r_cap=20.0,
                            refine_rel=0.02)
    est = junction_discontinuity(line, 1, 0.0)
    assert abs(est.r0 - a) < 1e-8
    assert abs(est.v - (-w)) < 1e-2          # v = V(r0-) - V(r0+)
    assert est.reliable


def test_junction_zero_for_free_line():
    line = trace_mixed_line(zero_potential(), 0.0, 1.0, 1,
                            np.geomspace(60.0, 1.0, 10),
                            np.linspace(0.0, 3.0, 4), r_cap=20.0,
                            refine_rel=0.02)
    est = junction_discontinuity(line, 1, 0.0)
    assert abs(est.v) < 1e-9
    assert est.reliable


def test_junction_zero_off_breakpoint(pcpot):
    # junction in the interior of (2, 3): all discontinuities already
    # known, so the fitted origin value is V0 = -2 and v vanishes
    e0 = brentq(lambda e: _nth_zero(pcpot, 0.0, e, 1, 30.0) - 2.1, 0.01, 30.0,
                xtol=1e-12)
    line = trace_mixed_line(pcpot, 0.0, e0, 1, np.geomspace(80.0, e0, 12),
                            np.linspace(0.0, 2.0, 3), r_cap=20.0,
                            refine_rel=0.02)
    est = junction_discontinuity(line, 1, 0.0,
                                 origin_value_excluding_junction=-2.0)
    assert abs(est.v) < 1e-2


def test_wronskian_identity_same_potential(pcpot):
    line = trace_fixed_l_line(pcpot, 0, 1, np.geomspace(40.0, 0.5, 10),
                              r_cap=15.0)
    probe = wronskian_residual(pcpot, pcpot, 0.0, line, n_samples=10,
                               volterra=False)
    assert np.max(np.abs(probe.dv_overlap)) < 1e-9
    assert np.max(probe.wronskian_residual) < 1e-9
    assert probe.kernel_sign_constant()


def test_wronskian_dual_quadrature(pcpot):
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(60.0, 0.4, 16), r_cap=12.0)
    probe = wronskian_residual(zero_potential(), pcpot, 0.0, line,
                               n_samples=30, volterra=True)
    assert probe.energies.size >= 30
    assert np.max(probe.wronskian_residual) < 1e-7
    assert math.isfinite(probe.volterra_norm) and probe.volterra_norm > 0.0


def test_kernel_diag_sign_for_close_pairs():
    # the never-vanishing diagonal argument assumes a shared line, so the
    # sampled sign stays constant for pairs close enough to share node
    # structure; strongly different pairs may legitimately cross
    from scatterkit import gaussian_potential
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(60.0, 0.4, 16), r_cap=12.0)
    probe = wronskian_residual(zero_potential(), square_well(0.5, 1.0), 0.0,
                               line, n_samples=30, volterra=False)
    assert probe.kernel_sign_constant()
    gpot = gaussian_potential(0.3, 1.0)
    gline = trace_fixed_l_line(gpot, 0, 1, np.geomspace(60.0, 0.4, 16),
                               r_cap=12.0)
    probe2 = wronskian_residual(gpot, zero_potential(), 0.0, gline,
                                n_samples=30, volterra=False)
    assert probe2.kernel_sign_constant()
    assert np.max(probe2.wronskian_residual) < 1e-7


def test_wronskian_distinguishes_potentials():
    # different potentials sharing pot1's line would need the overlap
    # integral to vanish;
    # here the measured values stay well away from zero on a subinterval
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(20.0, 0.5, 12), r_cap=12.0)
    probe = wronskian_residual(zero_potential(), square_well(0.5, 1.0), 0.0,
                               line, n_samples=12, volterra=False)
    assert np.max(np.abs(probe.dv_overlap)) > 1e-3


def test_rE_route_zero_and_single_step():
    # trivial control: the free line carries no jumps on either axis
    line = trace_fixed_l_line(zero_potential(), 0, 1,
                              np.geomspace(80.0, 0.3, 20), r_cap=12.0,
                              refine_rel=0.004)
    rec = reconstruct_from_rE_line(line)
    assert rec.breakpoints == ()
    # single-step well: one breakpoint near 1 with value near -1
    pot = PiecewiseConstantPotential((1.0,), (-1.0,))
    step_line = trace_fixed_l_line(pot, 0, 1, np.geomspace(120.0, 0.02, 30),
                                   r_cap=8.0, refine_rel=0.004)
    rec2 = reconstruct_from_rE_line(step_line)
    assert len(rec2.breakpoints) == 1
    assert abs(rec2.breakpoints[0] - 1.0) < 0.02
    assert abs(rec2.values[0] + 1.0) < 0.05
