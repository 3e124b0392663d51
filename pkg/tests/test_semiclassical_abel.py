"""Abel transform pairs, the low-k completion, and the mixed JWKB pipeline."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import k1

from scatterkit import (PhaseShiftTable, StageError, TurningPointCurve,
                        abel_invert_fixed_energy, abel_invert_fixed_l,
                        forward_fixed_l, gaussian_potential, jwkb_phase_shift,
                        mixed_jwkb_invert, reconstruct_low_k_phase,
                        sabatier_forward, turning_point)


def _curve_from_sigma(lam, sigma, k0=4.0):
    free = lam / k0
    return TurningPointCurve("fixed_energy", lam, free * np.exp(sigma), free, k0)


def _table(lam, d_e, ks, d_l, k0=4.0, lam0=2.0):
    return PhaseShiftTable(ell0=lam0 - 0.5, k0=k0, fixed_l_k=ks,
                           fixed_l_delta=d_l, fixed_e_lam=lam,
                           fixed_e_delta=d_e)


def test_sabatier_forward_free_curve():
    lam = np.geomspace(2.0, 30.0, 60)
    curve = _curve_from_sigma(lam, np.zeros_like(lam))
    np.testing.assert_allclose(sabatier_forward(curve), 0.0, atol=1e-14)


def test_sabatier_forward_vs_quadrature_oracle():
    # sigma = exp(-lam): delta(lam) = -lam K_1(lam) in closed form,
    # cross-checked by adaptive quadrature of the defining integral
    lam = np.geomspace(1.0, 30.0, 240)
    curve = _curve_from_sigma(lam, np.exp(-lam))
    delta = sabatier_forward(curve, lam_out=np.array([1.5, 2.5, 4.0]))
    for l0, d in zip((1.5, 2.5, 4.0), delta):
        oracle = -l0 * quad(lambda t: math.exp(-l0 * math.cosh(t)) * math.cosh(t),
                            0.0, 12.0, limit=200)[0]
        assert abs(d - oracle) < 2e-6
        assert abs(d - (-l0 * k1(l0))) < 2e-6


def test_fixed_energy_round_trip():
    rng = np.random.default_rng(11)
    lam = np.geomspace(2.0, 40.0, 260)
    for _ in range(5):
        a = rng.uniform(0.02, 0.08)
        b = rng.uniform(0.4, 0.9)
        sigma = a * np.exp(-b * (lam - lam[0]))
        curve = _curve_from_sigma(lam, sigma)
        delta = sabatier_forward(curve)
        table = _table(lam, delta, np.array([4.0, 5, 6, 7, 8, 9, 10, 12.0]),
                       np.zeros(8))
        back = abel_invert_fixed_energy(table)
        sigma_back = np.log(back.radii / back.free_reference)
        interior = sigma > 1e-2 * sigma.max()
        rel = np.abs(sigma_back - sigma)[interior] / sigma[interior]
        assert np.max(rel) < 1e-3
        assert back.hypothesis_ok


def test_fixed_l_round_trip():
    rng = np.random.default_rng(12)
    ks = np.linspace(0.02, 12.0, 320)
    lam0 = 2.0
    for _ in range(5):
        alpha = rng.uniform(0.01, 0.05)
        beta = rng.uniform(0.2, 0.5)
        dr = lambda k: alpha * k * np.exp(-beta * k ** 2)
        deltas = forward_fixed_l(dr, ks)
        cut = 160
        table = _table(np.geomspace(lam0, 30.0, 50), np.zeros(50),
                       ks[cut:], deltas[cut:], k0=ks[cut], lam0=lam0)
        curve = abel_invert_fixed_l(table, ks[:cut], deltas[:cut],
                                    k_out=ks[40:280])
        dr_back = curve.radii - curve.free_reference
        dr_true = dr(ks[40:280])
        assert np.max(np.abs(dr_back - dr_true)) < 1e-3 * np.max(np.abs(dr_true))
        assert curve.monotone_ok()


def test_fixed_l_requires_completion():
    table = _table(np.geomspace(2.0, 30.0, 50), np.zeros(50),
                   np.linspace(4.0, 20.0, 40), np.zeros(40))
    with pytest.raises(StageError) as err:
        abel_invert_fixed_l(table, [], [])
    assert err.value.stage == "fixed_l"


def test_fixed_energy_requires_enough_samples():
    table = _table(np.geomspace(2.0, 30.0, 5), np.zeros(5),
                   np.linspace(4.0, 20.0, 40), np.zeros(40))
    with pytest.raises(StageError) as err:
        abel_invert_fixed_energy(table)
    assert err.value.stage == "fixed_energy"


def test_reconstruct_low_k_phase_free():
    # r = lam/k0 exactly: both integrals cancel and delta(k) = 0
    lam = np.geomspace(2.0, 40.0, 200)
    curve = _curve_from_sigma(lam, np.zeros_like(lam))
    deltas = reconstruct_low_k_phase(curve, np.array([1.0, 2.0, 3.0, 3.9]))
    np.testing.assert_allclose(deltas, 0.0, atol=1e-10)


def test_reconstruct_low_k_phase_coverage_error():
    lam = np.geomspace(2.0, 6.0, 40)           # short curve
    curve = _curve_from_sigma(lam, 0.02 * np.exp(-lam / 4.0))
    with pytest.raises(StageError) as err:
        reconstruct_low_k_phase(curve, np.array([0.4]))
    assert err.value.stage == "completion"


@pytest.fixture(scope="module")
def gaussian_jwkb_table():
    pot = gaussian_potential(0.2, 1.0)
    k0, lam0 = 4.0, 2.0
    lam = np.unique(np.concatenate([np.linspace(lam0, 12.0, 160),
                                    np.geomspace(12.0, 42.0, 60)]))
    d_e = np.array([jwkb_phase_shift(pot, l, k0) for l in lam])
    ks = np.unique(np.concatenate([np.linspace(k0, 12.0, 120),
                                   np.geomspace(12.0, 40.0, 40)]))
    d_l = np.array([jwkb_phase_shift(pot, lam0, k) for k in ks])
    return pot, _table(lam, d_e, ks, d_l, k0=k0, lam0=lam0)


def test_completion_matches_direct_jwkb(gaussian_jwkb_table):
    pot, table = gaussian_jwkb_table
    curve = abel_invert_fixed_energy(table)
    # the fixed-energy branch alone already recovers V for r >= r0
    r_e, v_e = curve.potential_samples()
    v_true = pot.evaluate(r_e)
    strong = np.abs(v_true) > 0.02
    assert np.max(np.abs(v_e[strong] - v_true[strong])
                  / np.abs(v_true[strong])) < 0.05
    kc = np.linspace(2.0, 3.999, 10)
    deltas = reconstruct_low_k_phase(curve, kc)
    direct = np.array([jwkb_phase_shift(pot, 2.0, k) for k in kc])
    assert np.max(np.abs(deltas - direct)) < 0.02
    # seam with the measured branch at k = k0
    seam = reconstruct_low_k_phase(curve, np.array([3.9999]))[0]
    assert abs(seam - table.fixed_l_delta[0]) < 0.01


def test_mixed_pipeline_round_trip(gaussian_jwkb_table):
    pot, table = gaussian_jwkb_table
    result = mixed_jwkb_invert(table)
    assert result.curve_fixed_energy.hypothesis_ok
    assert result.curve_fixed_l.hypothesis_ok
    rr = np.linspace(0.06, 3.5, 160)
    v_rec = result.potential.evaluate(rr)
    v_true = pot.evaluate(rr)
    mask = np.abs(v_true) > 0.02
    rel = np.abs(v_rec[mask] - v_true[mask]) / np.abs(v_true[mask])
    assert np.max(rel) < 0.07
    assert result.seam_residual < 0.05 * abs(pot.evaluate(result.r0)) + 0.01


def test_mixed_pipeline_zero_data():
    lam = np.geomspace(2.0, 40.0, 120)
    ks = np.linspace(4.0, 40.0, 120)
    table = _table(lam, np.zeros_like(lam), ks, np.zeros_like(ks))
    result = mixed_jwkb_invert(table)
    rr = np.linspace(0.1, 8.0, 100)
    assert np.max(np.abs(result.potential.evaluate(rr))) < 1e-8
    assert result.seam_residual < 1e-8


def test_turning_curve_potential_samples():
    pot = gaussian_potential(0.2, 1.0)
    k0 = 4.0
    lam = np.geomspace(2.0, 30.0, 80)
    radii = np.array([turning_point(pot, l, k0) for l in lam])
    curve = TurningPointCurve("fixed_energy", lam, radii, lam / k0, k0)
    rr, vv = curve.potential_samples()
    np.testing.assert_allclose(vv, pot.evaluate(rr), atol=1e-10)
