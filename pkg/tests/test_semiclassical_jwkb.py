"""Turning points and JWKB phase shifts against exact solves."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from scatterkit import (DomainError, RadialPotential, TurningPointError,
                        gaussian_potential, jwkb_phase_shift, phase_shift,
                        square_well, turning_point, zero_potential)


def test_free_turning_point():
    assert abs(turning_point(zero_potential(), 1.5, 3.0) - 0.5) < 1e-12


def test_constant_core_turning_point():
    # V = -V0 inside a wide well: r = lam / sqrt(k^2 + V0)
    pot = square_well(3.0, 10.0)
    lam, k = 2.0, 1.0
    expected = lam / math.sqrt(k * k + 3.0)
    assert abs(turning_point(pot, lam, k) - expected) < 1e-10


def test_gaussian_turning_vs_bisection_oracle():
    pot = gaussian_potential(0.2, 1.0)
    lam, k = 2.0, 1.0
    oracle = brentq(lambda r: k * k - pot.evaluate(r) - (lam / r) ** 2,
                    0.05, 50.0, xtol=1e-13)
    assert abs(turning_point(pot, lam, k) - oracle) < 1e-12


class _SmoothedWell(RadialPotential):
    """Attractive Woods-Saxon-style pocket that creates three turnings."""

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise DomainError("negative radius")
        out = -5.0 / (1.0 + np.exp(np.minimum((r - 1.0) / 0.05, 700.0)))
        return float(out) if out.ndim == 0 else out

    def support_scale(self):
        return 1.0

    def lower_bound(self):
        return -5.0

    def negligible_radius(self, tol=1e-12):
        return 1.0 + 0.05 * math.log(5.0 / tol)


def test_multiple_turning_points_raise():
    with pytest.raises(TurningPointError) as err:
        turning_point(_SmoothedWell(), 2.0, 1.0)
    assert len(err.value.brackets) == 3
    with pytest.raises(TurningPointError):
        jwkb_phase_shift(_SmoothedWell(), 2.0, 1.0)


def test_jwkb_free_is_zero():
    assert abs(jwkb_phase_shift(zero_potential(), 2.5, 3.0)) < 1e-10


def test_jwkb_vs_exact_gaussian():
    pot = gaussian_potential(0.2, 1.0)
    delta_jwkb = jwkb_phase_shift(pot, 2.5, 3.0)
    delta_exact = phase_shift(pot, 2.0, 3.0).delta
    assert abs(delta_jwkb - delta_exact) < 0.05


def test_jwkb_validity_improves_with_k():
    pot = gaussian_potential(0.2, 1.0)
    errors = []
    for k in (2.0, 4.0, 8.0):
        delta_jwkb = jwkb_phase_shift(pot, 2.5, k)
        delta_exact = phase_shift(pot, 2.0, k).delta
        errors.append(abs(delta_jwkb - delta_exact))
    assert errors[2] < errors[1] < errors[0]


def test_turning_domain_errors():
    with pytest.raises(DomainError):
        turning_point(zero_potential(), -1.0, 2.0)
    with pytest.raises(DomainError):
        turning_point(zero_potential(), 1.0, 0.0)
