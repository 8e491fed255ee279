import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nvefield.sensitivity import (
    OFF_RESONANT_GROUPS,
    ProtocolParams,
    count_rate_and_contrast,
    density_sweep,
    linewidth_model,
    microwave_free_sensitivity,
    optical_linewidth,
    optimal_density,
    perpendicular_suppression,
    required_bias_field,
    resonant_enhancement,
    resonant_fraction,
    sensitivity_breakdown,
)

P = ProtocolParams()

# closed form 0.5 * 1e4 MHz / (0.7 * 4/3 + 1.4 * 2 sqrt2 / 3), evaluated once by hand
BIAS_10GHZ = 2219.0012


def test_protocol_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(c0=1.2)
    with pytest.raises(ValueError):
        ProtocolParams(p_f=0.0)
    with pytest.raises(ValueError):
        ProtocolParams(kappa_ref=-1.0)


# -- linewidths, enhancement, rates ---------------------------------------------------------


def test_linewidth_examples():
    assert linewidth_model(8.0, 0.2, 3.7) == pytest.approx(3.9, rel=1e-12)
    assert optical_linewidth(0.01) == pytest.approx(2.1e4, rel=0.05)
    assert linewidth_model(0.0, 0.2, 3.7) == 0.2


def test_enhancement_examples():
    assert resonant_enhancement(8.0) == pytest.approx(2.0, rel=0.02)
    assert resonant_enhancement(0.01) == pytest.approx(100.0, rel=0.1)
    flat = replace(P, kappaE_e=1e-300)
    assert resonant_enhancement(0.1, flat) == pytest.approx(P.kappa_ref / (P.kappa0_e * 1e3), rel=1e-12)


def test_count_rate_and_contrast_examples():
    rate, c_r = count_rate_and_contrast(8.0)
    assert rate == pytest.approx(2.4e15, rel=1e-12)
    assert c_r == pytest.approx(0.54, rel=0.02)
    rate, c_r = count_rate_and_contrast(0.01)
    assert rate == pytest.approx(6.9e13, rel=0.15)
    assert c_r == pytest.approx(0.98, abs=0.01)
    assert resonant_fraction(1e12) == pytest.approx(1.0, abs=1e-11)


# -- sensitivity breakdown ---------------------------------------------------------------------


@given(st.floats(1e-4, 1e3))
def test_harmonic_identity_and_contrast_invariant(rho):
    b = sensitivity_breakdown(rho)
    assert 1.0 / b.eta_total == pytest.approx(1.0 / b.eta_pi + 1.0 / b.eta_f, rel=1e-14)
    assert b.c_r == pytest.approx(b.r_enh / (b.r_enh + OFF_RESONANT_GROUPS), rel=1e-14)
    assert 0 < b.c_r < 1
    # eta_F = P_F Gamma_e / (chi_par C_r sqrt(R))
    assert b.eta_f * b.c_r * math.sqrt(b.count_rate) / b.gamma_e == pytest.approx(P.p_f / P.chi_e_par, rel=1e-12)


def test_our_sample_row():
    b = sensitivity_breakdown(8.0)
    assert b.eta_f == pytest.approx(0.021, rel=0.15)
    assert b.eta_pi == pytest.approx(0.077, rel=0.15)
    assert b.eta_total == pytest.approx(0.017, rel=0.15)
    assert b.gamma_g == pytest.approx(3.9)


def test_optimal_sample_row():
    b = sensitivity_breakdown(0.01)
    assert b.eta_f == pytest.approx(0.0014, rel=0.15)
    assert b.eta_pi == pytest.approx(0.016, rel=0.15)
    assert b.eta_total == pytest.approx(0.0013, rel=0.15)


@pytest.mark.parametrize(
    "gamma,p,chi,rate,c,eta",
    [
        (1e6, 0.39, 7.0e5, 2.4e15, 0.54, 0.021),
        (3.9, 0.77, 6.97, 2.4e15, 0.11, 0.077),
        (2.1e4, 0.39, 7.0e5, 6.9e13, 0.98, 0.0014),
        (0.25, 0.77, 6.97, 6.9e13, 0.21, 0.016),
    ],
)
def test_table_rows_self_consistent(gamma, p, chi, rate, c, eta):
    # eta = P Gamma / (C chi sqrt(R)) with the tabulated columns, Gamma in MHz
    assert p * gamma * 1e6 / (c * chi * math.sqrt(rate)) == pytest.approx(eta, rel=0.15)


def test_doubling_rate_improves_by_sqrt2():
    a = sensitivity_breakdown(1.0)
    b = sensitivity_breakdown(1.0, replace(P, illumination_volume=2 * P.illumination_volume))
    assert a.eta_pi / b.eta_pi == pytest.approx(math.sqrt(2), rel=1e-12)
    assert a.eta_f / b.eta_f == pytest.approx(math.sqrt(2), rel=1e-12)


def test_fluorescence_channel_monotone():
    base = sensitivity_breakdown(0.1)
    wider = sensitivity_breakdown(0.1, replace(P, kappa0_e=2 * P.kappa0_e, kappa_ref=P.kappa_ref * 2))
    assert wider.eta_f > base.eta_f
    brighter = sensitivity_breakdown(0.1, replace(P, illumination_volume=0.5))
    assert brighter.eta_f < base.eta_f


# -- density sweep ------------------------------------------------------------------------------


def test_density_sweep_exponents():
    sw = density_sweep(1e-7, 1e6, 131)
    assert sw.slope_low == pytest.approx(-0.5, abs=0.05)
    assert sw.slope_high == pytest.approx(5 / 6, abs=0.05)
    assert sw.slope_conventional_high == pytest.approx(1 / 6, abs=0.05)


def test_density_sweep_validation():
    with pytest.raises(ValueError):
        density_sweep(1.0, 0.1, 10)
    with pytest.raises(ValueError):
        density_sweep(0.1, 1.0, 3)


def test_sweep_has_unique_minimum():
    sw = density_sweep(1e-3, 100.0, 400)
    d = np.diff(np.log(sw.eta))
    assert np.count_nonzero(np.diff(np.sign(d)) != 0) == 1
    rho, eta = optimal_density()
    assert 1e-3 < rho < 100.0
    assert eta <= sw.eta.min() * (1 + 1e-9)


# -- bias field ---------------------------------------------------------------------------------


def test_bias_field_golden():
    assert required_bias_field(1e4) == pytest.approx(BIAS_10GHZ, rel=1e-7)


def test_bias_field_limits_and_scaling():
    assert required_bias_field(0.0) == 0.0
    assert required_bias_field(1e5) == pytest.approx(10 * required_bias_field(1e4), rel=1e-12)


def test_bias_field_lifts_target_group():
    e = required_bias_field(1e4)
    target = 0.7 * e
    tilted_lower = 0.7 * (-e / 3) - 1.4 * (2 * math.sqrt(2) / 3) * e
    assert target - tilted_lower == pytest.approx(0.5e4, rel=1e-12)


# -- perpendicular suppression -----------------------------------------------------------------------


def _brute_shift(de, e0):
    f = lambda t: math.sqrt(e0 * e0 + de * de + 2 * de * e0 * math.cos(t))  # noqa: E731
    return integrate.quad(f, 0.0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13)[0] / (2 * math.pi) - e0


@pytest.mark.parametrize("ratio", [1e-3, 1e-2, 0.3, 2.0])
def test_suppression_matches_quadrature(ratio):
    e0 = 1.4e5
    assert perpendicular_suppression(ratio * e0, e0) == pytest.approx(_brute_shift(ratio * e0, e0), rel=1e-8)


def test_suppression_quadratic_law():
    e0 = 1.4e5
    d = np.geomspace(1e-3, 1e-2, 11) * e0
    s = perpendicular_suppression(d, e0)
    slope = np.polyfit(np.log(d), np.log(s), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.02)
    assert perpendicular_suppression(0.0, e0) == 0.0
    # no first-order term: shift / dE vanishes linearly
    assert perpendicular_suppression(2e-4 * e0, e0) / perpendicular_suppression(1e-4 * e0, e0) == pytest.approx(
        4.0, rel=1e-3)


# -- microwave-free variant ------------------------------------------------------------------------------


def test_microwave_free_estimate():
    eta, rho = microwave_free_sensitivity(2.0)
    assert eta == pytest.approx(0.150, rel=0.2)
    assert 1e-3 < rho < 100.0


def test_microwave_free_reduces_to_cryogenic_channel():
    eta, _ = microwave_free_sensitivity(P.kappa0_e * 1e-3, rho_nv_ppm=8.0)
    assert eta == pytest.approx(sensitivity_breakdown(8.0).eta_f, rel=1e-12)
