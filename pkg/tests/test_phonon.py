"""
Tests for the phonon environment: occupation, spectral density, correlation
functions, dephasing, sideband spectrum and filtered fraction.
"""
import logging
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from qdphonon.emitter import CavityFilter
from qdphonon.errors import ParameterError
from qdphonon.numerics import gaussian_cutoff
from qdphonon.phonon import (
    MaterialParams,
    PhononCorrelationTable,
    PhononParams,
    Temperature,
    coth_weight,
    confinement_length,
    correlation_time_max,
    dephasing_rate,
    filtered_fraction,
    franck_condon,
    phi,
    phonon_correlation,
    phonon_params_from_material,
    sideband_spectrum,
    sideband_weight,
    spectral_density,
    thermal_occupation,
    weak_coupling_sideband,
)
from qdphonon.units import K_B_OVER_HBAR

from conftest import KAPPA_QD1

T1_QD1 = 1100.0


##############################################################################
# Parameters
##############################################################################
def test_phonon_params_validation():
    """Test invalid phonon parameters are rejected."""
    with pytest.raises(ParameterError):
        PhononParams(-0.01, 7.9, 4.4e-4)
    with pytest.raises(ParameterError):
        PhononParams(0.01, 0.0, 4.4e-4)
    with pytest.raises(ParameterError):
        PhononParams(0.01, 7.9, -1.0)
    with pytest.raises(ParameterError):
        PhononParams(0.01, math.nan, 1.0)


def test_phonon_presets(qd1, qd2):
    """Test the published presets."""
    assert (qd1.alpha, qd1.nu_c, qd1.mu) == (0.0082, 7.9, 4.4e-4)
    assert (qd2.alpha, qd2.nu_c, qd2.mu) == (0.0071, 11.9, 5.6e-4)
    assert PhononParams.from_preset("qd1") == qd1
    with pytest.raises(ParameterError):
        PhononParams.from_preset("QD9")


def test_temperature():
    """Test beta and validation of temperatures."""
    assert Temperature(4.0).beta == pytest.approx(1.0 / (0.1309 * 4.0))
    with pytest.raises(ParameterError):
        Temperature(0.0)
    with pytest.raises(ParameterError):
        Temperature(-3.0)


##############################################################################
# Elementary functions
##############################################################################
def test_thermal_occupation():
    """Test the Bose-Einstein occupation and its high-temperature limit."""
    beta = 1.0 / (K_B_OVER_HBAR * 10.0)
    assert thermal_occupation(1.0, 10.0) == pytest.approx(1.0 / math.expm1(beta))
    nu = np.array([1e-3, 1e-2])
    np.testing.assert_allclose(thermal_occupation(nu, 300.0),
                               1.0 / (nu / (K_B_OVER_HBAR * 300.0)) - 0.5, rtol=1e-3)
    with pytest.raises(ParameterError):
        thermal_occupation(0.0, 4.0)


def test_occupation_vanishes_at_high_frequency():
    """Test n(nu) underflows to zero without warnings."""
    assert thermal_occupation(1e4, 1.0) == 0.0


def test_spectral_density(qd1):
    """Test J(nu) = alpha nu^3 exp(-nu^2/nu_c^2)."""
    assert spectral_density(0.0, qd1) == 0.0
    assert spectral_density(qd1.nu_c, qd1) == pytest.approx(qd1.alpha * qd1.nu_c ** 3 / math.e)
    with pytest.raises(ParameterError):
        spectral_density(-1.0, qd1)


def test_coth_weight_continuous_at_zero():
    """Test nu coth(beta nu/2) is smooth through the series threshold."""
    beta = 2.0
    assert coth_weight(0.0, beta) == pytest.approx(2.0 / beta)
    below = coth_weight(0.99e-4 / beta, beta)
    above = coth_weight(1.01e-4 / beta, beta)
    assert below == pytest.approx(above, rel=1e-8)
    assert coth_weight(-3.0, beta) == pytest.approx(coth_weight(3.0, beta))


##############################################################################
# Correlation functions
##############################################################################
def test_phi_zero_is_real(qd1):
    """Test phi(0) is real and matches the tabulated value at 4 K."""
    value = phi(0.0, qd1, 4.0)
    assert value.imag == 0.0
    assert value.real == pytest.approx(0.263154, rel=1e-4)


def test_franck_condon_qd1(qd1):
    """Test B^2 of QD1 at 4 K."""
    assert franck_condon(qd1, 4.0) ** 2 == pytest.approx(0.768624, rel=1e-4)


def test_franck_condon_decreases_with_temperature(qd1):
    """Test B drops as the bath warms."""
    values = [franck_condon(qd1, T) for T in (2.0, 10.0, 20.0, 30.0)]
    assert all(0 < b <= 1 for b in values)
    assert values == sorted(values, reverse=True)


def test_no_coupling_limits():
    """Test alpha = 0 gives B = 1, G = 1 and no dephasing."""
    p = PhononParams(0.0, 7.9, 4.4e-4)
    assert franck_condon(p, 10.0) == 1.0
    assert phonon_correlation(1.0, p, 10.0) == 1.0
    assert dephasing_rate(p, 10.0) == 0.0
    assert sideband_spectrum(-3.0, p, 10.0) == 0j


def test_correlation_normalisation(qd1):
    """Test B^2 G(0) = 1 and G(tau) -> 1 at long delays."""
    b2 = franck_condon(qd1, 10.0) ** 2
    assert b2 * phonon_correlation(0.0, qd1, 10.0) == pytest.approx(1.0, abs=1e-12)
    tau_max = correlation_time_max(qd1, 10.0)
    assert abs(phonon_correlation(tau_max, qd1, 10.0) - 1.0) < 1e-6


def test_phi_decays(qd1):
    """Test phi(tau) falls below 2% of phi(0) after ten cut-off periods."""
    tau = 10.0 / qd1.nu_c
    assert abs(phi(tau, qd1, 4.0)) < 0.02 * abs(phi(0.0, qd1, 4.0))


def test_zero_temperature_limit(qd1):
    """Test B^2 tends to exp(-alpha nu_c^2 / 2) and gamma_pd to zero as T -> 0."""
    vacuum = qd1.alpha * qd1.nu_c ** 2 / 2.0
    rates = []
    for T in (1.0, 0.1, 0.01):
        re_phi0 = phi(0.0, qd1, T).real
        # thermal excess is bounded by alpha (pi^2 / 3) (k_B T / hbar)^2
        excess = qd1.alpha * math.pi ** 2 / 3.0 * (K_B_OVER_HBAR * T) ** 2
        assert re_phi0 >= vacuum * (1.0 - 1e-9)
        assert re_phi0 - vacuum <= excess + 1e-9 * vacuum
        rates.append(dephasing_rate(qd1, T))
    assert franck_condon(qd1, 0.01) ** 2 == pytest.approx(math.exp(-vacuum), rel=1e-6)
    assert rates[0] > rates[1] >= rates[2] >= 0.0
    assert rates[2] < 1e-20


def test_phi_rejects_negative_delay(qd1):
    """Test phi requires tau >= 0."""
    with pytest.raises(ParameterError):
        phi(-0.1, qd1, 4.0)


def test_correlation_time_max(qd1):
    """Test the delay horizon follows the slower of the two decay scales."""
    beta = Temperature(4.0).beta
    assert correlation_time_max(qd1, 4.0) == pytest.approx(40.0 * beta / (2.0 * math.pi))
    assert correlation_time_max(PhononParams(0.01, 0.05, 0.0), 300.0) == 200.0


##############################################################################
# Dephasing
##############################################################################
def test_dephasing_rate_qd1(qd1):
    """Test gamma_pd / Gamma across the temperature range."""
    gamma = 1.0 / T1_QD1
    assert dephasing_rate(qd1, 4.0) / gamma < 0.1
    assert dephasing_rate(qd1, 20.0) / gamma > 0.45
    assert dephasing_rate(qd1, 22.0) / gamma > 0.5


def test_dephasing_rate_scaling(qd1):
    """Test gamma_pd scales as alpha^2 mu and rises with temperature."""
    base = dephasing_rate(qd1, 15.0)
    doubled_mu = dephasing_rate(PhononParams(qd1.alpha, qd1.nu_c, 2 * qd1.mu), 15.0)
    doubled_alpha = dephasing_rate(PhononParams(2 * qd1.alpha, qd1.nu_c, qd1.mu), 15.0)
    assert doubled_mu == pytest.approx(2 * base, rel=1e-9)
    assert doubled_alpha == pytest.approx(4 * base, rel=1e-9)
    rates = [dephasing_rate(qd1, T) for T in (4.0, 10.0, 20.0, 30.0)]
    assert rates == sorted(rates)
    assert dephasing_rate(PhononParams(qd1.alpha, qd1.nu_c, 0.0), 15.0) == 0.0


##############################################################################
# Sideband spectrum
##############################################################################
def test_weak_coupling_detailed_balance(qd1):
    """Test S(omega) / S(-omega) = exp(-beta omega) at first order."""
    beta = Temperature(10.0).beta
    for w in (1.0, 3.0, 8.0):
        ratio = weak_coupling_sideband(w, qd1, 10.0) / weak_coupling_sideband(-w, qd1, 10.0)
        assert ratio == pytest.approx(math.exp(-beta * w), rel=1e-10)


def test_weak_coupling_emission_side_dominates(qd1):
    """Test the emission side is larger at low temperature."""
    assert weak_coupling_sideband(-5.0, qd1, 4.0) > 10 * weak_coupling_sideband(5.0, qd1, 4.0)


def test_sideband_spectrum_modes(qd1):
    """Test mode validation and the weak-coupling result is real."""
    value = sideband_spectrum(-5.0, qd1, 4.0, mode="weak_coupling")
    assert value.imag == 0.0
    assert value.real == pytest.approx(weak_coupling_sideband(-5.0, qd1, 4.0))
    with pytest.raises(ParameterError):
        sideband_spectrum(-5.0, qd1, 4.0, mode="second_order")
    with pytest.raises(ParameterError):
        sideband_spectrum(math.inf, qd1, 4.0)


@pytest.mark.slow
def test_exact_sideband_close_to_weak_coupling(qd1):
    """Test the exact sideband exceeds first order by the multi-phonon share."""
    for w, expected in ((-5.0, 1.027), (5.0, 1.027), (-10.0, 1.142)):
        exact = sideband_spectrum(w, qd1, 4.0).real
        weak = weak_coupling_sideband(w, qd1, 4.0)
        assert exact / weak == pytest.approx(expected, abs=0.01)


@pytest.mark.slow
def test_exact_sideband_detailed_balance(qd1):
    """Test the exact spectrum obeys detailed balance."""
    beta = Temperature(10.0).beta
    absorb = sideband_spectrum(3.0, qd1, 10.0).real
    emit = sideband_spectrum(-3.0, qd1, 10.0).real
    assert absorb / emit == pytest.approx(math.exp(-beta * 3.0), rel=1e-3)


def test_correlation_table_matches_quadrature(qd1):
    """Test the tabulated phi agrees with adaptive quadrature."""
    table = PhononCorrelationTable(qd1, 4.0)
    assert table.franck_condon_sq == pytest.approx(franck_condon(qd1, 4.0) ** 2, rel=1e-6)
    k = table.tau.size // 50
    assert table.phi[k] == pytest.approx(phi(float(table.tau[k]), qd1, 4.0), abs=1e-6)


def test_correlation_table_sideband(qd1):
    """Test the tabulated sideband against first order and its sum rule."""
    table = PhononCorrelationTable(qd1, 4.0)
    ratio = table.sideband_spectrum(-5.0)[0].real / weak_coupling_sideband(-5.0, qd1, 4.0)
    assert ratio == pytest.approx(1.027, abs=0.01)

    span = 2.0 * gaussian_cutoff(qd1.nu_c)
    w = np.linspace(-span, span, 4001)
    total = sp_integrate.simpson(table.sideband_spectrum(w).real, x=w)
    expected = math.pi * (1.0 / table.franck_condon_sq - 1.0)
    assert total == pytest.approx(expected, rel=0.05)


##############################################################################
# Filtered fraction
##############################################################################
def test_filtered_fraction_printed(qd1):
    """Test F of the QD1 cavity at 4 K and 22 K."""
    f = CavityFilter(KAPPA_QD1)
    assert filtered_fraction(qd1, 4.0, f) == pytest.approx(0.3063, abs=0.005)
    assert filtered_fraction(qd1, 22.0, f) == pytest.approx(0.4359, abs=0.005)


def test_filtered_fraction_amplitude_cutoff(qd1):
    """Test the amplitude-cutoff weight lands on the measured fractions."""
    f = CavityFilter(KAPPA_QD1)
    assert filtered_fraction(qd1, 4.0, f, "amplitude_cutoff") == pytest.approx(0.19, abs=0.03)
    assert filtered_fraction(qd1, 22.0, f, "amplitude_cutoff") == pytest.approx(0.33, abs=0.04)


def test_filtered_fraction_limits(qd1):
    """Test F lies in [0, 1], grows with kappa and is 1 without a filter."""
    values = [filtered_fraction(qd1, 10.0, CavityFilter(k)) for k in (1.0, 5.0, 20.0, 200.0)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values == sorted(values)
    assert values[-1] > 0.95
    assert filtered_fraction(qd1, 10.0, CavityFilter.flat()) == 1.0
    with pytest.raises(ParameterError):
        filtered_fraction(qd1, 10.0, CavityFilter(5.0), weight="bogus")


def test_filtered_fraction_detuning(qd1):
    """Test detuning toward the emission side transmits more of the emission weight."""
    centred = filtered_fraction(qd1, 4.0, CavityFilter(KAPPA_QD1, 0.0), "emission")
    red = filtered_fraction(qd1, 4.0, CavityFilter(KAPPA_QD1, -5.0), "emission")
    blue = filtered_fraction(qd1, 4.0, CavityFilter(KAPPA_QD1, 5.0), "emission")
    assert red > centred
    assert red > blue


def test_filtered_fraction_printed_weight_is_even(qd1):
    """Test the printed weight ignores the sign of the detuning."""
    red = filtered_fraction(qd1, 4.0, CavityFilter(KAPPA_QD1, -5.0))
    blue = filtered_fraction(qd1, 4.0, CavityFilter(KAPPA_QD1, 5.0))
    assert red == pytest.approx(blue, rel=1e-8)


def test_sideband_weight_modes(qd1):
    """Test the three weight functions at one frequency."""
    w, T = -4.0, 10.0
    beta = Temperature(T).beta
    coth = w / math.tanh(beta * w / 2.0)
    env = math.exp(-(w / qd1.nu_c) ** 2)
    assert sideband_weight(w, qd1, T) == pytest.approx(coth * env)
    assert sideband_weight(w, qd1, T, "emission") == pytest.approx((coth - w) * env)
    assert sideband_weight(w, qd1, T, "amplitude_cutoff") == pytest.approx(coth * math.sqrt(env))


##############################################################################
# Material mapping
##############################################################################
def test_material_mapping():
    """Test alpha and mu for GaAs-like constants."""
    m = MaterialParams(D_e=7.0, D_h=-1.0, rho_mass=5370.0, c_s=5110.0, Delta_e=40.0, Delta_h=20.0)
    alpha, mu = phonon_params_from_material(m)
    assert alpha == pytest.approx(0.0210904612335, rel=1e-6)
    assert mu == pytest.approx(0.000540184139274, rel=1e-6)


def test_material_mapping_equal_potentials(caplog):
    """Test equal deformation potentials give no coupling and undefined mu."""
    m = MaterialParams(D_e=5.0, D_h=5.0, rho_mass=5370.0, c_s=5110.0, Delta_e=40.0, Delta_h=20.0)
    with caplog.at_level(logging.WARNING):
        alpha, mu = phonon_params_from_material(m)
    assert alpha == 0.0
    assert math.isnan(mu)
    assert "mu is undefined" in caplog.text


def test_material_validation():
    """Test non-physical material constants are rejected."""
    with pytest.raises(ParameterError):
        MaterialParams(7.0, -1.0, 0.0, 5110.0, 40.0, 20.0)
    with pytest.raises(ParameterError):
        MaterialParams(7.0, -1.0, 5370.0, 5110.0, 0.0, 20.0)


def test_confinement_length():
    """Test l = c_s / nu_c in nm."""
    assert confinement_length(7.9) == pytest.approx(0.646835, rel=1e-5)
    with pytest.raises(ParameterError):
        confinement_length(0.0)
