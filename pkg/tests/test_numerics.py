"""
Tests for the quadrature, Fourier-integral and least-squares kernels.
"""
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from qdphonon import numerics
from qdphonon.errors import FitError, ParameterError, QuadratureError
from qdphonon.experiment import pseudo_voigt
from qdphonon.numerics import (
    QuadratureResult,
    fourier_integral,
    gaussian_cutoff,
    integrate,
    least_squares_fit,
)


##############################################################################
# integrate
##############################################################################
def test_integrate_exponential():
    """Test the semi-infinite exponential integral."""
    result = integrate(lambda x: math.exp(-x), 0.0)
    assert isinstance(result, QuadratureResult)
    assert abs(result.value - 1.0) < 1e-10
    assert result.abs_error_estimate >= 0
    assert result.evaluations >= 1


def test_integrate_gaussian_moment():
    """Test the x^3 exp(-x^2) Gamma-function identity."""
    result = integrate(lambda x: x ** 3 * math.exp(-x * x), 0.0)
    assert abs(result.value - 0.5) < 1e-10


def test_integrate_coth_integrand_against_simpson():
    """Test x exp(-x^2) coth(x/2) against a fine Simpson sum."""
    def f(x):
        return 2.0 if x == 0 else x * math.exp(-x * x) / math.tanh(x / 2.0)

    x = np.linspace(0.0, 7.0, 1_000_001)
    safe = np.where(x == 0, 1.0, x)
    y = np.where(x == 0, 2.0, safe * np.exp(-safe ** 2) / np.tanh(safe / 2.0))
    oracle = sp_integrate.simpson(y, x=x)
    assert abs(integrate(f, 0.0).value - oracle) < 1e-8


def test_integrate_complex():
    """Test a complex integrand is integrated part by part."""
    result = integrate(lambda x: np.exp(-(1 + 1j) * x), 0.0, complex_valued=True)
    assert abs(result.value - (1 - 1j) / 2) < 1e-10


def test_integrate_linearity():
    """Test integrate(2f + 3g) = 2 integrate(f) + 3 integrate(g)."""
    def f(x):
        return math.exp(-x)

    def g(x):
        return x * math.exp(-x * x)

    combined = integrate(lambda x: 2 * f(x) + 3 * g(x), 0.0).value
    separate = 2 * integrate(f, 0.0).value + 3 * integrate(g, 0.0).value
    assert abs(combined - separate) < 1e-9


def test_integrate_even_function_two_sided():
    """Test twice the half-line integral equals the full-line integral."""
    def f(x):
        return math.exp(-x * x)

    half = integrate(f, 0.0).value
    full = integrate(f, -math.inf, math.inf).value
    assert abs(2 * half - full) < 1e-9
    assert abs(full - math.sqrt(math.pi)) < 1e-9


def test_integrate_rejects_bad_arguments():
    """Test tolerances and intervals are validated."""
    with pytest.raises(ParameterError):
        integrate(math.exp, 0.0, 1.0, rel_tol=0.0)
    with pytest.raises(ParameterError):
        integrate(math.exp, 1.0, 1.0)


def test_integrate_nan_reports_abscissa():
    """Test a NaN integrand fails and names where."""
    with pytest.raises(QuadratureError) as excinfo:
        integrate(lambda x: math.nan if x > 0.5 else 1.0, 0.0, 1.0)
    assert excinfo.value.abscissa is not None
    assert excinfo.value.abscissa > 0.5


def test_integrate_nonconvergence_carries_estimate(monkeypatch):
    """Test exhausting the subdivision budget reports the best estimate."""
    monkeypatch.setenv("QDPHONON_QUAD_LIMIT", "1")
    monkeypatch.setenv("QDPHONON_QUAD_RETRIES", "1")
    with pytest.raises(QuadratureError) as excinfo:
        integrate(lambda x: x * math.sin(50 * x), 0.0, 10.0)
    assert excinfo.value.best_estimate is not None
    assert excinfo.value.abscissa is None


def test_quadrature_retry_escalates_limit(monkeypatch):
    """Test failed attempts are retried with a four-fold larger budget."""
    limits = []

    def fake(func, a, b, epsabs, epsrel, limit, **weight):
        limits.append(limit)
        if len(limits) < 3:
            raise QuadratureError("not yet", best_estimate=0.0)
        return 1.0, 0.0, 21

    monkeypatch.setattr(numerics, "_quad_once", fake)
    assert integrate(math.exp, 0.0, 1.0).value == 1.0
    assert limits == [200, 800, 3200]


def test_quadrature_does_not_retry_nonfinite(monkeypatch):
    """Test non-finite integrand failures are raised at once."""
    calls = []

    def fake(func, a, b, epsabs, epsrel, limit, **weight):
        calls.append(limit)
        raise QuadratureError("nan", abscissa=0.25)

    monkeypatch.setattr(numerics, "_quad_once", fake)
    with pytest.raises(QuadratureError):
        integrate(math.exp, 0.0, 1.0)
    assert len(calls) == 1


def test_gaussian_cutoff():
    """Test the truncation point of Gaussian envelopes."""
    cut = gaussian_cutoff(2.0)
    assert math.exp(-(cut / 2.0) ** 2) == pytest.approx(1e-16, rel=1e-9)


##############################################################################
# fourier_integral
##############################################################################
def test_fourier_integral_zero_frequency():
    """Test the transform of exp(-t) at omega = 0."""
    value = fourier_integral(lambda t: math.exp(-t), 0.0)
    assert abs(value - 1.0) < 1e-10


def test_fourier_integral_unit_frequency():
    """Test 1/(1 + i omega) at omega = 1."""
    value = fourier_integral(lambda t: math.exp(-t), 1.0)
    assert abs(value - (1 - 1j) / 2) < 1e-8


def test_fourier_integral_negative_frequency():
    """Test 1/(1 + i omega) at omega = -1."""
    value = fourier_integral(lambda t: math.exp(-t), -1.0)
    assert abs(value - (1 + 1j) / 2) < 1e-8


def test_fourier_integral_gaussian_against_trapezoid():
    """Test exp(-t^2) at omega = 2 against a fine trapezoid sum."""
    t = np.linspace(0.0, 10.0, 2_000_001)
    oracle = sp_integrate.trapezoid(np.exp(-t ** 2) * np.exp(-2j * t), x=t)
    value = fourier_integral(lambda s: math.exp(-s * s), 2.0)
    assert abs(value - oracle) < 1e-8
    assert abs(value.real - math.sqrt(math.pi) / 2 * math.exp(-1.0)) < 1e-8


def test_fourier_integral_complex_integrand_finite_range():
    """Test a complex integrand on a finite range."""
    # exp(-(1 + i)t) transforms to 1 / (1 + i(1 + omega))
    value = fourier_integral(lambda t: np.exp(-(1 + 1j) * t), 2.0, upper=60.0)
    assert abs(value - 1 / (1 + 3j)) < 1e-8


def test_fourier_integral_rejects_infinite_frequency():
    """Test omega must be finite."""
    with pytest.raises(ParameterError):
        fourier_integral(lambda t: math.exp(-t), math.inf)


##############################################################################
# least_squares_fit
##############################################################################
def exp_model(p, x):
    return p[0] * np.exp(-x / p[1])


def test_fit_noiseless_exponential():
    """Test exact recovery of y = 2 exp(-x/3)."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0)
    result = least_squares_fit(exp_model, x, y, np.ones_like(x), [1.0, 1.0])
    assert result.converged
    np.testing.assert_allclose(result.params, [2.0, 3.0], rtol=1e-6)
    assert result.residual_norm < 1e-8 * np.sum(y ** 2)


def test_fit_noisy_exponential(rng):
    """Test recovery within 5% under 1% noise."""
    x = np.linspace(0.0, 10.0, 20)
    clean = 2.0 * np.exp(-x / 3.0)
    sigma = 0.01 * clean
    y = clean + sigma * rng.standard_normal(x.size)
    result = least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0])
    np.testing.assert_allclose(result.params, [2.0, 3.0], rtol=0.05)


def test_fit_pseudo_voigt():
    """Test recovery of a pseudo-Voigt contrast curve."""
    t = np.linspace(0.0, 1500.0, 40)
    y = pseudo_voigt(t, 500.0, 0.4)
    result = least_squares_fit(lambda p, x: pseudo_voigt(x, p[0], p[1]), t, y,
                               np.full(t.size, 0.01), [300.0, 0.5],
                               lower=[1.0, 0.0], upper=[np.inf, 1.0])
    assert result.params[0] == pytest.approx(500.0, rel=0.03)
    assert result.params[1] == pytest.approx(0.4, rel=0.03)


def test_fit_covariance_is_symmetric_psd(rng):
    """Test the covariance is symmetric positive semidefinite."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0) + 0.01 * rng.standard_normal(x.size)
    result = least_squares_fit(exp_model, x, y, np.full(x.size, 0.01), [1.0, 1.0])
    np.testing.assert_allclose(result.covariance, result.covariance.T)
    assert np.all(np.linalg.eigvalsh(result.covariance) >= -1e-12)
    assert np.all(result.uncertainties > 0)


def test_fit_is_deterministic():
    """Test identical inputs give identical outputs."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0) + 0.01 * np.sin(7 * x)
    first = least_squares_fit(exp_model, x, y, np.ones_like(x), [1.0, 1.0])
    second = least_squares_fit(exp_model, x, y, np.ones_like(x), [1.0, 1.0])
    np.testing.assert_array_equal(first.params, second.params)


def test_fit_flags_bound():
    """Test a fit pushed against a bound is flagged."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0)
    result = least_squares_fit(exp_model, x, y, np.ones_like(x), [1.0, 1.0],
                               lower=[0.0, 0.1], upper=[1.5, 10.0])
    assert result.at_bound[0]
    assert "at_bound" in result.flags
    assert result.params[0] == pytest.approx(1.5)


def test_fit_flags_singular_jacobian():
    """Test redundant parameters are reported."""
    x = np.linspace(1.0, 5.0, 10)
    result = least_squares_fit(lambda p, s: (p[0] + p[1]) * s, x, 3.0 * x, np.ones_like(x),
                               [1.0, 1.0])
    assert "singular_jacobian" in result.flags
    assert result.params[0] + result.params[1] == pytest.approx(3.0, rel=1e-6)
    # only the identifiable sum keeps a variance
    assert np.all(np.isfinite(result.covariance))
    assert np.abs(result.covariance).max() < 1.0


def test_fit_full_rank_with_disparate_scales():
    """Test well-posed fits are not flagged when parameters differ by orders of magnitude."""
    x = np.linspace(0.0, 1e4, 30)
    y = 2e-4 * np.exp(-x / 3e3)
    result = least_squares_fit(exp_model, x, y, np.full(x.size, 1e-6), [1e-4, 2e3])
    assert "singular_jacobian" not in result.flags
    np.testing.assert_allclose(result.params, [2e-4, 3e3], rtol=1e-4)
    assert np.all(result.uncertainties > 0)


def test_fit_prior_pulls_parameter():
    """Test a tight prior overrides the data and a loose one changes nothing."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0)
    sigma = np.ones_like(x)
    free = least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0])
    tied = least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0], prior_center=[2.5, 3.0],
                             prior_sigma=[1e-6, np.inf])
    assert tied.params[0] == pytest.approx(2.5, rel=1e-4)
    assert 0.0 <= tied.prior_norm < tied.residual_norm
    assert free.prior_norm == 0.0
    loose = least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0], prior_center=[2.5, 3.0],
                              prior_sigma=[np.inf, np.inf])
    np.testing.assert_allclose(loose.params, free.params, rtol=1e-6)


def test_fit_prior_validation():
    """Test priors must come in pairs matching the parameters."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0)
    sigma = np.ones_like(x)
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0], prior_center=[2.0, 3.0])
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0], prior_center=[2.0],
                          prior_sigma=[0.1])
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y, sigma, [1.0, 1.0], prior_center=[2.0, 3.0],
                          prior_sigma=[0.0, np.inf])


def test_fit_holds_fixed_parameter():
    """Test a parameter with equal bounds stays put."""
    x = np.linspace(0.0, 10.0, 20)
    y = 2.0 * np.exp(-x / 3.0)
    result = least_squares_fit(exp_model, x, y, np.ones_like(x), [1.0, 3.0],
                               lower=[0.0, 3.0], upper=[10.0, 3.0])
    assert result.params[1] == 3.0
    assert result.params[0] == pytest.approx(2.0, rel=1e-6)
    assert result.covariance[1, 1] == 0.0


def test_fit_validates_inputs():
    """Test preconditions raise ParameterError."""
    x = np.linspace(0.0, 1.0, 5)
    y = np.ones(5)
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y, np.zeros(5), [1.0, 1.0])
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y[:4], np.ones(5), [1.0, 1.0])
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x[:1], y[:1], np.ones(1), [1.0, 1.0])
    with pytest.raises(ParameterError):
        least_squares_fit(exp_model, x, y, np.ones(5), [5.0, 1.0], lower=[0, 0], upper=[1, 2])


def test_fit_rejects_nonfinite_model():
    """Test a model producing NaN raises FitError."""
    x = np.linspace(0.0, 1.0, 5)
    with pytest.raises(FitError):
        least_squares_fit(lambda p, s: np.full(s.shape, np.nan), x, np.ones(5), np.ones(5),
                          [1.0])
