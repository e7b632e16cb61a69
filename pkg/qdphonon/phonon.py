"""
Phonon environment of a quantum dot.

Spectral density, thermal occupation, the phonon correlation function
phi(tau) and G(tau) = exp(phi(tau)), the Franck-Condon factor B, the virtual
pure-dephasing rate gamma_pd, the sideband spectrum S_PH and the filtered
sideband fraction F. Units follow :mod:`qdphonon.units`.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np
from scipy import integrate as _integrate

from .config import PHONON_PRESETS
from .errors import ParameterError
from .numerics import fourier_integral, gaussian_cutoff, integrate
from .units import K_B_OVER_HBAR

if TYPE_CHECKING:
    from .emitter import CavityFilter

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SIDEBAND_MODES = ("exact", "weak_coupling")
WEIGHT_MODES = ("printed", "emission", "amplitude_cutoff")

# Below this |beta*nu| the product nu*coth(beta*nu/2) is taken from its series.
_SERIES_THRESHOLD = 1e-4

# Physical constants for the material mapping (SI).
_HBAR_SI = 1.054571817e-34
_EV_SI = 1.602176634e-19


@dataclass(frozen=True)
class PhononParams:
    """Effective electron-phonon model.

    Attributes:
        alpha: coupling strength, ps^2
        nu_c: cut-off frequency, ps^-1
        mu: probability of virtual phonon processes, ps^2
    """
    alpha: float
    nu_c: float
    mu: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.nu_c > 0:
            raise ParameterError(f"nu_c must be > 0, got {self.nu_c}")
        if not self.mu >= 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")

    @classmethod
    def from_preset(cls, name: str) -> "PhononParams":
        try:
            return cls(**PHONON_PRESETS[name.upper()])
        except KeyError:
            raise ParameterError(
                f"Unknown phonon preset '{name}'. Available: {', '.join(PHONON_PRESETS)}"
            )

    def as_vector(self) -> np.ndarray:
        return np.array([self.alpha, self.nu_c, self.mu])


@dataclass(frozen=True)
class Temperature:
    """Bath temperature; ``beta`` is hbar/(k_B T) in ps."""
    kelvin: float
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.kelvin > 0:
            raise ParameterError(f"Temperature must be > 0 K, got {self.kelvin}")
        object.__setattr__(self, "beta", 1.0 / (K_B_OVER_HBAR * self.kelvin))


TemperatureLike = Union[Temperature, float]


def as_temperature(T: TemperatureLike) -> Temperature:
    return T if isinstance(T, Temperature) else Temperature(float(T))


@dataclass(frozen=True)
class MaterialParams:
    """Bulk material constants.

    Deformation potentials ``D_e``, ``D_h`` in eV, ``rho_mass`` in kg/m^3,
    ``c_s`` in m/s, s-p splittings ``Delta_e``, ``Delta_h`` in meV.
    """
    D_e: float
    D_h: float
    rho_mass: float
    c_s: float
    Delta_e: float
    Delta_h: float

    def __post_init__(self):
        if not self.rho_mass > 0 or not self.c_s > 0:
            raise ParameterError("rho_mass and c_s must be positive")
        if not self.Delta_e > 0 or not self.Delta_h > 0:
            raise ParameterError("Level splittings Delta_e and Delta_h must be positive")


#
# Elementary functions (vectorised)
#
def thermal_occupation(nu: ArrayLike, T: TemperatureLike) -> ArrayLike:
    """Bose-Einstein occupation 1/(exp(beta nu) - 1) for nu > 0."""
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr <= 0):
        raise ParameterError("thermal_occupation requires nu > 0")
    beta = as_temperature(T).beta
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(beta * nu_arr)
    return float(n) if np.ndim(n) == 0 else n


def spectral_density(nu: ArrayLike, p: PhononParams) -> ArrayLike:
    """Super-ohmic spectral density J(nu) = alpha nu^3 exp(-nu^2/nu_c^2)."""
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0):
        raise ParameterError("spectral_density requires nu >= 0")
    j = p.alpha * nu_arr ** 3 * np.exp(-(nu_arr / p.nu_c) ** 2)
    return float(j) if np.ndim(j) == 0 else j


def coth_weight(nu: ArrayLike, beta: float) -> ArrayLike:
    """nu * coth(beta nu / 2), finite through nu = 0 where it tends to 2/beta."""
    nu_arr = np.asarray(nu, dtype=float)
    x = beta * nu_arr
    small = np.abs(x) < _SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        exact = nu_arr / np.tanh(safe / 2.0)
    out = np.where(small, 2.0 / beta + beta * nu_arr ** 2 / 6.0, exact)
    return float(out) if np.ndim(out) == 0 else out


def _coth_weight_scalar(nu: float, beta: float) -> float:
    x = beta * nu
    if abs(x) < _SERIES_THRESHOLD:
        return 2.0 / beta + beta * nu * nu / 6.0
    return nu / math.tanh(x / 2.0)


def _nu_max(p: PhononParams) -> float:
    return gaussian_cutoff(p.nu_c)


#
# Correlation functions
#
def phi(tau: float, p: PhononParams, T: TemperatureLike) -> complex:
    """Phonon correlation exponent phi(tau).

    alpha * integral_0^inf nu exp(-nu^2/nu_c^2)
        (coth(beta nu/2) cos(nu tau) - i sin(nu tau)) dnu
    """
    if tau < 0:
        raise ParameterError(f"phi requires tau >= 0, got {tau}")
    if p.alpha == 0:
        return 0j
    beta = as_temperature(T).beta
    inv_nc2 = 1.0 / p.nu_c ** 2

    def integrand(nu: float) -> complex:
        envelope = math.exp(-nu * nu * inv_nc2)
        return envelope * complex(_coth_weight_scalar(nu, beta) * math.cos(nu * tau),
                                  -nu * math.sin(nu * tau))

    value = integrate(integrand, 0.0, _nu_max(p), complex_valued=True).value
    if tau == 0:
        value = complex(value.real, 0.0)
    return p.alpha * value


def franck_condon(p: PhononParams, T: TemperatureLike) -> float:
    """Franck-Condon factor B = exp(-Re phi(0) / 2)."""
    return math.exp(-phi(0.0, p, T).real / 2.0)


def phonon_correlation(tau: float, p: PhononParams, T: TemperatureLike) -> complex:
    """G(tau) = exp(phi(tau)); B^2 G(0) = 1 and G -> 1 at long times."""
    return complex(np.exp(phi(tau, p, T)))


def dephasing_rate(p: PhononParams, T: TemperatureLike) -> float:
    """Pure-dephasing rate from virtual phonon scattering, ps^-1.

    (alpha^2 mu / nu_c^4) integral_0^inf nu^10 exp(-2 nu^2/nu_c^2) n (n + 1) dnu
    """
    if p.alpha == 0 or p.mu == 0:
        return 0.0
    beta = as_temperature(T).beta
    inv_nc2 = 1.0 / p.nu_c ** 2

    def integrand(nu: float) -> float:
        half = beta * nu / 2.0
        if half > 350.0:
            return 0.0
        # n(n+1) = 1 / (4 sinh^2(beta nu / 2)); nu^10 cancels the 1/nu^2 pole
        return nu ** 8 * math.exp(-2.0 * nu * nu * inv_nc2) * (nu / (2.0 * math.sinh(half))) ** 2

    value = integrate(integrand, 0.0, 6.0 * p.nu_c).value
    return max(0.0, p.alpha ** 2 * p.mu / p.nu_c ** 4 * value)


def correlation_time_max(p: PhononParams, T: TemperatureLike) -> float:
    """Delay beyond which G(tau) - 1 is negligible, ps.

    phi decays on 1/nu_c and, through the thermal poles of coth, on beta/2pi.
    """
    beta = as_temperature(T).beta
    return min(200.0, 40.0 * max(1.0 / p.nu_c, beta / (2.0 * math.pi)))


def sideband_spectrum(omega: float, p: PhononParams, T: TemperatureLike,
                      mode: str = "exact") -> complex:
    """Sideband spectrum S_PH(omega) = integral_0^inf (G(tau) - 1) exp(-i omega tau) dtau.

    ``exact`` evaluates the transform numerically. ``weak_coupling`` keeps
    G - 1 to first order in alpha and returns only the real part,
    (pi alpha / 2) omega exp(-omega^2/nu_c^2) (coth(beta omega/2) - 1).
    Negative omega is the phonon-emission side.
    """
    if mode not in SIDEBAND_MODES:
        raise ParameterError(f"Unknown sideband mode '{mode}'. Use one of {SIDEBAND_MODES}")
    if not np.isfinite(omega):
        raise ParameterError(f"omega must be finite, got {omega}")
    if p.alpha == 0:
        return 0j
    Tk = as_temperature(T)
    if mode == "weak_coupling":
        return complex(weak_coupling_sideband(omega, p, Tk), 0.0)
    return fourier_integral(lambda tau: phonon_correlation(tau, p, Tk) - 1.0, omega,
                            tol=1e-10, upper=correlation_time_max(p, Tk))


def weak_coupling_sideband(omega: ArrayLike, p: PhononParams, T: TemperatureLike) -> ArrayLike:
    """Real part of S_PH at first order in alpha (vectorised)."""
    beta = as_temperature(T).beta
    w = np.asarray(omega, dtype=float)
    # omega (coth(beta omega / 2) - 1) = coth_weight - omega
    value = 0.5 * math.pi * p.alpha * np.exp(-(w / p.nu_c) ** 2) * (coth_weight(w, beta) - w)
    return float(value) if np.ndim(value) == 0 else value


#
# Filtered sideband fraction
#
def sideband_weight(omega: ArrayLike, p: PhononParams, T: TemperatureLike,
                    weight: str = "printed") -> ArrayLike:
    """Un-normalised sideband weight used by :func:`filtered_fraction`.

    ``printed``: omega coth(beta omega/2) exp(-omega^2/nu_c^2)
    ``emission``: omega (coth(beta omega/2) - 1) exp(-omega^2/nu_c^2)
    ``amplitude_cutoff``: omega coth(beta omega/2) exp(-omega^2/(2 nu_c^2))
    """
    if weight not in WEIGHT_MODES:
        raise ParameterError(f"Unknown weight mode '{weight}'. Use one of {WEIGHT_MODES}")
    beta = as_temperature(T).beta
    w = np.asarray(omega, dtype=float)
    cw = coth_weight(w, beta)
    if weight == "printed":
        out = cw * np.exp(-(w / p.nu_c) ** 2)
    elif weight == "emission":
        out = (cw - w) * np.exp(-(w / p.nu_c) ** 2)
    else:
        out = cw * np.exp(-0.5 * (w / p.nu_c) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def filtered_fraction(p: PhononParams, T: TemperatureLike, filter: "CavityFilter",
                      weight: str = "printed") -> float:
    """Fraction of the phonon sideband transmitted by the cavity filter.

    Ratio of the filtered to the unfiltered two-sided sideband weight, so F
    lies in [0, 1] and F -> 1 for an infinitely broad cavity.
    """
    if weight not in WEIGHT_MODES:
        raise ParameterError(f"Unknown weight mode '{weight}'. Use one of {WEIGHT_MODES}")
    if filter.is_flat:
        return 1.0
    Tk = as_temperature(T)
    span = gaussian_cutoff(p.nu_c * (math.sqrt(2.0) if weight == "amplitude_cutoff" else 1.0))

    def w(x: float) -> float:
        return float(sideband_weight(x, p, Tk, weight))

    def filtered(x: float) -> float:
        return w(x) * float(filter.transmission(x))

    den = integrate(w, -span, 0.0).value + integrate(w, 0.0, span).value
    num = integrate(filtered, -span, 0.0).value + integrate(filtered, 0.0, span).value
    return float(min(1.0, max(0.0, num / den)))


#
# Material mapping
#
def phonon_params_from_material(m: MaterialParams) -> Tuple[float, float]:
    """Map material constants to (alpha, mu) in ps^2.

    alpha = (D_e - D_h)^2 / (4 pi^2 hbar rho c_s^5)
    mu = pi hbar^2 (D_e^2/Delta_e + D_h^2/Delta_h)^2 / (D_e - D_h)^4

    When D_e == D_h the coupling vanishes and mu is undefined (NaN).
    """
    diff = (m.D_e - m.D_h) * _EV_SI
    alpha_s2 = diff ** 2 / (4.0 * math.pi ** 2 * _HBAR_SI * m.rho_mass * m.c_s ** 5)
    alpha = alpha_s2 * 1e24
    if diff == 0:
        logger.warning("D_e == D_h: no linear coupling, mu is undefined")
        return 0.0, math.nan
    d_e = m.D_e * _EV_SI
    d_h = m.D_h * _EV_SI
    delta_e = m.Delta_e * 1e-3 * _EV_SI
    delta_h = m.Delta_h * 1e-3 * _EV_SI
    mu_s2 = math.pi * _HBAR_SI ** 2 * (d_e ** 2 / delta_e + d_h ** 2 / delta_h) ** 2 / diff ** 4
    return alpha, mu_s2 * 1e24


def confinement_length(nu_c: float, c_s: float = 5110.0) -> float:
    """Characteristic confinement length c_s / nu_c in nm."""
    if not nu_c > 0:
        raise ParameterError("nu_c must be positive")
    return c_s / (nu_c * 1e12) * 1e9


#
# Grid evaluation
#
class PhononCorrelationTable:
    """phi(tau), G(tau) and exact S_PH(omega) tabulated on grids.

    The frequency integral behind phi is done with composite Simpson on a
    uniform nu grid for all delays at once; S_PH follows by Simpson over the
    delay grid. Used where spectra are needed at many frequencies.
    """

    def __init__(self, p: PhononParams, T: TemperatureLike, tau_max: Optional[float] = None,
                 dtau: Optional[float] = None, nu_points: Optional[int] = None):
        self.params = p
        self.temperature = as_temperature(T)
        self.tau_max = correlation_time_max(p, self.temperature) if tau_max is None else tau_max
        nu_max = _nu_max(p)
        # resolve oscillations up to omega ~ 8 nu_c
        dtau = 0.15 / (8.0 * p.nu_c) if dtau is None else dtau
        n_tau = int(math.ceil(self.tau_max / dtau)) | 1
        self.tau = np.linspace(0.0, self.tau_max, n_tau)
        if nu_points is None:
            nu_points = max(2001, int(nu_max * self.tau_max / 0.25))
        self.nu = np.linspace(0.0, nu_max, nu_points | 1)
        self.phi = self._tabulate_phi()
        self.G = np.exp(self.phi)

    def _tabulate_phi(self, chunk: int = 256) -> np.ndarray:
        p, beta = self.params, self.temperature.beta
        envelope = np.exp(-(self.nu / p.nu_c) ** 2)
        re_w = coth_weight(self.nu, beta) * envelope
        im_w = -self.nu * envelope
        out = np.empty(self.tau.size, dtype=complex)
        for start in range(0, self.tau.size, chunk):
            phase = np.outer(self.tau[start:start + chunk], self.nu)
            re = _integrate.simpson(re_w * np.cos(phase), x=self.nu, axis=1)
            im = _integrate.simpson(im_w * np.sin(phase), x=self.nu, axis=1)
            out[start:start + chunk] = p.alpha * (re + 1j * im)
        out[0] = out[0].real
        return out

    @property
    def franck_condon_sq(self) -> float:
        return float(np.exp(-self.phi[0].real))

    def sideband_spectrum(self, omega: ArrayLike, chunk: int = 128) -> np.ndarray:
        """Exact S_PH at each omega."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        g1 = self.G - 1.0
        out = np.empty(w.size, dtype=complex)
        for start in range(0, w.size, chunk):
            kernel = np.exp(-1j * np.outer(w[start:start + chunk], self.tau))
            out[start:start + chunk] = _integrate.simpson(g1 * kernel, x=self.tau, axis=1)
        return out
