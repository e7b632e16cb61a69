"""
Optical observables of a phonon-dressed two-level emitter behind a
Lorentzian cavity filter.

Spectra are in the rotating frame of the polaron-shifted resonance, so
omega = 0 is the zero-phonon line. Frequencies are in ps^-1.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import integrate as _integrate

from .errors import GridResolutionError, ParameterError
from .monitoring import monitor
from .numerics import gaussian_cutoff
from .phonon import (
    PhononCorrelationTable,
    PhononParams,
    TemperatureLike,
    as_temperature,
    dephasing_rate,
    filtered_fraction,
    franck_condon,
    phonon_correlation,
    sideband_spectrum,
    weak_coupling_sideband,
)
from .units import mev_to_ps_inv

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SPECTRUM_MODES = ("full", "zpl", "sideband")


@dataclass(frozen=True)
class EmitterParams:
    """Radiative rate ``gamma`` = 1/T1 in ps^-1."""
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive and finite, got {self.gamma}")

    @classmethod
    def from_t1(cls, t1_ps: float) -> "EmitterParams":
        if not t1_ps > 0:
            raise ParameterError(f"T1 must be positive, got {t1_ps}")
        return cls(1.0 / t1_ps)

    @property
    def t1(self) -> float:
        return 1.0 / self.gamma


@dataclass(frozen=True)
class CavityFilter:
    """Lorentzian filter of full width ``kappa`` detuned by ``delta`` from the line.

    ``kappa = inf`` is a flat filter (h = 1 everywhere).
    """
    kappa: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not math.isfinite(self.delta):
            raise ParameterError(f"delta must be finite, got {self.delta}")

    @classmethod
    def from_mev(cls, kappa_mev: float, delta_mev: float = 0.0) -> "CavityFilter":
        return cls(mev_to_ps_inv(kappa_mev), mev_to_ps_inv(delta_mev))

    @classmethod
    def flat(cls) -> "CavityFilter":
        return cls(math.inf)

    @property
    def is_flat(self) -> bool:
        return math.isinf(self.kappa)

    def response(self, omega: ArrayLike) -> ArrayLike:
        """h(omega) = (kappa/2) / (i(omega - delta) + kappa/2)."""
        w = np.asarray(omega, dtype=float)
        if self.is_flat:
            h = np.ones_like(w, dtype=complex)
        else:
            half = 0.5 * self.kappa
            h = half / (1j * (w - self.delta) + half)
        return complex(h) if np.ndim(h) == 0 else h

    def transmission(self, omega: ArrayLike) -> ArrayLike:
        """|h(omega)|^2."""
        w = np.asarray(omega, dtype=float)
        if self.is_flat:
            t = np.ones_like(w)
        else:
            half2 = (0.5 * self.kappa) ** 2
            t = half2 / ((w - self.delta) ** 2 + half2)
        return float(t) if np.ndim(t) == 0 else t

    @property
    def zero_transmission(self) -> float:
        """|h(0)|^2 = (kappa/2)^2 / (delta^2 + (kappa/2)^2)."""
        return float(self.transmission(0.0))


def cavity_response(omega: ArrayLike, f: CavityFilter) -> ArrayLike:
    return f.response(omega)


class PowerPartition(NamedTuple):
    P_zpl: float
    P_sb: float
    P: float


@dataclass(frozen=True)
class FrequencyGrid:
    """Resolution of the numeric indistinguishability.

    ``zpl_points`` per axis of the zero-phonon patch, ``sideband_points`` on
    the sideband diagonal spanning +/- ``sideband_span`` (default: where the
    phonon cut-off envelope vanishes).
    """
    zpl_points: int = 600
    sideband_points: int = 801
    sideband_span: Optional[float] = None

    def __post_init__(self):
        if self.zpl_points < 400:
            raise ParameterError("The zero-phonon patch needs at least 400 points per axis")
        if self.sideband_points < 101:
            raise ParameterError("The sideband diagonal needs at least 101 points")

    def refined(self) -> "FrequencyGrid":
        return FrequencyGrid(2 * self.zpl_points, 2 * self.sideband_points - 1,
                             self.sideband_span)


def _phonon_state(p: PhononParams, T: TemperatureLike) -> Tuple[float, float]:
    """(B^2, gamma_pd) at temperature T."""
    return franck_condon(p, T) ** 2, dephasing_rate(p, T)


#
# Closed-form correlation and spectra
#
def g1(t: float, tau: float, e: EmitterParams, p: PhononParams, T: TemperatureLike) -> complex:
    """First-order field correlation g1(t, tau), prefactor Gamma/2pi.

    The prefactor cancels from every ratio computed in this package.
    """
    if t < 0 or tau < 0:
        raise ParameterError(f"g1 requires t, tau >= 0, got t={t}, tau={tau}")
    b2, gamma_pd = _phonon_state(p, T)
    decay = math.exp(-e.gamma * t - 0.5 * (e.gamma + 2.0 * gamma_pd) * tau)
    return e.gamma / (2.0 * math.pi) * b2 * phonon_correlation(tau, p, T) * decay


def _zpl(omega: ArrayLike, nu: ArrayLike, gamma: float, gamma_pd: float, b2: float,
         f: CavityFilter) -> np.ndarray:
    gp = gamma + 2.0 * gamma_pd
    w = np.asarray(omega, dtype=float)
    v = np.asarray(nu, dtype=float)
    num = b2 * np.conj(f.response(w)) * f.response(v) * gamma * (1j * (w - v) + gp)
    den = (0.5 * gp - 1j * v) * (gamma - 1j * (v - w)) * (0.5 * gp + 1j * w)
    return num / den


def zpl_two_colour(omega: ArrayLike, nu: ArrayLike, e: EmitterParams, f: CavityFilter,
                   p: PhononParams, T: TemperatureLike) -> ArrayLike:
    """Two-colour zero-phonon spectrum S_ZPL(omega, nu).

    B^2 h*(w) h(v) Gamma (i(w - v) + G') / ((G'/2 - iv)(Gamma - i(v - w))(G'/2 + iw))
    with G' = Gamma + 2 gamma_pd. Broadcasts over array arguments.
    """
    b2, gamma_pd = _phonon_state(p, T)
    s = _zpl(omega, nu, e.gamma, gamma_pd, b2, f)
    return complex(s) if np.ndim(s) == 0 else s


def _sideband_half(omega: ArrayLike, nu: ArrayLike, gamma: float, b2: float,
                   s_ph_omega: ArrayLike, f: CavityFilter) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    v = np.asarray(nu, dtype=float)
    return (gamma * b2 * np.conj(f.response(w)) * f.response(v) * s_ph_omega
            / (gamma - 1j * (v - w)))


def sideband_two_colour(omega: float, nu: float, e: EmitterParams, f: CavityFilter,
                        p: PhononParams, T: TemperatureLike,
                        sideband_mode: str = "exact") -> complex:
    """Two-colour phonon-sideband spectrum S_SB(omega, nu).

    Sum of the one-sided term at (omega, nu) and the conjugate of the one at
    (nu, omega), so S_SB(omega, nu) = S_SB(nu, omega)*.
    """
    if p.alpha == 0:
        return 0j
    b2 = franck_condon(p, T) ** 2
    s_w = sideband_spectrum(omega, p, T, sideband_mode)
    s_v = s_w if nu == omega else sideband_spectrum(nu, p, T, sideband_mode)
    forward = _sideband_half(omega, nu, e.gamma, b2, s_w, f)
    backward = _sideband_half(nu, omega, e.gamma, b2, s_v, f)
    return complex(forward + np.conj(backward))


def _sideband_diagonal(omega: np.ndarray, b2: float, f: CavityFilter,
                       s_ph_real: np.ndarray) -> np.ndarray:
    # S_SB(w, w) = 2 B^2 |h(w)|^2 Re S_PH(w)
    return 2.0 * b2 * f.transmission(omega) * s_ph_real


def _sideband_real(omega: np.ndarray, p: PhononParams, T: TemperatureLike,
                   sideband_mode: str,
                   table: Optional[PhononCorrelationTable] = None) -> np.ndarray:
    if p.alpha == 0:
        return np.zeros_like(omega)
    if sideband_mode == "weak_coupling":
        return np.asarray(weak_coupling_sideband(omega, p, T))
    if omega.size == 1:
        return np.array([sideband_spectrum(float(omega[0]), p, T).real])
    table = table or PhononCorrelationTable(p, T)
    return table.sideband_spectrum(omega).real


def emission_spectrum(omega: ArrayLike, e: EmitterParams, f: CavityFilter, p: PhononParams,
                      T: TemperatureLike, mode: str = "full",
                      sideband_mode: str = "exact") -> ArrayLike:
    """Emitted spectrum S_ZPL(w, w) + S_SB(w, w).

    ``mode`` selects the full spectrum or one component. Arrays of
    frequencies in exact mode are evaluated through a tabulated correlation
    function.
    """
    if mode not in SPECTRUM_MODES:
        raise ParameterError(f"Unknown spectrum mode '{mode}'. Use one of {SPECTRUM_MODES}")
    scalar = np.ndim(omega) == 0
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if not np.all(np.isfinite(w)):
        raise ParameterError("omega must be finite")
    b2, gamma_pd = _phonon_state(p, T)
    total = np.zeros_like(w)
    if mode in ("full", "zpl"):
        total += _zpl(w, w, e.gamma, gamma_pd, b2, f).real
    if mode in ("full", "sideband"):
        total += _sideband_diagonal(w, b2, f, _sideband_real(w, p, T, sideband_mode))
    return float(total[0]) if scalar else total


def powers(e: EmitterParams, f: CavityFilter, p: PhononParams, T: TemperatureLike,
           weight: str = "printed", fraction: Optional[float] = None) -> PowerPartition:
    """Emitted power split into ZPL and sideband, and the filtered total.

    P_zpl = 2 pi B^2, P_sb = 2 pi (1 - B^2), P = |h(0)|^2 P_zpl + F P_sb.
    """
    b2 = franck_condon(p, T) ** 2
    F = filtered_fraction(p, T, f, weight) if fraction is None else fraction
    p_zpl = 2.0 * math.pi * b2
    p_sb = 2.0 * math.pi * (1.0 - b2)
    return PowerPartition(p_zpl, p_sb, f.zero_transmission * p_zpl + F * p_sb)


#
# Indistinguishability
#
def indistinguishability(e: EmitterParams, f: CavityFilter, p: PhononParams,
                         T: TemperatureLike, weight: str = "printed",
                         include_dephasing: bool = True,
                         fraction: Optional[float] = None) -> float:
    """Closed-form indistinguishability.

    I = Gamma/(Gamma + 2 gamma_pd) * (|h0|^2 B^2 / (|h0|^2 B^2 + F (1 - B^2)))^2

    ``include_dephasing=False`` drops gamma_pd, leaving the sideband-only
    limit. A precomputed filtered fraction may be passed as ``fraction``.
    """
    b2 = franck_condon(p, T) ** 2
    gamma_pd = dephasing_rate(p, T) if include_dephasing else 0.0
    F = filtered_fraction(p, T, f, weight) if fraction is None else fraction
    return closed_form_indistinguishability(e.gamma, gamma_pd, b2, F, f.zero_transmission)


def closed_form_indistinguishability(gamma: float, gamma_pd: float, b2: float, fraction: float,
                                     h0_squared: float) -> float:
    """Evaluate the closed form from its ingredients."""
    zpl = h0_squared * b2
    denom = zpl + fraction * (1.0 - b2)
    ratio = zpl / denom if denom > 0 else 0.0
    value = gamma / (gamma + 2.0 * gamma_pd) * ratio ** 2
    return float(min(1.0, max(0.0, value)))


def _zpl_patch(gamma: float, gamma_pd: float, b2: float, f: CavityFilter,
               n: int) -> Tuple[float, float]:
    """Numerator and ZPL power on a tangent-mapped midpoint grid.

    omega = (G'/2) tan(theta) maps the Lorentzian onto a uniform theta grid.
    """
    half = 0.5 * (gamma + 2.0 * gamma_pd)
    dtheta = math.pi / n
    theta = -0.5 * math.pi + (np.arange(n) + 0.5) * dtheta
    w = half * np.tan(theta)
    jac = half / np.cos(theta) ** 2 * dtheta
    s = _zpl(w[:, None], w[None, :], gamma, gamma_pd, b2, f)
    numerator = float(np.einsum("i,ij,j->", jac, np.abs(s) ** 2, jac))
    p_zpl = float(np.sum(_zpl(w, w, gamma, gamma_pd, b2, f).real * jac))
    return numerator, p_zpl


def _sideband_power(b2: float, f: CavityFilter, table: PhononCorrelationTable,
                    span: float, n: int) -> float:
    w = np.linspace(-span, span, n)
    diag = _sideband_diagonal(w, b2, f, table.sideband_spectrum(w).real)
    return float(_integrate.simpson(diag, x=w))


def indistinguishability_numeric(e: EmitterParams, f: CavityFilter, p: PhononParams,
                                 T: TemperatureLike, grid: Optional[FrequencyGrid] = None,
                                 rel_change: float = 0.01) -> float:
    """Brute-force indistinguishability from the two-colour spectra.

    Numerator: double integral of |S_ZPL|^2 with the true filter response;
    the sideband is incoherent and does not contribute. Denominator: the
    squared filtered power, ZPL plus the exact sideband diagonal.

    The result is recomputed on a grid refined twofold; a relative change
    above ``rel_change`` raises :class:`GridResolutionError`.
    """
    grid = grid or FrequencyGrid()
    Tk = as_temperature(T)
    b2, gamma_pd = _phonon_state(p, Tk)
    span = grid.sideband_span or gaussian_cutoff(p.nu_c)
    table = PhononCorrelationTable(p, Tk) if p.alpha > 0 else None

    def evaluate(g: FrequencyGrid) -> float:
        numerator, p_zpl = _zpl_patch(e.gamma, gamma_pd, b2, f, g.zpl_points)
        p_sb = 0.0 if table is None else _sideband_power(b2, f, table, span, g.sideband_points)
        return numerator / (p_zpl + p_sb) ** 2

    with monitor.track("indistinguishability_numeric"):
        coarse = evaluate(grid)
        fine = evaluate(grid.refined())
    if abs(fine - coarse) > rel_change * abs(fine):
        raise GridResolutionError(
            f"Grid refinement moved I from {coarse:.6g} to {fine:.6g}", coarse, fine
        )
    logger.debug("numeric I at %.3g K: %.6f (coarse %.6f)", Tk.kelvin, fine, coarse)
    return fine


#
# Derived linewidths
#
def zpl_linewidth(e: EmitterParams, p: PhononParams, T: TemperatureLike) -> float:
    """Full width at half maximum of the zero-phonon line, Gamma + 2 gamma_pd."""
    return e.gamma + 2.0 * dephasing_rate(p, T)


def coherence_time(e: EmitterParams, p: PhononParams, T: TemperatureLike) -> float:
    """T2 = 2 / (Gamma + 2 gamma_pd) in ps."""
    return 2.0 / zpl_linewidth(e, p, T)


def model_visibility_ratio(e: EmitterParams, p: PhononParams, T: TemperatureLike) -> float:
    """T2 / 2T1 predicted from virtual-phonon dephasing alone."""
    return e.gamma / zpl_linewidth(e, p, T)
