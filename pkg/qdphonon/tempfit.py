"""
Temperature-sweep fitting of the TPI visibility to the closed-form
indistinguishability over (alpha, nu_c, mu) at fixed emitter and filter.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cache import ResultCache
from .config import Config
from .emitter import CavityFilter, EmitterParams, closed_form_indistinguishability
from .errors import DataError, FitError, ParameterError
from .monitoring import monitor
from .numerics import FitResult, least_squares_fit
from .phonon import (
    MaterialParams,
    PhononParams,
    Temperature,
    dephasing_rate,
    filtered_fraction,
    phi,
    phonon_params_from_material,
)
from .units import ps_inv_to_mev

logger = logging.getLogger(__name__)

CURVE_MODES = ("full", "sideband_only")
START_FACTORS = (1.0, 0.5, 2.0)
# gamma_pd fixes alpha^2 mu, so extra starts walk alpha up and mu down together
VALLEY_FACTORS = (0.8, 1.25, 0.65, 1.55)

DEFAULT_LOWER = (1e-5, 0.5, 0.0)
DEFAULT_UPPER = (0.1, 50.0, 0.05)

# Process-wide memo of the temperature integrals, keyed by (name, nu_c, T, ...).
fraction_cache = ResultCache(**Config.get_cache_config())


@dataclass(frozen=True)
class VisibilityDataset:
    """Measured visibility against temperature for one emitter and filter."""
    temperatures: np.ndarray
    visibility: np.ndarray
    sigma: np.ndarray
    emitter: EmitterParams
    filter: CavityFilter

    def __post_init__(self):
        for name in ("temperatures", "visibility", "sigma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.temperatures.shape == self.visibility.shape == self.sigma.shape):
            raise DataError("temperatures, visibility and sigma must have equal length")
        if self.temperatures.size < 4:
            raise DataError("A three-parameter fit needs at least 4 points")
        if np.any(self.temperatures <= 0):
            raise DataError("Temperatures must be positive")
        if np.any(np.diff(self.temperatures) < 0):
            raise DataError("Temperatures must be sorted")
        if np.any(self.sigma <= 0):
            raise DataError("sigma must be positive")
        if np.any(self.visibility < 0) or np.any(self.visibility > 1):
            raise DataError("Visibilities must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.temperatures.size)


@dataclass(frozen=True)
class ParameterPrior:
    """Independent estimates of (alpha, nu_c, mu) added to the fit as
    Gaussian pseudo-observations.

    A centre left as None is unconstrained. ``rel_width`` is the standard
    deviation as a fraction of each centre.
    """
    alpha: Optional[float] = None
    nu_c: Optional[float] = None
    mu: Optional[float] = None
    rel_width: float = 0.1

    def __post_init__(self):
        if not self.rel_width > 0:
            raise ParameterError("Prior width must be positive")
        for name in ("alpha", "nu_c", "mu"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ParameterError(f"Prior centre for {name} must be positive, got {value}")

    @classmethod
    def from_material(cls, m: MaterialParams, rel_width: float = 0.1) -> "ParameterPrior":
        """alpha and mu predicted from deformation potentials and level splittings."""
        alpha, mu = phonon_params_from_material(m)
        if not alpha > 0:
            raise ParameterError("Equal deformation potentials give no coupling to constrain")
        return cls(alpha=alpha, mu=mu, rel_width=rel_width)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Centres and absolute widths; unconstrained entries get infinite width."""
        values = (self.alpha, self.nu_c, self.mu)
        center = np.array([1.0 if v is None else v for v in values])
        sigma = np.array([np.inf if v is None else self.rel_width * v for v in values])
        return center, sigma

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha_ps2": self.alpha, "nu_c_ps_inv": self.nu_c, "mu_ps2": self.mu,
                "rel_width": self.rel_width}


class VisibilityModel:
    """Closed-form indistinguishability as a function of (alpha, nu_c, mu).

    B^2 and gamma_pd scale as exp(-alpha * a(nu_c, T)) and alpha^2 mu *
    g(nu_c, T), so only nu_c changes trigger new quadratures; a, g and F are
    memoised in ``cache``.
    """

    def __init__(self, emitter: EmitterParams, filter: CavityFilter, weight: str = "printed",
                 cache: Optional[ResultCache] = None):
        self.emitter = emitter
        self.filter = filter
        self.weight = weight
        self.cache = fraction_cache if cache is None else cache

    def _cached(self, key: Tuple, compute):
        value = self.cache.get(key)
        if value is None:
            value = compute()
            self.cache.set(key, value)
        return value

    def ingredients(self, nu_c: float, T: float) -> Tuple[float, float, float]:
        """(Re phi(0)/alpha, gamma_pd/(alpha^2 mu), F) at cut-off nu_c and temperature T."""
        unit = PhononParams(1.0, nu_c, 1.0)
        Tk = Temperature(T)
        f = self.filter
        a = self._cached(("phi0", nu_c, T), lambda: phi(0.0, unit, Tk).real)
        g = self._cached(("gamma_pd", nu_c, T), lambda: dephasing_rate(unit, Tk))
        F = self._cached(("F", nu_c, T, f.kappa, f.delta, self.weight),
                         lambda: filtered_fraction(unit, Tk, f, self.weight))
        return a, g, F

    def value(self, p: PhononParams, T: float, include_dephasing: bool = True) -> float:
        a, g, F = self.ingredients(p.nu_c, T)
        b2 = float(np.exp(-p.alpha * a))
        gamma_pd = p.alpha ** 2 * p.mu * g if include_dephasing else 0.0
        return closed_form_indistinguishability(self.emitter.gamma, gamma_pd, b2, F,
                                                self.filter.zero_transmission)

    def __call__(self, q: np.ndarray, temperatures: np.ndarray) -> np.ndarray:
        p = PhononParams(*(float(v) for v in q))
        return np.array([self.value(p, float(T)) for T in temperatures])


def _starts(init: np.ndarray, lower: np.ndarray, upper: np.ndarray,
            max_starts: Optional[int]) -> List[np.ndarray]:
    starts: List[np.ndarray] = []
    for factors in itertools.product(START_FACTORS, repeat=init.size):
        q = np.clip(init * np.array(factors), lower, upper)
        if not any(np.allclose(q, s) for s in starts):
            starts.append(q)
    if init.size == 3:
        for s in VALLEY_FACTORS:
            q = np.clip(init * np.array([s, 1.0, s ** -2]), lower, upper)
            if not any(np.allclose(q, other) for other in starts):
                starts.append(q)
    return starts if max_starts is None else starts[:max(1, max_starts)]


def fit_visibility(data: VisibilityDataset, init: PhononParams,
                   bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                   weight: str = "printed", max_starts: Optional[int] = None,
                   cache: Optional[ResultCache] = None,
                   prior: Optional[ParameterPrior] = None) -> Tuple[PhononParams, FitResult]:
    """Fit (alpha, nu_c, mu) to a visibility-temperature dataset.

    Every combination of the initial values scaled by 0.5, 1 and 2 (clipped
    into the bounds) is tried, the unscaled start first, followed by starts
    along the alpha-mu valley; the lowest objective wins. ``max_starts``
    truncates that list. A ``prior`` adds its pseudo-observations to the
    objective.

    Raises:
        DataError: when all points share one temperature
        ParameterError: when ``init`` lies outside ``bounds``
    """
    if np.ptp(data.temperatures) == 0:
        raise DataError("All data points share one temperature")
    lower = np.asarray(DEFAULT_LOWER if bounds is None else bounds[0], dtype=float)
    upper = np.asarray(DEFAULT_UPPER if bounds is None else bounds[1], dtype=float)
    p0 = init.as_vector()
    if np.any(p0 < lower) or np.any(p0 > upper):
        raise ParameterError(f"init {p0} outside bounds [{lower}, {upper}]")

    model = VisibilityModel(data.emitter, data.filter, weight, cache)
    center, width = (None, None) if prior is None else prior.arrays()
    best: Optional[FitResult] = None
    with monitor.track("fit_visibility") as tracker:
        for i, start in enumerate(_starts(p0, lower, upper, max_starts)):
            try:
                result = least_squares_fit(model, data.temperatures, data.visibility, data.sigma,
                                           start, lower, upper, prior_center=center,
                                           prior_sigma=width)
            except FitError as e:
                logger.debug("start %d at %s failed: %s", i, start, e)
                continue
            tracker.evaluations += result.iterations
            logger.debug("start %d at %s -> %s (objective %.4g)", i, start, result.params,
                          result.residual_norm)
            if best is None or result.residual_norm < best.residual_norm:
                best = result
    if best is None:
        raise FitError("Every start of the visibility fit failed", {"init": p0.tolist()})
    if "at_bound" in best.flags:
        logger.warning("Visibility fit stopped on a bound: %s", best.params)
    fitted = PhononParams(*(float(v) for v in best.params))
    logger.info("Visibility fit: alpha=%.5g ps^2 nu_c=%.5g ps^-1 mu=%.5g ps^2 (objective %.4g)",
                fitted.alpha, fitted.nu_c, fitted.mu, best.residual_norm)
    return fitted, best


def objective(params: PhononParams, data: VisibilityDataset, weight: str = "printed") -> float:
    """Sum of squared weighted residuals of the closed form against ``data``."""
    model = VisibilityModel(data.emitter, data.filter, weight)
    r = (data.visibility - model(params.as_vector(), data.temperatures)) / data.sigma
    return float(np.sum(r ** 2))


def visibility_curve(params: PhononParams, e: EmitterParams, f: CavityFilter,
                     t_grid: Iterable[float], mode: str = "full",
                     weight: str = "printed") -> np.ndarray:
    """Rows of (T, I). ``sideband_only`` forces gamma_pd to zero."""
    if mode not in CURVE_MODES:
        raise ParameterError(f"Unknown curve mode '{mode}'. Use one of {CURVE_MODES}")
    temps = np.asarray(list(t_grid), dtype=float)
    if np.any(temps <= 0):
        raise ParameterError("Temperatures must be positive")
    model = VisibilityModel(e, f, weight)
    values = [model.value(params, float(T), include_dephasing=(mode == "full")) for T in temps]
    return np.column_stack([temps, values])


def fit_report(data: VisibilityDataset, params: PhononParams, result: FitResult,
               weight: str = "printed", prior: Optional[ParameterPrior] = None) -> Dict[str, Any]:
    """JSON-ready summary of a visibility fit."""
    err = result.uncertainties
    return {
        "params": {"alpha_ps2": params.alpha, "nu_c_ps_inv": params.nu_c, "mu_ps2": params.mu},
        "uncertainties": {"alpha_ps2": float(err[0]), "nu_c_ps_inv": float(err[1]),
                          "mu_ps2": float(err[2])},
        "objective": result.residual_norm,
        "prior_penalty": result.prior_norm,
        "prior": None if prior is None else prior.to_dict(),
        "converged": result.converged,
        "evaluations": result.iterations,
        "flags": list(result.flags),
        "weight": weight,
        "points": len(data),
        "gamma_ps_inv": data.emitter.gamma,
        "kappa_ps_inv": data.filter.kappa,
        "delta_ps_inv": data.filter.delta,
        "kappa_meV": ps_inv_to_mev(data.filter.kappa),
        "delta_meV": ps_inv_to_mev(data.filter.delta),
        "timing": monitor.get_operation_stats("fit_visibility"),
    }


def synthetic_visibility_dataset(params: PhononParams, e: EmitterParams, f: CavityFilter,
                                 temperatures: Sequence[float],
                                 rng: Optional[np.random.Generator] = None,
                                 relative_noise: float = 0.03,
                                 weight: str = "printed") -> VisibilityDataset:
    """Closed-form visibilities with sigma = relative_noise * V.

    Without ``rng`` the values are noiseless.
    """
    temps = np.sort(np.asarray(temperatures, dtype=float))
    clean = visibility_curve(params, e, f, temps, weight=weight)[:, 1]
    sigma = np.maximum(relative_noise * clean, 1e-4)
    values = clean if rng is None else clean + sigma * rng.standard_normal(clean.size)
    return VisibilityDataset(temps, np.clip(values, 0.0, 1.0), sigma, e, f)
