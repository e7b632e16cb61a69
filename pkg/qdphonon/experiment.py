"""
Analysis of measured data: fringe-contrast fitting for (T2, eta),
coincidence-histogram peak areas, HBT normalisation, HOM laser-background
correction and the two-photon-interference visibility.

Delays in fringe traces are in ps; histogram delays in ns.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import SETUP_PRESET
from .errors import DataError, FitError, ParameterError
from .numerics import FitResult, least_squares_fit

logger = logging.getLogger(__name__)

REP_PERIOD_NS = 12.2
PAIR_SEPARATION_NS = 3.0


#
# Records
#
@dataclass(frozen=True)
class FringeContrast:
    """Michelson fringe contrast against path delay."""
    delays: np.ndarray
    contrast: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        for name in ("delays", "contrast", "sigma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.delays.shape == self.contrast.shape == self.sigma.shape):
            raise DataError("delays, contrast and sigma must have equal length")
        if self.delays.size and np.any(np.diff(self.delays) <= 0):
            raise DataError("Fringe delays must be strictly increasing")
        if np.any(self.sigma <= 0):
            raise DataError("Fringe sigma must be positive")
        if np.any(self.contrast < 0) or np.any(self.contrast > 1 + 3 * self.sigma):
            raise DataError("Fringe contrast must lie within [0, 1 + 3 sigma]")

    def __len__(self) -> int:
        return int(self.delays.size)


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Binned coincidences. ``delays`` are bin centres in ns."""
    delays: np.ndarray
    counts: np.ndarray
    acquisition_time: float
    rep_period: float = REP_PERIOD_NS
    pair_separation: float = PAIR_SEPARATION_NS

    def __post_init__(self):
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts))
        if self.delays.shape != self.counts.shape or self.delays.size < 2:
            raise DataError("Histogram needs matching delay and count arrays")
        if np.any(np.diff(self.delays) <= 0):
            raise DataError("Histogram delays must be strictly increasing")
        if np.any(self.counts < 0):
            raise DataError("Histogram counts must be non-negative")
        if not self.acquisition_time > 0:
            raise DataError("acquisition_time must be positive")
        if not self.rep_period > self.pair_separation > 0:
            raise DataError("Need rep_period > pair_separation > 0")

    @property
    def bin_width(self) -> float:
        return float(np.median(np.diff(self.delays)))

    def metadata(self) -> Dict[str, float]:
        return {
            "acquisition_time_s": self.acquisition_time,
            "rep_period_ns": self.rep_period,
            "pair_separation_ns": self.pair_separation,
        }


@dataclass
class PeakAreas:
    """Areas of the central peaks and the mean side-bunch area.

    ``sigma`` holds counting uncertainties in the order
    (A1, A2, A3, side_bunch_mean).
    """
    A1: float
    A2: float
    A3: float
    side_bunch_mean: float
    sigma: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    converged: bool = True
    flags: List[str] = field(default_factory=list)

    def __post_init__(self):
        if min(self.A1, self.A2, self.A3, self.side_bunch_mean) < 0:
            raise DataError("Peak areas must be non-negative")

    @property
    def central(self) -> np.ndarray:
        return np.array([self.A1, self.A2, self.A3])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SetupImperfections:
    """Beam-splitter reflectance/transmittance and interferometer contrast squared."""
    R: float
    T: float
    C2: float

    def __post_init__(self):
        if not (self.R > 0 and self.T > 0):
            raise ParameterError("R and T must be positive")
        if abs(self.R + self.T - 1.0) > 0.01:
            raise ParameterError(f"R + T must equal 1 within 0.01, got {self.R + self.T}")
        if not 0 < self.C2 <= 1:
            raise ParameterError(f"C2 must lie in (0, 1], got {self.C2}")

    @classmethod
    def from_preset(cls) -> "SetupImperfections":
        return cls(**SETUP_PRESET)

    @property
    def correction_factor(self) -> float:
        """(R^2 + T^2) / (2 R T C^2); 1 for an ideal setup."""
        return (self.R ** 2 + self.T ** 2) / (2.0 * self.R * self.T * self.C2)


#
# Fringe contrast
#
@dataclass
class FringeFit:
    T2: float
    eta: float
    T2_err: float
    eta_err: float
    fit: FitResult
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "T2_ps": self.T2,
            "T2_err_ps": self.T2_err,
            "eta": self.eta,
            "eta_err": self.eta_err,
            "residual_norm": self.fit.residual_norm,
            "converged": self.fit.converged,
            "flags": list(self.flags),
        }


def pseudo_voigt(t: np.ndarray, T2: float, eta: float) -> np.ndarray:
    """Fringe contrast (1 - eta) exp(-|t|/T2) + eta exp(-(t/T2)^2)."""
    t = np.asarray(t, dtype=float)
    return (1.0 - eta) * np.exp(-np.abs(t) / T2) + eta * np.exp(-(t / T2) ** 2)


def _estimate_t2(data: FringeContrast) -> float:
    # first delay where the contrast drops below 1/e
    below = np.flatnonzero(data.contrast < math.exp(-1.0))
    if below.size and below[0] > 0:
        return float(data.delays[below[0]])
    return float(max(data.delays[-1], 1e-9))


def fit_fringe_contrast(data: FringeContrast, init: Optional[Tuple[float, float]] = None) -> FringeFit:
    """Fit the pseudo-Voigt profile, returning T2 (ps) and eta in [0, 1].

    Raises:
        DataError: with fewer than 8 samples
    """
    if len(data) < 8:
        raise DataError(f"Fringe fit needs at least 8 samples, got {len(data)}")
    t2_0, eta_0 = init if init is not None else (_estimate_t2(data), 0.5)
    t2_0 = max(t2_0, 1e-6)

    def model(q: np.ndarray, t: np.ndarray) -> np.ndarray:
        return pseudo_voigt(t, q[0], q[1])

    result = least_squares_fit(model, data.delays, data.contrast, data.sigma,
                               init=[t2_0, min(max(eta_0, 0.0), 1.0)],
                               lower=[1e-6, 0.0], upper=[np.inf, 1.0])
    flags = list(result.flags)
    T2, eta = float(result.params[0]), float(result.params[1])
    if data.delays[-1] - data.delays[0] < 2.0 * T2:
        flags.append("short_span")
        logger.warning("Fringe delays span %.4g ps, less than 2*T2 = %.4g ps",
                       data.delays[-1] - data.delays[0], 2 * T2)
    err = result.uncertainties
    return FringeFit(T2, eta, float(err[0]), float(err[1]), result, flags)


def expected_visibility_ratio(T1: float, T2: float) -> float:
    """Visibility expected from coherence alone, T2 / (2 T1)."""
    if not (T1 > 0 and T2 > 0):
        raise ParameterError("T1 and T2 must be positive")
    return T2 / (2.0 * T1)


#
# Coincidence histograms
#
def default_centers(rep_period: float = REP_PERIOD_NS,
                    pair_separation: float = PAIR_SEPARATION_NS) -> List[float]:
    """Peak positions of the central bunch and the two neighbouring bunches."""
    return [k * rep_period + s * pair_separation for k in (-1, 0, 1) for s in (-1, 0, 1)]


def _laplace_cdf(x: np.ndarray, tau: float) -> np.ndarray:
    return np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0.0) / tau),
                    1.0 - 0.5 * np.exp(-np.maximum(x, 0.0) / tau))


def _peak_shapes(t: np.ndarray, centers: np.ndarray, tau: float, width: float) -> np.ndarray:
    # unit-area two-sided exponentials integrated over each bin
    offset = t[:, None] - centers[None, :]
    return _laplace_cdf(offset + 0.5 * width, tau) - _laplace_cdf(offset - 0.5 * width, tau)


def windowed_sums(hist: CoincidenceHistogram, centers: Sequence[float],
                  half_width: Optional[float] = None) -> np.ndarray:
    """Counts within +/- half_width (default half the pair separation) of each centre."""
    half = 0.5 * hist.pair_separation if half_width is None else half_width
    return np.array([hist.counts[np.abs(hist.delays - c) <= half].sum() for c in centers],
                    dtype=float)


def _assemble(hist: CoincidenceHistogram, centers: np.ndarray, areas: np.ndarray,
              sig: np.ndarray, converged: bool, flags: List[str]) -> PeakAreas:
    """Pick the central triple and the side bunches out of per-centre areas."""
    s, rep = hist.pair_separation, hist.rep_period

    def nearest(pos: float) -> int:
        i = int(np.argmin(np.abs(centers - pos)))
        if abs(centers[i] - pos) > 0.25 * s:
            raise DataError(f"No peak centre near {pos} ns")
        return i

    central = [nearest(o * s) for o in (-1, 0, 1)]
    sides = [[nearest(k * rep + o * s) for o in (-1, 0, 1)] for k in (-1, 1)]
    side_sums = [areas[idx].sum() for idx in sides]
    side_vars = [np.sum(sig[idx] ** 2) for idx in sides]
    side_mean = 0.5 * (side_sums[0] + side_sums[1])
    side_sigma = 0.5 * math.sqrt(side_vars[0] + side_vars[1])
    return PeakAreas(
        A1=float(areas[central[0]]),
        A2=float(areas[central[1]]),
        A3=float(areas[central[2]]),
        side_bunch_mean=float(side_mean),
        sigma=(float(sig[central[0]]), float(sig[central[1]]), float(sig[central[2]]),
               float(side_sigma)),
        converged=converged,
        flags=flags,
    )


def fit_peak_areas(hist: CoincidenceHistogram, centers: Optional[Sequence[float]] = None,
                   t1_ns: Optional[float] = None) -> PeakAreas:
    """Peak areas from a joint fit of two-sided exponential peaks.

    Every peak decays with one shared time constant, fixed to ``t1_ns`` when
    given and fitted otherwise, so overlapping tails are attributed to their
    own peak. On failure the areas fall back to windowed sums of +/- half
    the pair separation, flagged ``windowed_fallback``.

    Raises:
        DataError: when the bins do not cover every centre +/- rep_period/2
    """
    c = np.asarray(default_centers(hist.rep_period, hist.pair_separation)
                   if centers is None else centers, dtype=float)
    width = hist.bin_width
    lo, hi = c.min() - 0.5 * hist.rep_period, c.max() + 0.5 * hist.rep_period
    if hist.delays[0] > lo + width or hist.delays[-1] < hi - width:
        raise DataError(f"Histogram must cover [{lo:.3g}, {hi:.3g}] ns")

    counts = hist.counts.astype(float)
    if not np.any(counts > 0):
        logger.warning("Empty histogram, all peak areas are zero")
        zeros = np.zeros(c.size)
        return _assemble(hist, c, zeros, zeros, False, ["empty_histogram"])

    window = (hist.delays >= lo) & (hist.delays <= hi)
    t, y = hist.delays[window], counts[window]
    fallback = windowed_sums(hist, c)
    tau_fixed = t1_ns is not None
    tau0 = float(t1_ns) if tau_fixed else 0.25 * hist.pair_separation
    if tau_fixed and not tau0 > 0:
        raise ParameterError("t1_ns must be positive")

    def model(q: np.ndarray, x: np.ndarray) -> np.ndarray:
        return _peak_shapes(x, c, q[-1], width) @ q[:-1]

    init = np.append(np.maximum(fallback, 1.0), tau0)
    lower = np.append(np.zeros(c.size), tau0 if tau_fixed else 1e-3)
    upper = np.append(np.full(c.size, np.inf), tau0 if tau_fixed else hist.rep_period)
    try:
        result = least_squares_fit(model, t, y, np.sqrt(np.maximum(y, 1.0)), init, lower, upper)
        # second pass weights by the fitted rates to remove the low-count bias
        expected = np.maximum(model(result.params, t), 1.0)
        result = least_squares_fit(model, t, y, np.sqrt(expected), result.params, lower, upper)
    except FitError as e:
        logger.warning("Peak fit failed (%s), using windowed sums", e)
        result = None
    if result is None or not result.converged:
        return _assemble(hist, c, fallback, np.sqrt(fallback), False, ["windowed_fallback"])

    areas = result.params[:-1]
    sig = result.uncertainties[:-1]
    flags = [f for f in result.flags if f != "at_bound"]
    logger.debug("Peak fit tau=%.4g ns, areas=%s", result.params[-1], np.round(areas, 1))
    return _assemble(hist, c, areas, sig, True, flags)


def g2_hbt(areas: PeakAreas) -> float:
    """Central-bunch area over the mean side-bunch area."""
    if not areas.side_bunch_mean > 0:
        raise DataError("g2_hbt undefined: side bunches are empty")
    return float((areas.A1 + areas.A2 + areas.A3) / areas.side_bunch_mean)


def _g2_hbt_error(areas: PeakAreas) -> float:
    g = g2_hbt(areas)
    s1, s2, s3, ss = areas.sigma
    central = areas.A1 + areas.A2 + areas.A3
    if central <= 0:
        return math.sqrt(s1 ** 2 + s2 ** 2 + s3 ** 2) / areas.side_bunch_mean
    rel2 = (s1 ** 2 + s2 ** 2 + s3 ** 2) / central ** 2 + (ss / areas.side_bunch_mean) ** 2
    return g * math.sqrt(rel2)


def hom_background_correction(a_hom: PeakAreas, a_hbt: PeakAreas, t_hom: float,
                              t_hbt: float) -> PeakAreas:
    """Subtract laser leakage measured in the HBT run from HOM areas.

    B_i = A_i^HOM - 2 (t_HOM / t_HBT) A_i^HBT, floored at zero.
    """
    if not (t_hom > 0 and t_hbt > 0):
        raise ParameterError("Acquisition times must be positive")
    scale = 2.0 * t_hom / t_hbt
    hom = np.array([a_hom.A1, a_hom.A2, a_hom.A3, a_hom.side_bunch_mean])
    hbt = np.array([a_hbt.A1, a_hbt.A2, a_hbt.A3, a_hbt.side_bunch_mean])
    raw = hom - scale * hbt
    sig = np.sqrt(np.square(a_hom.sigma) + scale ** 2 * np.square(a_hbt.sigma))
    flags = list(dict.fromkeys(a_hom.flags + a_hbt.flags))
    if np.any(raw < 0):
        flags.append("clipped")
        noise = np.where(sig > 0, sig, np.sqrt(hom + scale ** 2 * hbt))
        if np.any(raw < -3.0 * noise):
            flags.append("inconsistent_background")
            logger.warning("Background correction is negative beyond 3 sigma: %s", raw)
    b = np.maximum(raw, 0.0)
    return PeakAreas(float(b[0]), float(b[1]), float(b[2]), float(b[3]),
                     sigma=tuple(float(x) for x in sig),
                     converged=a_hom.converged and a_hbt.converged, flags=flags)


def g2_hom(b: PeakAreas) -> float:
    """B2 / (B1 + B3)."""
    denom = b.A1 + b.A3
    if not denom > 0:
        raise DataError("g2_hom undefined: outer central peaks are empty")
    return float(b.A2 / denom)


def _g2_hom_error(b: PeakAreas) -> float:
    denom = b.A1 + b.A3
    s1, s2, s3, _ = b.sigma
    return math.sqrt((s2 / denom) ** 2 + (b.A2 / denom ** 2) ** 2 * (s1 ** 2 + s3 ** 2))


def tpi_visibility(g2hom: float, s: SetupImperfections, clamp: bool = True) -> float:
    """V = (R^2 + T^2)/(2 R T C^2) (1 - g2_HOM).

    Values above 1 are clamped (with a warning) unless ``clamp`` is False.
    """
    if g2hom < 0:
        raise ParameterError("g2_hom must be non-negative")
    value = s.correction_factor * (1.0 - g2hom)
    if clamp and value > 1.0:
        logger.warning("TPI visibility %.4f exceeds 1, clamped", value)
        return 1.0
    return float(value)


@dataclass
class HOMReport:
    areas_hbt: PeakAreas
    areas_hom: PeakAreas
    corrected: PeakAreas
    g2_hbt: float
    g2_hbt_err: float
    g2_hom: float
    g2_hom_err: float
    V_tpi: float
    V_tpi_err: float
    correction_factor: float
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "areas_hbt": self.areas_hbt.to_dict(),
            "areas_hom": self.areas_hom.to_dict(),
            "corrected": self.corrected.to_dict(),
            "g2_hbt": self.g2_hbt,
            "g2_hbt_err": self.g2_hbt_err,
            "g2_hom": self.g2_hom,
            "g2_hom_err": self.g2_hom_err,
            "V_tpi": self.V_tpi,
            "V_tpi_err": self.V_tpi_err,
            "correction_factor": self.correction_factor,
            "flags": list(self.flags),
        }


def analyze_hom(hbt: CoincidenceHistogram, hom: CoincidenceHistogram,
                setup: SetupImperfections, t1_ns: Optional[float] = None) -> HOMReport:
    """Full HBT/HOM chain with counting uncertainties propagated to V_TPI."""
    a_hbt = fit_peak_areas(hbt, t1_ns=t1_ns)
    a_hom = fit_peak_areas(hom, t1_ns=t1_ns)
    corrected = hom_background_correction(a_hom, a_hbt, hom.acquisition_time,
                                          hbt.acquisition_time)
    g_hbt = g2_hbt(a_hbt)
    g_hom = g2_hom(corrected)
    g_hom_err = _g2_hom_error(corrected)
    raw_v = tpi_visibility(g_hom, setup, clamp=False)
    flags = list(corrected.flags)
    if raw_v > 1.0:
        flags.append("visibility_clamped")
    report = HOMReport(
        areas_hbt=a_hbt,
        areas_hom=a_hom,
        corrected=corrected,
        g2_hbt=g_hbt,
        g2_hbt_err=_g2_hbt_error(a_hbt),
        g2_hom=g_hom,
        g2_hom_err=g_hom_err,
        V_tpi=tpi_visibility(g_hom, setup),
        V_tpi_err=setup.correction_factor * g_hom_err,
        correction_factor=setup.correction_factor,
        flags=flags,
    )
    logger.info("HOM analysis: g2_hbt=%.4f g2_hom=%.4f V_tpi=%.4f +/- %.4f",
                report.g2_hbt, report.g2_hom, report.V_tpi, report.V_tpi_err)
    return report


#
# Synthetic inputs
#
def synthetic_fringe_contrast(T2: float, eta: float, rng: np.random.Generator,
                              noise: float = 0.02, delays: Optional[np.ndarray] = None,
                              points: int = 40) -> FringeContrast:
    """Pseudo-Voigt trace with Gaussian noise of absolute size ``noise``."""
    t = np.linspace(0.0, 3.0 * T2, points) if delays is None else np.asarray(delays, dtype=float)
    clean = pseudo_voigt(t, T2, eta)
    sigma = np.full(t.shape, noise if noise > 0 else 1e-3)
    noisy = clean + noise * rng.standard_normal(t.size) if noise > 0 else clean
    return FringeContrast(t, np.clip(noisy, 0.0, 1.0 + 3.0 * sigma), sigma)


def synthetic_histogram(areas: Sequence[float], tau_ns: float, rng: Optional[np.random.Generator],
                        centers: Optional[Sequence[float]] = None,
                        rep_period: float = REP_PERIOD_NS,
                        pair_separation: float = PAIR_SEPARATION_NS,
                        bin_ns: float = 0.05, acquisition_time: float = 1.0) -> CoincidenceHistogram:
    """Histogram of two-sided exponential peaks of the given areas.

    Counts are Poisson draws from ``rng``; ``rng=None`` gives the expected
    (non-integer) counts.
    """
    c = np.asarray(default_centers(rep_period, pair_separation) if centers is None else centers,
                   dtype=float)
    if len(areas) != c.size:
        raise ParameterError(f"Expected {c.size} peak areas, got {len(areas)}")
    reach = np.max(np.abs(c)) + 0.5 * rep_period + 2 * bin_ns
    n_half = int(math.ceil(reach / bin_ns))
    t = np.arange(-n_half, n_half + 1) * bin_ns
    expected = _peak_shapes(t, c, tau_ns, bin_ns) @ np.asarray(areas, dtype=float)
    counts = expected if rng is None else rng.poisson(expected)
    return CoincidenceHistogram(t, counts, acquisition_time, rep_period, pair_separation)


def synthetic_hom_experiment(v_tpi: float, rng: np.random.Generator,
                             setup: Optional[SetupImperfections] = None,
                             g2_hbt_value: float = 0.12, outer_area: float = 20000.0,
                             background_fraction: float = 0.1, tau_ns: float = 1.1,
                             t_hbt: float = 600.0, t_hom: float = 600.0
                             ) -> Tuple[CoincidenceHistogram, CoincidenceHistogram, Dict[str, float]]:
    """HBT and HOM histograms with a planted visibility and laser background.

    ``background_fraction`` is the share of laser leakage in the central
    HOM bunch.
    """
    setup = setup or SetupImperfections.from_preset()
    g2hom = 1.0 - v_tpi / setup.correction_factor
    if g2hom < 0:
        raise ParameterError("Planted visibility exceeds what the setup allows")
    clean = np.array([outer_area, 2.0 * g2hom * outer_area, outer_area])
    ratio = t_hom / t_hbt
    # background per central HOM peak is 2 (t_hom/t_hbt) A_i^HBT
    leak_total = background_fraction / (1.0 - background_fraction) * clean.sum()
    hbt_central = leak_total / (2.0 * ratio) / 3.0
    hbt_side = hbt_central / g2_hbt_value
    hbt_areas = [hbt_side] * 3 + [hbt_central] * 3 + [hbt_side] * 3
    hom_central = clean + 2.0 * ratio * hbt_central
    hom_side = [1.5 * outer_area] * 3
    hom_areas = hom_side + list(hom_central) + hom_side
    hbt = synthetic_histogram(hbt_areas, tau_ns, rng, acquisition_time=t_hbt)
    hom = synthetic_histogram(hom_areas, tau_ns, rng, acquisition_time=t_hom)
    truth = {"V_tpi": v_tpi, "g2_hom": g2hom, "g2_hbt": g2_hbt_value,
             "background_fraction": background_fraction}
    return hbt, hom, truth
