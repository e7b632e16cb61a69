"""
Shared numerical kernels: adaptive quadrature on finite and semi-infinite
intervals, Fourier-type integrals of decaying functions, and bounded
nonlinear least squares.

All kernels are pure functions of their inputs.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from tenacity import Retrying, retry_if_exception, stop_after_attempt

from .config import Config
from .errors import FitError, ParameterError, QuadratureError
from .monitoring import monitor

logger = logging.getLogger(__name__)

Number = Union[float, complex]

# Gaussian envelopes are cut where they fall below this fraction of the peak.
ENVELOPE_FLOOR = 1e-16


def gaussian_cutoff(scale: float, floor: float = ENVELOPE_FLOOR) -> float:
    """Abscissa beyond which exp(-(x/scale)^2) stays below ``floor``."""
    return scale * math.sqrt(-math.log(floor))


@dataclass(frozen=True)
class QuadratureResult:
    """Value of a definite integral with its error estimate."""
    value: Number
    abs_error_estimate: float
    evaluations: int


@dataclass
class FitResult:
    """Outcome of a weighted least-squares fit.

    ``residual_norm`` is the sum of squared weighted residuals at ``params``,
    including the ``prior_norm`` share contributed by parameter priors.
    """
    params: np.ndarray
    residual_norm: float
    covariance: np.ndarray
    converged: bool
    iterations: int
    at_bound: Tuple[bool, ...] = ()
    flags: List[str] = field(default_factory=list)
    message: str = ""
    prior_norm: float = 0.0

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


class _Guarded:
    """Wraps an integrand, memoising values and rejecting non-finite output."""

    def __init__(self, f: Callable[[float], Number]):
        self.f = f
        self.memo: Dict[float, Number] = {}

    def __call__(self, x: float) -> Number:
        value = self.memo.get(x)
        if value is None:
            value = self.f(x)
            if not np.isfinite(value):
                raise QuadratureError(f"Integrand returned {value} at x={x!r}", abscissa=x)
            self.memo[x] = value
        return value

    def real(self, x: float) -> float:
        return float(np.real(self(x)))

    def imag(self, x: float) -> float:
        return float(np.imag(self(x)))


def _quad_once(func: Callable[[float], float], a: float, b: float, epsabs: float,
               epsrel: float, limit: int, **weight) -> Tuple[float, float, int]:
    out = _integrate.quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit,
                          full_output=1, **weight)
    value, abserr, info = out[0], out[1], out[2]
    neval = int(info.get("neval", 0)) if isinstance(info, dict) else 0
    if len(out) > 3:
        raise QuadratureError(f"quad did not converge on [{a}, {b}]: {out[3]}",
                              best_estimate=value, abs_error_estimate=abserr)
    return value, abserr, neval


def _is_retryable(exc: BaseException) -> bool:
    # non-finite integrands will not improve with more subdivisions
    return isinstance(exc, QuadratureError) and exc.abscissa is None


def _quad_escalating(func: Callable[[float], float], a: float, b: float, epsabs: float,
                     epsrel: float, **weight) -> Tuple[float, float, int]:
    """Run quad, retrying with a four-fold larger subdivision budget on failure."""
    cfg = Config.get_quadrature_config()
    for attempt in Retrying(stop=stop_after_attempt(max(1, cfg["retries"])),
                            retry=retry_if_exception(_is_retryable), reraise=True):
        with attempt:
            n = attempt.retry_state.attempt_number
            limit = cfg["limit"] * 4 ** (n - 1)
            if n > 1:
                logger.debug("quad retry %d on [%s, %s] with limit %d", n, a, b, limit)
            return _quad_once(func, a, b, epsabs, epsrel, limit, **weight)
    raise AssertionError("unreachable")


def integrate(f: Callable[[float], Number], a: float, b: float = math.inf,
              rel_tol: Optional[float] = None, abs_tol: Optional[float] = None,
              complex_valued: bool = False) -> QuadratureResult:
    """Integrate ``f`` over [a, b] (b may be ``inf``) with adaptive quadrature.

    Complex integrands are integrated part by part.

    Raises:
        ParameterError: on non-positive tolerances or an empty interval
        QuadratureError: on non-convergence (``best_estimate`` set) or a
            non-finite integrand value (``abscissa`` set)
    """
    cfg = Config.get_quadrature_config()
    rel_tol = cfg["rel_tol"] if rel_tol is None else rel_tol
    abs_tol = cfg["abs_tol"] if abs_tol is None else abs_tol
    if rel_tol <= 0 or abs_tol <= 0:
        raise ParameterError("Quadrature tolerances must be positive")
    if not b > a:
        raise ParameterError(f"Empty integration interval [{a}, {b}]")

    g = _Guarded(f)
    with monitor.track("integrate") as tracker:
        re, re_err, n_re = _quad_escalating(g.real, a, b, abs_tol, rel_tol)
        tracker.evaluations = n_re
        if not complex_valued:
            return QuadratureResult(re, re_err, max(1, n_re))
        im, im_err, n_im = _quad_escalating(g.imag, a, b, abs_tol, rel_tol)
        tracker.evaluations += n_im
    return QuadratureResult(complex(re, im), math.hypot(re_err, im_err), max(1, len(g.memo)))


def fourier_integral(f: Callable[[float], Number], omega: float, tol: Optional[float] = None,
                     upper: Optional[float] = None) -> complex:
    """Return the one-sided transform of ``f`` at ``omega``.

    Computes the integral of f(t) exp(-i omega t) over [0, upper], with
    ``upper=None`` meaning the semi-infinite range. Oscillatory weights are
    handled by QUADPACK's Fourier routines, so large |omega| costs no extra
    sampling.
    """
    if not np.isfinite(omega):
        raise ParameterError(f"omega must be finite, got {omega}")
    tol = Config.get_quadrature_config()["abs_tol"] if tol is None else tol
    if tol <= 0:
        raise ParameterError("Tolerance must be positive")
    b = math.inf if upper is None else upper
    if omega == 0.0:
        return complex(integrate(f, 0.0, b, rel_tol=tol, abs_tol=tol, complex_valued=True).value)

    g = _Guarded(f)
    w = abs(omega)
    sign = 1.0 if omega > 0 else -1.0

    def transform(part: Callable[[float], float], kind: str) -> float:
        return _quad_escalating(part, 0.0, b, tol, tol, weight=kind, wvar=w)[0]

    with monitor.track("fourier_integral"):
        c_re = transform(g.real, "cos")
        s_re = transform(g.real, "sin") * sign
        c_im = transform(g.imag, "cos")
        s_im = transform(g.imag, "sin") * sign
    return complex(c_re + s_im, c_im - s_re)


def _covariance(jac: np.ndarray, rcond: float) -> Tuple[np.ndarray, bool]:
    """Pseudo-inverse of J^T J via SVD; reports whether J is rank deficient.

    Columns are normalised first, so the cutoff ``rcond`` is relative to the
    largest singular value and independent of parameter units. Finite
    differences leave noise of order the difference step, which sets ``rcond``.
    """
    scale = np.linalg.norm(jac, axis=0)
    scale[scale == 0] = 1.0
    _, s, vt = np.linalg.svd(jac / scale, full_matrices=False)
    keep = s > rcond * (s[0] if s.size else 0.0)
    vt = vt[keep]
    cov = ((vt.T / s[keep] ** 2) @ vt) / np.outer(scale, scale)
    return 0.5 * (cov + cov.T), bool(np.count_nonzero(keep) < jac.shape[1])


def least_squares_fit(model: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      x: Sequence[float], y: Sequence[float], sigma: Sequence[float],
                      init: Sequence[float], lower: Optional[Sequence[float]] = None,
                      upper: Optional[Sequence[float]] = None,
                      diff_step: Optional[float] = None,
                      max_nfev: Optional[int] = None,
                      prior_center: Optional[Sequence[float]] = None,
                      prior_sigma: Optional[Sequence[float]] = None) -> FitResult:
    """Minimise sum(((y - model(p, x)) / sigma)^2) within box bounds.

    ``model`` receives the full parameter vector and the array of abscissae
    and returns model values at every abscissa. Unbounded problems use
    Levenberg-Marquardt, bounded ones a trust-region reflective solver; both
    use forward-difference Jacobians with relative step ``diff_step``.
    Parameters whose lower and upper bounds coincide are held fixed.

    ``prior_center`` and ``prior_sigma`` add Gaussian pseudo-observations
    (p_i - c_i) / s_i; an infinite ``prior_sigma`` entry leaves that
    parameter unconstrained.

    Raises:
        ParameterError: on inconsistent shapes, non-positive sigma, or init
            outside the bounds
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    p0 = np.asarray(init, dtype=float)
    lo = np.full(p0.shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(p0.shape, np.inf) if upper is None else np.asarray(upper, dtype=float)

    if not (x.shape == y.shape == sigma.shape):
        raise ParameterError("x, y and sigma must have the same length")
    if y.size < p0.size:
        raise ParameterError(f"{y.size} data points cannot determine {p0.size} parameters")
    if np.any(sigma <= 0):
        raise ParameterError("All sigma must be positive")
    if lo.shape != p0.shape or hi.shape != p0.shape:
        raise ParameterError("Bounds must match the parameter vector")
    if np.any(lo > p0) or np.any(p0 > hi):
        raise ParameterError(f"init {p0} outside bounds [{lo}, {hi}]")
    if (prior_center is None) != (prior_sigma is None):
        raise ParameterError("prior_center and prior_sigma go together")
    if prior_center is None:
        constrained = np.zeros(p0.shape, dtype=bool)
        c = s = np.zeros(0)
    else:
        c = np.asarray(prior_center, dtype=float)
        s = np.asarray(prior_sigma, dtype=float)
        if c.shape != p0.shape or s.shape != p0.shape:
            raise ParameterError("Priors must match the parameter vector")
        if np.any(s <= 0):
            raise ParameterError("prior_sigma must be positive")
        constrained = np.isfinite(s)
        c, s = c[constrained], s[constrained]

    cfg = Config.get_fit_config()
    diff_step = cfg["diff_step"] if diff_step is None else diff_step
    max_nfev = cfg["max_nfev"] if max_nfev is None else max_nfev
    tol = cfg["tol"]

    free = lo < hi
    if not np.any(free):
        raise ParameterError("All parameters are fixed by their bounds")

    def full(q: np.ndarray) -> np.ndarray:
        p = p0.copy()
        p[free] = q
        return p

    def residuals(q: np.ndarray) -> np.ndarray:
        r = (y - np.asarray(model(full(q), x), dtype=float)) / sigma
        if not np.all(np.isfinite(r)):
            raise FitError(f"Model returned non-finite values at {full(q)}",
                           {"params": full(q).tolist()})
        return np.concatenate([r, (full(q)[constrained] - c) / s])

    bounded = bool(np.any(np.isfinite(lo[free])) or np.any(np.isfinite(hi[free])))
    kwargs = dict(diff_step=diff_step, max_nfev=max_nfev, x_scale="jac", ftol=tol, xtol=tol,
                  gtol=tol)
    with monitor.track("least_squares_fit") as tracker:
        if bounded:
            res = _optimize.least_squares(residuals, p0[free], bounds=(lo[free], hi[free]),
                                          method="trf", **kwargs)
        else:
            res = _optimize.least_squares(residuals, p0[free], method="lm", **kwargs)
        tracker.evaluations = int(res.nfev)

    flags: List[str] = []
    rcond = max(diff_step, math.sqrt(np.finfo(float).eps))
    cov_free, singular = _covariance(np.atleast_2d(res.jac), rcond)
    if singular:
        flags.append("singular_jacobian")
        logger.warning("Least-squares Jacobian is rank deficient at %s", full(res.x))
    cov = np.zeros((p0.size, p0.size))
    cov[np.ix_(free, free)] = cov_free

    at_bound = np.zeros(p0.size, dtype=bool)
    at_bound[free] = np.asarray(res.active_mask) != 0
    if np.any(at_bound):
        flags.append("at_bound")
        logger.warning("Fit stopped on a bound for parameters %s", np.flatnonzero(at_bound).tolist())

    converged = bool(res.success and res.status > 0)
    if not converged:
        flags.append("not_converged")
    return FitResult(
        params=full(res.x),
        residual_norm=float(np.sum(res.fun ** 2)),
        prior_norm=float(np.sum(res.fun[y.size:] ** 2)),
        covariance=cov,
        converged=converged,
        iterations=int(res.nfev),
        at_bound=tuple(bool(b) for b in at_bound),
        flags=flags,
        message=str(res.message),
    )
