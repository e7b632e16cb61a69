"""Configuration management for qdphonon."""
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import dotenv_values

from .errors import ConfigError
from .units import mev_to_ps_inv

# Published phonon fits (alpha in ps^2, nu_c in ps^-1, mu in ps^2).
PHONON_PRESETS: Dict[str, Dict[str, float]] = {
    "QD1": {"alpha": 0.0082, "nu_c": 7.9, "mu": 4.4e-4},
    "QD2": {"alpha": 0.0071, "nu_c": 11.9, "mu": 5.6e-4},
}

# Experimental parameters measured at 4 K under resonant excitation.
MEASURED_PRESETS: Dict[str, Dict[str, float]] = {
    "QD1": {"T1_ps": 1100.0, "eta": 0.45, "T2_over_2T1": 0.35,
            "g2_hbt": 0.12, "V_tpi": 0.79, "V_tilde": 0.33},
    "QD2": {"T1_ps": 750.0, "eta": 0.55, "T2_over_2T1": 0.23,
            "g2_hbt": 0.11, "V_tpi": 0.83, "V_tilde": 0.22},
    "QD3": {"T1_ps": 670.0, "eta": 0.10, "T2_over_2T1": 0.71,
            "g2_hbt": 0.07, "V_tpi": 0.83, "V_tilde": 0.68},
}

# Fibered beam splitter and Mach-Zehnder contrast of the HOM setup.
SETUP_PRESET: Dict[str, float] = {"R": 0.430, "T": 0.570, "C2": 0.98}

CAVITY_WIDTH_MEV = 4.5


class Config:
    """Configuration handler for qdphonon."""

    @staticmethod
    def get_env(key: str, default: Optional[str] = None) -> Optional[str]:
        """Get a setting from the process environment or a .env file.

        Args:
            key: Environment variable key
            default: Default value if key is not found

        Returns:
            str: Value of the setting or default

        Note:
            The process environment wins over the .env file.
        """
        value = os.environ.get(key)
        if value is not None:
            return value

        env_path = Path(".env")
        if env_path.exists():
            value = dotenv_values(env_path).get(key)
            if value is not None:
                return value

        return default

    @staticmethod
    def get_int_env(key: str, default: int) -> int:
        """Get an integer setting, falling back to default when unset or invalid."""
        value = Config.get_env(key)
        try:
            return int(value) if value is not None else default
        except (ValueError, TypeError):
            return default

    @staticmethod
    def get_float_env(key: str, default: float) -> float:
        """Get a float setting, falling back to default when unset or invalid."""
        value = Config.get_env(key)
        try:
            return float(value) if value is not None else default
        except (ValueError, TypeError):
            return default

    @staticmethod
    def get_quadrature_config() -> Dict[str, Any]:
        """Tolerances and subdivision budget for adaptive quadrature."""
        return {
            "rel_tol": Config.get_float_env("QDPHONON_QUAD_REL_TOL", 1e-10),
            "abs_tol": Config.get_float_env("QDPHONON_QUAD_ABS_TOL", 1e-12),
            "limit": Config.get_int_env("QDPHONON_QUAD_LIMIT", 200),
            "retries": Config.get_int_env("QDPHONON_QUAD_RETRIES", 3),
        }

    @staticmethod
    def get_fit_config() -> Dict[str, Any]:
        """Evaluation budget, termination tolerance and finite-difference step for least squares."""
        return {
            "tol": Config.get_float_env("QDPHONON_FIT_TOL", 1e-10),
            "max_nfev": Config.get_int_env("QDPHONON_FIT_MAX_NFEV", 2000),
            "diff_step": Config.get_float_env("QDPHONON_FIT_DIFF_STEP", 1e-6),
        }

    @staticmethod
    def get_cache_config() -> Dict[str, Any]:
        """TTL in seconds and size bound of the temperature-integral cache (0 disables either)."""
        return {
            "ttl": Config.get_int_env("QDPHONON_CACHE_TTL", 0),
            "max_entries": Config.get_int_env("QDPHONON_CACHE_MAX_ENTRIES", 50000),
        }

    @staticmethod
    def get_default_seed() -> int:
        """Seed for synthetic data generators."""
        return Config.get_int_env("QDPHONON_SEED", 20170101)


def _read_record(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Setup record not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}")
    return dict(dotenv_values(path))


def _pick(record: Dict[str, Any], direct: str, alternate: str, convert,
          default: Optional[float] = None) -> float:
    if record.get(direct) not in (None, ""):
        return float(record[direct])
    if record.get(alternate) not in (None, ""):
        return convert(float(record[alternate]))
    if default is not None:
        return default
    raise ConfigError(f"Setup record needs '{direct}' or '{alternate}'")


def resolve_setup(record: Dict[str, Any]) -> Dict[str, float]:
    """Resolve an emitter/filter record to (gamma, kappa, delta) in ps^-1.

    Accepts gamma_ps_inv or T1_ps, kappa_ps_inv or kappa_meV, delta_ps_inv or
    delta_meV; delta defaults to zero.
    """
    def from_t1(t1: float) -> float:
        if t1 <= 0:
            raise ConfigError("T1_ps must be positive")
        return 1.0 / t1

    resolved = {
        "gamma": _pick(record, "gamma_ps_inv", "T1_ps", from_t1),
        "kappa": _pick(record, "kappa_ps_inv", "kappa_meV", mev_to_ps_inv),
        "delta": _pick(record, "delta_ps_inv", "delta_meV", mev_to_ps_inv, 0.0),
    }
    if resolved["gamma"] <= 0 or resolved["kappa"] <= 0:
        raise ConfigError(f"gamma and kappa must be positive: {resolved}")
    return resolved


def load_setup_record(path: Union[str, Path]) -> Dict[str, float]:
    """Load and resolve an emitter/filter record from a JSON or key=value file."""
    return resolve_setup(_read_record(path))
