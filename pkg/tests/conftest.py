"""
Pytest configuration and fixtures.
"""
import numpy as np
import pytest

from qdphonon.emitter import CavityFilter, EmitterParams
from qdphonon.experiment import SetupImperfections
from qdphonon.monitoring import monitor
from qdphonon.phonon import PhononParams

# QD1 cavity width, 4.5 meV
KAPPA_QD1 = 6.84


@pytest.fixture
def qd1():
    """Provide the published QD1 phonon parameters."""
    return PhononParams.from_preset("QD1")


@pytest.fixture
def qd2():
    """Provide the published QD2 phonon parameters."""
    return PhononParams.from_preset("QD2")


@pytest.fixture
def qd1_emitter():
    """Provide the QD1 emitter, T1 = 1100 ps."""
    return EmitterParams.from_t1(1100.0)


@pytest.fixture
def cavity():
    """Provide the QD1 cavity filter on resonance."""
    return CavityFilter(KAPPA_QD1, 0.0)


@pytest.fixture
def flat_filter():
    """Provide a filter that transmits everything."""
    return CavityFilter.flat()


@pytest.fixture
def hom_setup():
    """Provide the beam-splitter and interferometer imperfections of the HOM setup."""
    return SetupImperfections.from_preset()


@pytest.fixture
def rng():
    """Provide a seeded random generator."""
    return np.random.default_rng(20170101)


@pytest.fixture(autouse=True)
def clean_state(monkeypatch):
    """Isolate tests from user configuration and shared caches."""
    for key in ("QDPHONON_QUAD_REL_TOL", "QDPHONON_QUAD_ABS_TOL", "QDPHONON_QUAD_LIMIT",
                "QDPHONON_QUAD_RETRIES", "QDPHONON_FIT_MAX_NFEV", "QDPHONON_FIT_DIFF_STEP",
                "QDPHONON_FIT_TOL", "QDPHONON_CACHE_TTL", "QDPHONON_CACHE_MAX_ENTRIES",
                "QDPHONON_SEED", "QDPHONON_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    yield
    monitor.reset()
