"""Unit conventions for qdphonon.

hbar = 1 throughout: frequencies and rates in ps^-1, times in ps, temperatures
in kelvin, phonon coupling constants in ps^2.
"""

# k_B / hbar in ps^-1 K^-1
K_B_OVER_HBAR = 0.1309

# 1 meV / hbar in ps^-1
MEV_TO_PS_INV = 1.519


def mev_to_ps_inv(value_mev: float) -> float:
    """Convert an energy in meV to an angular frequency in ps^-1."""
    return value_mev * MEV_TO_PS_INV


def ps_inv_to_mev(value_ps_inv: float) -> float:
    """Convert an angular frequency in ps^-1 to an energy in meV."""
    return value_ps_inv / MEV_TO_PS_INV
