"""Physical constants for nuclear spin simulations.

Gyromagnetic ratios are the standard table values (CODATA for the proton,
IUPAC recommended value for 13C); the dipolar prefactor uses the exact SI
Planck constant and mu0/4pi = 1e-7 (the post-2019 correction is ~5e-10
relative and irrelevant at Hz precision).
"""

import numpy as np

PLANCK_H = 6.62607015e-34  # J s, exact
MU0_OVER_4PI = 1.0e-7      # T m / A

GAMMA_H1 = 2.6752218708e8  # rad / s / T
GAMMA_C13 = 6.728284e7     # rad / s / T

GAMMA_BAR = {
    "H1": GAMMA_H1 / (2.0 * np.pi),   # Hz / T
    "C13": GAMMA_C13 / (2.0 * np.pi),
}

# D_ij [Hz] = -DD_PREFACTOR * gbar_i * gbar_j * <(3/2 (r.n)^2 - 1/2) / r^3>
# with gbar in Hz/T and r in Angstrom.
DD_PREFACTOR = MU0_OVER_4PI * PLANCK_H * 1e30  # Hz A^3 / (Hz/T)^2

SPECIES = ("H1", "C13")


def dipolar_prefactor(species_i: str, species_j: str) -> float:
    """Hz A^3 prefactor for a spin pair, i.e. -prefactor * <angular/r^3> = D_ij."""
    return DD_PREFACTOR * GAMMA_BAR[species_i] * GAMMA_BAR[species_j]
