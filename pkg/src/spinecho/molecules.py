"""Reference spin-system data for the two molecules studied.

Toluene (nine spins: 8 protons + the para 13C) uses published coordinates
and solution-state J couplings, with the Saupe order components fitted to
multiple-quantum spectra.  The dimethylbiphenyl system (14 protons + one
13C) carries MD-averaged dipolar couplings and HETCOR chemical shifts.

Proton indexing, toluene: H1 = para (bonded to the 13C at index 8),
H2/H3 = meta, H4/H5 = ortho-to-methyl, H6-H8 = methyl.
Proton indexing, dimethylbiphenyl: spins 0-4 walk around the labeled ring
(ortho, meta, para, meta, ortho), 5-7 are the substituted-ring protons
(2', 4', 6'), 8-10 and 11-13 the two methyl groups, 14 the 13C.
"""

from __future__ import annotations

import numpy as np

from .geometry import CouplingSet, MolecularGeometry, RotorGroup, SaupeTensor

# --- toluene ---------------------------------------------------------------

_TOLUENE_LABELS = ("H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "C")
_TOLUENE_SPECIES = ("H1",) * 8 + ("C13",)
_TOLUENE_XYZ = np.array([
    [0.0000, 0.0000, 0.0000],
    [0.0000, -2.1486, 1.2417],
    [0.0000, 2.1486, 1.2417],
    [0.0000, -2.1290, 3.7051],
    [0.0000, 2.1290, 3.7051],
    [-0.5150, -0.8919, 5.7510],
    [-0.5150, 0.8919, 5.7510],
    [1.0299, 0.0000, 5.7510],
    [0.0000, 0.0000, 1.0866],
])
_METHYL = (5, 6, 7)
_METHYL_AXIS = np.array([0.0, 0.0, 1.0])
_METHYL_CENTER = np.array([0.0, 0.0, 5.7510])

TOLUENE_SAUPE = SaupeTensor.from_diagonal(s_yy=-0.0176, s_zz=0.1758)

# fitted proton shifts (Hz relative to the 1H carrier); carbon on resonance
TOLUENE_SHIFTS = np.array(
    [19.0, -72.0, -72.0, -111.0, -111.0, -2348.0, -2348.0, -2348.0, 0.0]
)

_TOLUENE_J_PAIRS = {
    (0, 1): 7.48, (0, 2): 7.48,
    (0, 3): 1.27, (0, 4): 1.27,
    (1, 2): 1.49,
    (1, 3): 7.68, (2, 4): 7.68,
    (1, 4): 0.62, (2, 3): 0.62,
    (3, 4): 1.97,
    (0, 8): 559.0,
    (1, 8): 1.07, (2, 8): 1.07,
    (3, 8): 7.54, (4, 8): 7.54,
    (5, 8): 0.84, (6, 8): 0.84, (7, 8): 0.84,
}

TOLUENE_J = np.zeros((9, 9))
for (_i, _j), _v in _TOLUENE_J_PAIRS.items():
    TOLUENE_J[_i, _j] = TOLUENE_J[_j, _i] = _v


def toluene_geometry(z_om: float = 2.46) -> MolecularGeometry:
    """Toluene geometry, optionally stretched between ortho and meta protons.

    The published coordinates correspond to the nominal z_om = 2.46 A;
    other values displace the meta (H2, H3) and ortho (H4, H5) proton z
    coordinates symmetrically by -+(z_om - 2.46)/2, leaving x and y fixed.
    """
    xyz = _TOLUENE_XYZ.copy()
    half = (z_om - 2.46) / 2.0
    xyz[[1, 2], 2] -= half
    xyz[[3, 4], 2] += half
    return MolecularGeometry(
        labels=_TOLUENE_LABELS,
        species=_TOLUENE_SPECIES,
        positions=xyz,
        rotor_groups=(RotorGroup(_METHYL, _METHYL_AXIS, _METHYL_CENTER),),
    )


# --- 3',5'-dimethylbiphenyl (15 spins) --------------------------------------

DMBP_SHIFTS = np.array([0.0] * 8 + [-2225.0] * 6 + [0.0])

# MD-averaged couplings (Hz), one representative pair per symmetry class;
# spin 14 is the 13C.
DMBP_UNIQUE_D = {
    (0, 14): 237.27, (1, 14): -129.40, (2, 14): -170.46,
    (5, 14): -121.01, (6, 14): -67.43, (8, 14): -38.30,
    (0, 1): -2753.91, (0, 2): -352.21, (0, 3): -21.41, (0, 4): 125.77,
    (0, 5): -844.83, (0, 6): -160.86, (0, 8): -152.64,
    (1, 2): -184.78, (1, 5): -235.79, (1, 8): -66.03,
    (2, 5): -161.29, (2, 6): -52.18, (2, 8): -49.42,
    (5, 6): -357.45, (5, 7): 97.92, (5, 8): -1158.80, (5, 11): -19.38,
    (6, 8): 268.22,
    (8, 9): 411.47, (8, 11): 38.31,
}

# 95% confidence half-widths for the same representative pairs
DMBP_UNIQUE_CI = {
    (0, 14): 22.49, (1, 14): 2.81, (2, 14): 4.85,
    (5, 14): 4.81, (6, 14): 1.92, (8, 14): 0.85,
    (0, 1): 78.43, (0, 2): 10.13, (0, 3): 7.90, (0, 4): 11.66,
    (0, 5): 30.18, (0, 6): 4.31, (0, 8): 3.97,
    (1, 2): 41.98, (1, 5): 6.27, (1, 8): 1.75,
    (2, 5): 4.25, (2, 6): 1.48, (2, 8): 1.32,
    (5, 6): 8.46, (5, 7): 12.61, (5, 8): 31.29, (5, 11): 2.65,
    (6, 8): 34.05,
    (8, 9): 49.54, (8, 11): 4.89,
}

# statistical symmetry of the dihedral-averaged molecule, as permutations:
# the joint molecular mirror, the dihedral reflection (labeled ring fixed,
# other ring mirrored), and the two methyl rotations.
_DMBP_GENERATORS = (
    (4, 3, 2, 1, 0, 7, 6, 5, 11, 12, 13, 8, 9, 10, 14),
    (0, 1, 2, 3, 4, 7, 6, 5, 11, 12, 13, 8, 9, 10, 14),
    (0, 1, 2, 3, 4, 5, 6, 7, 9, 10, 8, 11, 12, 13, 14),
    (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 13, 11, 14),
)


def _dmbp_group() -> list[tuple[int, ...]]:
    group = {tuple(range(15))}
    frontier = list(group)
    while frontier:
        nxt = []
        for g in frontier:
            for h in _DMBP_GENERATORS:
                gh = tuple(g[h[i]] for i in range(15))
                if gh not in group:
                    group.add(gh)
                    nxt.append(gh)
        frontier = nxt
    return sorted(group)


def dmbp_pair_orbit(i: int, j: int) -> list[tuple[int, int]]:
    """All spin pairs symmetry-equivalent to (i, j)."""
    orbit = {(min(g[i], g[j]), max(g[i], g[j])) for g in _dmbp_group()}
    return sorted(orbit)


def dmbp_couplings(d_unique: dict[tuple[int, int], float] | None = None) -> CouplingSet:
    """Fifteen-spin dimethylbiphenyl coupling set from symmetry-unique values.

    Pairs not resolved by the reference data are zero.  J couplings are
    below the linewidth for this system and are set to zero.
    """
    vals = DMBP_UNIQUE_D if d_unique is None else d_unique
    n = 15
    d = np.zeros((n, n))
    for (i, j), v in vals.items():
        for a, b in dmbp_pair_orbit(i, j):
            d[a, b] = d[b, a] = v
    return CouplingSet(
        species=("H1",) * 14 + ("C13",),
        shifts=DMBP_SHIFTS.copy(),
        d=d,
        j=np.zeros((n, n)),
        measurement_index=14,
        butterfly_indices=(8, 9, 10, 11, 12, 13),
    )
