"""Effective double-quantum Hamiltonians and dihedral free-energy averaging.

Coefficients are stored in rad/s on spin-1/2 angular momentum operators
(I = sigma/2); serialized files carry Hz and convert on ingest.  Two-body
forms name the operator pair on (i, j) with i < j, e.g. "XY" is I_x^i I_y^j
and "XX_minus_YY" is I_x I_x - I_y I_y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CouplingSet

TWO_BODY_FORMS = (
    "XX_minus_YY", "XY_plus_YX", "ZZ", "XX", "YY",
    "XY", "YX", "XZ", "ZX", "YZ", "ZY",
)
AXES = ("x", "y", "z")

SPIN_HALF = "spin_half_operators"
PAULI = "pauli_operators"


@dataclass
class OneBodyTerm:
    site: int
    axis: str
    coefficient: float  # rad/s

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis {self.axis!r} not in {AXES}")


@dataclass
class TwoBodyTerm:
    pair: tuple[int, int]
    form: str
    coefficient: float  # rad/s

    def __post_init__(self):
        i, j = self.pair
        if i >= j:
            raise ValueError("pair indices must satisfy i < j")
        if self.form not in TWO_BODY_FORMS:
            raise ValueError(f"unknown two-body form {self.form!r}")


@dataclass
class EffectiveHamiltonian:
    """Weighted sum of one- and two-body spin terms."""

    n: int
    one_body: list[OneBodyTerm] = field(default_factory=list)
    two_body: list[TwoBodyTerm] = field(default_factory=list)
    convention: str = SPIN_HALF

    def to_convention(self, convention: str) -> "EffectiveHamiltonian":
        """Convert spin-1/2 <-> Pauli coefficient conventions (exact)."""
        if convention == self.convention:
            return self
        if convention == PAULI and self.convention == SPIN_HALF:
            f1, f2 = 0.5, 0.25
        elif convention == SPIN_HALF and self.convention == PAULI:
            f1, f2 = 2.0, 4.0
        else:
            raise ValueError(f"unknown convention {convention!r}")
        return EffectiveHamiltonian(
            n=self.n,
            one_body=[OneBodyTerm(t.site, t.axis, t.coefficient * f1)
                      for t in self.one_body],
            two_body=[TwoBodyTerm(t.pair, t.form, t.coefficient * f2)
                      for t in self.two_body],
            convention=convention,
        )

    def relabeled(self, perm: list[int]) -> "EffectiveHamiltonian":
        """Apply a spin relabeling: new index = perm[old index]."""
        one = [OneBodyTerm(perm[t.site], t.axis, t.coefficient)
               for t in self.one_body]
        two = []
        for t in self.two_body:
            i, j = perm[t.pair[0]], perm[t.pair[1]]
            form = t.form
            if i > j:
                i, j = j, i
                form = _swap_form(form)
            two.append(TwoBodyTerm((i, j), form, t.coefficient))
        return EffectiveHamiltonian(self.n, one, two, self.convention)

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n Hermitian matrix (rad/s)."""
        from .pauli import effective_to_matrix

        return effective_to_matrix(self)


_SWAPPED = {"XY": "YX", "YX": "XY", "XZ": "ZX", "ZX": "XZ",
            "YZ": "ZY", "ZY": "YZ"}


def _swap_form(form: str) -> str:
    return _SWAPPED.get(form, form)


TARDIS1 = "TARDIS1"
TARDIS2 = "TARDIS2"

# zeroth-order scaling factors of the two sequence families
_HET_SCALE = {TARDIS1: 2.0 / 3.0, TARDIS2: 2.0 / 9.0}


def dq_hamiltonian(
    couplings: CouplingSet, family: str, onsite_h: float = 0.0
) -> EffectiveHamiltonian:
    """Zeroth-order average Hamiltonian of a TARDIS sequence family (rad/s).

    TARDIS1 produces heteronuclear ZZ at 2/3 scale plus homonuclear
    (XY + YX)/pi double-quantum terms; TARDIS2 produces heteronuclear ZZ at
    2/9 plus homonuclear (YY - XX) at unit scale.  A nonzero onsite_h (Hz)
    adds an effective z field on every proton.
    """
    if family not in _HET_SCALE:
        raise ValueError(f"unknown family {family!r}")
    if not np.isfinite(onsite_h):
        raise ValueError("onsite_h must be finite")
    protons = couplings.proton_indices()
    carbons = couplings.carbon_indices()
    two = []
    twopi = 2.0 * np.pi
    for a, i in enumerate(protons):
        for j in protons[a + 1:]:
            d = couplings.d[i, j]
            if d == 0.0:
                continue
            if family == TARDIS1:
                two.append(TwoBodyTerm((i, j), "XY_plus_YX", 2.0 * d))
            else:
                two.append(TwoBodyTerm((i, j), "XX_minus_YY", -twopi * d))
    het = _HET_SCALE[family]
    for c in carbons:
        for i in protons:
            eff = couplings.d[i, c] + 0.5 * couplings.j[i, c]
            if eff == 0.0:
                continue
            pair = (i, c) if i < c else (c, i)
            two.append(TwoBodyTerm(pair, "ZZ", twopi * het * eff))
    one = []
    if onsite_h != 0.0:
        one = [OneBodyTerm(i, "z", twopi * onsite_h) for i in protons]
    return EffectiveHamiltonian(couplings.n, one, two, SPIN_HALF)


# ---------------------------------------------------------------------------
# dihedral potential of mean force

N_PMF_COEFFS = 7  # cos(2 n phi), n = 0..6


@dataclass(frozen=True)
class PmfCandidate:
    """Even-Fourier dihedral free energy U(phi) = sum_n u_n cos(2 n phi)."""

    u: np.ndarray  # 7 coefficients, units of kT unless stated otherwise
    label: str = ""
    units: str = "kT"

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (N_PMF_COEFFS,):
            raise ValueError(f"expected {N_PMF_COEFFS} Fourier coefficients")
        object.__setattr__(self, "u", u)

    def value(self, phi: np.ndarray | float) -> np.ndarray | float:
        """Evaluate U at dihedral angle phi (radians)."""
        phi = np.asarray(phi, dtype=float)
        n = np.arange(N_PMF_COEFFS)
        return np.cos(2.0 * np.outer(phi.ravel(), n)).dot(self.u).reshape(phi.shape)


def build_pmf_candidates(anchors: list[PmfCandidate]) -> list[PmfCandidate]:
    """Nine candidates linearly interpolated between three anchor surfaces.

    Anchor order: artificial double well, DFT torsion scan, MD/MM; they
    come out at indices 0, 4, 8.
    """
    if len(anchors) != 3:
        raise ValueError("expected exactly three anchor PMFs")
    a0, a4, a8 = anchors
    out = []
    for k in range(9):
        if k <= 4:
            t = k / 4.0
            u = (1.0 - t) * a0.u + t * a4.u
        else:
            t = (k - 4) / 4.0
            u = (1.0 - t) * a4.u + t * a8.u
        label = {0: a0.label, 4: a4.label, 8: a8.label}.get(k, f"interp_{k}")
        out.append(PmfCandidate(u=u, label=label, units=a0.units))
    return out


class DegenerateMinimumError(ValueError):
    """PMF has no curvature to locate a minimum."""


def pmf_minimum(pmf: PmfCandidate, grid_deg: float = 0.01) -> float:
    """Location of the PMF minimum on (0, 90] degrees.

    Coarse argmin on a uniform grid followed by local quadratic refinement.
    """
    if np.abs(pmf.u[1:]).max() == 0.0:
        raise DegenerateMinimumError("flat PMF has no minimum")
    phi = np.deg2rad(np.arange(grid_deg, 90.0 + grid_deg, grid_deg))
    vals = pmf.value(phi)
    k = int(np.argmin(vals))
    if 0 < k < len(phi) - 1:
        y0, y1, y2 = vals[k - 1], vals[k], vals[k + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
        return float(np.rad2deg(phi[k]) + shift * grid_deg)
    return float(np.rad2deg(phi[k]))


def boltzmann_weights(
    pmf: PmfCandidate, phi_grid: np.ndarray, beta: float = 1.0
) -> np.ndarray:
    """Normalized trapezoid Boltzmann weights on a uniform dihedral grid.

    The grid (radians) must uniformly cover one 180-degree period, either
    periodically (no repeated endpoint) or inclusively (trapezoid end
    weights are halved).
    """
    phi = np.asarray(phi_grid, dtype=float)
    if phi.ndim != 1 or len(phi) < 2:
        raise ValueError("phi grid must be a 1-D array with >= 2 nodes")
    steps = np.diff(phi)
    h = steps[0]
    if np.abs(steps - h).max() > 1e-9 * abs(h) + 1e-12:
        raise ValueError("phi grid must be uniform")
    period = np.pi
    span = phi[-1] - phi[0]
    if abs(span + h - period) < 1e-9:
        quad = np.ones(len(phi))                     # periodic closure
    elif abs(span - period) < 1e-9:
        quad = np.ones(len(phi))
        quad[0] = quad[-1] = 0.5                     # inclusive endpoints
    else:
        raise ValueError("phi grid must cover one full 180-degree period")
    u = pmf.value(phi)
    w = quad * np.exp(-beta * (u - u.min()))
    return w / w.sum()


def pmf_weighted_couplings(
    pmf: PmfCandidate,
    d_table: dict[float, CouplingSet],
    beta: float = 1.0,
) -> CouplingSet:
    """Boltzmann average of dihedral-resolved couplings.

    d_table maps phi in radians to the CouplingSet sampled at that
    dihedral; shifts, D, and J average identically.
    """
    phis = np.array(sorted(d_table))
    w = boltzmann_weights(pmf, phis, beta)
    sets = [d_table[p] for p in phis]
    first = sets[0]
    for cs in sets[1:]:
        if cs.n != first.n or cs.species != first.species:
            raise ValueError("inconsistent coupling sets across the phi grid")
    d = np.einsum("k,kij->ij", w, np.stack([cs.d for cs in sets]))
    j = np.einsum("k,kij->ij", w, np.stack([cs.j for cs in sets]))
    shifts = w @ np.stack([cs.shifts for cs in sets])
    return CouplingSet(
        species=first.species,
        shifts=shifts,
        d=d,
        j=j,
        measurement_index=first.measurement_index,
        butterfly_indices=first.butterfly_indices,
    )


# anchor surfaces for the dimethylbiphenyl learning experiment
DMBP_PMF_ANCHORS = [
    PmfCandidate(
        u=np.array([2.2318, 1.8669, 2.1908, 0.3404, 0.2119, -0.0009, 0.0012]),
        label="double_well",
    ),
    PmfCandidate(
        u=np.array([1.0270, 0.0222, 1.0750, 0.1890, 0.0879, 0.0276, 0.0199]),
        label="dft",
    ),
    PmfCandidate(
        u=np.array([1.6457, -1.5889, 1.2715, 0.1642, 0.1210, 0.0304, 0.0267]),
        label="md_mm",
    ),
]
