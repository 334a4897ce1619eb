"""Molecular geometry to residual dipolar couplings.

Converts nuclear coordinates plus a Saupe orientational order tensor into
residual dipolar couplings (Hz), handles freely rotating methyl groups by
averaging the internal ordering tensor over the rotor angle, and generates
random dipolar spin ensembles for scaling studies.

Conventions: coordinates in Angstrom, couplings in Hz, the static field
along the laboratory z axis for ensembles.  The internal ordering tensor of
a spin pair is R_ab = <r_a r_b / r^3> (unit separation vector components);
the residual coupling is D_ij = -k_ij * sum_ab R_ab S_ab with k_ij the
species-dependent dipolar prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .constants import SPECIES, dipolar_prefactor

MIN_PAIR_DISTANCE = 0.5  # A, validation floor for molecular geometries


class GeometryError(ValueError):
    """Degenerate or inconsistent molecular geometry."""


class PackingError(RuntimeError):
    """Rejection sampling could not place all spins at the requested density."""


class UnreachableSpinError(ValueError):
    """Coupling graph is disconnected between the requested endpoints."""

    def __init__(self, spin: int):
        super().__init__(f"spin {spin} is unreachable through positive couplings")
        self.spin = spin


@dataclass(frozen=True)
class RotorGroup:
    """Spins rotating freely about a common axis (a methyl group)."""

    members: tuple[int, ...]
    axis: np.ndarray    # unit 3-vector
    center: np.ndarray  # point on the axis, A

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-8:
            raise GeometryError("rotor axis must be a unit vector")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))


@dataclass(frozen=True)
class MolecularGeometry:
    """Nuclear positions, species labels, and rotor-group annotations."""

    labels: tuple[str, ...]
    species: tuple[str, ...]
    positions: np.ndarray               # (n, 3) A
    rotor_groups: tuple[RotorGroup, ...] = ()

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "species", tuple(self.species))
        n = len(self.labels)
        if len(self.species) != n or pos.shape[0] != n:
            raise GeometryError("labels, species, positions lengths disagree")
        if n == 0:
            raise GeometryError("empty geometry")
        for s in self.species:
            if s not in SPECIES:
                raise GeometryError(f"unknown species {s!r}")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        if dist.min() < MIN_PAIR_DISTANCE:
            i, j = divmod(int(np.argmin(dist)), n)
            raise GeometryError(
                f"spins {i} and {j} are {dist[i, j]:.3f} A apart "
                f"(minimum {MIN_PAIR_DISTANCE} A)"
            )
        for g in self.rotor_groups:
            radii = [
                np.linalg.norm(_perp(pos[m] - g.center, g.axis)) for m in g.members
            ]
            if np.ptp(radii) > 1e-3:  # published coordinates carry 1e-4 rounding
                raise GeometryError("rotor group members not equidistant from axis")

    @property
    def n(self) -> int:
        return len(self.labels)

    def rotor_of(self, i: int) -> RotorGroup | None:
        for g in self.rotor_groups:
            if i in g.members:
                return g
        return None


@dataclass(frozen=True)
class SaupeTensor:
    """Symmetric traceless 3x3 orientational order matrix."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(3, 3)
        if np.abs(s - s.T).max() > 1e-12:
            raise ValueError("Saupe tensor must be symmetric")
        if abs(np.trace(s)) > 1e-12:
            raise ValueError("Saupe tensor must be traceless")
        evals = np.linalg.eigvalsh(s)
        if evals.min() < -0.5 - 1e-9 or evals.max() > 1.0 + 1e-9:
            raise ValueError("Saupe eigenvalues outside [-1/2, 1]")
        object.__setattr__(self, "s", s)

    @classmethod
    def from_diagonal(cls, s_yy: float, s_zz: float) -> "SaupeTensor":
        return cls(np.diag([-(s_yy + s_zz), s_yy, s_zz]))

    @classmethod
    def zero(cls) -> "SaupeTensor":
        return cls(np.zeros((3, 3)))


@dataclass
class CouplingSet:
    """Chemical shifts and pairwise D/J couplings of one spin system (Hz)."""

    species: tuple[str, ...]
    shifts: np.ndarray          # (n,) Hz, relative to each channel carrier
    d: np.ndarray               # (n, n) Hz, symmetric, zero diagonal
    j: np.ndarray               # (n, n) Hz, symmetric, zero diagonal
    measurement_index: int = 0
    butterfly_indices: tuple[int, ...] = ()

    def __post_init__(self):
        self.species = tuple(self.species)
        self.shifts = np.asarray(self.shifts, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        self.j = np.asarray(self.j, dtype=float)
        n = self.n
        for name, m in (("D", self.d), ("J", self.j)):
            if m.shape != (n, n):
                raise ValueError(f"{name} matrix shape {m.shape} != ({n}, {n})")
            if np.abs(m - m.T).max() > 1e-9:
                raise ValueError(f"{name} matrix must be symmetric")
            if np.abs(np.diag(m)).max() > 0:
                raise ValueError(f"{name} matrix must have zero diagonal")
        self.butterfly_indices = tuple(int(b) for b in self.butterfly_indices)

    @property
    def n(self) -> int:
        return len(self.species)

    def proton_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.species) if s == "H1"]

    def carbon_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.species) if s == "C13"]


@dataclass(frozen=True)
class SpinEnsemble:
    """Randomly packed proton positions in a box."""

    positions: np.ndarray  # (n, 3) A
    density: float         # spins / A^3
    box: np.ndarray        # (3,) A
    min_dist: float
    seed: int


def _perp(v: np.ndarray, axis: np.ndarray) -> np.ndarray:
    return v - np.dot(v, axis) * axis


def _rotor_frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal (e1, e2, axis) with rows as frame vectors."""
    ref = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(ref, axis)) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    e1 = _perp(ref, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return np.stack([e1, e2, axis])


def _ordering_rigid(ri: np.ndarray, rj: np.ndarray) -> np.ndarray:
    d = rj - ri
    r = np.linalg.norm(d)
    if r < 1e-9:
        raise GeometryError("coincident spin positions")
    u = d / r
    return np.outer(u, u) / r**3


def _ordering_intra_rotor(ri: np.ndarray, rj: np.ndarray, g: RotorGroup) -> np.ndarray:
    # both spins co-rotate: R = (1 - axis axis^T) / (2 r^3) in the lab frame
    r = np.linalg.norm(rj - ri)
    if r < 1e-9:
        raise GeometryError("coincident spin positions")
    a = g.axis
    return (np.eye(3) - np.outer(a, a)) / (2.0 * r**3)


def _ordering_rotor_static(
    static: np.ndarray, rotor_pos: np.ndarray, g: RotorGroup, nodes: int
) -> np.ndarray:
    frame = _rotor_frame(g.axis)                     # rows e1, e2, axis
    rel = frame @ (rotor_pos - g.center)
    rad = np.hypot(rel[0], rel[1])
    phi0 = np.arctan2(rel[1], rel[0])
    theta = phi0 + 2.0 * np.pi * np.arange(nodes) / nodes
    ring = (
        g.center
        + np.outer(rad * np.cos(theta), frame[0])
        + np.outer(rad * np.sin(theta), frame[1])
        + rel[2] * frame[2]
    )
    d = ring - static
    r = np.linalg.norm(d, axis=1)
    if r.min() < 1e-9:
        raise GeometryError("rotor sweep passes through a static spin")
    u = d / r[:, None]
    return np.einsum("ka,kb,k->ab", u, u, r**-3) / nodes


def pair_ordering_tensor(
    geom: MolecularGeometry, i: int, j: int, rotor_nodes: int = 360
) -> np.ndarray:
    """Internal ordering tensor R_ab = <r_a r_b / r^3> for spins (i, j)."""
    if i == j:
        raise ValueError("i and j must differ")
    gi, gj = geom.rotor_of(i), geom.rotor_of(j)
    pi, pj = geom.positions[i], geom.positions[j]
    if gi is not None and gj is not None:
        if gi is not gj:
            raise GeometryError("coupled rotor-rotor averaging not supported")
        return _ordering_intra_rotor(pi, pj, gi)
    if gi is not None:
        return _ordering_rotor_static(pj, pi, gi, rotor_nodes)
    if gj is not None:
        return _ordering_rotor_static(pi, pj, gj, rotor_nodes)
    return _ordering_rigid(pi, pj)


def residual_dipolar_coupling(
    geom: MolecularGeometry,
    saupe: SaupeTensor,
    i: int,
    j: int,
    rotor_nodes: int = 360,
) -> float:
    """Residual dipolar coupling D_ij in Hz."""
    R = pair_ordering_tensor(geom, i, j, rotor_nodes)
    k = dipolar_prefactor(geom.species[i], geom.species[j])
    return float(-k * np.sum(R * saupe.s))


def coupling_matrix(
    geom: MolecularGeometry, saupe: SaupeTensor, rotor_nodes: int = 360
) -> np.ndarray:
    """Full symmetric D matrix (Hz) for a geometry."""
    n = geom.n
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = residual_dipolar_coupling(
                geom, saupe, i, j, rotor_nodes
            )
    return d


def random_dipolar_ensemble(
    density: float,
    box: np.ndarray,
    min_dist: float,
    seed: int,
    max_attempts: int = 10**6,
) -> tuple[SpinEnsemble, CouplingSet]:
    """Rejection-sample proton positions in a box and compute static couplings.

    Spins are placed one at a time from independent counter-based streams
    derived from (seed, spin index); the static field is along z.
    """
    box = np.asarray(box, dtype=float)
    volume = float(np.prod(box))
    n = int(round(density * volume))
    if min_dist > 0 and n * (4.0 / 3.0) * np.pi * (min_dist / 2) ** 3 > volume:
        raise PackingError("requested density exceeds the close-packing bound")
    positions = np.empty((n, 3))
    placed = 0
    for k in range(n):
        rng = np.random.Generator(np.random.Philox(key=seed + (k << 20)))
        for _ in range(max_attempts):
            cand = rng.random(3) * box
            if placed == 0:
                break
            if np.linalg.norm(positions[:placed] - cand, axis=1).min() >= min_dist:
                break
        else:
            raise PackingError(
                f"failed to place spin {k} after {max_attempts} attempts"
            )
        positions[k] = cand
        placed += 1

    d = static_proton_couplings(positions)
    ens = SpinEnsemble(positions=positions, density=density, box=box,
                       min_dist=min_dist, seed=seed)
    cs = CouplingSet(
        species=("H1",) * n,
        shifts=np.zeros(n),
        d=d,
        j=np.zeros((n, n)),
    )
    return ens, cs


def static_proton_couplings(positions: np.ndarray) -> np.ndarray:
    """Dipolar D matrix (Hz) for static protons, field along z."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    k = dipolar_prefactor("H1", "H1")
    diff = positions[:, None, :] - positions[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(r, np.inf)
    cos2 = (diff[..., 2] / r) ** 2
    d = -k * (1.5 * cos2 - 0.5) / r**3
    np.fill_diagonal(d, 0.0)
    return d


def time_of_flight(
    couplings: CouplingSet, m: int, b: int
) -> list[tuple[int, float]]:
    """Minimum-weight m -> j -> b path time for every spin j, sorted ascending.

    Edge weights are 1/|d_ij| seconds; the endpoints themselves carry the
    direct shortest-path time between m and b.
    """
    n = couplings.n
    w = np.abs(couplings.d)
    with np.errstate(divide="ignore"):
        inv = np.where(w > 0, 1.0 / w, 0.0)
    graph = csr_matrix(inv)
    dist = dijkstra(graph, directed=False, indices=[m, b])
    from_m, from_b = dist[0], dist[1]
    if not np.isfinite(from_m[b]):
        raise UnreachableSpinError(b)
    times = []
    for jj in range(n):
        t = from_m[jj] + from_b[jj] if jj not in (m, b) else from_m[b]
        if not np.isfinite(t):
            raise UnreachableSpinError(jj)
        times.append((jj, float(t)))
    times.sort(key=lambda p: (p[1], p[0]))
    return times


# ---------------------------------------------------------------------------
# toluene-specific construction

TOLUENE_ZOM_REF = 2.46  # A, nominal ortho-meta H-H distance of the published geometry


def toluene_couplings(
    z_om: float,
    saupe: SaupeTensor,
    j_table: np.ndarray | None = None,
    rotor_nodes: int = 360,
) -> CouplingSet:
    """Nine-spin toluene coupling set at ortho-meta H-H distance z_om.

    z_om = 2.46 A labels the published equilibrium geometry; other values
    displace the ortho and meta proton z coordinates symmetrically by
    +-(z_om - 2.46)/2, leaving x and y fixed.
    """
    from .molecules import toluene_geometry, TOLUENE_J, TOLUENE_SHIFTS

    if not 1.5 <= z_om <= 4.0:
        raise ValueError(f"z_om = {z_om} outside [1.5, 4.0] A")
    geom = toluene_geometry(z_om)
    d = coupling_matrix(geom, saupe, rotor_nodes)
    j = TOLUENE_J.copy() if j_table is None else np.asarray(j_table, dtype=float)
    return CouplingSet(
        species=geom.species,
        shifts=TOLUENE_SHIFTS.copy(),
        d=d,
        j=j,
        measurement_index=8,
        butterfly_indices=(5, 6, 7),
    )
