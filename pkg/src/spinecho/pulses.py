"""Two-channel RF pulse sequences: builders, dense propagation, RF filtering.

Pulses are ideal rectangles.  The RF Hamiltonian per channel is
w(t) (Ix cos(phi) - Iy sin(phi)); a "y-phase" pulse (phi = -pi/2) rotates
about +y.  All builders emit windowless pi/2 sub-pulses of width t_p (plus
t_p delays where the block layout calls for them) with nominal nutation
amplitude pi/(2 t_p).

The block definitions below were reconstructed from their exact
zeroth-order average-Hamiltonian targets (cyclicity, double-quantum form,
heteronuclear scale factors, chemical-shift axis); see the builder
docstrings for the resulting forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .geometry import CouplingSet
from .pauli import Term, SPIN, effective_to_matrix, embed, kron_all, site_operator

DEFAULT_TP = 10.5e-6  # s, experimental pi/2 pulse width

PHASE = {"x": 0.0, "y": -np.pi / 2, "-x": np.pi, "-y": np.pi / 2}


@dataclass(frozen=True)
class ChannelPulse:
    amplitude: float  # rad/s
    phase: float      # rad

    def shifted(self, dphi: float) -> "ChannelPulse":
        if self.amplitude == 0.0:
            return self
        return ChannelPulse(self.amplitude, self.phase + dphi)


IDLE = ChannelPulse(0.0, 0.0)


@dataclass(frozen=True)
class Segment:
    duration: float  # s
    proton: ChannelPulse = IDLE
    carbon: ChannelPulse = IDLE


@dataclass
class PulseSequence:
    """Piecewise-constant two-channel RF program.

    cycle_span marks the segment range of one representative engineered
    cycle (builders place sandwich pulses outside it); cyclic asserts that
    the nominal RF propagator over that span is +-identity.
    """

    segments: list[Segment]
    cycle_time: float
    cyclic: bool
    kind: str = ""
    t_p: float = DEFAULT_TP
    n_cycles: int = 1
    phase_increment: float = 0.0
    cycle_span: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if any(s.duration <= 0 for s in self.segments):
            raise ValueError("segment durations must be positive")
        i0, i1 = self.cycle_span
        span = sum(s.duration for s in self.segments[i0:i1])
        if abs(span - self.cycle_time) > 1e-12:
            raise ValueError("cycle_time does not match the cycle span")
        if self.cyclic:
            for channel in ("proton", "carbon"):
                u = nominal_rotation(self.segments[i0:i1], channel)
                dev = min(np.abs(u - np.eye(2)).max(), np.abs(u + np.eye(2)).max())
                if dev > 1e-10:
                    raise ValueError(
                        f"nominal {channel} propagator over one cycle is not"
                        f" +-identity (deviation {dev:.2e})"
                    )

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def phase_shifted(self, dphi: float, channel: str = "proton") -> "PulseSequence":
        """Shift every pulse phase on one channel (z-frame rotation)."""
        segs = []
        for s in self.segments:
            if channel == "proton":
                segs.append(Segment(s.duration, s.proton.shifted(dphi), s.carbon))
            else:
                segs.append(Segment(s.duration, s.proton, s.carbon.shifted(dphi)))
        return replace(self, segments=segs)


def concatenate(*seqs: PulseSequence) -> PulseSequence:
    """Join sequences in time order (earliest first); cycle metadata is reset."""
    segments = [s for q in seqs for s in q.segments]
    total = sum(s.duration for s in segments)
    return PulseSequence(
        segments=segments, cycle_time=total, cyclic=False,
        kind="+".join(q.kind for q in seqs if q.kind),
        t_p=seqs[0].t_p, cycle_span=(0, len(segments)),
    )


def _su2(pulse: ChannelPulse, duration: float) -> np.ndarray:
    if pulse.amplitude == 0.0:
        return np.eye(2, dtype=complex)
    h = pulse.amplitude * (
        np.cos(pulse.phase) * SPIN["x"] - np.sin(pulse.phase) * SPIN["y"]
    )
    return la.expm(-1j * h * duration)


def nominal_rotation(segments: list[Segment], channel: str) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for s in segments:
        p = s.proton if channel == "proton" else s.carbon
        u = _su2(p, s.duration) @ u
    return u


# ---------------------------------------------------------------------------
# block tables (see module docstring)

# TARDIS-1 composite sub-pulse phases: each composite is three synchronized
# pi/2 pulses; the two channels run x-outer composites whose middle pulses
# point along opposite y axes (net pi rotations about (1,-1,0)/sqrt2 on 1H
# and (1,1,0)/sqrt2 on 13C for the a-type block).
_T1_A = (("x", "-y", "x"), ("x", "y", "x"))
_T1_B = (("x", "-y", "x"), ("-x", "-y", "-x"))
_T1_PATTERN = ("a", "a", "b", "b", "B", "B", "A", "A")  # capitals are barred

# TARDIS-2 Baum-Pines-type block: pulses at slots 0, 3, 5, 8 of a 9 t_p
# layout [P dd P d P dd P]; proton phases (x, x, x, -x), and for the
# double-resonance block carbon phases (x, x, -x, x) in the same slots.
_T2_LAYOUT = "PddPdPddP"
_T2_BP_H = ("x", "x", "x", "-x")
_T2_DR_H = ("x", "x", "x", "-x")
_T2_DR_C = ("x", "x", "-x", "x")
_T2_PATTERN = ("BP", "bp", "DR", "dr", "BP", "bp")  # lowercase are barred

# BLEW-12: windowless 12-pulse homonuclear decoupling block; the second
# half is the time-reversed phase inverse of the first.  Zeroth order:
# dipolar term exactly cancelled, chemical shifts scaled by 2*sqrt5/(3 pi)
# along (0, 2, 1)/sqrt5, first-order dipolar term numerically zero.
BLEW12_PHASES = ("x", "y", "-x", "-x", "-y", "-x", "x", "y", "x", "x", "-y", "-x")

TARDIS1_FWD = "TARDIS1_fwd"
TARDIS1_BWD = "TARDIS1_bwd"
TARDIS2_FWD = "TARDIS2_fwd"
TARDIS2_BWD = "TARDIS2_bwd"
ONSITE_TARDIS2_FWD = "ONSITE_TARDIS2_fwd"
ONSITE_TARDIS2_BWD = "ONSITE_TARDIS2_bwd"
BLEW12 = "BLEW12"

SEQUENCE_KINDS = (
    TARDIS1_FWD, TARDIS1_BWD, TARDIS2_FWD, TARDIS2_BWD,
    BLEW12, ONSITE_TARDIS2_FWD, ONSITE_TARDIS2_BWD,
)

_BAR = np.pi


def _pulse(t_p: float, ph_h: float | None, ph_c: float | None) -> Segment:
    w = np.pi / 2.0 / t_p
    return Segment(
        t_p,
        ChannelPulse(w, ph_h) if ph_h is not None else IDLE,
        ChannelPulse(w, ph_c) if ph_c is not None else IDLE,
    )


def _tardis1_cycle(t_p: float, carbon_shift: float, proton_shift: float) -> list[Segment]:
    segs = []
    for blk in _T1_PATTERN:
        trio_h, trio_c = _T1_A if blk in "aA" else _T1_B
        bar = _BAR if blk in "AB" else 0.0
        for kh, kc in zip(trio_h, trio_c):
            segs.append(_pulse(t_p, PHASE[kh] + bar + proton_shift,
                               PHASE[kc] + bar + carbon_shift))
    return segs


def _t2_block(t_p: float, phases_h, phases_c, bar: float, h_shift: float) -> list[Segment]:
    segs = []
    ih = ic = 0
    for slot in _T2_LAYOUT:
        if slot == "P":
            ph = PHASE[phases_h[ih]] + bar + h_shift
            ih += 1
            pc = None
            if phases_c is not None:
                pc = PHASE[phases_c[ic]] + bar
                ic += 1
            segs.append(_pulse(t_p, ph, pc))
        else:
            segs.append(Segment(t_p))
    return segs


def _tardis2_cycle(
    t_p: float, proton_shift: float, pair_shifts: tuple[float, float, float]
) -> list[Segment]:
    """One TARDIS-2 cycle; pair_shifts are extra proton phases for the
    first BP pair, the DR pair, and the second BP pair (on-site scheme)."""
    segs = []
    for k, blk in enumerate(_T2_PATTERN):
        bar = _BAR if blk.islower() else 0.0
        shift = proton_shift + pair_shifts[k // 2]
        if blk.upper() == "BP":
            segs += _t2_block(t_p, _T2_BP_H, None, bar, shift)
        else:
            segs += _t2_block(t_p, _T2_DR_H, _T2_DR_C, bar, shift)
    return segs


def _pi_pulse(t_p: float, channel: str, phase_key: str) -> Segment:
    w = np.pi / 2.0 / t_p
    p = ChannelPulse(w, PHASE[phase_key])
    if channel == "proton":
        return Segment(2 * t_p, p, IDLE)
    return Segment(2 * t_p, IDLE, p)


def build_sequence(
    kind: str,
    t_p: float = DEFAULT_TP,
    n_cycles: int = 1,
    phase_increment: float = 0.0,
) -> PulseSequence:
    """Construct a named sequence with n_cycles repetitions of its cycle.

    Backward variants carry the reversing channel phase shift plus the
    sandwiching pi pulses; on-site variants apply per-block-pair proton
    phase increments of (3m-3), (3m-2), (3m-1) times phase_increment in
    cycle m (negated for the backward direction).
    """
    if kind not in SEQUENCE_KINDS:
        raise ValueError(f"unknown sequence kind {kind!r}")
    if t_p <= 0 or n_cycles < 1:
        raise ValueError("t_p must be positive and n_cycles >= 1")

    segs: list[Segment] = []
    span0 = 0
    cyclic = True
    if kind == TARDIS1_FWD:
        cyc = _tardis1_cycle(t_p, 0.0, 0.0)
        segs = cyc * n_cycles
        cycle_time = 24 * t_p
        span = (0, 24)
    elif kind == TARDIS1_BWD:
        cyc = _tardis1_cycle(t_p, carbon_shift=np.pi / 2, proton_shift=0.0)
        segs = [_pi_pulse(t_p, "proton", "y")] + cyc * n_cycles \
            + [_pi_pulse(t_p, "proton", "-y")]
        cycle_time = 24 * t_p
        span = (1, 25)
    elif kind in (TARDIS2_FWD, ONSITE_TARDIS2_FWD):
        for m in range(1, n_cycles + 1):
            shifts = tuple((3 * m - 3 + k) * phase_increment for k in range(3))
            segs += _tardis2_cycle(t_p, 0.0, shifts)
        cycle_time = 54 * t_p
        span = (0, 54)
        cyclic = kind == TARDIS2_FWD or phase_increment == 0.0
    elif kind in (TARDIS2_BWD, ONSITE_TARDIS2_BWD):
        core = []
        for m in range(1, n_cycles + 1):
            shifts = tuple(-(3 * m - 3 + k) * phase_increment for k in range(3))
            core += _tardis2_cycle(t_p, np.pi / 2, shifts)
        segs = [_pi_pulse(t_p, "carbon", "y")] + core \
            + [_pi_pulse(t_p, "carbon", "-y")]
        cycle_time = 54 * t_p
        span = (1, 55)
        cyclic = kind == TARDIS2_BWD or phase_increment == 0.0
    elif kind == BLEW12:
        cyc = [_pulse(t_p, PHASE[k], None) for k in BLEW12_PHASES]
        segs = cyc * n_cycles
        cycle_time = 12 * t_p
        span = (0, 12)
    return PulseSequence(
        segments=segs, cycle_time=cycle_time, cyclic=cyclic, kind=kind,
        t_p=t_p, n_cycles=n_cycles, phase_increment=phase_increment,
        cycle_span=span,
    )


def onsite_field_from_increment(phase_increment: float, cycle_time: float) -> float:
    """Effective proton z field h (Hz) produced by the on-site phase scheme."""
    return 3.0 * phase_increment / (2.0 * np.pi * cycle_time)


def increment_for_onsite_field(h: float, cycle_time: float) -> float:
    """Per-block phase increment (rad) producing a proton z field h (Hz)."""
    return 2.0 * np.pi * h * cycle_time / 3.0


# ---------------------------------------------------------------------------
# internal Hamiltonian and dense propagation

DENSE_SPIN_CAP = 10


class DenseCapError(ValueError):
    """System too large for dense propagation; use term-wise evolution."""

    def __init__(self, n: int):
        super().__init__(
            f"{n} spins exceeds the dense cap of {DENSE_SPIN_CAP}; "
            "use the term-wise evolution path"
        )


def internal_terms(couplings: CouplingSet) -> list[Term]:
    """Full rotating-frame internal Hamiltonian as 1- and 2-site terms (rad/s)."""
    twopi = 2.0 * np.pi
    protons = couplings.proton_indices()
    carbons = couplings.carbon_indices()
    terms: list[Term] = []
    for i in range(couplings.n):
        if couplings.shifts[i] != 0.0:
            terms.append(Term((i,), twopi * couplings.shifts[i] * SPIN["z"]))
    iso = (np.kron(SPIN["x"], SPIN["x"]) + np.kron(SPIN["y"], SPIN["y"])
           + np.kron(SPIN["z"], SPIN["z"]))
    dd = (2 * np.kron(SPIN["z"], SPIN["z"]) - np.kron(SPIN["x"], SPIN["x"])
          - np.kron(SPIN["y"], SPIN["y"]))
    zz = np.kron(SPIN["z"], SPIN["z"])
    for a, i in enumerate(protons):
        for j in protons[a + 1:]:
            m = twopi * couplings.j[i, j] * iso + twopi * couplings.d[i, j] * dd
            if np.abs(m).max() > 0:
                terms.append(Term((i, j), m))
    for c in carbons:
        for i in protons:
            coef = twopi * (2.0 * couplings.d[i, c] + couplings.j[i, c])
            if coef != 0.0:
                pair = (i, c) if i < c else (c, i)
                terms.append(Term(pair, coef * zz))
    return terms


def internal_hamiltonian(couplings: CouplingSet) -> np.ndarray:
    """Dense internal Hamiltonian (rad/s); capped at DENSE_SPIN_CAP spins."""
    n = couplings.n
    if n > DENSE_SPIN_CAP:
        raise DenseCapError(n)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for t in internal_terms(couplings):
        h += embed(t.matrix, t.sites, n)
    return h


def _channel_operators(couplings: CouplingSet) -> tuple[list, list]:
    n = couplings.n
    protons = couplings.proton_indices()
    carbons = couplings.carbon_indices()
    hx = sum(site_operator(SPIN["x"], i, n) for i in protons)
    hy = sum(site_operator(SPIN["y"], i, n) for i in protons)
    cx = sum((site_operator(SPIN["x"], i, n) for i in carbons),
             np.zeros((2**n, 2**n), complex))
    cy = sum((site_operator(SPIN["y"], i, n) for i in carbons),
             np.zeros((2**n, 2**n), complex))
    return [hx, hy], [cx, cy]


class SequencePropagator:
    """Dense time-ordered propagation of a pulse sequence over H_int."""

    def __init__(self, couplings: CouplingSet):
        self.n = couplings.n
        if self.n > DENSE_SPIN_CAP:
            raise DenseCapError(self.n)
        self.h_int = internal_hamiltonian(couplings)
        (self.hx, self.hy), (self.cx, self.cy) = _channel_operators(couplings)
        self._cache: dict = {}

    def segment_unitary(self, seg: Segment, eps_h: float, eps_c: float) -> np.ndarray:
        key = (seg.duration, seg.proton, seg.carbon, eps_h, eps_c)
        u = self._cache.get(key)
        if u is None:
            h = self.h_int.copy()
            if seg.proton.amplitude != 0.0:
                amp = (1.0 + eps_h) * seg.proton.amplitude
                h += amp * (np.cos(seg.proton.phase) * self.hx
                            - np.sin(seg.proton.phase) * self.hy)
            if seg.carbon.amplitude != 0.0:
                amp = (1.0 + eps_c) * seg.carbon.amplitude
                h += amp * (np.cos(seg.carbon.phase) * self.cx
                            - np.sin(seg.carbon.phase) * self.cy)
            w, v = np.linalg.eigh(h)
            u = (v * np.exp(-1j * w * seg.duration)) @ v.conj().T
            self._cache[key] = u
        return u

    def propagate(
        self, seq: PulseSequence, eps_h: float = 0.0, eps_c: float = 0.0
    ) -> np.ndarray:
        u = np.eye(2**self.n, dtype=complex)
        for seg in seq.segments:
            u = self.segment_unitary(seg, eps_h, eps_c) @ u
        return u


def sequence_propagator(
    seq: PulseSequence,
    couplings: CouplingSet,
    eps_h: float = 0.0,
    eps_c: float = 0.0,
) -> np.ndarray:
    """Exact dense propagator of a sequence with fractional RF errors."""
    return SequencePropagator(couplings).propagate(seq, eps_h, eps_c)


# ---------------------------------------------------------------------------
# RF inhomogeneity

COIL_SIGMA = 0.064  # fractional RF error spread of the coil


@dataclass
class RFErrorDistribution:
    """Discrete fractional-RF-error distribution."""

    grid: np.ndarray
    weights: np.ndarray
    provenance: str = "coil_gaussian"

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("epsilon grid must be strictly increasing")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def coil_gaussian(
        cls, sigma: float = COIL_SIGMA, half_width: float = 3.0, n: int = 41
    ) -> "RFErrorDistribution":
        eps = np.linspace(-half_width * sigma, half_width * sigma, n)
        w = np.exp(-0.5 * (eps / sigma) ** 2)
        return cls(eps, w / w.sum(), "coil_gaussian")

    def std(self) -> float:
        mu = self.weights @ self.grid
        return float(np.sqrt(self.weights @ (self.grid - mu) ** 2))

    @classmethod
    def point_mass(cls, eps: float = 0.0) -> "RFErrorDistribution":
        # two-point degenerate grid so the increasing-grid invariant holds
        return cls(np.array([eps, eps + 1e-12]), np.array([1.0, 0.0]),
                   "coil_gaussian")


def x_return_probability(
    u_echo: np.ndarray, measurement_index: int, n: int
) -> float:
    """Normalized return of X polarization on the measurement spin."""
    sx = site_operator(SPIN["x"], measurement_index, n)
    norm = np.real(np.trace(sx @ sx))
    val = np.real(np.trace(sx @ u_echo @ sx @ u_echo.conj().T))
    return float(val / norm)


def rf_filter_distribution(
    p_coil: RFErrorDistribution,
    seq_fwd: PulseSequence,
    seq_bwd: PulseSequence,
    couplings: CouplingSet,
    m_cycles: int = 10,
    repeats: int = 2,
) -> RFErrorDistribution:
    """Reweight a coil error distribution by the echo-filter survival F(eps).

    F(eps) is the return probability of X polarization on the measurement
    spin after m_cycles of forward evolution followed by m_cycles of
    backward evolution at fractional RF error eps; the output weights are
    p_coil(eps) * F(eps)**repeats, renormalized.
    """
    if m_cycles < 1 or repeats < 1:
        raise ValueError("m_cycles and repeats must be >= 1")
    fwd = build_sequence(seq_fwd.kind, seq_fwd.t_p, m_cycles,
                         seq_fwd.phase_increment)
    bwd = build_sequence(seq_bwd.kind, seq_bwd.t_p, m_cycles,
                         seq_bwd.phase_increment)
    prop = SequencePropagator(couplings)
    weights = np.empty_like(p_coil.weights)
    for k, eps in enumerate(p_coil.grid):
        if p_coil.weights[k] == 0.0:
            weights[k] = 0.0
            continue
        u = prop.propagate(bwd, eps, eps) @ prop.propagate(fwd, eps, eps)
        f = x_return_probability(u, couplings.measurement_index, couplings.n)
        weights[k] = p_coil.weights[k] * f**repeats
    total = weights.sum()
    if total <= 0:
        raise ValueError("filter annihilated the distribution")
    return RFErrorDistribution(p_coil.grid.copy(), weights / total, "filtered")
