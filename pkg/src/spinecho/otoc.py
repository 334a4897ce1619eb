"""Out-of-time-ordered correlators: exact traces, sampled estimates,
pulse-level curves, and the single-cut Pauli-insertion Monte Carlo bound.

The infinite-temperature OTOC is C(t) = Tr[M(t) B M(t) B^dag] / 2^n with
M a Pauli on the measurement spin, so C(0) = 1 whenever M commutes with
the butterfly.  Hamiltonian evolution runs through the product-formula
reference integrator (step-doubled fourth order, Richardson-checked on
the curve).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CouplingSet
from .hamiltonian import EffectiveHamiltonian
from .pauli import SIGMA, effective_to_terms, site_operator
from .pulses import (
    BLEW12,
    DENSE_SPIN_CAP,
    PulseSequence,
    RFErrorDistribution,
    SequencePropagator,
    build_sequence,
    x_return_probability,
)
from .statevec import TermEvolution, apply_one_site, random_states

SAMPLED_SPIN_CAP = 16


@dataclass
class OtocCurve:
    """Time grid, OTOC values, and optional uncertainty information."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    covariance: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
        if self.covariance is not None:
            self.covariance = np.asarray(self.covariance, dtype=float)
            sym = np.abs(self.covariance - self.covariance.T).max()
            if sym > 1e-10:
                raise ValueError("covariance must be symmetric")
            evals = np.linalg.eigvalsh(self.covariance)
            if evals.min() < -1e-10 * max(1.0, evals.max()):
                raise ValueError("covariance must be positive semidefinite")

    def normalized(self) -> "OtocCurve":
        """Divide by the value at the earliest time point."""
        c0 = self.values[np.argmin(self.times)]
        return OtocCurve(
            self.times.copy(), self.values / c0,
            None if self.stderr is None else self.stderr / abs(c0),
            None if self.covariance is None else self.covariance / c0**2,
            dict(self.metadata),
        )


@dataclass(frozen=True)
class ButterflySpec:
    """Identical single-spin rotation applied to a set of target spins."""

    target_spins: tuple[int, ...]
    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("butterfly axis must be normalized")
        if len(self.target_spins) == 0:
            raise ValueError("butterfly needs at least one target spin")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "target_spins",
                           tuple(int(s) for s in self.target_spins))

    def single_spin_unitary(self) -> np.ndarray:
        n_dot_sigma = sum(self.axis[k] * SIGMA[a] for k, a in enumerate("xyz"))
        return (np.cos(self.angle / 2.0) * np.eye(2)
                - 1j * np.sin(self.angle / 2.0) * n_dot_sigma)


BLEW12_AXIS = np.array([0.0, 2.0, 1.0]) / np.sqrt(5.0)
BLEW12_SCALE = 2.0 * np.sqrt(5.0) / (3.0 * np.pi)


def blew12_butterfly(
    couplings: CouplingSet, n_blocks: int = 2, t_p: float = 10.5e-6
) -> ButterflySpec:
    """Effective single-spin rotation of n_blocks x 2 BLEW-12 cycles.

    The rotation angle is the chemical-shift scaling factor times the
    butterfly spins' offset integrated over the pulse train.
    """
    targets = couplings.butterfly_indices
    shifts = {couplings.shifts[i] for i in targets}
    if len(shifts) != 1:
        raise ValueError("butterfly spins must share a chemical shift")
    omega = 2.0 * np.pi * shifts.pop()
    duration = n_blocks * 2 * 12 * t_p
    return ButterflySpec(targets, BLEW12_AXIS, BLEW12_SCALE * omega * duration)


def butterfly_unitary(spec: ButterflySpec, n_spins: int) -> np.ndarray:
    """Dense butterfly operator: identical rotations on targets, identity elsewhere."""
    if max(spec.target_spins) >= n_spins:
        raise ValueError("butterfly target out of range")
    u1 = spec.single_spin_unitary()
    out = np.eye(1, dtype=complex)
    for k in range(n_spins):
        out = np.kron(out, u1 if k in spec.target_spins else np.eye(2))
    return out


def _apply_butterfly(state, spec: ButterflySpec, n: int, dagger=False) -> None:
    u1 = spec.single_spin_unitary()
    if dagger:
        u1 = u1.conj().T
    for s in spec.target_spins:
        apply_one_site(state, u1, s, n)


class AccuracyError(RuntimeError):
    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"reference integrator did not converge: residual {residual:.2e} "
            f"exceeds tolerance {tol:.2e}"
        )
        self.residual = residual


def _sample_values(
    evolver: TermEvolution, n: int, m_spin: int, butterfly: ButterflySpec,
    t: float, steps: int, states: np.ndarray,
) -> np.ndarray:
    """Per-state Re <psi| M(t) B M(t) B^dag |psi> for one time point."""
    mx = SIGMA["x"]

    def m_heisenberg(v):
        w = v.copy()
        evolver.evolve(w, t, steps, order=4)
        apply_one_site(w, mx, m_spin, n)
        evolver.evolve(w, -t, steps, order=4)
        return w

    right = states.copy()
    _apply_butterfly(right, butterfly, n, dagger=True)
    right = m_heisenberg(right)
    _apply_butterfly(right, butterfly, n)
    right = m_heisenberg(right)
    return np.real(np.einsum("ib,ib->b", states.conj(), right))


def _full_trace_value(
    evolver: TermEvolution, n: int, m_spin: int, butterfly: ButterflySpec,
    t: float, steps: int,
) -> complex:
    u = evolver.unitary(t, steps, order=4)
    mx = site_operator(SIGMA["x"], m_spin, n)
    b = butterfly_unitary(butterfly, n)
    mt = u.conj().T @ mx @ u
    val = np.trace(mt @ b @ mt @ b.conj().T) / 2**n
    return complex(val)


def otoc_curve(
    evolution,
    m_spin: int,
    butterfly: ButterflySpec,
    times,
    method: str = "full_trace",
    samples: int = 250,
    seed: int = 0,
    tol: float = 1e-8,
    max_steps: int = 4096,
) -> OtocCurve:
    """Infinite-temperature OTOC under Hamiltonian evolution or given unitaries.

    evolution is an EffectiveHamiltonian (integrated with the step-doubled
    fourth-order product formula until the curve moves less than tol) or a
    list of unitaries matching the time grid.  The sampled method reuses
    one fixed set of Haar-like states across all time points and reports
    the standard error over states.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(evolution, (list, tuple)):
        return _otoc_from_unitaries(evolution, m_spin, butterfly, times)
    h: EffectiveHamiltonian = evolution
    n = h.n
    evolver = TermEvolution(effective_to_terms(h), n)
    if method == "full_trace":
        if n > DENSE_SPIN_CAP:
            raise ValueError(f"full_trace capped at {DENSE_SPIN_CAP} spins")
        values = np.empty(len(times))
        worst = 0.0
        for k, t in enumerate(times):
            if t == 0.0:
                values[k] = 1.0
                continue
            steps = 1
            prev = None
            while True:
                cur = _full_trace_value(evolver, n, m_spin, butterfly, t, steps)
                if abs(cur.imag) > 1e-9:
                    raise AccuracyError(abs(cur.imag), 1e-9)
                if prev is not None and abs(cur.real - prev) < tol:
                    break
                if steps > max_steps:
                    raise AccuracyError(abs(cur.real - (prev or np.inf)), tol)
                prev = cur.real
                steps *= 2
            worst = max(worst, abs(cur.real - prev))
            values[k] = cur.real
        return OtocCurve(times, values, metadata={
            "method": "full_trace", "tolerance": tol, "residual": worst})
    if method != "sampled":
        raise ValueError("method must be 'full_trace' or 'sampled'")
    if n > SAMPLED_SPIN_CAP:
        raise ValueError(f"sampled method capped at {SAMPLED_SPIN_CAP} spins")
    rng = np.random.default_rng(seed)
    states = random_states(n, samples, rng)
    values = np.empty(len(times))
    stderr = np.empty(len(times))
    for k, t in enumerate(times):
        if t == 0.0:
            values[k], stderr[k] = 1.0, 0.0
            continue
        steps = 1
        prev = None
        while True:
            vals = _sample_values(evolver, n, m_spin, butterfly, t, steps, states)
            cur = vals.mean()
            if prev is not None and abs(cur - prev) < max(tol, 1e-12):
                break
            if steps > max_steps:
                raise AccuracyError(abs(cur - (prev or np.inf)), tol)
            prev = cur
            steps *= 2
        values[k] = cur
        stderr[k] = vals.std(ddof=1) / np.sqrt(samples)
    return OtocCurve(times, values, stderr=stderr, metadata={
        "method": "sampled", "samples": samples, "seed": seed, "tolerance": tol})


def _otoc_from_unitaries(unitaries, m_spin, butterfly, times) -> OtocCurve:
    n = int(np.log2(unitaries[0].shape[0]))
    mx = site_operator(SIGMA["x"], m_spin, n)
    b = butterfly_unitary(butterfly, n)
    values = []
    for u in unitaries:
        mt = u.conj().T @ mx @ u
        values.append(np.real(np.trace(mt @ b @ mt @ b.conj().T)) / 2**n)
    return OtocCurve(times, np.array(values), metadata={"method": "unitaries"})


def pulse_level_otoc(
    seq_fwd: PulseSequence,
    butterfly_seq: PulseSequence | list[PulseSequence],
    seq_bwd: PulseSequence,
    couplings: CouplingSet,
    rf: RFErrorDistribution,
    n_cycles_list,
) -> OtocCurve:
    """RF-distribution-averaged pulse-level OTOC curve.

    For every epsilon grid point the full concatenated propagator
    (forward cycles, butterfly block, backward cycles) is built densely
    for each cycle count; the returned curve is the p(eps)-weighted
    average of Tr[M W M W^dag]/Tr[M^2].  On-site sequences carry their
    per-cycle phase increments, and the butterfly block is phase-advanced
    by the accumulated on-site frame angle 3 n phi.
    """
    prop = SequencePropagator(couplings)
    n = couplings.n
    m_spin = couplings.measurement_index
    n_cycles_list = list(n_cycles_list)
    values = np.zeros(len(n_cycles_list))
    phi = seq_fwd.phase_increment
    bseqs = butterfly_seq if isinstance(butterfly_seq, (list, tuple)) \
        else [butterfly_seq]
    for eps, w in zip(rf.grid, rf.weights):
        if w == 0.0:
            continue
        for k, nc in enumerate(n_cycles_list):
            if nc == 0:
                u_f = u_b = np.eye(2**n, dtype=complex)
            else:
                fwd = build_sequence(seq_fwd.kind, seq_fwd.t_p, nc, phi)
                bwd = build_sequence(seq_bwd.kind, seq_bwd.t_p, nc,
                                     seq_bwd.phase_increment)
                u_f = prop.propagate(fwd, eps, eps)
                u_b = prop.propagate(bwd, eps, eps)
            v = np.eye(2**n, dtype=complex)
            for bs in bseqs:
                shifted = bs.phase_shifted(3 * nc * phi) if phi else bs
                v = prop.propagate(shifted, eps, eps) @ v
            w_tot = u_b @ v @ u_f
            values[k] += w * x_return_probability(w_tot, m_spin, n)
    times = np.array([nc * seq_fwd.cycle_time for nc in n_cycles_list])
    return OtocCurve(times, values, metadata={
        "method": "pulse_level", "kind_fwd": seq_fwd.kind,
        "kind_bwd": seq_bwd.kind, "rf": rf.provenance})


def loschmidt_butterfly() -> "ButterflySpec":
    """Trivial butterfly (identity): the OTOC degenerates to the echo."""
    return ButterflySpec((0,), np.array([0.0, 0.0, 1.0]), 0.0)


def tnmc_estimate(
    circuit,
    cut_moment: int,
    n_samples: int,
    seed: int,
    m_spin: int,
    butterfly: ButterflySpec,
    states_per_sample: int = 1,
) -> tuple[float, float]:
    """Single-cut tensor-network Monte Carlo estimate of a circuit OTOC.

    Implements the random-Pauli-insertion equivalence: i.i.d. single-qubit
    Paulis (I, X, Y, Z uniformly) are inserted at the cut in the forward
    circuit and mirrored in its inverse; the returned mean over insertions
    estimates what the cut Monte Carlo propagation would produce.
    """
    from .circuits import apply_circuit, Circuit, Gate
    from .pauli import SIGMA as _S

    n = circuit.n_qubits
    if not 0 <= cut_moment <= len(circuit.moments):
        raise ValueError("cut_moment out of range")
    pre = Circuit(n, [list(m) for m in circuit.moments[:cut_moment]])
    post = Circuit(n, [list(m) for m in circuit.moments[cut_moment:]])
    rng = np.random.default_rng(seed)
    mx = _S["x"]
    vals = np.empty(n_samples)
    for s in range(n_samples):
        paulis = rng.integers(0, 4, size=n)
        state = random_states(n, states_per_sample, rng)

        def apply_w(v):
            apply_circuit(v, pre)
            for q, p in enumerate(paulis):
                if p:
                    apply_one_site(v, [None, _S["x"], _S["y"], _S["z"]][p], q, n)
            apply_circuit(v, post)

        def apply_w_dag(v):
            apply_circuit(v, post.dagger())
            for q, p in enumerate(paulis):
                if p:
                    apply_one_site(v, [None, _S["x"], _S["y"], _S["z"]][p], q, n)
            apply_circuit(v, pre.dagger())

        def m_t(v):
            apply_w(v)
            apply_one_site(v, mx, m_spin, n)
            apply_w_dag(v)

        right = state.copy()
        _apply_butterfly(right, butterfly, n, dagger=True)
        m_t(right)
        _apply_butterfly(right, butterfly, n)
        m_t(right)
        vals[s] = np.real(np.einsum("ib,ib->b", state.conj(), right)).mean()
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_samples))
