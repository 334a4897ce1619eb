"""Quantum-trajectory simulation of circuits under Kraus-channel noise.

Channels follow each ideal gate, scaled by its physical duration:
composite amplitude + phase damping per qubit (idle qubits receive the
moment duration), one- and two-qubit depolarizing remainders, frozen
per-unique-gate coherent fSim errors, and a classical readout confusion
matrix.  The stochastic rates (damping, depolarizing, readout) carry the
noise-scaling multiplier lambda; coherent errors do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import Circuit, Gate, fsim_matrix, gate_matrix
from .statevec import apply_one_site, apply_two_site

DEFAULT_T1 = 114e-6
DEFAULT_T2 = 130e-6
DEFAULT_DURATION_2Q = 80e-9   # two-pulse composite incl. padding
DEFAULT_DURATION_1Q = 25e-9

_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
}
_PAULIS_1Q = [_SIGMA["x"], _SIGMA["y"], _SIGMA["z"]]


@dataclass
class CoherentFsimError:
    d_theta: float
    d_phi: float
    d_z1: float
    d_z2: float


@dataclass
class NoiseModel:
    t1: float = DEFAULT_T1
    t2: float = DEFAULT_T2
    depol_1q: float = 0.0
    depol_2q: float = 0.0
    coherent_sigma_theta: float = 0.0
    coherent_sigma_phi: float = 0.0
    coherent_sigma_z: float = 0.0
    readout_confusion: np.ndarray = field(
        default_factory=lambda: np.eye(2))
    duration_1q: float = DEFAULT_DURATION_1Q
    duration_2q: float = DEFAULT_DURATION_2Q
    lambda_scale: float = 1.0
    seed: int = 0
    coherent_errors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t2 > 2.0 * self.t1 + 1e-15:
            raise ValueError("T2 cannot exceed 2 T1")
        for p in (self.depol_1q, self.depol_2q):
            if not 0.0 <= p <= 1.0:
                raise ValueError("depolarizing probabilities must be in [0, 1]")
        self.readout_confusion = np.asarray(self.readout_confusion, dtype=float)
        if np.abs(self.readout_confusion.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("readout confusion rows must sum to 1")

    # -- stochastic rates (lambda-scaled) ------------------------------------
    def damping_probs(self, dt: float) -> tuple[float, float]:
        """Amplitude and pure-dephasing jump probabilities over dt."""
        lam = self.lambda_scale
        p_amp = 1.0 - np.exp(-lam * dt / self.t1) if self.t1 > 0 else 0.0
        rate_phi = 1.0 / self.t2 - 0.5 / self.t1
        p_phi = 1.0 - np.exp(-lam * dt * rate_phi) if rate_phi > 0 else 0.0
        return p_amp, p_phi

    def depol_prob(self, n_qubits: int) -> float:
        p = self.depol_1q if n_qubits == 1 else self.depol_2q
        return min(1.0, self.lambda_scale * p)

    def scaled_confusion(self) -> np.ndarray:
        c = self.readout_confusion
        lam = self.lambda_scale
        out = np.eye(2) + lam * (c - np.eye(2))
        return np.clip(out, 0.0, 1.0)

    def coherent_for(self, gate: Gate) -> CoherentFsimError | None:
        if len(gate.qubits) != 2:
            return None
        if not (self.coherent_sigma_theta or self.coherent_sigma_phi
                or self.coherent_sigma_z):
            return None
        key = (gate.name, gate.qubits,
               tuple(np.round(gate.params, 12)))
        err = self.coherent_errors.get(key)
        if err is None:
            import hashlib

            digest = hashlib.sha256(repr(key).encode()).digest()
            h = int.from_bytes(digest[:8], "little")
            rng = np.random.Generator(np.random.Philox(key=(self.seed << 64) + h))
            err = CoherentFsimError(
                rng.normal(0.0, self.coherent_sigma_theta),
                rng.normal(0.0, self.coherent_sigma_phi),
                rng.normal(0.0, self.coherent_sigma_z),
                rng.normal(0.0, self.coherent_sigma_z),
            )
            self.coherent_errors[key] = err
        return err

    def rescaled(self, lambda_scale: float) -> "NoiseModel":
        m = replace(self, lambda_scale=lambda_scale)
        m.coherent_errors = self.coherent_errors  # share the frozen calibration
        return m


def build_noise_model(
    t1: float = DEFAULT_T1,
    t2: float = DEFAULT_T2,
    depol_1q: float = 0.0,
    depol_2q: float = 0.0,
    coherent_sigma_theta: float = 0.0,
    coherent_sigma_phi: float = 0.0,
    coherent_sigma_z: float = 0.0,
    readout_epsilon: float = 0.0,
    seed: int = 0,
    **kwargs,
) -> NoiseModel:
    """Assemble a device-style noise model; coherent errors are drawn once
    per unique gate and frozen (calibration-like reproducibility)."""
    confusion = np.array([[1.0 - readout_epsilon, readout_epsilon],
                          [readout_epsilon, 1.0 - readout_epsilon]])
    return NoiseModel(
        t1=t1, t2=t2, depol_1q=depol_1q, depol_2q=depol_2q,
        coherent_sigma_theta=coherent_sigma_theta,
        coherent_sigma_phi=coherent_sigma_phi,
        coherent_sigma_z=coherent_sigma_z,
        readout_confusion=confusion, seed=seed, **kwargs,
    )


def damping_kraus(p_amp: float, p_phi: float) -> list[np.ndarray]:
    """Kraus set of the composite amplitude + phase damping channel."""
    amp = [np.array([[1, 0], [0, np.sqrt(1 - p_amp)]], dtype=complex),
           np.array([[0, np.sqrt(p_amp)], [0, 0]], dtype=complex)]
    phi = [np.array([[1, 0], [0, np.sqrt(1 - p_phi)]], dtype=complex),
           np.array([[0, 0], [0, np.sqrt(p_phi)]], dtype=complex)]
    return [k2 @ k1 for k2 in phi for k1 in amp]


def depol_kraus(p: float, n_qubits: int) -> list[np.ndarray]:
    dim = 2**n_qubits
    n_paulis = dim * dim - 1
    ops = [np.sqrt(1.0 - p) * np.eye(dim, dtype=complex)]
    for k in range(1, dim * dim):
        mats = []
        kk = k
        for _ in range(n_qubits):
            sel = kk % 4
            kk //= 4
            mats.append(np.eye(2, dtype=complex) if sel == 0 else _PAULIS_1Q[sel - 1])
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        ops.append(np.sqrt(p / n_paulis) * op)
    return ops


def check_cptp(kraus: list[np.ndarray], tol: float = 1e-12) -> float:
    dim = kraus[0].shape[0]
    acc = sum(k.conj().T @ k for k in kraus)
    dev = float(np.abs(acc - np.eye(dim)).max())
    if dev > tol:
        raise ValueError(f"Kraus set violates completeness by {dev:.2e}")
    return dev


@dataclass
class TrajectoryResult:
    mean: float
    stderr: float
    n_trajectories: int
    seed: int
    values: np.ndarray | None = None


def _qubit_one_population(state: np.ndarray, q: int, n: int) -> float:
    v = state.reshape((2,) * n)
    sl = [slice(None)] * n
    sl[q] = 1
    return float(np.linalg.norm(v[tuple(sl)]) ** 2)


def _apply_damping(state, q, n, p_amp, p_phi, rng) -> None:
    norm2 = float(np.linalg.norm(state) ** 2)
    p1 = _qubit_one_population(state, q, n) / norm2
    # amplitude damping jump
    if p_amp > 0.0:
        pj = p_amp * p1
        if rng.random() < pj:
            k = np.array([[0, 1], [0, 0]], dtype=complex)
            apply_one_site(state, k, q, n)
        else:
            k = np.array([[1, 0], [0, np.sqrt(1 - p_amp)]], dtype=complex)
            apply_one_site(state, k, q, n)
        state /= np.linalg.norm(state)
        p1 = _qubit_one_population(state, q, n)
    if p_phi > 0.0:
        pj = p_phi * p1
        if rng.random() < pj:
            k = np.array([[0, 0], [0, 1]], dtype=complex)
            apply_one_site(state, k, q, n)
        else:
            k = np.array([[1, 0], [0, np.sqrt(1 - p_phi)]], dtype=complex)
            apply_one_site(state, k, q, n)
        nrm = np.linalg.norm(state)
        if nrm < 1e-14:
            raise FloatingPointError("trajectory norm collapsed")
        state /= nrm


def _apply_depol(state, qubits, n, p, rng) -> None:
    if p <= 0.0:
        return
    if rng.random() >= p:
        return
    n_paulis = 4 ** len(qubits) - 1
    sel = int(rng.integers(1, n_paulis + 1))
    for q in qubits:
        pk = sel % 4
        sel //= 4
        if pk:
            apply_one_site(state, _PAULIS_1Q[pk - 1], q, n)


def _apply_coherent(state, gate: Gate, err: CoherentFsimError, n) -> None:
    qa, qb = gate.qubits
    apply_two_site(state, fsim_matrix(err.d_theta, err.d_phi), qa, qb, n)
    apply_one_site(state, np.diag([1.0, np.exp(1j * err.d_z1)]), qa, n)
    apply_one_site(state, np.diag([1.0, np.exp(1j * err.d_z2)]), qb, n)


def run_noisy_trajectory(
    circuit: Circuit, noise: NoiseModel, state: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """Propagate one pure-state trajectory through the noisy circuit, in place."""
    n = circuit.n_qubits
    for moment in circuit.moments:
        busy: set[int] = set()
        durations = [noise.duration_2q if len(g.qubits) == 2 else
                     noise.duration_1q for g in moment] or [0.0]
        moment_dt = max(durations)
        for g in moment:
            m = gate_matrix(g)
            if len(g.qubits) == 1:
                apply_one_site(state, m, g.qubits[0], n)
            else:
                apply_two_site(state, m, g.qubits[0], g.qubits[1], n)
            err = noise.coherent_for(g)
            if err is not None:
                _apply_coherent(state, g, err, n)
            dt = noise.duration_2q if len(g.qubits) == 2 else noise.duration_1q
            p_amp, p_phi = noise.damping_probs(dt)
            for q in g.qubits:
                _apply_damping(state, q, n, p_amp, p_phi, rng)
            _apply_depol(state, g.qubits, n, noise.depol_prob(len(g.qubits)), rng)
            busy.update(g.qubits)
        if moment_dt > 0.0:
            p_amp, p_phi = noise.damping_probs(moment_dt)
            for q in range(n):
                if q not in busy:
                    _apply_damping(state, q, n, p_amp, p_phi, rng)


def _x_expectation(state: np.ndarray, q: int, n: int) -> float:
    flipped = state.copy()
    apply_one_site(flipped, _SIGMA["x"], q, n)
    return float(np.real(np.vdot(state, flipped)))


def simulate_trajectories(
    circuit: Circuit,
    noise: NoiseModel,
    observable,
    n_traj: int,
    seed: int = 0,
    keep_values: bool = False,
) -> TrajectoryResult:
    """Trajectory average of an observable over the noisy circuit.

    observable = ("otoc_sandwich", m_qubit) estimates the infinite-
    temperature OTOC Tr[M W M W^dag]/2^n: the measured qubit starts in a
    random +-X eigenstate (sign folded into the estimator (so the readout
    confusion offset cancels) and all others in random computational
    states.  observable = "bitstring" returns the noisy z-basis bit
    expectation of qubit 0.
    """
    if circuit.n_qubits > 16:
        raise ValueError("trajectory simulator capped at 16 qubits")
    n = circuit.n_qubits
    kind, *args = (observable if isinstance(observable, tuple) else (observable,))
    vals = np.empty(n_traj)
    conf = noise.scaled_confusion()
    # deterministic per-(seed, trajectory) streams
    for j in range(n_traj):
        rng = np.random.Generator(np.random.Philox(key=(seed << 32) + j))
        if kind == "otoc_sandwich":
            m_qubit = args[0]
            bits = rng.integers(0, 2, size=n)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            idx = 0
            for q in range(n):
                if q != m_qubit and bits[q]:
                    idx |= 1 << (n - 1 - q)
            mbit = 1 << (n - 1 - m_qubit)
            state = np.zeros(2**n, dtype=complex)
            state[idx] = 1.0 / np.sqrt(2.0)
            state[idx | mbit] = sign / np.sqrt(2.0)
            run_noisy_trajectory(circuit, noise, state, rng)
            x = _x_expectation(state, m_qubit, n)
            e0, e1 = conf[0, 1], conf[1, 0]
            vals[j] = sign * ((1.0 - e0 - e1) * x + (e1 - e0))
        elif kind == "bitstring":
            state = np.zeros(2**n, dtype=complex)
            state[0] = 1.0
            run_noisy_trajectory(circuit, noise, state, rng)
            v = np.abs(state.reshape((2,) * n)) ** 2
            p1 = v.sum(axis=tuple(range(1, n)))[1] if n > 1 else v[1]
            e0, e1 = conf[0, 1], conf[1, 0]
            p1_noisy = p1 * (1 - e1) + (1 - p1) * e0
            vals[j] = float(rng.random() < p1_noisy)
        else:
            raise ValueError(f"unknown observable {observable!r}")
    return TrajectoryResult(
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0,
        n_trajectories=n_traj,
        seed=seed,
        values=vals if keep_values else None,
    )


def sensitivity_map(
    circuit: Circuit, m_qubit: int, butterfly_qubits=(), error_gate: str = "x"
) -> np.ndarray:
    """|OTOC(single error at (qubit, moment)) - OTOC(ideal)| map.

    Runs noiseless dense simulations with one Pauli error injected after
    each moment on each qubit; entry (q, k) quantifies how much that
    single fault moves the final OTOC.
    """
    from .circuits import circuit_unitary
    from .pauli import site_operator

    n = circuit.n_qubits
    if n > 10:
        raise ValueError("sensitivity map requires dense-simulable sizes")
    dim = 2**n
    w = circuit_unitary(circuit)
    mx = site_operator(_SIGMA["x"] / 1.0, m_qubit, n)

    def otoc(wmat):
        mt = wmat.conj().T @ mx @ wmat
        return np.real(np.trace(mt @ mx @ mt @ mx)) / dim

    # running prefix unitaries
    ideal = otoc(w)
    err_op = {"x": _SIGMA["x"], "y": _SIGMA["y"], "z": _SIGMA["z"]}[error_gate]
    out = np.zeros((n, len(circuit.moments)))
    u_pre = np.eye(dim, dtype=complex)
    for k, moment in enumerate(circuit.moments):
        for g in moment:
            gm = np.eye(dim, dtype=complex)
            from .circuits import apply_gate
            apply_gate(gm, g, n)
            u_pre = gm @ u_pre
        for q in range(n):
            inj = site_operator(err_op, q, n)
            w_err = w @ u_pre.conj().T @ inj @ u_pre
            out[q, k] = abs(otoc(w_err) - ideal)
    return out
