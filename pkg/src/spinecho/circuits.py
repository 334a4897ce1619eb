"""Swap-network compilation of double-quantum Hamiltonians.

Circuits are ordered moments of gates with a spin-to-qubit permutation
track recorded at every moment boundary.  Angle-carrying gate names
("fsim", "rz", "rx", "ry", "zz", "xx_minus_yy", "xy_plus_yx") hold radian
parameters; structural gates ("cz", "x", "z", "h", "s", "swap",
"pauli") carry none (the Pauli insertion indexes its operator).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .hamiltonian import EffectiveHamiltonian, PAULI
from .weyl import cz_equivalents

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = (_X + _Z) / np.sqrt(2.0)
_S = np.diag([1, 1j]).astype(complex)
_I = np.eye(2, dtype=complex)
_PAULI_1Q = {1: _X, 2: _Y, 3: _Z}

ANGLE_GATES = ("fsim", "rz", "rx", "ry", "zz", "xx_minus_yy", "xy_plus_yx")
STRUCT_1Q = {"x": _X, "y": _Y, "z": _Z, "h": _H, "s": _S, "sdg": _S.conj()}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def dagger(self) -> "Gate":
        if self.name in ANGLE_GATES:
            return Gate(self.name, self.qubits, tuple(-p for p in self.params))
        if self.name == "s":
            return Gate("sdg", self.qubits)
        if self.name == "sdg":
            return Gate("s", self.qubits)
        return self  # x, y, z, h, cz, swap, pauli are self-inverse


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[1, 1] = m[2, 2] = np.cos(theta)
    m[1, 2] = m[2, 1] = -1j * np.sin(theta)
    m[3, 3] = np.exp(1j * phi)
    return m


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of a gate on its own qubits (ascending order for 2q gates)."""
    n = g.name
    if n in STRUCT_1Q:
        return STRUCT_1Q[n]
    if n == "pauli":
        return _PAULI_1Q[int(g.params[0])]
    if n == "rz":
        t = g.params[0]
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    if n == "rx":
        t = g.params[0]
        return np.cos(t / 2) * _I - 1j * np.sin(t / 2) * _X
    if n == "ry":
        t = g.params[0]
        return np.cos(t / 2) * _I - 1j * np.sin(t / 2) * _Y
    if n == "cz":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if n == "swap":
        m = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
        return m
    if n == "fsim":
        return fsim_matrix(*g.params)
    if n == "zz":
        a = g.params[0]
        return np.diag(np.exp(-1j * a * np.array([1.0, -1.0, -1.0, 1.0])))
    if n == "xx_minus_yy":
        a = g.params[0]
        m = np.eye(4, dtype=complex)
        m[0, 0] = m[3, 3] = np.cos(2 * a)
        m[0, 3] = m[3, 0] = -1j * np.sin(2 * a)
        return m
    if n == "xy_plus_yx":
        a = g.params[0]
        m = np.eye(4, dtype=complex)
        m[0, 0] = m[3, 3] = np.cos(2 * a)
        m[0, 3] = -np.sin(2 * a)
        m[3, 0] = np.sin(2 * a)
        return m
    raise ValueError(f"unknown gate {g.name!r}")


@dataclass
class Circuit:
    n_qubits: int
    moments: list[list[Gate]] = field(default_factory=list)
    permutation_track: list[tuple[int, ...]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.permutation_track:
            self.permutation_track = [tuple(range(self.n_qubits))] * (
                len(self.moments) + 1
            )
        self.validate()

    def validate(self):
        if len(self.permutation_track) != len(self.moments) + 1:
            raise ValueError("permutation track must have len(moments) + 1 entries")
        for perm in self.permutation_track:
            if sorted(perm) != list(range(self.n_qubits)):
                raise ValueError("permutation track entries must be bijections")
        for mom in self.moments:
            seen: set[int] = set()
            for g in mom:
                if seen.intersection(g.qubits):
                    raise ValueError("gates within a moment must be disjoint")
                seen.update(g.qubits)

    def append_moment(self, gates: list[Gate], perm: tuple[int, ...] | None = None):
        self.moments.append(list(gates))
        self.permutation_track.append(
            perm if perm is not None else self.permutation_track[-1]
        )

    @property
    def n_two_qubit_gates(self) -> int:
        return sum(1 for m in self.moments for g in m if len(g.qubits) == 2)

    def dagger(self) -> "Circuit":
        moms = [[g.dagger() for g in m] for m in reversed(self.moments)]
        track = list(reversed(self.permutation_track))
        return Circuit(self.n_qubits, moms, track, dict(self.metadata))


def apply_gate(state: np.ndarray, g: Gate, n: int) -> None:
    from .statevec import apply_one_site, apply_two_site

    m = gate_matrix(g)
    if len(g.qubits) == 1:
        apply_one_site(state, m, g.qubits[0], n)
    else:
        apply_two_site(state, m, g.qubits[0], g.qubits[1], n)


def apply_circuit(state: np.ndarray, c: Circuit) -> None:
    for mom in c.moments:
        for g in mom:
            apply_gate(state, g, c.n_qubits)


def circuit_unitary(c: Circuit) -> np.ndarray:
    u = np.eye(2**c.n_qubits, dtype=complex)
    apply_circuit(u, c)
    return u


# ---------------------------------------------------------------------------
# composite fSim mapping

@dataclass(frozen=True)
class CompositeGateParams:
    """Canonical angles of one interaction-plus-swap composite gate."""

    theta_comp: float
    phi_comp: float
    single_qubit_phase: float = 0.0
    z_conjugated: bool = False

    def __post_init__(self):
        if not (-1e-12 <= self.theta_comp <= np.pi + 1e-12):
            raise ValueError("theta_comp must lie in [0, pi]")

    def to_unitary(self) -> np.ndarray:
        u = fsim_matrix(self.theta_comp, self.phi_comp)
        if self.z_conjugated:
            zi = np.kron(_Z, _I)
            u = zi @ u @ zi
        return np.exp(1j * self.single_qubit_phase) * u

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "CompositeGateParams":
        psi = float(np.angle(u[0, 0]))
        core = u * np.exp(-1j * psi)
        sin_t = core[1, 2] / (-1j)
        z_conj = bool(np.real(sin_t) < 0)
        theta = float(np.arctan2(abs(np.real(sin_t)), np.real(core[1, 1])))
        phi = float(np.angle(core[3, 3]))
        return cls(theta, phi, psi, z_conj)


def composite_fsim_params(dxy: float, dzz: float, dt: float) -> CompositeGateParams:
    """Angles of the composite gate realizing SWAP x exp(-i dt (dxy (XX-YY) + dzz ZZ)).

    dxy and dzz are rad/s coefficients on the Pauli products XX - YY and
    ZZ.  theta_comp = pi/2 + 2 dxy dt; the conditional phase in the
    e^{+i phi} fSim convention is phi_comp = -pi + 4 dzz dt (the published
    form quotes the opposite phi sign convention).  Out-of-range swap
    angles are folded into [0, pi] with a recorded Z conjugation.
    """
    if not (np.isfinite(dxy) and np.isfinite(dzz) and np.isfinite(dt)):
        raise ValueError("inputs must be finite")
    theta = np.pi / 2.0 + 2.0 * dxy * dt
    phi = -np.pi + 4.0 * dzz * dt
    theta = np.mod(theta, 2.0 * np.pi)
    z_conj = False
    if theta > np.pi:
        theta = 2.0 * np.pi - theta
        z_conj = True
    return CompositeGateParams(float(theta), float(np.mod(phi + np.pi, 2 * np.pi) - np.pi),
                               0.0, z_conj)


def _solve_block_phases(dxy: float, dzz: float, dt: float):
    """Z-phases completing X_i fsim X_j into the exact composite target."""
    a = dxy * dt
    b = dzz * dt
    # from the analytic element-matching (00,11 block and 01/10 элементы):
    g = np.pi / 2.0 - b
    rho1 = 0.0
    rho2 = 0.0
    k2 = 2.0 * b - np.pi / 2.0 - rho1
    k1 = -k2
    return g, (rho1, rho2), (k1, k2)


def swap_dq_target(dxy: float, dzz: float, dt: float) -> np.ndarray:
    """SWAP x exp(-i dt (dxy (XX-YY) + dzz ZZ)) on an ascending qubit pair."""
    a = dxy * dt
    b = dzz * dt
    c, s = np.cos(2 * a), np.sin(2 * a)
    em, ep = np.exp(-1j * b), np.exp(1j * b)
    return np.array([
        [c * em, 0, 0, -1j * s * em],
        [0, 0, ep, 0],
        [0, ep, 0, 0],
        [-1j * s * em, 0, 0, c * em],
    ])


def composite_block_moments(
    qa: int, qb: int, dxy: float, dzz: float, dt: float, collective_z: float = 0.0
) -> list[list[Gate]]:
    """Gate moments realizing the composite on qubits (qa, qb), qa < qb.

    Implements SWAP x exp(-i dt (dxy (XX-YY) + dzz ZZ)) exactly up to a
    global phase via z-phases + X sandwich + one fSim gate.  A nonzero
    collective_z conjugates the block by a collective z rotation, which
    changes the double-quantum content to the rotated frame (used to
    realize XY + YX couplings with the same machinery).
    """
    b = dzz * dt
    k1 = np.pi / 2.0 - 2.0 * b
    k2 = -k1
    r1 = r2 = 0.0
    pre = [Gate("rz", (qa,), (k1 + collective_z,)),
           Gate("rz", (qb,), (k2 + collective_z,))]
    post = [Gate("rz", (qa,), (r1 - collective_z,)),
            Gate("rz", (qb,), (r2 - collective_z,))]
    pre = [g for g in pre if g.params[0] != 0.0]
    post = [g for g in post if g.params[0] != 0.0]
    moments = []
    if pre:
        moments.append(pre)
    moments += [
        [Gate("x", (qb,))],
        [Gate("fsim", (qa, qb), (np.pi / 2.0 + 2.0 * dxy * dt,
                                 -np.pi + 4.0 * dzz * dt))],
        [Gate("x", (qa,))],
    ]
    if post:
        moments.append(post)
    return moments


# canonical-gate CZ decomposition: three CZ plus fixed Clifford corner
# locals of the three-CNOT template (derived constructively, verified in tests)
def canonical_gate_moments(
    qa: int, qb: int, a: float, b: float, c: float
) -> list[list[Gate]]:
    """Moments realizing exp(-i (a XX + b YY + c ZZ)) on (qa, qb) up to a
    global phase, using exactly three CZ gates plus single-qubit gates."""
    t1 = 2.0 * c - np.pi / 2.0
    t2 = np.pi / 2.0 - 2.0 * a
    t3 = 2.0 * b - np.pi / 2.0
    return [
        [Gate("s", (qa,))],
        [Gate("x", (qa,)), Gate("x", (qb,))],
        [Gate("h", (qa,))],
        [Gate("cz", (qa, qb))],
        [Gate("h", (qa,))],
        [Gate("ry", (qb,), (t3,))],
        [Gate("h", (qb,))],
        [Gate("cz", (qa, qb))],
        [Gate("h", (qb,))],
        [Gate("rz", (qa,), (t1,)), Gate("ry", (qb,), (t2,))],
        [Gate("h", (qa,))],
        [Gate("cz", (qa, qb))],
        [Gate("h", (qa,))],
        [Gate("s", (qb,))],
        [Gate("x", (qa,)), Gate("x", (qb,))],
    ]


def pair_block_moments(
    qa: int, qb: int, dxy: float, dzz: float, dt: float,
    collective_z: float, gateset: str,
) -> list[list[Gate]]:
    if gateset == "fsim":
        return composite_block_moments(qa, qb, dxy, dzz, dt, collective_z)
    alpha = np.pi / 4.0 + dxy * dt
    beta = np.pi / 4.0 - dxy * dt
    gamma = np.pi / 4.0 + dzz * dt
    moments = canonical_gate_moments(qa, qb, alpha, beta, gamma)
    if collective_z != 0.0:
        moments = (
            [[Gate("rz", (qa,), (collective_z,)), Gate("rz", (qb,), (collective_z,))]]
            + moments
            + [[Gate("rz", (qa,), (-collective_z,)), Gate("rz", (qb,), (-collective_z,))]]
        )
    return moments


def dq_pair_tables(h: EffectiveHamiltonian):
    """Per-pair (dxy, dzz, collective_z) Pauli coefficients of a DQ Hamiltonian.

    dxy multiplies the double-quantum content ((XX - YY) in a frame rotated
    about z by collective_z); TARDIS-1-type (XY + YX) terms map onto
    collective_z = -pi/4.
    """
    hp = h.to_convention(PAULI)
    dxy: dict[tuple[int, int], float] = {}
    dzz: dict[tuple[int, int], float] = {}
    czs: dict[tuple[int, int], float] = {}
    onsite: dict[int, float] = {}
    for t in hp.one_body:
        if t.axis != "z":
            raise ValueError("swap-network compilation supports z one-body terms only")
        onsite[t.site] = onsite.get(t.site, 0.0) + t.coefficient
    for t in hp.two_body:
        if t.form == "ZZ":
            dzz[t.pair] = dzz.get(t.pair, 0.0) + t.coefficient
        elif t.form == "XX_minus_YY":
            dxy[t.pair] = dxy.get(t.pair, 0.0) + t.coefficient
            czs.setdefault(t.pair, 0.0)
        elif t.form == "XY_plus_YX":
            dxy[t.pair] = dxy.get(t.pair, 0.0) + t.coefficient
            czs[t.pair] = -np.pi / 4.0
        else:
            raise ValueError(
                f"unsupported two-body form {t.form!r} for swap-network compilation"
            )
    return dxy, dzz, czs, onsite


class ExtractionError(ValueError):
    pass


def _merge_blocks(circ: Circuit, blocks: list[list[list[Gate]]],
                  final_perm: tuple[int, ...]):
    """Append parallel pair blocks (disjoint qubits) as shared moments."""
    depth = max(len(b) for b in blocks)
    for k in range(depth):
        gates = [g for b in blocks if k < len(b) for g in b[k]]
        if gates:
            circ.append_moment(gates)
    circ.permutation_track[-1] = final_perm


def trotterize_swap_network(
    h: EffectiveHamiltonian,
    t: float,
    n_steps: int,
    extract_c13: bool = False,
    order: int = 1,
    gateset: str = "fsim",
    measurement_spin: int | None = None,
    extraction_ratio: float = 50.0,
) -> Circuit:
    """Compile exp(-i h t) into a brick-wall swap network of n_steps steps.

    A first-order step touches every unordered spin pair exactly once and
    reverses the spin order; a second-order step symmetrizes (two mirrored
    half steps) and restores it.  extract_c13 parks the measurement spin
    outside the proton network and applies its single strong coupling at
    both boundaries of every two-step period, each boundary compiled as an
    interaction-with-swap composite plus a restoring swap; it is legal
    only when that coupling dominates all the spin's others by
    extraction_ratio.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if gateset not in ("fsim", "cz"):
        raise ValueError("gateset must be 'fsim' or 'cz'")
    if t <= 0 or n_steps < 1:
        raise ValueError("t and n_steps must be positive")
    n = h.n
    dxy, dzz, czs, onsite = dq_pair_tables(h)

    def pair_coefs(i, j):
        p = (i, j) if i < j else (j, i)
        return dxy.get(p, 0.0), dzz.get(p, 0.0), czs.get(p, 0.0)

    dt = t / n_steps
    circ = Circuit(n, [], [tuple(range(n))])

    extracted = None
    if extract_c13:
        if measurement_spin is None:
            measurement_spin = n - 1
        def strength(j):
            p = tuple(sorted((measurement_spin, j)))
            return abs(dxy.get(p, 0.0)) + abs(dzz.get(p, 0.0))
        ranked = sorted((j for j in range(n) if j != measurement_spin),
                        key=strength, reverse=True)
        if len(ranked) > 1 and strength(ranked[1]) > 0 and (
            strength(ranked[0]) / strength(ranked[1]) < extraction_ratio
        ):
            raise ExtractionError(
                "measurement spin coupling ratio "
                f"{strength(ranked[0]) / strength(ranked[1]):.1f} "
                f"below {extraction_ratio}"
            )
        extracted = (measurement_spin, ranked[0])

    def perm_of(spins):
        track = [0] * n
        for q, s in enumerate(spins):
            track[s] = q
        return tuple(track)

    def onsite_moment(spins, step_dt):
        gates = []
        for spin, w in onsite.items():
            q = spins.index(spin)
            gates.append(Gate("rz", (q,), (w * step_dt,)))
        if gates:
            circ.append_moment(gates)

    if not extract_c13:
        spins = list(range(n))

        def network_step(step_dt, mirror=False):
            nonlocal spins
            for ell in (reversed(range(n)) if mirror else range(n)):
                start = ell % 2
                blocks = []
                newperm = spins.copy()
                for qa in range(start, n - 1, 2):
                    qb = qa + 1
                    cfs = pair_coefs(spins[qa], spins[qb])
                    blocks.append(pair_block_moments(
                        qa, qb, cfs[0], cfs[1], step_dt, cfs[2], gateset))
                    newperm[qa], newperm[qb] = spins[qb], spins[qa]
                spins = newperm
                if blocks:
                    _merge_blocks(circ, blocks, perm_of(spins))

        for _ in range(n_steps):
            if onsite:
                onsite_moment(spins, dt if order == 1 else dt / 2.0)
            if order == 1:
                network_step(dt)
            else:
                network_step(dt / 2.0)
                network_step(dt / 2.0, mirror=True)
                if onsite:
                    onsite_moment(spins, dt / 2.0)
    else:
        c_spin, partner = extracted
        if n_steps % 2:
            raise ExtractionError("extraction requires an even number of steps")
        cpair = tuple(sorted((c_spin, partner)))
        if abs(dxy.get(cpair, 0.0)) > 1e-12 * max(abs(dzz.get(cpair, 0.0)), 1.0):
            raise ExtractionError("extracted coupling must be ZZ-type")
        z_c = dzz.get(cpair, 0.0)
        protons = [s for s in range(n) if s != c_spin]
        rest = [s for s in protons if s != partner]
        spins = [c_spin, partner] + rest
        m = len(protons)

        def ch_boundary(step_dt):
            for mom in composite_block_moments(0, 1, 0.0, z_c, step_dt, 0.0):
                circ.append_moment(mom)
            circ.append_moment([Gate("swap", (0, 1))])
            circ.permutation_track[-1] = perm_of(spins)

        def proton_step(step_dt):
            nonlocal spins
            for ell in range(m):
                start = 1 + (ell % 2)
                blocks = []
                newperm = spins.copy()
                for qa in range(start, n - 1, 2):
                    qb = qa + 1
                    cfs = pair_coefs(spins[qa], spins[qb])
                    blocks.append(pair_block_moments(
                        qa, qb, cfs[0], cfs[1], step_dt, cfs[2], gateset))
                    newperm[qa], newperm[qb] = spins[qb], spins[qa]
                spins = newperm
                if blocks:
                    _merge_blocks(circ, blocks, perm_of(spins))

        for _period in range(n_steps // 2):
            ch_boundary(dt)
            for _step in range(2):
                if onsite:
                    onsite_moment(spins, dt)
                proton_step(dt)
            ch_boundary(dt)

    circ.metadata.update({
        "t": t, "n_steps": n_steps, "order": order, "gateset": gateset,
        "extract_c13": bool(extract_c13),
    })
    circ.validate()
    return circ


def otoc_sandwich_circuit(
    forward: Circuit, butterfly_gates: list[Gate]
) -> Circuit:
    """Forward circuit + butterfly moment + exact backward circuit."""
    back = forward.dagger()
    c = Circuit(forward.n_qubits, [list(m) for m in forward.moments],
                list(forward.permutation_track), dict(forward.metadata))
    c.append_moment(list(butterfly_gates))
    for mom, perm in zip(back.moments, back.permutation_track[1:]):
        c.moments.append(list(mom))
        c.permutation_track.append(perm)
    c.metadata["sandwich"] = {
        "forward_moments": len(forward.moments),
        "butterfly_moment": len(forward.moments),
    }
    c.validate()
    return c


def lightcone_prune(
    c: Circuit, m_qubit: int, butterfly_qubits: tuple[int, ...] = ()
) -> Circuit:
    """Drop gates outside the double-sided light cone of the OTOC.

    A gate survives only if it connects forward to the measurement-operator
    insertion at the end of the circuit and backward to the one at the
    start; gates failing either test commute out and cancel against the
    mirror copy, so the OTOC value is preserved exactly.  (Gates outside
    the butterfly cones are subsumed: if the butterfly decouples from the
    kept cone the pruned circuit evaluates to the same trivial echo.)
    """
    if "sandwich" not in c.metadata:
        raise ValueError("circuit lacks the OTOC sandwich structure")
    flat = [(k, g) for k, mom in enumerate(c.moments) for g in mom]
    keep_fwd = [False] * len(flat)
    support = {m_qubit}
    for idx in range(len(flat) - 1, -1, -1):
        g = flat[idx][1]
        if support.intersection(g.qubits):
            keep_fwd[idx] = True
            support.update(g.qubits)
    keep_bwd = [False] * len(flat)
    support = {m_qubit}
    for idx in range(len(flat)):
        g = flat[idx][1]
        if support.intersection(g.qubits):
            keep_bwd[idx] = True
            support.update(g.qubits)
    kept: list[list[Gate]] = [[] for _ in c.moments]
    for keep1, keep2, (k, g) in zip(keep_fwd, keep_bwd, flat):
        if keep1 and keep2:
            kept[k].append(g)
    return Circuit(c.n_qubits, kept, list(c.permutation_track), dict(c.metadata))


def gate_count(c: Circuit) -> dict:
    """Native gate counts plus Weyl-class CZ equivalents."""
    n_fsim = 0
    n_cz_equiv = 0
    for mom in c.moments:
        for g in mom:
            if len(g.qubits) == 2:
                if g.name == "fsim":
                    n_fsim += 1
                n_cz_equiv += cz_equivalents(gate_matrix(g))
    return {
        "fsim": n_fsim,
        "two_qubit": c.n_two_qubit_gates,
        "cz_equivalent": n_cz_equiv,
        "moments": len(c.moments),
    }


def truncate_angles(c: Circuit, fractional_bits: int) -> Circuit:
    """Round every rotation angle to the nearest multiple of 2**-bits."""
    if fractional_bits < 1:
        raise ValueError("fractional_bits must be >= 1")
    scale = 2.0**fractional_bits
    moms = []
    for mom in c.moments:
        out = []
        for g in mom:
            if g.name in ANGLE_GATES:
                out.append(Gate(g.name, g.qubits,
                                tuple(np.round(p * scale) / scale for p in g.params)))
            else:
                out.append(g)
        moms.append(out)
    return Circuit(c.n_qubits, moms, list(c.permutation_track), dict(c.metadata))
