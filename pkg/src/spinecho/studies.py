"""Trotterization cost and error-metric studies on dipolar spin systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CouplingSet, time_of_flight
from .hamiltonian import dq_hamiltonian, TARDIS2
from .otoc import ButterflySpec, butterfly_unitary
from .pauli import SIGMA, effective_to_terms, site_operator
from .statevec import TermEvolution, apply_one_site, random_states

_X_AXIS = np.array([1.0, 0.0, 0.0])


@dataclass
class ConvergenceRecord:
    """Outcome of the add-spin / double-steps protocol for one spin pair."""

    pair: tuple[int, int]
    n_spins: int
    k_steps: int
    otoc: float
    time: float
    converged: bool


def _sub_couplings(couplings: CouplingSet, active: list[int]) -> CouplingSet:
    idx = np.asarray(active)
    return CouplingSet(
        species=tuple(couplings.species[i] for i in active),
        shifts=couplings.shifts[idx],
        d=couplings.d[np.ix_(idx, idx)],
        j=couplings.j[np.ix_(idx, idx)],
    )


class _TrotterOtoc:
    """First-order-Trotter OTOC of a homonuclear DQ system."""

    def __init__(self, couplings: CouplingSet, m_local: int, b_local: int,
                 rng: np.random.Generator, stderr_target: float = 0.004):
        self.n = couplings.n
        h = dq_hamiltonian(couplings, TARDIS2)
        self.evolver = TermEvolution(effective_to_terms(h), self.n)
        self.m = m_local
        self.butterfly = ButterflySpec((b_local,), _X_AXIS, np.pi)
        self.rng = rng
        self.stderr_target = stderr_target

    def value(self, t: float, k: int) -> float:
        if self.n <= 8:
            u = self.evolver.unitary(t, k, order=1)
            mx = site_operator(SIGMA["x"], self.m, self.n)
            b = butterfly_unitary(self.butterfly, self.n)
            mt = u.conj().T @ mx @ u
            return float(np.real(np.trace(mt @ b @ mt @ b.conj().T)) / 2**self.n)
        total = []
        bx = self.butterfly.single_spin_unitary()
        batch = 64
        while True:
            states = random_states(self.n, batch, self.rng)

            def m_t(v):
                self.evolver.evolve(v, t, k, order=1)
                apply_one_site(v, SIGMA["x"], self.m, self.n)
                self.evolver.evolve(v, -t, k, order=1)

            right = states.copy()
            apply_one_site(right, bx.conj().T, self.butterfly.target_spins[0], self.n)
            m_t(right)
            apply_one_site(right, bx, self.butterfly.target_spins[0], self.n)
            m_t(right)
            total.extend(np.real(np.einsum("ib,ib->b", states.conj(), right)))
            arr = np.asarray(total)
            if arr.std(ddof=1) / np.sqrt(len(arr)) < self.stderr_target:
                return float(arr.mean())
            if len(arr) >= 4096:
                return float(arr.mean())


def _converge_steps(otoc: _TrotterOtoc, t: float, tol: float,
                    k_cap: int) -> tuple[int, float, bool]:
    k = 1
    c_k = otoc.value(t, k)
    while k <= k_cap:
        c_2k = otoc.value(t, 2 * k)
        if abs(c_k - c_2k) < tol:
            return k, c_2k, True
        k *= 2
        c_k = c_2k
    return k, c_k, False


def trotter_convergence_study(
    couplings: CouplingSet,
    pairs: list[tuple[int, int]],
    tol_otoc: float = 0.02,
    seed: int = 0,
    n_cap: int = 16,
    k_cap: int = 512,
    window: tuple[float, float] = (0.4, 0.5),
) -> list[ConvergenceRecord]:
    """Converged (N, K) per measurement/butterfly pair.

    Spectator spins are added in time-of-flight order (shortest classical
    information path first); for each active set the Trotter step count is
    doubled until successive step counts agree to tol_otoc, and the run
    converges when adding a spin no longer moves the OTOC.  The target
    time is adjusted to keep the converged OTOC just below the window
    top; runs ending below the window bottom are flagged unconverged.
    """
    out = []
    rng_root = np.random.default_rng(seed)
    for pair in pairs:
        m, b = pair
        rng = np.random.default_rng(rng_root.integers(2**63))
        tof = time_of_flight(couplings, m, b)
        order = [j for j, _ in tof]
        order.remove(m)
        order.remove(b)
        order = [m, b] + order
        # initial time from the two-spin problem: first crossing below the window top
        sub = _sub_couplings(couplings, [m, b])
        two = _TrotterOtoc(sub, 0, 1, rng)
        scale = max(abs(sub.d[0, 1]), 1e-6)
        t = 0.05 / scale
        for _ in range(60):
            if two.value(t, 64) < window[1]:
                break
            t *= 1.25
        prev = None
        record = None
        for n_active in range(2, min(n_cap, len(order)) + 1):
            active = order[:n_active]
            sub = _sub_couplings(couplings, active)
            otoc = _TrotterOtoc(sub, active.index(m), active.index(b), rng)
            k, c, ok = _converge_steps(otoc, t, tol_otoc, k_cap)
            if not ok:
                record = ConvergenceRecord(pair, n_active, k, c, t, False)
                break
            if prev is not None and abs(c - prev[2]) < tol_otoc:
                n_prev, k_prev, c_prev = prev
                converged = window[0] <= c_prev
                record = ConvergenceRecord(pair, n_prev, k_prev, c_prev, t,
                                           converged)
                break
            prev = (n_active, k, c)
            if c < window[0] + 0.02:
                t *= 0.8
                k, c, ok = _converge_steps(otoc, t, tol_otoc, k_cap)
                prev = (n_active, k, c) if ok else prev
        else:
            n_prev, k_prev, c_prev = prev
            record = ConvergenceRecord(pair, n_prev, k_prev, c_prev, t, False)
        out.append(record)
    return out


def trotter_metric_suite(
    h,
    t_list,
    candidates: dict,
    m_spin: int,
    butterfly: ButterflySpec,
) -> list[dict]:
    """OTOC error, unitary fidelity, and TOC errors per candidate and time.

    candidates maps a label to a list of approximate propagators (dense
    unitaries or Circuits), one per entry of t_list; errors are measured
    against the dense reference evolution of h.
    """
    from .circuits import Circuit, circuit_unitary
    from .pauli import effective_to_matrix, hermitian_gate

    n = h.n
    hmat = effective_to_matrix(h)
    mx = site_operator(SIGMA["x"], m_spin, n)
    bmat = butterfly_unitary(butterfly, n)
    dim = 2**n

    def otoc(u):
        mt = u.conj().T @ mx @ u
        return np.real(np.trace(mt @ bmat @ mt @ bmat.conj().T)) / dim

    def toc(u, op):
        ot = u.conj().T @ op @ u
        return np.real(np.trace(ot @ op)) / dim

    rows = []
    for label, mats in candidates.items():
        for t, cand in zip(t_list, mats):
            u = circuit_unitary(cand) if isinstance(cand, Circuit) else cand
            uref = hermitian_gate(hmat, t)
            rows.append({
                "candidate": label,
                "t": float(t),
                "otoc_error": abs(otoc(u) - otoc(uref)),
                "fidelity": abs(np.trace(u.conj().T @ uref)) / dim,
                "toc_error_m": abs(toc(u, mx) - toc(uref, mx)),
                "toc_error_b": abs(toc(u, bmat) - toc(uref, bmat)),
            })
    return rows
