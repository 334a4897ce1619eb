"""State-vector kernels and product-formula evolution.

States are complex128 arrays of shape (2**n,) or (2**n, batch) with site 0
as the most significant bit.  The hot loops are numba kernels; everything
above them is plain numpy.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .pauli import Term, hermitian_gate, term_partitions


@njit(parallel=True, fastmath=True, cache=True)
def _apply2_batch(state, gate, p_hi, p_lo):
    dim, nb = state.shape
    bhi = 1 << p_hi
    blo = 1 << p_lo
    mlo = blo - 1
    g00 = gate[0]; g01 = gate[1]; g10 = gate[2]; g11 = gate[3]
    for t in prange(dim >> 2):
        # insert a zero bit at p_lo, then at p_hi
        u = ((t >> p_lo) << (p_lo + 1)) | (t & mlo)
        u = ((u >> p_hi) << (p_hi + 1)) | (u & (bhi - 1))
        i00 = u
        i01 = u | blo
        i10 = u | bhi
        i11 = u | bhi | blo
        for b in range(nb):
            a0 = state[i00, b]; a1 = state[i01, b]
            a2 = state[i10, b]; a3 = state[i11, b]
            state[i00, b] = g00[0]*a0 + g00[1]*a1 + g00[2]*a2 + g00[3]*a3
            state[i01, b] = g01[0]*a0 + g01[1]*a1 + g01[2]*a2 + g01[3]*a3
            state[i10, b] = g10[0]*a0 + g10[1]*a1 + g10[2]*a2 + g10[3]*a3
            state[i11, b] = g11[0]*a0 + g11[1]*a1 + g11[2]*a2 + g11[3]*a3


@njit(parallel=True, fastmath=True, cache=True)
def _apply1_batch(state, gate, p):
    dim, nb = state.shape
    bp = 1 << p
    g00 = gate[0, 0]; g01 = gate[0, 1]; g10 = gate[1, 0]; g11 = gate[1, 1]
    for t in prange(dim >> 1):
        u = ((t >> p) << (p + 1)) | (t & (bp - 1))
        i1 = u | bp
        for b in range(nb):
            a0 = state[u, b]; a1 = state[i1, b]
            state[u, b] = g00 * a0 + g01 * a1
            state[i1, b] = g10 * a0 + g11 * a1


def _as_batch(state: np.ndarray) -> tuple[np.ndarray, bool]:
    if state.ndim == 1:
        return state.reshape(-1, 1), True
    return state, False


def apply_two_site(state: np.ndarray, gate: np.ndarray, i: int, j: int, n: int) -> None:
    """In-place 4x4 gate on ascending sites (i, j); site 0 is the MSB."""
    if i > j:
        perm = [0, 2, 1, 3]
        gate = gate[np.ix_(perm, perm)]
        i, j = j, i
    sb, _ = _as_batch(state)
    _apply2_batch(sb, np.ascontiguousarray(gate, dtype=np.complex128),
                  n - 1 - i, n - 1 - j)


def apply_one_site(state: np.ndarray, gate: np.ndarray, i: int, n: int) -> None:
    sb, _ = _as_batch(state)
    _apply1_batch(sb, np.ascontiguousarray(gate, dtype=np.complex128), n - 1 - i)


def apply_diag(state: np.ndarray, phases: np.ndarray) -> None:
    if state.ndim == 1:
        state *= phases
    else:
        state *= phases[:, None]


def random_states(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k Haar-like normalized complex Gaussian states, shape (2**n, k)."""
    dim = 2**n
    psi = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    psi /= np.linalg.norm(psi, axis=0, keepdims=True)
    return psi


class TermEvolution:
    """Product-formula evolution of a sum of 1- and 2-site Hermitian terms.

    Terms are grouped into commuting partitions (one diagonal bundle plus
    disjoint-support layers); a second-order step applies the partitions in
    order at half weight and then in reverse, and the fourth-order step is
    the standard triple-jump composition of second-order steps.
    """

    _YOSHIDA = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))

    def __init__(self, terms: list[Term], n: int):
        self.n = n
        self.partitions = term_partitions(terms)
        self._diag_eigs: np.ndarray | None = None
        self._layers: list[list[Term]] = []
        for part in self.partitions:
            if len(part) >= 1 and all(t.is_diagonal for t in part):
                eig = np.zeros(2**n)
                for t in part:
                    eig = eig + self._diag_eigenvalues(t)
                if self._diag_eigs is None:
                    self._diag_eigs = eig
                else:
                    self._diag_eigs = self._diag_eigs + eig
            else:
                self._layers.append(part)
        self._gate_cache: dict[float, list] = {}

    def _diag_eigenvalues(self, t: Term) -> np.ndarray:
        diag = np.real(np.diag(t.matrix))
        n = self.n
        out = np.zeros(2**n)
        if len(t.sites) == 1:
            bit = 1 << (n - 1 - t.sites[0])
            idx = (np.arange(2**n) & bit) > 0
            out[~idx] = diag[0]
            out[idx] = diag[1]
        else:
            i, j = t.sites
            bi = 1 << (n - 1 - i)
            bj = 1 << (n - 1 - j)
            ar = np.arange(2**n)
            sub = 2 * ((ar & bi) > 0).astype(int) + ((ar & bj) > 0).astype(int)
            out = diag[sub]
        return out

    def _gates(self, dt: float) -> list:
        key = float(dt)
        if key not in self._gate_cache:
            gates = []
            if self._diag_eigs is not None:
                gates.append(("diag", np.exp(-1j * self._diag_eigs * dt)))
            for layer in self._layers:
                for t in layer:
                    gates.append((t.sites, hermitian_gate(t.matrix, dt)))
            self._gate_cache[key] = gates
        return self._gate_cache[key]

    def _sweep(self, state: np.ndarray, dt: float, reverse: bool) -> None:
        gates = self._gates(dt)
        order = reversed(gates) if reverse else gates
        for sites, g in order:
            if sites == "diag":
                apply_diag(state, g)
            elif len(sites) == 1:
                apply_one_site(state, g, sites[0], self.n)
            else:
                apply_two_site(state, g, sites[0], sites[1], self.n)

    def step2(self, state: np.ndarray, dt: float) -> None:
        """One second-order (Strang) step, in place."""
        self._sweep(state, dt / 2.0, reverse=False)
        self._sweep(state, dt / 2.0, reverse=True)

    def step1(self, state: np.ndarray, dt: float) -> None:
        """One first-order step, in place."""
        self._sweep(state, dt, reverse=False)

    def step4(self, state: np.ndarray, dt: float) -> None:
        """One fourth-order Yoshida step, in place."""
        w1 = self._YOSHIDA
        w0 = 1.0 - 2.0 * w1
        self.step2(state, w1 * dt)
        self.step2(state, w0 * dt)
        self.step2(state, w1 * dt)

    def evolve(self, state: np.ndarray, t: float, n_steps: int, order: int = 4) -> None:
        dt = t / n_steps
        step = {1: self.step1, 2: self.step2, 4: self.step4}[order]
        for _ in range(n_steps):
            step(state, dt)

    def unitary(self, t: float, n_steps: int, order: int = 4) -> np.ndarray:
        u = np.eye(2**self.n, dtype=complex)
        self.evolve(u, t, n_steps, order)
        return u
