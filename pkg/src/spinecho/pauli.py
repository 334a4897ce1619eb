"""Spin-1/2 operator construction and term bookkeeping.

Site 0 is the most significant qubit: a basis index reads as the bit string
(site 0, site 1, ...).  Generators are expressed on spin-1/2 operators
I = sigma/2 with coefficients in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
SPIN = {k: 0.5 * v for k, v in SIGMA.items()}
ID2 = np.eye(2, dtype=complex)


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for o in ops:
        out = np.kron(out, o)
    return out


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return kron_all(*[op if k == site else ID2 for k in range(n)])


def pair_matrix(form: str) -> np.ndarray:
    """4x4 spin-1/2 generator of a two-body form on an ordered (i < j) pair."""
    def m(a, b):
        return np.kron(SPIN[a], SPIN[b])

    table = {
        "XX": m("x", "x"), "YY": m("y", "y"), "ZZ": m("z", "z"),
        "XY": m("x", "y"), "YX": m("y", "x"),
        "XZ": m("x", "z"), "ZX": m("z", "x"),
        "YZ": m("y", "z"), "ZY": m("z", "y"),
        "XX_minus_YY": m("x", "x") - m("y", "y"),
        "XY_plus_YX": m("x", "y") + m("y", "x"),
    }
    return table[form]


@dataclass
class Term:
    """Hermitian generator on one or two sites, coefficient folded in (rad/s)."""

    sites: tuple[int, ...]
    matrix: np.ndarray  # 2x2 or 4x4

    @property
    def is_diagonal(self) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.abs(off).max() < 1e-300 or np.abs(off).max() == 0.0)


def effective_to_terms(h) -> list[Term]:
    """Collapse an EffectiveHamiltonian into per-site(-pair) merged terms."""
    h = h.to_convention("spin_half_operators")
    singles: dict[int, np.ndarray] = {}
    pairs: dict[tuple[int, int], np.ndarray] = {}
    for t in h.one_body:
        singles.setdefault(t.site, np.zeros((2, 2), complex))
        singles[t.site] = singles[t.site] + t.coefficient * SPIN[t.axis]
    for t in h.two_body:
        pairs.setdefault(t.pair, np.zeros((4, 4), complex))
        pairs[t.pair] = pairs[t.pair] + t.coefficient * pair_matrix(t.form)
    terms = [Term((s,), m) for s, m in sorted(singles.items())]
    terms += [Term(p, m) for p, m in sorted(pairs.items())]
    return terms


def effective_to_matrix(h) -> np.ndarray:
    """Dense Hermitian matrix of an EffectiveHamiltonian (rad/s)."""
    n = h.n
    out = np.zeros((2**n, 2**n), dtype=complex)
    for t in effective_to_terms(h):
        out += embed(t.matrix, t.sites, n)
    return out


def embed(m: np.ndarray, sites: tuple[int, ...], n: int) -> np.ndarray:
    """Embed a 2^k x 2^k operator on the given (ascending) sites into n spins."""
    if len(sites) == 1:
        return site_operator(m, sites[0], n)
    if len(sites) == 2:
        i, j = sites
        if i > j:
            raise ValueError("sites must be ascending")
        dim = 2**n
        out = np.zeros((dim, dim), dtype=complex)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        basis = np.zeros((2, 2), complex)
                        basis[a, c] = 1.0
                        basis2 = np.zeros((2, 2), complex)
                        basis2[b, d] = 1.0
                        coef = m[2 * a + b, 2 * c + d]
                        if coef != 0.0:
                            ops = [ID2] * n
                            ops[i] = basis
                            ops[j] = basis2
                            out += coef * kron_all(*ops)
        return out
    raise ValueError("only 1- and 2-site embeddings supported")


def term_partitions(terms: list[Term]) -> list[list[Term]]:
    """Group terms into mutually commuting partitions.

    The diagonal terms form one partition; the rest are greedily matched
    onto layers of disjoint supports.  Partitions are ordered by descending
    maximum coefficient magnitude so the strongest couplings come first.
    """
    diag = [t for t in terms if t.is_diagonal]
    rest = [t for t in terms if not t.is_diagonal]
    layers: list[list[Term]] = []
    used: list[set[int]] = []
    for t in sorted(rest, key=lambda t: -np.abs(t.matrix).max()):
        placed = False
        for layer, supp in zip(layers, used):
            if not supp.intersection(t.sites):
                layer.append(t)
                supp.update(t.sites)
                placed = True
                break
        if not placed:
            layers.append([t])
            used.append(set(t.sites))
    parts = ([diag] if diag else []) + layers
    parts.sort(key=lambda layer: -max(np.abs(t.matrix).max() for t in layer))
    return parts


def hermitian_gate(m: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i m dt) of a small Hermitian matrix."""
    w, v = np.linalg.eigh(m)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def pauli_string_weight(sites: tuple[int, ...]) -> int:
    return len(sites)


def decompose_two_local(matrix: np.ndarray, n: int):
    """Project a dense Hermitian matrix onto 1- and 2-body spin terms.

    Returns (one_body, two_body, residual_fro) where the lists hold
    (site, axis, coeff) and ((i, j), form_pair, coeff) entries on spin-1/2
    operators and residual_fro is the Frobenius norm of what the projection
    missed (identity component excluded).
    """
    dim = 2**n
    axes = ("x", "y", "z")
    one = []
    two = []
    captured = np.zeros_like(matrix)
    for i in range(n):
        for a in axes:
            op = site_operator(SPIN[a], i, n)
            c = np.real(np.trace(op.conj().T @ matrix)) / (dim / 4.0)
            if abs(c) > 1e-12:
                one.append((i, a, c))
                captured += c * op
    for i in range(n):
        for j in range(i + 1, n):
            for a in axes:
                for b in axes:
                    op = embed(np.kron(SPIN[a], SPIN[b]), (i, j), n)
                    c = np.real(np.trace(op.conj().T @ matrix)) / (dim / 16.0)
                    if abs(c) > 1e-12:
                        two.append(((i, j), a + b, c))
                        captured += c * op
    resid = matrix - captured
    resid = resid - np.trace(resid) / dim * np.eye(dim)
    return one, two, float(np.linalg.norm(resid))
