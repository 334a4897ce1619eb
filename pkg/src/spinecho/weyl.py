"""Weyl-chamber coordinates and entangling-class counts for two-qubit gates."""

from __future__ import annotations

import numpy as np

# magic (Bell) basis change
_B = (1.0 / np.sqrt(2.0)) * np.array(
    [[1, 1j, 0, 0], [0, 0, 1j, 1], [0, 0, 1j, -1], [1, -1j, 0, 0]],
    dtype=complex,
)
_BD = _B.conj().T


def weyl_coordinates(u: np.ndarray) -> np.ndarray:
    """Weyl-chamber coordinates (c1, c2, c3) of a 4x4 unitary.

    Standard magic-basis construction: diagonalize Up^T Up for the
    det-normalized magic-basis image Up, combine the eigenphases, and fold
    the result into the chamber pi/4 >= c1 >= c2 >= |c3|.
    """
    pi2 = np.pi / 2.0
    pi4 = np.pi / 4.0
    u = np.asarray(u, dtype=complex)
    u = u / np.linalg.det(u) ** 0.25
    up = _BD @ u @ _B
    m2 = up.T @ up

    # diagonalize the complex symmetric M2 = P D P^T with real orthogonal P
    rng = np.random.default_rng(11)
    for _ in range(32):
        coeff = rng.normal(size=2)
        m2r = coeff[0] * m2.real + coeff[1] * m2.imag
        _, p = np.linalg.eigh(m2r)
        d = np.diag(p.T @ m2 @ p)
        if np.allclose(p @ np.diag(d) @ p.T, m2, rtol=1e-12, atol=1e-12):
            break
    else:
        raise np.linalg.LinAlgError("failed to diagonalize magic-basis Gram matrix")

    ev = -np.angle(d) / 2.0
    ev[3] = -ev[0] - ev[1] - ev[2]
    cs = np.mod((ev[:3] + ev[3]) / 2.0, 2.0 * np.pi)

    cstemp = np.mod(cs, pi2)
    np.minimum(cstemp, pi2 - cstemp, cstemp)
    order = np.argsort(cstemp)[[1, 2, 0]]
    cs = cs[order]

    if cs[0] > pi2:
        cs[0] -= 3.0 * pi2
    if cs[1] > pi2:
        cs[1] -= 3.0 * pi2
    conjs = 0
    if cs[0] > pi4:
        cs[0] = pi2 - cs[0]
        conjs += 1
    if cs[1] > pi4:
        cs[1] = pi2 - cs[1]
        conjs += 1
    if cs[2] > pi2:
        cs[2] -= 3.0 * pi2
    if conjs == 1:
        cs[2] = pi2 - cs[2]
    if cs[2] > pi4:
        cs[2] -= pi2

    return cs[[1, 0, 2]]


def cz_equivalents(u: np.ndarray, atol: float = 1e-8) -> int:
    """Entangling cost of a 4x4 unitary in CZ units.

    identity class -> 0, controlled-phase class -> 1, |c3| = 0 class -> 2,
    generic -> 3 (standard exact CNOT-count classification).
    """
    c1, c2, c3 = weyl_coordinates(u)
    if max(c1, c2, abs(c3)) < atol:
        return 0
    if c2 < atol and abs(c3) < atol:
        return 1
    if abs(c3) < atol:
        return 2
    return 3
