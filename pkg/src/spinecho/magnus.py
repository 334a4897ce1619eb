"""Toggling-frame average Hamiltonians of cyclic pulse sequences.

The zeroth-order term is assembled exactly from scalar rotation integrals
(the toggling frame of a two-channel sequence factorizes into one SO(3)
rotation per channel), so it works at any spin count.  Orders one and two
evaluate the nested time-ordered integrals with dense matrices: per-segment
Gauss-Legendre nodes, spectrally accurate in-segment antiderivatives, and
streaming forward/backward passes for the triple integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CouplingSet
from .hamiltonian import EffectiveHamiltonian, OneBodyTerm, TwoBodyTerm, SPIN_HALF
from .pauli import SPIN, decompose_two_local, embed, site_operator
from .pulses import DENSE_SPIN_CAP, DenseCapError, PulseSequence, Segment

_LAM = np.diag([-1.0, -1.0, 2.0])
_GL_NODES = 16
_gx, _gw = np.polynomial.legendre.leggauss(_GL_NODES)
_GLX = (_gx + 1.0) / 2.0
_GLW = _gw / 2.0

# cumulative-integral operator on the GL nodes: (CUM @ f)(x_q) = int_0^{x_q} f
_P = np.polynomial.legendre.legvander(_gx, _GL_NODES - 1)      # P_k(x_q)
_VINV = np.linalg.inv(_P)
_CUM = np.zeros((_GL_NODES, _GL_NODES))
for _k in range(_GL_NODES):
    coef = np.zeros(_GL_NODES)
    coef[_k] = 1.0
    anti = np.polynomial.legendre.legint(coef, lbnd=-1.0)
    _CUM[:, _k] = np.polynomial.legendre.legval(_gx, anti) / 2.0
_CUM = _CUM @ _VINV      # maps node values -> cumulative integral (unit seg)
_FULL = np.zeros(_GL_NODES)
for _k in range(_GL_NODES):
    coef = np.zeros(_GL_NODES)
    coef[_k] = 1.0
    anti = np.polynomial.legendre.legint(coef, lbnd=-1.0)
    _FULL[_k] = np.polynomial.legendre.legval(1.0, anti) / 2.0
_FULL = _FULL @ _VINV    # node values -> full-segment integral
_RCUM = np.tile(_FULL, (_GL_NODES, 1)) - _CUM   # integral from node to segment end


def _axis_rotation(phase: float, theta: float) -> np.ndarray:
    """SO(3) conjugation matrix for exp(-i theta (n . I)), n in the xy plane."""
    n = np.array([np.cos(phase), -np.sin(phase), 0.0])
    k = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def _segment_rotations(seg: Segment, channel: str, fracs: np.ndarray):
    p = seg.proton if channel == "proton" else seg.carbon
    if p.amplitude == 0.0:
        eye = np.eye(3)
        return [eye] * len(fracs), eye
    thetas = p.amplitude * seg.duration * fracs
    return (
        [_axis_rotation(p.phase, t) for t in thetas],
        _axis_rotation(p.phase, p.amplitude * seg.duration),
    )


@dataclass
class MagnusResult:
    """Cumulative average Hamiltonian with its two-local projection."""

    hamiltonian: EffectiveHamiltonian
    order: int
    projection_residual: float
    decomposition_warning: bool
    dense: np.ndarray | None = None          # full cumulative H-bar, rad/s
    dense_orders: list[np.ndarray] | None = None


def _scalar_averages(seq: PulseSequence):
    """Time-averaged toggling coefficients over the cycle span.

    Returns (G, M, vH, vC) with G = <O_H^T Lam O_H> (homonuclear dipolar),
    M = <zrow(O_H) x zrow(O_C)> (heteronuclear ZZ), vH/vC = <zrow(O)>.
    """
    i0, i1 = seq.cycle_span
    oh = np.eye(3)
    oc = np.eye(3)
    # prologue rotations enter the frame exactly
    for seg in seq.segments[:i0]:
        _, step_h = _segment_rotations(seg, "proton", np.array([1.0]))
        _, step_c = _segment_rotations(seg, "carbon", np.array([1.0]))
        oh = step_h @ oh
        oc = step_c @ oc
    G = np.zeros((3, 3))
    M = np.zeros((3, 3))
    vh = np.zeros(3)
    vc = np.zeros(3)
    total = 0.0
    for seg in seq.segments[i0:i1]:
        rots_h, step_h = _segment_rotations(seg, "proton", _GLX)
        rots_c, step_c = _segment_rotations(seg, "carbon", _GLX)
        d = seg.duration
        for w, rh, rc in zip(_GLW, rots_h, rots_c):
            oht = rh @ oh
            oct_ = rc @ oc
            G += w * d * (oht.T @ _LAM @ oht)
            M += w * d * np.outer(oht[2], oct_[2])
            vh += w * d * oht[2]
            vc += w * d * oct_[2]
        oh = step_h @ oh
        oc = step_c @ oc
        total += d
    return G / total, M / total, vh / total, vc / total


_AXES = ("x", "y", "z")


def zeroth_order(seq: PulseSequence, couplings: CouplingSet) -> EffectiveHamiltonian:
    """Exact zeroth-order average Hamiltonian (any spin count)."""
    G, M, vh, vc = _scalar_averages(seq)
    twopi = 2.0 * np.pi
    protons = couplings.proton_indices()
    carbons = couplings.carbon_indices()
    tol = 1e-12
    one: list[OneBodyTerm] = []
    two: list[TwoBodyTerm] = []
    for i in protons:
        for a, ax in enumerate(_AXES):
            c = twopi * couplings.shifts[i] * vh[a]
            if abs(c) > tol * max(1.0, abs(twopi * couplings.shifts[i])):
                one.append(OneBodyTerm(i, ax, c))
    for c_idx in carbons:
        for a, ax in enumerate(_AXES):
            c = twopi * couplings.shifts[c_idx] * vc[a]
            if abs(c) > tol * max(1.0, abs(twopi * couplings.shifts[c_idx])):
                one.append(OneBodyTerm(c_idx, ax, c))
    for ii, i in enumerate(protons):
        for j in protons[ii + 1:]:
            d = couplings.d[i, j]
            jj = couplings.j[i, j]
            scale = max(abs(d), abs(jj), 1e-30) * twopi
            for a, ax_a in enumerate(_AXES):
                for b, ax_b in enumerate(_AXES):
                    c = twopi * d * G[a, b]
                    if a == b and jj != 0.0:
                        c += twopi * jj  # isotropic J survives unchanged
                    if abs(c) > 1e-12 * scale:
                        two.append(TwoBodyTerm((i, j), (ax_a + ax_b).upper(), c))
    for c_idx in carbons:
        for i in protons:
            eff = 2.0 * twopi * (couplings.d[i, c_idx] + 0.5 * couplings.j[i, c_idx])
            if eff == 0.0:
                continue
            for a, ax_a in enumerate(_AXES):
                for b, ax_b in enumerate(_AXES):
                    c = eff * M[a, b]
                    if abs(c) > 1e-12 * abs(eff):
                        if i < c_idx:
                            two.append(TwoBodyTerm((i, c_idx), (ax_a + ax_b).upper(), c))
                        else:
                            two.append(TwoBodyTerm((c_idx, i), (ax_b + ax_a).upper(), c))
    return _merge_terms(EffectiveHamiltonian(couplings.n, one, two, SPIN_HALF))


_COMBINE = {
    ("XX", "YY"): "XX_minus_YY",
    ("XY", "YX"): "XY_plus_YX",
}


def _merge_terms(h: EffectiveHamiltonian) -> EffectiveHamiltonian:
    """Fold +c XX / -c YY into XX_minus_YY and +c XY / +c YX into XY_plus_YX."""
    by_pair: dict = {}
    for t in h.two_body:
        by_pair.setdefault(t.pair, {})[t.form] = (
            by_pair.get(t.pair, {}).get(t.form, 0.0) + t.coefficient
        )
    two = []
    for pair, forms in sorted(by_pair.items()):
        xx, yy = forms.get("XX", 0.0), forms.get("YY", 0.0)
        if xx and yy and abs(xx + yy) < 1e-9 * max(abs(xx), abs(yy)):
            forms["XX_minus_YY"] = forms.get("XX_minus_YY", 0.0) + xx
            forms.pop("XX"), forms.pop("YY")
        xy, yx = forms.get("XY", 0.0), forms.get("YX", 0.0)
        if xy and yx and abs(xy - yx) < 1e-9 * max(abs(xy), abs(yx)):
            forms["XY_plus_YX"] = forms.get("XY_plus_YX", 0.0) + xy
            forms.pop("XY"), forms.pop("YX")
        for form, c in forms.items():
            if c != 0.0:
                two.append(TwoBodyTerm(pair, form, c))
    return EffectiveHamiltonian(h.n, list(h.one_body), two, h.convention)


class _TogglingFrame:
    """Dense toggling-frame Hamiltonian built from rotated coupling tensors."""

    def __init__(self, seq: PulseSequence, couplings: CouplingSet):
        n = couplings.n
        if n > DENSE_SPIN_CAP:
            raise DenseCapError(n)
        self.n = n
        self.seq = seq
        twopi = 2.0 * np.pi
        protons = couplings.proton_indices()
        carbons = couplings.carbon_indices()
        dim = 2**n
        self.t_hom = np.zeros((3, 3, dim, dim), dtype=complex)
        self.t_het = np.zeros((3, 3, dim, dim), dtype=complex)
        self.t_csh = np.zeros((3, dim, dim), dtype=complex)
        self.t_csc = np.zeros((3, dim, dim), dtype=complex)
        self.const = np.zeros((dim, dim), dtype=complex)
        for ii, i in enumerate(protons):
            for j in protons[ii + 1:]:
                d = twopi * couplings.d[i, j]
                jj = twopi * couplings.j[i, j]
                if d != 0.0:
                    for a, ax_a in enumerate(_AXES):
                        for b, ax_b in enumerate(_AXES):
                            m = np.kron(SPIN[ax_a], SPIN[ax_b])
                            self.t_hom[a, b] += d * embed(m, (i, j), n)
                if jj != 0.0:
                    iso = sum(
                        np.kron(SPIN[a], SPIN[a]) for a in _AXES
                    )
                    self.const += jj * embed(iso, (i, j), n)
        for c in carbons:
            for i in protons:
                eff = 2.0 * twopi * (couplings.d[i, c] + 0.5 * couplings.j[i, c])
                if eff == 0.0:
                    continue
                for a, ax_a in enumerate(_AXES):
                    for b, ax_b in enumerate(_AXES):
                        pair = (i, c) if i < c else (c, i)
                        m = (np.kron(SPIN[ax_a], SPIN[ax_b]) if i < c
                             else np.kron(SPIN[ax_b], SPIN[ax_a]))
                        self.t_het[a, b] += eff * embed(m, pair, n)
        for i in protons:
            if couplings.shifts[i] != 0.0:
                for a, ax in enumerate(_AXES):
                    self.t_csh[a] += twopi * couplings.shifts[i] * site_operator(
                        SPIN[ax], i, n)
        for c in carbons:
            if couplings.shifts[c] != 0.0:
                for a, ax in enumerate(_AXES):
                    self.t_csc[a] += twopi * couplings.shifts[c] * site_operator(
                        SPIN[ax], c, n)

    def assemble(self, oh: np.ndarray, oc: np.ndarray) -> np.ndarray:
        g = oh.T @ _LAM @ oh
        m = np.outer(oh[2], oc[2])
        out = self.const.copy()
        out += np.einsum("ab,abxy->xy", g, self.t_hom)
        out += np.einsum("ab,abxy->xy", m, self.t_het)
        out += np.einsum("a,axy->xy", oh[2], self.t_csh)
        out += np.einsum("a,axy->xy", oc[2], self.t_csc)
        return out


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def magnus_effective_hamiltonian(
    seq: PulseSequence,
    couplings: CouplingSet,
    order: int = 0,
    residual_tol: float = 1e-8,
) -> MagnusResult:
    """Average Hamiltonian of one engineered cycle up to the given order.

    Returns the cumulative sum H0 (+ H1 + H2) decomposed onto one- and
    two-body spin terms; higher-weight content of orders >= 1 cannot be
    represented there, so the result carries the projection residual, a
    warning flag when it exceeds residual_tol of the norm, and the full
    dense operator.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1, or 2")
    if not seq.cyclic:
        raise ValueError("sequence is not cyclic; Magnus expansion undefined")
    h0 = zeroth_order(seq, couplings)
    if order == 0:
        return MagnusResult(
            hamiltonian=h0, order=0, projection_residual=0.0,
            decomposition_warning=False, dense=None, dense_orders=None,
        )

    frame = _TogglingFrame(seq, couplings)
    n = couplings.n
    dim = 2**n
    i0, i1 = seq.cycle_span
    oh = np.eye(3)
    oc = np.eye(3)
    for seg in seq.segments[:i0]:
        oh = _segment_rotations(seg, "proton", np.array([1.0]))[1] @ oh
        oc = _segment_rotations(seg, "carbon", np.array([1.0]))[1] @ oc

    segs = seq.segments[i0:i1]
    total = sum(s.duration for s in segs)
    w_starts = []
    w_cur = np.zeros((dim, dim), dtype=complex)
    v_cur = np.zeros((dim, dim), dtype=complex)
    h0_int = np.zeros((dim, dim), dtype=complex)
    h1_int = np.zeros((dim, dim), dtype=complex)
    a_int = np.zeros((dim, dim), dtype=complex)
    oh_starts = []
    oc_starts = []

    for seg in segs:
        oh_starts.append(oh)
        oc_starts.append(oc)
        w_starts.append(w_cur.copy())
        rots_h, step_h = _segment_rotations(seg, "proton", _GLX)
        rots_c, step_c = _segment_rotations(seg, "carbon", _GLX)
        d = seg.duration
        f = [frame.assemble(rh @ oh, rc @ oc) for rh, rc in zip(rots_h, rots_c)]
        w_nodes = [
            w_cur + d * sum(_CUM[q, qq] * f[qq] for qq in range(_GL_NODES))
            for q in range(_GL_NODES)
        ]
        c_nodes = [_comm(f[q], w_nodes[q]) for q in range(_GL_NODES)]
        h0_int += d * sum(_GLW[q] * f[q] for q in range(_GL_NODES))
        h1_int += d * sum(_GLW[q] * c_nodes[q] for q in range(_GL_NODES))
        if order >= 2:
            v_nodes = [
                v_cur + d * sum(_CUM[q, qq] * c_nodes[qq] for qq in range(_GL_NODES))
                for q in range(_GL_NODES)
            ]
            a_int += d * sum(
                _GLW[q] * _comm(f[q], v_nodes[q]) for q in range(_GL_NODES)
            )
            v_cur = v_cur + d * sum(_GLW[q] * c_nodes[q] for q in range(_GL_NODES))
        w_cur = w_cur + d * sum(_GLW[q] * f[q] for q in range(_GL_NODES))
        oh = step_h @ oh
        oc = step_c @ oc

    w_total = w_cur
    h_orders = [h0_int / total, (-1j / (2.0 * total)) * h1_int]

    if order >= 2:
        b_int = np.zeros((dim, dim), dtype=complex)
        g_end = np.zeros((dim, dim), dtype=complex)
        for seg, ohs, ocs, ws in zip(
            reversed(segs), reversed(oh_starts), reversed(oc_starts),
            reversed(w_starts),
        ):
            rots_h, _ = _segment_rotations(seg, "proton", _GLX)
            rots_c, _ = _segment_rotations(seg, "carbon", _GLX)
            d = seg.duration
            f = [frame.assemble(rh @ ohs, rc @ ocs) for rh, rc in zip(rots_h, rots_c)]
            w_nodes = [
                ws + d * sum(_CUM[q, qq] * f[qq] for qq in range(_GL_NODES))
                for q in range(_GL_NODES)
            ]
            k_nodes = [_comm(f[q], w_total - w_nodes[q]) for q in range(_GL_NODES)]
            g_nodes = [
                g_end + d * sum(_RCUM[q, qq] * k_nodes[qq] for qq in range(_GL_NODES))
                for q in range(_GL_NODES)
            ]
            b_int += d * sum(
                _GLW[q] * _comm(f[q], g_nodes[q]) for q in range(_GL_NODES)
            )
            g_end = g_end + d * sum(_GLW[q] * k_nodes[q] for q in range(_GL_NODES))
        h_orders.append((-1.0 / (6.0 * total)) * (a_int + b_int))

    dense = sum(h_orders[: order + 1])
    one, two, resid = decompose_two_local(dense, n)
    norm = max(float(np.linalg.norm(dense)), 1e-300)
    form_map = {"xx": "XX", "xy": "XY", "xz": "XZ", "yx": "YX", "yy": "YY",
                "yz": "YZ", "zx": "ZX", "zy": "ZY", "zz": "ZZ"}
    eff = _merge_terms(EffectiveHamiltonian(
        n,
        [OneBodyTerm(s, a, c) for s, a, c in one],
        [TwoBodyTerm(p, form_map[f], c) for p, f, c in two],
        SPIN_HALF,
    ))
    return MagnusResult(
        hamiltonian=eff,
        order=order,
        projection_residual=resid / norm,
        decomposition_warning=bool(resid / norm > residual_tol),
        dense=dense,
        dense_orders=h_orders[: order + 1],
    )


def dq_scale_factors(
    seq: PulseSequence, couplings: CouplingSet
) -> tuple[float, float]:
    """Numerical (eta_het, eta_homo) of a double-quantum cycle.

    eta_het scales the heteronuclear ZZ relative to 2 pi (D + J/2);
    eta_homo scales the homonuclear double-quantum part relative to
    2 pi D on (YY - XX) for TARDIS-2-type cycles or on (XY + YX)/pi for
    TARDIS-1-type cycles (whichever carries the weight).
    """
    h0 = zeroth_order(seq, couplings)
    coefs: dict = {}
    for t in h0.two_body:
        coefs[(t.pair, t.form)] = coefs.get((t.pair, t.form), 0.0) + t.coefficient
    twopi = 2.0 * np.pi
    protons = couplings.proton_indices()
    carbons = couplings.carbon_indices()
    num = den = 0.0
    for c in carbons:
        for i in protons:
            eff = twopi * (couplings.d[i, c] + 0.5 * couplings.j[i, c])
            if eff == 0.0:
                continue
            pair = (i, c) if i < c else (c, i)
            num += coefs.get((pair, "ZZ"), 0.0) * eff
            den += eff * eff
    eta_het = num / den if den else 0.0
    num = den = 0.0
    for ii, i in enumerate(protons):
        for j in protons[ii + 1:]:
            d = twopi * couplings.d[i, j]
            if d == 0.0:
                continue
            xx = coefs.get(((i, j), "XX"), 0.0)
            yy = coefs.get(((i, j), "YY"), 0.0)
            dqm = coefs.get(((i, j), "XX_minus_YY"), 0.0)
            yy_minus_xx = (yy - xx) / 1.0 - 2.0 * dqm
            dq2 = (
                coefs.get(((i, j), "XY"), 0.0) + coefs.get(((i, j), "YX"), 0.0)
            ) / 2.0 + coefs.get(((i, j), "XY_plus_YX"), 0.0)
            strength = (yy_minus_xx / 2.0) if abs(yy_minus_xx) > abs(dq2) else (
                np.pi * dq2)
            num += strength * d
            den += d * d
    eta_homo = num / den if den else 0.0
    return float(eta_het), float(eta_homo)
