"""Tree-level helicity-amplitude evaluator for qqbar/gg -> ttbar.

Independent numerical oracle for the closed-form spin density matrices in
:mod:`ttqcorr.production`: explicit Dirac spinors and polarisation vectors,
one s-channel diagram for the quark channel, s+t+u diagrams with the full
colour sum for the gluon channel.  Works in the frame with the top along
z and the beam at angle theta in the x-z plane, with both spins quantised
along the top direction; coefficients are returned in the helicity triad
(k, n, r) = (z, -y, x).
"""
from __future__ import annotations

import numpy as np

from .states import TwoQubitState, from_density_matrix

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = [_SX, _SY, _SZ]
_G0 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
_GAM = [_G0] + [np.block([[np.zeros((2, 2)), p], [-p, np.zeros((2, 2))]]) for p in _PAULI]


def _slash(a):
    out = a[0] * _GAM[0]
    for i in range(3):
        out = out - a[i + 1] * _GAM[i + 1]
    return out


def _mdot(a, b):
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


def _sdot(v):
    return v[0] * _SX + v[1] * _SY + v[2] * _SZ


_CHI = [np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)]


def _u_spinor(k, m, chi):
    # normalisation sqrt(E+m) folded into the amplitudes as (E+m)
    lower = (_sdot(k[1:]) / (1.0 + m)) @ chi
    return np.concatenate([chi, lower])


def _v_spinor(k, m, chi):
    eta = -1j * _SY @ chi.conj()
    upper = (_sdot(k[1:]) / (1.0 + m)) @ eta
    return np.concatenate([upper, eta])


def _coefficients(rho4):
    """Normalised state from a 4x4 matrix whose spin axes are lab (x, y, z),
    mapping components to the helicity triad (k, n, r) = (z, -y, x)."""
    st = from_density_matrix(rho4)
    perm = [2, 1, 0]
    sign = np.array([1.0, -1.0, 1.0])
    bp = sign * st.bplus[perm]
    bm = sign * st.bminus[perm]
    C = (np.outer(sign, sign)) * st.corr[np.ix_(perm, perm)]
    return TwoQubitState(bp, bm, C, "helicity")


def qqbar_production_matrix(beta: float, theta: float) -> np.ndarray:
    """Unnormalised 4x4 production spin matrix of the quark channel."""
    b = float(beta)
    m = np.sqrt(1.0 - b * b)
    c, s = np.cos(theta), np.sin(theta)
    k1 = np.array([1.0, 0.0, 0.0, b])
    k2 = np.array([1.0, 0.0, 0.0, -b])
    p1 = np.array([1.0, s, 0.0, c])
    p2 = np.array([1.0, -s, 0.0, -c])

    U = [_u_spinor(k1, m, ch) for ch in _CHI]
    V = [_v_spinor(k2, m, ch) for ch in _CHI]
    UB = [u.conj() @ _G0 for u in U]

    def u0(p, ch):
        return np.concatenate([ch, _sdot(p[1:]) @ ch])

    def v0(p, ch):
        eta = -1j * _SY @ ch.conj()
        return np.concatenate([_sdot(p[1:]) @ eta, eta])

    R = np.zeros((4, 4), dtype=complex)
    for a_ch in range(2):
        for b_ch in range(2):
            uq = u0(p1, _CHI[a_ch])
            vq = v0(p2, _CHI[b_ch])
            vb = vq.conj() @ _G0
            cur = np.array([vb @ _GAM[mu] @ uq for mu in range(4)])
            if np.max(np.abs(cur)) < 1e-30:
                continue
            amps = np.array([(1.0 + m) * _mdot(cur, [UB[iu] @ _GAM[mu] @ V[iv] for mu in range(4)])
                             for iu in range(2) for iv in range(2)], dtype=complex)
            R += np.outer(amps, amps.conj())
    return R


def gg_production_matrix(beta: float, theta: float) -> np.ndarray:
    """Unnormalised 4x4 production spin matrix of the gluon channel
    (s, t, u diagrams, colour-summed)."""
    b = float(beta)
    m = np.sqrt(1.0 - b * b)
    c, s = np.cos(theta), np.sin(theta)
    k1 = np.array([1.0, 0.0, 0.0, b])
    k2 = np.array([1.0, 0.0, 0.0, -b])
    p1 = np.array([1.0, s, 0.0, c])
    p2 = np.array([1.0, -s, 0.0, -c])

    U = [_u_spinor(k1, m, ch) for ch in _CHI]
    V = [_v_spinor(k2, m, ch) for ch in _CHI]
    UB = [u.conj() @ _G0 for u in U]

    e1a = np.array([0.0, c, 0.0, -s])
    e2a = np.array([0.0, 0.0, 1.0, 0.0])

    def pol(lam, flip):
        ea = -e1a if flip else e1a
        return (-lam * ea - 1j * e2a) / np.sqrt(2.0)

    tmm = -2.0 * (1.0 - b * c)
    umm = -2.0 * (1.0 + b * c)
    prop_t = _slash(k1) - _slash(p1) + m * np.eye(4)
    prop_u = _slash(k1) - _slash(p2) + m * np.eye(4)

    R = np.zeros((4, 4), dtype=complex)
    for l1 in (1, -1):
        for l2 in (1, -1):
            e1 = pol(l1, False)
            e2 = pol(l2, True)
            e1e2 = _mdot(e1, e2)
            vert = np.array([e1e2 * (p1[i] - p2[i]) + _mdot(p1 + 2 * p2, e1) * e2[i]
                             - _mdot(2 * p1 + p2, e2) * e1[i] for i in range(4)])
            a1 = np.empty(4, dtype=complex)
            a2 = np.empty(4, dtype=complex)
            idx = 0
            for iu in range(2):
                for iv in range(2):
                    at = (1.0 + m) * (UB[iu] @ _slash(e1) @ prop_t @ _slash(e2) @ V[iv]) / tmm
                    au = (1.0 + m) * (UB[iu] @ _slash(e2) @ prop_u @ _slash(e1) @ V[iv]) / umm
                    cur = np.array([UB[iu] @ _GAM[mu] @ V[iv] for mu in range(4)])
                    asg = (1.0 + m) * _mdot(vert, cur) / 4.0
                    a1[idx] = at + asg
                    a2[idx] = au - asg
                    idx += 1
            R += (16.0 / 3.0) * (np.outer(a1, a1.conj()) + np.outer(a2, a2.conj()))
            R += (-2.0 / 3.0) * (np.outer(a1, a2.conj()) + np.outer(a2, a1.conj()))
    return R


def spin_state_from_amplitudes(channel: str, beta: float, theta: float) -> TwoQubitState:
    """Normalised helicity-frame spin state computed from tree amplitudes."""
    if channel == "gg":
        R = gg_production_matrix(beta, theta)
    elif channel == "qqbar":
        R = qqbar_production_matrix(beta, theta)
    else:
        raise ValueError("channel must be 'gg' or 'qqbar'")
    return _coefficients(R / np.trace(R).real)


def squared_me(channel: str, beta: float, theta: float) -> float:
    """Colour/spin summed |M|^2 up to a channel-wide constant."""
    if channel == "gg":
        return float(np.trace(gg_production_matrix(beta, theta)).real)
    if channel == "qqbar":
        return float(np.trace(qqbar_production_matrix(beta, theta)).real)
    raise ValueError("channel must be 'gg' or 'qqbar'")
