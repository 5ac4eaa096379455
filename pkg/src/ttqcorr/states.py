"""Two-qubit spin states in Bloch decomposition.

A state is stored as the pair of Bloch vectors (B+, B-) and the 3x3 spin
correlation matrix C, i.e. the coefficients of

    rho = (1 x 1 + B+_i sigma_i x 1 + B-_i 1 x sigma_i + C_ij sigma_i x sigma_j) / 4

All entropies are in bits (log base 2).  Helicity-frame components are
ordered (k, n, r): k along the top momentum, r in the scattering plane with
p = cos(T) k + sin(T) r, and n = r x k.  Beam-frame components are (x, y, z)
with z along the beam.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HELICITY = "helicity"
BEAM = "beam"

PSD_TOL = 1e-10

SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

_ID2 = np.eye(2, dtype=complex)


def _as_readonly(a, shape):
    out = np.array(a, dtype=float).reshape(shape)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite components")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Frame:
    """Reference frame tag plus the production angle relating helicity and beam."""

    tag: str
    theta: float = 0.0

    def __post_init__(self):
        if self.tag not in (HELICITY, BEAM):
            raise ValueError(f"unknown frame tag {self.tag!r}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")


@dataclass(frozen=True)
class TwoQubitState:
    """Bloch vectors B+/B- and correlation matrix C of a two-qubit spin state."""

    bplus: np.ndarray
    bminus: np.ndarray
    corr: np.ndarray
    frame: str = HELICITY

    def __post_init__(self):
        object.__setattr__(self, "bplus", _as_readonly(self.bplus, (3,)))
        object.__setattr__(self, "bminus", _as_readonly(self.bminus, (3,)))
        object.__setattr__(self, "corr", _as_readonly(self.corr, (3, 3)))
        if self.frame not in (HELICITY, BEAM):
            raise ValueError(f"unknown frame tag {self.frame!r}")

    def swapped(self) -> "TwoQubitState":
        """State with the two parties interchanged (B+ <-> B-, C -> C^T)."""
        return TwoQubitState(self.bminus, self.bplus, self.corr.T, self.frame)

    def coefficients(self) -> np.ndarray:
        """The 15 real coefficients as a flat vector (B+, B-, C row-major)."""
        return np.concatenate([self.bplus, self.bminus, self.corr.ravel()])


class ValidationResult(NamedTuple):
    is_physical: bool
    min_eigenvalue: float


class ConditionalOutcome(NamedTuple):
    bloch: np.ndarray
    prob: float


def maximally_mixed() -> TwoQubitState:
    return TwoQubitState(np.zeros(3), np.zeros(3), np.zeros((3, 3)))


def t_state(c_diag, frame: str = HELICITY) -> TwoQubitState:
    """T-state (vanishing polarizations) with diagonal correlations c_diag."""
    return TwoQubitState(np.zeros(3), np.zeros(3), np.diag(np.asarray(c_diag, dtype=float)), frame)


def singlet(frame: str = HELICITY) -> TwoQubitState:
    return t_state([-1.0, -1.0, -1.0], frame)


def to_density_matrix(state: TwoQubitState) -> np.ndarray:
    """Assemble the 4x4 density matrix from the Bloch coefficients."""
    rho = np.eye(4, dtype=complex)
    for i in range(3):
        rho += state.bplus[i] * np.kron(SIGMA[i], _ID2)
        rho += state.bminus[i] * np.kron(_ID2, SIGMA[i])
        for j in range(3):
            rho += state.corr[i, j] * np.kron(SIGMA[i], SIGMA[j])
    return rho / 4.0


def from_density_matrix(rho: np.ndarray, frame: str = HELICITY) -> TwoQubitState:
    """Inverse Pauli decomposition of a valid 4x4 density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValueError("matrix is not Hermitian within 1e-12")
    if abs(np.trace(rho).real - 1.0) > 1e-12 or abs(np.trace(rho).imag) > 1e-12:
        raise ValueError("matrix trace is not 1 within 1e-12")
    bplus = np.empty(3)
    bminus = np.empty(3)
    corr = np.empty((3, 3))
    for i in range(3):
        bplus[i] = np.trace(rho @ np.kron(SIGMA[i], _ID2)).real
        bminus[i] = np.trace(rho @ np.kron(_ID2, SIGMA[i])).real
        for j in range(3):
            corr[i, j] = np.trace(rho @ np.kron(SIGMA[i], SIGMA[j])).real
    return TwoQubitState(bplus, bminus, corr, frame)


def validate_state(state: TwoQubitState) -> ValidationResult:
    """PSD check of the assembled density matrix."""
    eigs = np.linalg.eigvalsh(to_density_matrix(state))
    mn = float(eigs[0])
    return ValidationResult(mn >= -PSD_TOL, mn)


def require_physical(state: TwoQubitState):
    res = validate_state(state)
    if not res.is_physical:
        raise ValueError(f"unphysical state: min eigenvalue {res.min_eigenvalue:.3e}")


def t_state_eigenvalues(c1: float, c2: float, c3: float) -> np.ndarray:
    """Eigenvalues of the T-state with diagonal correlations (c1, c2, c3)."""
    return 0.25 * np.array([
        1.0 - c1 - c2 - c3,
        1.0 - c1 + c2 + c3,
        1.0 + c1 - c2 + c3,
        1.0 + c1 + c2 - c3,
    ])


def _entropy_from_probs(p: np.ndarray) -> float:
    p = np.clip(p, 0.0, None)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError("binary_entropy argument outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def qubit_entropy(bloch_norm) -> np.ndarray:
    """Entropy in bits of a single qubit with Bloch vector length ``bloch_norm``.

    Vectorised; norms are clipped to [0, 1] to absorb estimator noise at the
    pure-state boundary.
    """
    b = np.clip(np.asarray(bloch_norm, dtype=float), 0.0, 1.0)
    p = (1.0 + b) / 2.0
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return out if out.ndim else float(out)


def von_neumann_entropy(x) -> float:
    """Entropy in bits of a density matrix, or of a single-qubit Bloch vector."""
    x = np.asarray(x)
    if x.ndim == 1 and x.shape == (3,):
        return float(qubit_entropy(np.linalg.norm(x)))
    if x.ndim == 2 and x.shape[0] == x.shape[1]:
        return _entropy_from_probs(np.linalg.eigvalsh(x))
    raise ValueError("expected a Bloch 3-vector or a square density matrix")


def reduced_state(state: TwoQubitState, party: str) -> np.ndarray:
    """Bloch vector of the reduced single-qubit state of party 'A' or 'B'."""
    if party == "A":
        return state.bplus.copy()
    if party == "B":
        return state.bminus.copy()
    raise ValueError("party must be 'A' or 'B'")


def conditional_state(state: TwoQubitState, n, sign: int = +1) -> ConditionalOutcome:
    """Conditional state of A after projecting B along ``sign * n``.

    Returns the conditional Bloch vector (B+ + C.n)/(1 + n.B-) and the
    outcome probability (1 + n.B-)/2, with n replaced by -n for sign=-1.
    """
    n = np.asarray(n, dtype=float)
    nn = np.linalg.norm(n)
    if abs(nn - 1.0) > 1e-10:
        raise ValueError("measurement direction must be a unit vector")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    v = sign * n
    p = (1.0 + v @ state.bminus) / 2.0
    if p <= 1e-14:
        raise ValueError("degenerate measurement: outcome probability is zero")
    bloch = (state.bplus + state.corr @ v) / (2.0 * p)
    return ConditionalOutcome(bloch, float(p))


def helicity_to_beam_rotation(theta: float) -> np.ndarray:
    """Rotation matrix taking helicity components (k, n, r) to beam (x, y, z).

    Rows are the beam axes in helicity components, with z = p and y = n.
    Degenerate at theta = 0 or pi only in the sense that r is conventional.
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [s, 0.0, -c],
        [0.0, 1.0, 0.0],
        [c, 0.0, s],
    ])


def rotate_frame(state: TwoQubitState, frame_from: Frame, frame_to: Frame) -> TwoQubitState:
    """Re-express the state coefficients in another frame sharing the same theta."""
    if abs(frame_from.theta - frame_to.theta) > 1e-12:
        raise ValueError("frames must share the same production angle")
    if state.frame != frame_from.tag:
        raise ValueError("state frame does not match frame_from")
    if frame_from.tag == frame_to.tag:
        return state
    R = helicity_to_beam_rotation(frame_from.theta)
    if frame_from.tag == BEAM:
        R = R.T
    return TwoQubitState(R @ state.bplus, R @ state.bminus,
                         R @ state.corr @ R.T, frame_to.tag)
