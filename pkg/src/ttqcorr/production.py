"""Leading-order ttbar spin density matrices and phase-space integration.

The elementary gg and qqbar channels are unpolarised at this order and fully
described by the helicity-frame correlation matrix C(beta, Theta).  The
closed forms below were derived from the tree-level amplitudes (s-channel
for qqbar; s+t+u with the colour sum for gg) and are pinned by the
independent evaluator in :mod:`ttqcorr.amplitudes` plus the threshold and
high-pT limits.

Luminosity-weighted integration over phase space produces the beam-frame
state, diagonal with entries (c_perp, c_perp, c_z).
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .states import BEAM, HELICITY, TwoQubitState, helicity_to_beam_rotation, validate_state

M_T_DEFAULT = 173.0

GG = "gg"
QQBAR = "qqbar"
CHANNELS = (GG, QQBAR)


def beta_from_mass(m_ttbar: float, m_t: float = M_T_DEFAULT) -> float:
    """Top velocity in the c.m. frame at pair invariant mass m_ttbar."""
    m_ttbar = np.asarray(m_ttbar, dtype=float)
    if np.any(m_ttbar < 2.0 * m_t):
        raise ValueError("invariant mass below the 2 m_t threshold")
    out = np.sqrt(1.0 - (2.0 * m_t / m_ttbar) ** 2)
    return float(out) if out.ndim == 0 else out


def mass_from_beta(beta: float, m_t: float = M_T_DEFAULT) -> float:
    beta = np.asarray(beta, dtype=float)
    if np.any((beta < 0.0) | (beta >= 1.0)):
        raise ValueError("beta must lie in [0, 1)")
    out = 2.0 * m_t / np.sqrt(1.0 - beta**2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KinematicPoint:
    """Production kinematics (M_ttbar, beta, theta) with m_t fixed."""

    m_ttbar: float
    beta: float
    theta: float
    m_t: float = M_T_DEFAULT

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")
        if abs(self.beta - beta_from_mass(self.m_ttbar, self.m_t)) > 1e-12:
            raise ValueError("inconsistent (m_ttbar, beta) pair")

    @classmethod
    def from_mass(cls, m_ttbar, theta, m_t=M_T_DEFAULT):
        return cls(m_ttbar, beta_from_mass(m_ttbar, m_t), theta, m_t)

    @classmethod
    def from_beta(cls, beta, theta, m_t=M_T_DEFAULT):
        return cls(mass_from_beta(beta, m_t), beta, theta, m_t)


def _check_kinematics(beta, z):
    beta = np.asarray(beta, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any((beta < 0.0) | (beta >= 1.0)):
        raise ValueError("beta must lie in [0, 1)")
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise ValueError("cos(theta) must lie in [-1, 1]")
    return beta, np.clip(z, -1.0, 1.0)


def qqbar_correlations(beta, z):
    """Helicity (k,n,r) entries (ckk, cnn, crr, ckr) for qqbar -> ttbar."""
    beta, z = _check_kinematics(beta, z)
    b2 = beta * beta
    s2 = 1.0 - z * z
    den = 2.0 - b2 * s2
    ckk = (2.0 * z * z + b2 * s2) / den
    cnn = -b2 * s2 / den
    crr = (2.0 - b2) * s2 / den
    ckr = 2.0 * z * np.sqrt(s2 * (1.0 - b2)) / den
    return ckk, cnn, crr, ckr


def gg_correlations(beta, z):
    """Helicity (k,n,r) entries (ckk, cnn, crr, ckr) for gg -> ttbar."""
    beta, z = _check_kinematics(beta, z)
    b2 = beta * beta
    s2 = 1.0 - z * z
    f = 1.0 + s2 * s2
    den = 1.0 + 2.0 * b2 * s2 - b2 * b2 * f
    ckk = (b2 * b2 * f + 2.0 * b2 * z * z * s2 - 1.0) / den
    cnn = -(1.0 - 2.0 * b2 + b2 * b2 * f) / den
    crr = (b2 * (2.0 - b2) * f - 1.0) / den
    ckr = 2.0 * b2 * z * s2 * np.sqrt(s2 * (1.0 - b2)) / den
    return ckk, cnn, crr, ckr


def correlation_matrices(channel: str, beta, z) -> np.ndarray:
    """Stacked helicity-frame correlation matrices, shape (..., 3, 3)."""
    fn = {GG: gg_correlations, QQBAR: qqbar_correlations}.get(channel)
    if fn is None:
        raise ValueError(f"unknown channel {channel!r}")
    ckk, cnn, crr, ckr = fn(beta, z)
    shape = np.broadcast(np.asarray(beta), np.asarray(z)).shape
    C = np.zeros(shape + (3, 3))
    C[..., 0, 0] = ckk
    C[..., 1, 1] = cnn
    C[..., 2, 2] = crr
    C[..., 0, 2] = ckr
    C[..., 2, 0] = ckr
    return C


def spin_state(channel: str, beta: float, theta: float) -> TwoQubitState:
    """LO helicity-frame spin state of the channel at (beta, theta)."""
    C = correlation_matrices(channel, float(beta), float(np.cos(theta)))
    return TwoQubitState(np.zeros(3), np.zeros(3), C, HELICITY)


def _qq_me(beta, z):
    return 2.0 - beta**2 * (1.0 - z * z)


def _gg_me(beta, z):
    b2 = beta * beta
    s2 = 1.0 - z * z
    return (7.0 + 9.0 * b2 * z * z) / (192.0 * (1.0 - b2 * z * z) ** 2) \
        * (1.0 + 2.0 * b2 * s2 - b2 * b2 * (1.0 + s2 * s2))


def _qq_me_norm(beta):
    return 4.0 * (1.0 - np.asarray(beta, dtype=float) ** 2 / 3.0)


def _gg_me_norm(beta):
    """Integral of the gg angular factor over cos(theta) in [-1, 1]."""
    b = np.asarray(beta, dtype=float)
    small = b < 1e-3
    bs = np.where(small, 0.5, b)
    exact = (31.0 * bs**3 - 59.0 * bs + 2.0 * (bs**4 - 18.0 * bs**2 + 33.0)
             * np.arctanh(bs)) / (96.0 * bs)
    series = (7.0 + 17.0 * b**2 + 3.2 * b**4) / 96.0
    out = np.where(small, series, exact)
    return float(out) if out.ndim == 0 else out


def partonic_weight(channel: str, beta, theta) -> float:
    """LO angular shape of the channel, normalised to unit solid-angle integral."""
    beta = np.asarray(beta, dtype=float)
    z = np.cos(np.asarray(theta, dtype=float))
    beta, z = _check_kinematics(beta, z)
    if channel == QQBAR:
        out = _qq_me(beta, z) / (2.0 * np.pi * _qq_me_norm(beta))
    elif channel == GG:
        out = _gg_me(beta, z) / (2.0 * np.pi * _gg_me_norm(beta))
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return float(out) if out.ndim == 0 else out


def mixed_state(pairs) -> TwoQubitState:
    """Convex mixture of states sharing a frame, weighted by non-negative weights."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty mixture")
    frames = {st.frame for st, _ in pairs}
    if len(frames) != 1:
        raise ValueError("mixture components must share a frame; rotate first")
    w = np.array([float(wt) for _, wt in pairs])
    if np.any(w < 0.0) or w.sum() <= 0.0:
        raise ValueError("weights must be non-negative with positive sum")
    w = w / w.sum()
    bp = sum(wi * st.bplus for (st, _), wi in zip(pairs, w))
    bm = sum(wi * st.bminus for (st, _), wi in zip(pairs, w))
    C = sum(wi * st.corr for (st, _), wi in zip(pairs, w))
    return TwoQubitState(bp, bm, C, frames.pop())


# ---------------------------------------------------------------------------
# luminosity tables and phase-space integration


@dataclass(frozen=True)
class LuminosityTable:
    """Relative d(sigma)/dM per channel on an ascending mass grid."""

    masses: np.ndarray
    weight_gg: np.ndarray
    weight_qq: np.ndarray
    collider: str = "custom"
    sqrt_s: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        wg = np.asarray(self.weight_gg, dtype=float)
        wq = np.asarray(self.weight_qq, dtype=float)
        if m.ndim != 1 or len(m) < 2:
            raise ValueError("luminosity table needs at least 2 rows")
        if np.any(np.diff(m) <= 0.0):
            raise ValueError("table masses must be strictly increasing")
        if wg.shape != m.shape or wq.shape != m.shape:
            raise ValueError("weight columns must match the mass column")
        if np.any(wg < 0.0) or np.any(wq < 0.0):
            raise ValueError("weights must be non-negative")
        for name, arr in (("masses", m), ("weight_gg", wg), ("weight_qq", wq)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def channel_weight(self, channel: str, m) -> np.ndarray:
        col = self.weight_gg if channel == GG else self.weight_qq
        return np.interp(np.asarray(m, dtype=float), self.masses, col)


def load_luminosity_csv(path) -> LuminosityTable:
    """Read a `m_gev,weight_gg,weight_qq` table; `# key = value` comments may
    carry `collider` and `sqrt_s_gev` metadata.  Gzip by file extension."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    meta = {}
    rows = []
    header_seen = False
    with opener(path, "rt", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                cols = [c.strip() for c in line.split(",")]
                if cols != ["m_gev", "weight_gg", "weight_qq"]:
                    raise ValueError(f"unexpected luminosity header {cols}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"malformed luminosity row: {line!r}")
            rows.append([float(p) for p in parts])
    if not header_seen or not rows:
        raise ValueError("luminosity table is empty")
    arr = np.array(rows)
    return LuminosityTable(arr[:, 0], arr[:, 1], arr[:, 2],
                           collider=meta.get("collider", "custom"),
                           sqrt_s=float(meta.get("sqrt_s_gev", 0.0)))


def save_luminosity_csv(table: LuminosityTable, path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# collider = {table.collider}\n")
        fh.write(f"# sqrt_s_gev = {table.sqrt_s:.17g}\n")
        fh.write("m_gev,weight_gg,weight_qq\n")
        for m, wg, wq in zip(table.masses, table.weight_gg, table.weight_qq):
            fh.write(f"{m:.17g},{wg:.17g},{wq:.17g}\n")


def toy_threshold_gg(m_t: float = M_T_DEFAULT) -> LuminosityTable:
    """gg production concentrated in a 50 keV window at threshold (singlet limit)."""
    m0 = 2.0 * m_t
    masses = np.array([m0, m0 + 2.5e-5, m0 + 5.0e-5])
    return LuminosityTable(masses, np.ones(3), np.zeros(3), collider="toy-threshold-gg")


def toy_threshold_qqbar(m_t: float = M_T_DEFAULT) -> LuminosityTable:
    """qqbar production concentrated at threshold (classically correlated limit)."""
    m0 = 2.0 * m_t
    masses = np.array([m0, m0 + 2.5e-5, m0 + 5.0e-5])
    return LuminosityTable(masses, np.zeros(3), np.ones(3), collider="toy-threshold-qqbar")


def toy_flat_qqbar(m_t: float = M_T_DEFAULT, m_max: float = 1200.0) -> LuminosityTable:
    masses = np.linspace(2.0 * m_t, m_max, 64)
    return LuminosityTable(masses, np.zeros(64), np.ones(64), collider="toy-flat-qqbar")


def toy_lhc_like(m_t: float = M_T_DEFAULT, m_max: float = 2000.0) -> LuminosityTable:
    """Falling gg-dominated spectrum, qualitatively LHC-shaped."""
    masses = np.linspace(2.0 * m_t, m_max, 128)
    x = masses / (2.0 * m_t)
    wg = (x - 0.999) ** 0.5 / x**6
    wq = 0.12 * (x - 0.999) ** 0.5 / x**5.5
    return LuminosityTable(masses, wg, wq, collider="toy-lhc-like", sqrt_s=13000.0)


@dataclass(frozen=True)
class IntegratedTState:
    """Rotation-averaged beam-frame state, C = diag(c_perp, c_perp, c_z)."""

    c_perp: float
    c_z: float

    def __post_init__(self):
        if 1.0 - self.c_z - 2.0 * abs(self.c_perp) < -1e-10 or self.c_z < -1.0 - 1e-10:
            raise ValueError("(c_perp, c_z) outside the physical triangle")

    def to_state(self) -> TwoQubitState:
        return TwoQubitState(np.zeros(3), np.zeros(3),
                             np.diag([self.c_perp, self.c_perp, self.c_z]), BEAM)


def _simpson_nodes(a: float, b: float, n: int):
    """Composite-Simpson nodes and weights on [a, b] with n (odd) points."""
    x = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * h / 3.0


def _segment_bounds(lumi: LuminosityTable, m_lo: float, m_hi: float):
    edges = [m_lo] + [float(m) for m in lumi.masses if m_lo < m < m_hi] + [m_hi]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)
            if edges[i + 1] - edges[i] > 1e-12]


def _integrate_coefficients(lumi: LuminosityTable, m_cut: float, m_t: float,
                            rotate_to_beam: bool, rtol: float = 1e-9,
                            transform=None):
    """Luminosity-weighted average of the spin coefficients.

    rotate_to_beam=True additionally averages over the azimuth of the top
    direction; the result is the beam-frame matrix of the integrated state.
    With rotate_to_beam=False the helicity-frame coefficients themselves are
    averaged (no rotation), which is basis-dependent but CP-sensitive.
    """
    if not 2.0 * m_t < m_cut <= lumi.masses[-1] + 1e-9:
        raise ValueError("mass cut outside (2 m_t, max table mass]")
    if lumi.masses[0] < 2.0 * m_t - 1e-9:
        raise ValueError("table extends below the 2 m_t threshold")
    m_lo = max(2.0 * m_t, float(lumi.masses[0]))
    segments = _segment_bounds(lumi, m_lo, float(m_cut))

    def once(n_mass: int, n_z: int):
        zg, wz = np.polynomial.legendre.leggauss(n_z)
        num_b = np.zeros(3)
        num_bm = np.zeros(3)
        num_c = np.zeros((3, 3))
        den = 0.0
        for a, b in segments:
            mg, wm = _simpson_nodes(a, b, n_mass)
            beta = beta_from_mass(mg, m_t)
            for channel, me_fn, norm_fn in ((GG, _gg_me, _gg_me_norm),
                                            (QQBAR, _qq_me, _qq_me_norm)):
                lum = lumi.channel_weight(channel, mg)
                if np.all(lum == 0.0):
                    continue
                B2, Z2 = np.meshgrid(beta, zg, indexing="ij")
                C = correlation_matrices(channel, B2, Z2)       # (nm, nz, 3, 3)
                bp = np.zeros(B2.shape + (3,))
                bm = np.zeros(B2.shape + (3,))
                if transform is not None:
                    bp, bm, C = transform(bp, bm, C, B2, Z2)
                # weight density over (M, z); the azimuth is uniform
                wgt = (lum[:, None] * me_fn(B2, Z2) / norm_fn(beta)[:, None]
                       * wm[:, None] * wz[None, :])
                if rotate_to_beam:
                    th = np.arccos(np.clip(Z2, -1.0, 1.0))
                    c, s = np.cos(th), np.sin(th)
                    R = np.zeros(B2.shape + (3, 3))
                    R[..., 0, 0] = s
                    R[..., 0, 2] = -c
                    R[..., 1, 1] = 1.0
                    R[..., 2, 0] = c
                    R[..., 2, 2] = s
                    Cb = R @ C @ np.swapaxes(R, -1, -2)
                    bpb = np.einsum("...ij,...j->...i", R, bp)
                    bmb = np.einsum("...ij,...j->...i", R, bm)
                    avg = np.zeros_like(Cb)
                    perp = 0.5 * (Cb[..., 0, 0] + Cb[..., 1, 1])
                    anti = 0.5 * (Cb[..., 0, 1] - Cb[..., 1, 0])
                    avg[..., 0, 0] = perp
                    avg[..., 1, 1] = perp
                    avg[..., 0, 1] = anti
                    avg[..., 1, 0] = -anti
                    avg[..., 2, 2] = Cb[..., 2, 2]
                    bz = np.zeros_like(bpb)
                    bz[..., 2] = bpb[..., 2]
                    bmz = np.zeros_like(bmb)
                    bmz[..., 2] = bmb[..., 2]
                    C, bp, bm = avg, bz, bmz
                num_c += np.einsum("mz,mzij->ij", wgt, C)
                num_b += np.einsum("mz,mzi->i", wgt, bp)
                num_bm += np.einsum("mz,mzi->i", wgt, bm)
                den += float(wgt.sum())
        if den <= 0.0:
            raise ValueError("luminosity table has no support below the cut")
        return num_b / den, num_bm / den, num_c / den

    n_mass, n_z = 17, 32
    prev = once(n_mass, n_z)
    for _ in range(6):
        n_mass = 2 * n_mass - 1
        n_z *= 2
        cur = once(n_mass, n_z)
        delta = max(np.max(np.abs(cur[2] - prev[2])),
                    np.max(np.abs(cur[0] - prev[0])),
                    np.max(np.abs(cur[1] - prev[1])))
        if delta <= rtol:
            return cur
        prev = cur
    return prev


def integrated_state(lumi: LuminosityTable, m_cut: float,
                     m_t: float = M_T_DEFAULT, rtol: float = 1e-9) -> IntegratedTState:
    """Beam-frame integrated state below the mass cut, as (c_perp, c_z)."""
    bp, bm, C = _integrate_coefficients(lumi, m_cut, m_t, rotate_to_beam=True, rtol=rtol)
    off = C - np.diag(np.diag(C))
    if np.max(np.abs(off)) > 1e-9:
        raise ValueError("integrated beam-frame matrix has off-diagonal entries")
    if abs(C[0, 0] - C[1, 1]) > 1e-9:
        raise ValueError("integrated beam-frame matrix violates azimuthal symmetry")
    return IntegratedTState(0.5 * (C[0, 0] + C[1, 1]), C[2, 2])


def integrated_matrix_helicity(lumi: LuminosityTable, m_cut: float,
                               m_t: float = M_T_DEFAULT, rtol: float = 1e-9,
                               transform=None) -> TwoQubitState:
    """Coefficients integrated in the helicity basis without rotation.

    This object is not the spin state of any single event class, but it is
    PSD by convexity and carries the CP-odd combinations B+ - B- and C - C^T,
    so it feeds the witness module.
    """
    bp, bm, C = _integrate_coefficients(lumi, m_cut, m_t, rotate_to_beam=False,
                                        rtol=rtol, transform=transform)
    state = TwoQubitState(bp, bm, C, HELICITY)
    res = validate_state(state)
    if not res.is_physical:
        raise ValueError(f"integrated helicity matrix not PSD: {res.min_eigenvalue:.3e}")
    return state


def trajectory(lumi: LuminosityTable, cuts, m_t: float = M_T_DEFAULT,
               rtol: float = 1e-9):
    """Integrated (c_perp, c_z) for an ascending sequence of mass cuts."""
    cuts = [float(c) for c in cuts]
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValueError("cuts must be strictly ascending")
    return [(c, integrated_state(lumi, c, m_t, rtol)) for c in cuts]
