"""Dileptonic decay simulation.

The joint angular density of the antilepton direction (top rest frame) and
lepton direction (antitop rest frame) is

    p(l+, l-) = (1 + B+.l+ - B-.l- - l+.C.l-) / (4 pi)^2

Sampling is by rejection with the envelope (1 + |B+| + |B-| + sigma_max(C)),
using counter-based Philox streams keyed by (seed, block) so batches are
reproducible and independent of threading or chunking.
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .production import GG, QQBAR, LuminosityTable, M_T_DEFAULT, _gg_me, _gg_me_norm, \
    _qq_me, _qq_me_norm, beta_from_mass, correlation_matrices
from .sphere import random_unit_vectors
from .states import BEAM, HELICITY, TwoQubitState, require_physical

BLOCK_SIZE = 65536
_Z_GRID = 513


@dataclass(frozen=True)
class DileptonEvent:
    lplus: np.ndarray
    lminus: np.ndarray
    frame: str
    m_gev: float = float("nan")
    cos_theta: float = float("nan")


@dataclass
class EventBatch:
    """Struct-of-arrays container for dileptonic events."""

    lplus: np.ndarray          # (N, 3) antilepton directions
    lminus: np.ndarray         # (N, 3) lepton directions
    frame: str
    seed: int
    m_gev: Optional[np.ndarray] = None
    cos_theta: Optional[np.ndarray] = None
    truth: Optional[TwoQubitState] = None
    source: str = "fixed"

    def __len__(self):
        return len(self.lplus)

    def __getitem__(self, i) -> DileptonEvent:
        m = float(self.m_gev[i]) if self.m_gev is not None else float("nan")
        z = float(self.cos_theta[i]) if self.cos_theta is not None else float("nan")
        return DileptonEvent(self.lplus[i].copy(), self.lminus[i].copy(), self.frame, m, z)

    def subset(self, sl) -> "EventBatch":
        return EventBatch(self.lplus[sl], self.lminus[sl], self.frame, self.seed,
                          None if self.m_gev is None else self.m_gev[sl],
                          None if self.cos_theta is None else self.cos_theta[sl],
                          self.truth, self.source)


@dataclass(frozen=True)
class ProductionSource:
    """Event source drawing kinematics from a luminosity table."""

    lumi: LuminosityTable
    m_cut: float
    m_t: float = M_T_DEFAULT


def decay_pdf(state: TwoQubitState, lplus, lminus):
    """Joint angular density, vectorised over leading axes of (.., 3) inputs."""
    require_physical(state)
    lp = np.asarray(lplus, dtype=float)
    lm = np.asarray(lminus, dtype=float)
    val = (1.0 + lp @ state.bplus - lm @ state.bminus
           - np.einsum("...i,ij,...j->...", lp, state.corr, lm))
    val = np.where(val < 0.0, np.where(val > -1e-12, 0.0, val), val)
    out = val / (4.0 * np.pi) ** 2
    return float(out) if out.ndim == 0 else out


def marginal_pdf(state: TwoQubitState, party: str, l):
    """Single-lepton angular density (1 +/- B.l)/(4 pi)."""
    l = np.asarray(l, dtype=float)
    if party in ("+", "plus", "A"):
        val = 1.0 + l @ state.bplus
    elif party in ("-", "minus", "B"):
        val = 1.0 - l @ state.bminus
    else:
        raise ValueError("party must be '+' or '-'")
    out = val / (4.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Philox stream for one block; streams are independent across blocks."""
    return np.random.Generator(np.random.Philox(key=np.array(
        [np.uint64(seed), np.uint64(block)], dtype=np.uint64)))


def _sigma_max(corr) -> np.ndarray:
    C = np.asarray(corr, dtype=float)
    if C.ndim == 2:
        return np.linalg.svd(C, compute_uv=False)[0]
    return np.sqrt(np.linalg.eigvalsh(np.swapaxes(C, -1, -2) @ C)[..., -1])


def _rejection_sample(bp, bm, corr, rng, n):
    """Accepted (l+, l-) pairs; corr may be one shared (3,3) matrix or a
    per-event (n,3,3) stack (the latter with vanishing polarizations)."""
    per_event = np.asarray(corr).ndim == 3
    env = 1.0 + np.linalg.norm(bp) + np.linalg.norm(bm) + _sigma_max(corr)
    lp_out = np.empty((n, 3))
    lm_out = np.empty((n, 3))
    todo = np.arange(n)
    while todo.size:
        k = todo.size
        lp = random_unit_vectors(rng, k)
        lm = random_unit_vectors(rng, k)
        if per_event:
            val = 1.0 + lp @ bp - lm @ bm - np.einsum("ni,nij,nj->n", lp, corr[todo], lm)
            e = env[todo]
        else:
            val = 1.0 + lp @ bp - lm @ bm - np.einsum("ni,ij,nj->n", lp, corr, lm)
            e = env
        val = np.clip(val, 0.0, None)
        if np.any(val > e + 1e-10):
            raise RuntimeError("rejection envelope violated; state is unphysical")
        accept = rng.uniform(0.0, 1.0, size=k) * e < val
        hit = todo[accept]
        lp_out[hit] = lp[accept]
        lm_out[hit] = lm[accept]
        todo = todo[~accept]
    return lp_out, lm_out


def sample_decay(state: TwoQubitState, rng: np.random.Generator, n: int = 1):
    """n decay direction pairs from a fixed state."""
    require_physical(state)
    return _rejection_sample(state.bplus, state.bminus, state.corr, rng, n)


def _kinematic_sampler(src: ProductionSource):
    """Tabulated inverse-transform sampler for (channel, M, cos theta)."""
    lo = max(2.0 * src.m_t, float(src.lumi.masses[0]))
    hi = float(src.m_cut)
    if not 2.0 * src.m_t < hi <= src.lumi.masses[-1] + 1e-9:
        raise ValueError("mass cut outside (2 m_t, max table mass]")
    mgrid = np.linspace(lo, hi, 4097)
    wg = src.lumi.channel_weight(GG, mgrid)
    wq = src.lumi.channel_weight(QQBAR, mgrid)

    def cdf(w):
        c = np.concatenate([[0.0], np.cumsum((w[1:] + w[:-1]) * np.diff(mgrid) / 2.0)])
        return c

    cg, cq = cdf(wg), cdf(wq)
    tot_g, tot_q = cg[-1], cq[-1]
    if tot_g + tot_q <= 0.0:
        raise ValueError("luminosity table has no support below the cut")
    zgrid = np.linspace(-1.0, 1.0, _Z_GRID)

    def _invert_z(me_fn, beta, uz):
        out = np.empty(len(beta))
        dz = zgrid[1] - zgrid[0]
        for a in range(0, len(beta), 4096):
            b = beta[a:a + 4096, None]
            dens = me_fn(b, zgrid[None, :])
            c2 = np.cumsum((dens[:, 1:] + dens[:, :-1]) * (dz / 2.0), axis=1)
            c2 /= c2[:, -1:]
            u = uz[a:a + 4096, None]
            idx = (c2 < u).sum(axis=1)          # first bin with cdf >= u
            c_lo = np.where(idx > 0, np.take_along_axis(
                c2, np.maximum(idx - 1, 0)[:, None], axis=1)[:, 0], 0.0)
            c_hi = np.take_along_axis(c2, np.minimum(idx, _Z_GRID - 2)[:, None], axis=1)[:, 0]
            frac = np.where(c_hi > c_lo, (u[:, 0] - c_lo) / (c_hi - c_lo), 0.0)
            out[a:a + 4096] = zgrid[idx] + np.clip(frac, 0.0, 1.0) * dz
        return out

    def sample(rng, k):
        u = rng.uniform(0.0, 1.0, size=k) * (tot_g + tot_q)
        uz = rng.uniform(0.0, 1.0, size=k)
        is_gg = u < tot_g
        m = np.empty(k)
        z = np.empty(k)
        for sel, c, off, me_fn in ((is_gg, cg, 0.0, _gg_me),
                                   (~is_gg, cq, tot_g, _qq_me)):
            if not np.any(sel):
                continue
            m[sel] = np.interp(u[sel] - off, c, mgrid)
            z[sel] = _invert_z(me_fn, beta_from_mass(m[sel], src.m_t), uz[sel])
        return np.where(is_gg, 0, 1), m, z

    return sample


def generate_events(source, n: int, seed: int, frame: str = HELICITY,
                    block_size: int = BLOCK_SIZE) -> EventBatch:
    """Simulate n dileptonic events from a fixed state or a production model."""
    if n < 1:
        raise ValueError("need at least one event")
    if frame not in (HELICITY, BEAM):
        raise ValueError(f"unknown frame {frame!r}")
    fixed = isinstance(source, TwoQubitState)
    if fixed:
        require_physical(source)
        if frame != source.frame:
            raise ValueError("fixed-state events are recorded in the state's frame")
    elif not isinstance(source, ProductionSource):
        raise TypeError("source must be a TwoQubitState or ProductionSource")

    sampler = None if fixed else _kinematic_sampler(source)
    blocks = []
    for b0 in range(0, n, block_size):
        k = min(block_size, n - b0)
        rng = block_rng(seed, b0 // block_size)
        if fixed:
            lp, lm = sample_decay(source, rng, k)
            blocks.append((lp, lm, None, None))
        else:
            ch, m, z = sampler(rng, k)
            beta = beta_from_mass(m, source.m_t)
            C = np.empty((k, 3, 3))
            for code, name in ((0, GG), (1, QQBAR)):
                sel = ch == code
                if np.any(sel):
                    C[sel] = correlation_matrices(name, beta[sel], z[sel])
            zero = np.zeros(3)
            lp, lm = _rejection_sample(zero, zero, C, rng, k)
            if frame == BEAM:
                s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
                phi = rng.uniform(0.0, 2.0 * np.pi, size=k)
                cp, sp = np.cos(phi), np.sin(phi)
                # Rz(phi) @ (helicity -> beam at theta), rows stacked per event
                R = np.empty((k, 3, 3))
                R[:, 0, 0] = cp * s
                R[:, 0, 1] = -sp
                R[:, 0, 2] = -cp * z
                R[:, 1, 0] = sp * s
                R[:, 1, 1] = cp
                R[:, 1, 2] = -sp * z
                R[:, 2, 0] = z
                R[:, 2, 1] = 0.0
                R[:, 2, 2] = s
                lp = np.einsum("nij,nj->ni", R, lp)
                lm = np.einsum("nij,nj->ni", R, lm)
            blocks.append((lp, lm, m, z))

    lplus = np.concatenate([b[0] for b in blocks])
    lminus = np.concatenate([b[1] for b in blocks])
    if fixed:
        return EventBatch(lplus, lminus, frame, seed, None, None, source, "fixed")
    m = np.concatenate([b[2] for b in blocks])
    z = np.concatenate([b[3] for b in blocks])
    return EventBatch(lplus, lminus, frame, seed, m, z, None, "production")


# ---------------------------------------------------------------------------
# event CSV


def write_events_csv(batch: EventBatch, path, extra_header=()):
    """Write the batch as CSV; `# key = value` header records the provenance."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# generator = ttqcorr {__version__}\n")
        fh.write(f"# seed = {batch.seed}\n")
        fh.write(f"# n = {len(batch)}\n")
        fh.write(f"# frame = {batch.frame}\n")
        fh.write(f"# source = {batch.source}\n")
        if batch.truth is not None:
            st = batch.truth
            fh.write("# truth_bplus = " + ",".join(f"{v:.17g}" for v in st.bplus) + "\n")
            fh.write("# truth_bminus = " + ",".join(f"{v:.17g}" for v in st.bminus) + "\n")
            fh.write("# truth_corr = " + ",".join(f"{v:.17g}" for v in st.corr.ravel()) + "\n")
        for line in extra_header:
            fh.write(f"# {line}\n")
        fh.write("event_id,m_gev,cos_theta,frame,lp_x,lp_y,lp_z,lm_x,lm_y,lm_z\n")
        has_kin = batch.m_gev is not None
        for i in range(len(batch)):
            m = f"{batch.m_gev[i]:.17g}" if has_kin else ""
            z = f"{batch.cos_theta[i]:.17g}" if has_kin else ""
            lp = batch.lplus[i]
            lm = batch.lminus[i]
            fh.write(f"{i},{m},{z},{batch.frame},"
                     f"{lp[0]:.17g},{lp[1]:.17g},{lp[2]:.17g},"
                     f"{lm[0]:.17g},{lm[1]:.17g},{lm[2]:.17g}\n")


def read_events_csv(path) -> EventBatch:
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
                header_seen = True
                continue
            rows.append(line.split(","))
    if not rows:
        raise ValueError("no events in file")
    frame = rows[0][3]
    lp = np.array([[float(r[4]), float(r[5]), float(r[6])] for r in rows])
    lm = np.array([[float(r[7]), float(r[8]), float(r[9])] for r in rows])
    has_kin = rows[0][1] != ""
    m = np.array([float(r[1]) for r in rows]) if has_kin else None
    z = np.array([float(r[2]) for r in rows]) if has_kin else None
    truth = None
    if "truth_corr" in meta:
        def vec(key):
            return np.array([float(v) for v in meta[key].split(",")])

        truth = TwoQubitState(vec("truth_bplus"), vec("truth_bminus"),
                              vec("truth_corr").reshape(3, 3), frame)
    return EventBatch(lp, lm, frame, int(meta.get("seed", 0)), m, z, truth,
                      meta.get("source", "fixed"))
