"""State, conditional-state, discord and ellipsoid estimation from events.

All estimators are plain sample moments of the angular distribution: the
factors (3, -3, -9) convert direction averages into Bloch and correlation
coefficients.  Conditional quantities select events whose lepton lies in a
cone of half-angle alpha around -n, which carries an O(alpha^2) smearing
bias; it is documented, not corrected.
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .decay import EventBatch
from .measures import SteeringEllipsoid, _conditional_entropy_term, _support_ellipsoid, fit_quadric
from .sphere import angles_to_unit, fibonacci_sphere, unit_to_angles
from .states import TwoQubitState, qubit_entropy, to_density_matrix, von_neumann_entropy

_CHUNK = 8192


class InsufficientStatistics(RuntimeError):
    """Too few events for the requested estimate."""


@dataclass(frozen=True)
class StateEstimate:
    state: TwoQubitState
    std_errors: np.ndarray     # 15 entries: B+, B-, C row-major
    n_events: int


@dataclass(frozen=True)
class ConditionalEstimate:
    direction: np.ndarray
    cone_alpha: float
    bloch: np.ndarray
    prob: float
    n_selected: int


def estimate_state(batch: EventBatch) -> StateEstimate:
    """Moment tomography of the full state from an event batch."""
    n = len(batch)
    if n < 100:
        raise InsufficientStatistics(f"need at least 100 events, got {n}")
    lp, lm = batch.lplus, batch.lminus
    per_bp = 3.0 * lp
    per_bm = -3.0 * lm
    per_c = -9.0 * lp[:, :, None] * lm[:, None, :]
    bp = per_bp.mean(axis=0)
    bm = per_bm.mean(axis=0)
    C = per_c.mean(axis=0)
    errs = np.concatenate([
        per_bp.std(axis=0, ddof=1) / np.sqrt(n),
        per_bm.std(axis=0, ddof=1) / np.sqrt(n),
        (per_c.reshape(n, 9).std(axis=0, ddof=1) / np.sqrt(n)),
    ])
    return StateEstimate(TwoQubitState(bp, bm, C, batch.frame), errs, n)


def conditional_sweep(batch: EventBatch, dirs: np.ndarray, alpha: float):
    """Cone-selected conditional estimates for directions dirs and their
    antipodes.

    Returns (counts+, blochs+, probs+, counts-, blochs-, probs-): the '+'
    entries estimate the conditional state after measuring +n (lepton within
    alpha of -n), the '-' entries the -n outcome.
    """
    if not 0.0 < alpha <= np.pi / 4.0:
        raise ValueError("alpha must lie in (0, pi/4]")
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    n_ev = len(batch)
    cos_a = np.cos(alpha)
    counts_p = np.zeros(len(dirs), dtype=np.int64)
    counts_m = np.zeros(len(dirs), dtype=np.int64)
    sums_p = np.zeros((len(dirs), 3))
    sums_m = np.zeros((len(dirs), 3))
    for a in range(0, n_ev, _CHUNK):
        lp = batch.lplus[a:a + _CHUNK]
        lm = batch.lminus[a:a + _CHUNK]
        dots = lm @ dirs.T
        mask_p = dots <= -cos_a           # lepton near -n  -> outcome +n
        mask_m = dots >= cos_a
        counts_p += mask_p.sum(axis=0)
        counts_m += mask_m.sum(axis=0)
        sums_p += mask_p.T.astype(float) @ lp
        sums_m += mask_m.T.astype(float) @ lp
    solid = 1.0 - cos_a
    with np.errstate(invalid="ignore", divide="ignore"):
        blochs_p = 3.0 * sums_p / counts_p[:, None]
        blochs_m = 3.0 * sums_m / counts_m[:, None]
    probs_p = counts_p / n_ev / solid
    probs_m = counts_m / n_ev / solid
    return counts_p, blochs_p, probs_p, counts_m, blochs_m, probs_m


def conditional_bloch(batch: EventBatch, n, alpha: float = 0.2) -> ConditionalEstimate:
    """Conditional Bloch vector of the top spin after measuring the antitop
    along n, estimated from the cone around -n."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    cp, bp, pp, *_ = conditional_sweep(batch, n[None, :], alpha)
    if cp[0] < 50:
        raise InsufficientStatistics(
            f"only {int(cp[0])} events in the cone; need at least 50")
    return ConditionalEstimate(n, float(alpha), bp[0], float(pp[0]), int(cp[0]))


def _entropy_of_estimate(est: StateEstimate) -> float:
    """Entropy of the reconstructed matrix, clamping negative eigenvalues."""
    eigs = np.linalg.eigvalsh(to_density_matrix(est.state))
    eigs = np.clip(eigs, 0.0, None)
    eigs = eigs / eigs.sum()
    nz = eigs[eigs > 0]
    return float(-np.sum(nz * np.log2(nz)))


def _min_conditional_term(batch, dirs, alpha):
    cp, bp, pp, cm, bm, pm = conditional_sweep(batch, dirs, alpha)
    low = min(int(cp.min()), int(cm.min()))
    if low < 50:
        raise InsufficientStatistics(
            f"a grid cone holds only {low} events; need at least 50")
    terms = pp * qubit_entropy(np.linalg.norm(bp, axis=1)) \
        + pm * qubit_entropy(np.linalg.norm(bm, axis=1))
    return float(terms.min()), int(np.argmin(terms))


def direct_discord(batch: EventBatch, grid_size: int = 1000, alpha: float = 0.2,
                   extrapolate: bool = False) -> float:
    """Discord from its definition, using only measured angular distributions.

    The conditional-entropy term is minimised over a fixed Fibonacci grid;
    no continuous refinement is attempted on noisy estimates.  With
    ``extrapolate`` the cone bias is Richardson-extrapolated from (alpha,
    alpha/2).
    """
    est = estimate_state(batch)
    s_b = float(qubit_entropy(np.linalg.norm(est.state.bminus)))
    s_rho = _entropy_of_estimate(est)
    dirs = fibonacci_sphere(grid_size)
    term, _ = _min_conditional_term(batch, dirs, alpha)
    if extrapolate:
        term_half, _ = _min_conditional_term(batch, dirs, alpha / 2.0)
        term = (4.0 * term_half - term) / 3.0
    return s_b - s_rho + term


def direct_discord_with_error(batch: EventBatch, grid_size: int = 1000,
                              alpha: float = 0.2, extrapolate: bool = False,
                              n_splits: int = 10):
    """Direct discord plus a subsampling uncertainty.

    The error is the spread of estimates on n_splits disjoint sub-batches,
    scaled by 1/sqrt(n_splits) under the 1/sqrt(N) variance assumption.
    """
    value = direct_discord(batch, grid_size, alpha, extrapolate)
    n = len(batch)
    edges = np.linspace(0, n, n_splits + 1, dtype=int)
    subs = [direct_discord(batch.subset(slice(a, b)), grid_size, alpha, extrapolate)
            for a, b in zip(edges[:-1], edges[1:])]
    sigma = float(np.std(subs, ddof=1) / np.sqrt(n_splits))
    return value, sigma


def direct_discord_exact(state: TwoQubitState, grid_size: int = 1000,
                         refine: bool = True) -> float:
    """Infinite-statistics limit: exact conditional states on the same grid.

    With ``refine`` the best grid direction is polished, which reproduces the
    discord minimiser; without it the value carries the grid resolution.
    """
    from scipy import optimize

    s_b = float(qubit_entropy(np.linalg.norm(state.bminus)))
    s_rho = von_neumann_entropy(to_density_matrix(state))
    dirs = fibonacci_sphere(grid_size)
    vals = _conditional_entropy_term(state.bplus, state.bminus, state.corr, dirs)
    best = float(vals.min())
    if refine:
        x0 = np.array(unit_to_angles(dirs[int(np.argmin(vals))]))

        def obj(ang):
            n = angles_to_unit(ang[0], ang[1])
            return float(_conditional_entropy_term(
                state.bplus, state.bminus, state.corr, n[None, :])[0])

        res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-12, "maxfev": 400})
        best = min(best, float(res.fun))
    return max(s_b - s_rho + best, 0.0)


def reconstruct_ellipsoid(batch: EventBatch, grid_size: int = 1000,
                          alpha: float = 0.2):
    """Steering ellipsoid of the top from swept conditional estimates.

    Returns (ellipsoid, records, rms_residual); records is an array with one
    row per direction: n_x, n_y, n_z, p_hat, bx, by, bz, n_selected.
    """
    dirs = fibonacci_sphere(grid_size)
    cp, bp, pp, *_ = conditional_sweep(batch, dirs, alpha)
    low = int(cp.min())
    if low < 50:
        raise InsufficientStatistics(
            f"a grid cone holds only {low} events; need at least 50")
    records = np.column_stack([dirs, pp, bp, cp.astype(float)])
    try:
        center, semiaxes, orientation, rms = fit_quadric(bp)
        ell = SteeringEllipsoid(center, semiaxes, orientation, False)
    except ValueError:
        ell = _support_ellipsoid(bp)
        rms = float("nan")
    return ell, records, rms


def sweep_ellipsoid_exact(state: TwoQubitState, grid_size: int = 1000):
    """Noiseless sweep: fit the quadric to exact conditional Bloch vectors."""
    from .measures import steered_points

    pts = steered_points(state, fibonacci_sphere(grid_size))
    center, semiaxes, orientation, rms = fit_quadric(pts)
    return SteeringEllipsoid(center, semiaxes, orientation, False), rms


# ---------------------------------------------------------------------------
# reports


def write_state_report(est: StateEstimate, path, header=()):
    labels = (["bplus_x", "bplus_y", "bplus_z", "bminus_x", "bminus_y", "bminus_z"]
              + [f"c_{i}{j}" for i in "xyz" for j in "xyz"])
    vals = est.state.coefficients()
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# generator = ttqcorr {__version__}\n")
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("key,value,std_error\n")
        fh.write(f"n_events,{est.n_events},\n")
        fh.write(f"frame,{est.state.frame},\n")
        for lbl, v, e in zip(labels, vals, est.std_errors):
            fh.write(f"{lbl},{v:.17g},{e:.17g}\n")


def write_ellipsoid_report(path, ellipsoid: SteeringEllipsoid, records, rms,
                           header=()):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# generator = ttqcorr {__version__}\n")
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("key,value\n")
        for i, name in enumerate(("center_x", "center_y", "center_z")):
            fh.write(f"{name},{ellipsoid.center[i]:.17g}\n")
        for i in range(3):
            fh.write(f"semiaxis_{i},{ellipsoid.semiaxes[i]:.17g}\n")
        for i in range(3):
            for j in range(3):
                fh.write(f"orientation_{i}{j},{ellipsoid.orientation[i, j]:.17g}\n")
        fh.write(f"degenerate,{int(ellipsoid.degenerate)}\n")
        fh.write(f"fit_rms,{rms:.17g}\n")
        if records is not None:
            fh.write("n_x,n_y,n_z,p_hat,bx,by,bz,n_selected\n")
            for row in records:
                fh.write(",".join(f"{v:.17g}" for v in row[:7])
                         + f",{int(row[7])}\n")
