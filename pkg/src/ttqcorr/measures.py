"""Quantum correlation measures for two-qubit states.

Implements the full hierarchy: discord (numerical minimisation plus closed
forms for unpolarised states), entanglement via the partial transpose,
steerability via the spherical integral criterion and its boundary curve,
Bell nonlocality via the two largest eigenvalues of C^T C, and the steering
ellipsoid geometry.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .sphere import angles_to_unit, fibonacci_hemisphere, fibonacci_sphere, sphere_integral, unit_to_angles
from .states import (
    TwoQubitState,
    binary_entropy,
    qubit_entropy,
    require_physical,
    t_state_eigenvalues,
    to_density_matrix,
    von_neumann_entropy,
)

CLASSIFY_TOL = 1e-9


class ConsistencyError(RuntimeError):
    """Numerical classification violated the correlation hierarchy."""


class HierarchyClass(enum.Enum):
    CLASSICAL = "classical"
    DISCORDANT_SEPARABLE = "discordant_separable"
    ENTANGLED_UNSTEERABLE = "entangled_unsteerable"
    STEERABLE_LOCAL = "steerable_local"
    BELL_NONLOCAL = "bell_nonlocal"


@dataclass(frozen=True)
class DiscordResult:
    value: float
    optimal_direction: np.ndarray
    iterations: int


@dataclass(frozen=True)
class EntanglementResult:
    entangled: bool
    negativity: float


@dataclass(frozen=True)
class BellResult:
    nonlocal_: bool
    horodecki: float


@dataclass(frozen=True)
class SteeringEllipsoid:
    center: np.ndarray
    semiaxes: np.ndarray          # descending
    orientation: np.ndarray       # columns are principal axes, det = +1
    degenerate: bool = False


def _conditional_entropy_term(bplus, bminus, corr, dirs):
    """Measurement-averaged conditional entropy for directions dirs (N, 3)."""
    dirs = np.atleast_2d(dirs)
    x = dirs @ bminus
    cn = dirs @ corr.T
    pp = (1.0 + x) / 2.0
    pm = (1.0 - x) / 2.0
    out = np.zeros(len(dirs))
    for p, sgn in ((pp, 1.0), (pm, -1.0)):
        ok = p > 1e-15
        bl = (bplus[None, :] + sgn * cn[ok]) / (2.0 * p[ok, None])
        out[ok] += p[ok] * qubit_entropy(np.linalg.norm(bl, axis=1))
    return out


def discord(state: TwoQubitState, party: str = "A", grid_size: int = 128,
            tol: float = 1e-10) -> DiscordResult:
    """Quantum discord of one party, minimised over projective measurements.

    The minimisation runs a Fibonacci multistart on a hemisphere (the
    objective is antipodally symmetric) followed by Nelder-Mead refinement
    of the best seeds in spherical angles.
    """
    require_physical(state)
    st = state if party == "A" else state.swapped() if party == "B" else None
    if st is None:
        raise ValueError("party must be 'A' or 'B'")
    bp, bm, C = st.bplus, st.bminus, st.corr

    s_b = float(qubit_entropy(np.linalg.norm(bm)))
    s_rho = von_neumann_entropy(to_density_matrix(st))

    seeds = fibonacci_hemisphere(grid_size)
    vals = _conditional_entropy_term(bp, bm, C, seeds)
    evals = len(seeds)
    order = np.argsort(vals)

    def objective(ang):
        n = angles_to_unit(ang[0], ang[1])
        return float(_conditional_entropy_term(bp, bm, C, n[None, :])[0])

    best_val = float(vals[order[0]])
    best_dir = seeds[order[0]]
    for idx in order[:4]:
        x0 = np.array(unit_to_angles(seeds[idx]))
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": tol,
                                         "maxfev": 400, "disp": False})
        evals += res.nfev
        if res.fun < best_val:
            best_val = float(res.fun)
            best_dir = angles_to_unit(res.x[0], res.x[1])
    value = max(s_b - s_rho + best_val, 0.0)
    return DiscordResult(value, np.asarray(best_dir), evals)


def discord_t_state(c1: float, c2: float, c3: float) -> float:
    """Closed-form discord of the T-state with diagonal correlations.

    The optimal measurement is along the axis with the largest |c_i|.
    """
    lam = t_state_eigenvalues(c1, c2, c3)
    if lam.min() < -1e-10:
        raise ValueError("correlation triple is not a physical T-state")
    lam = np.clip(lam, 0.0, None)
    s_rho = float(-np.sum(lam[lam > 0] * np.log2(lam[lam > 0])))
    c_max = max(abs(c1), abs(c2), abs(c3))
    return 1.0 - s_rho + binary_entropy((1.0 + c_max) / 2.0)


def qqbar_discord_closed_form(beta: float, theta: float) -> float:
    """Discord of the quark-antiquark production state at (beta, theta)."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    if not 0.0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    x = 1.0 / (2.0 - beta**2 * np.sin(theta) ** 2)
    return 1.0 - binary_entropy(x)


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Partial transpose over the second qubit."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    return r.transpose(0, 3, 2, 1).reshape(4, 4)


def is_entangled(state: TwoQubitState) -> EntanglementResult:
    """Peres-Horodecki test; for two qubits a negative partial transpose is
    necessary and sufficient."""
    require_physical(state)
    eigs = np.linalg.eigvalsh(partial_transpose(to_density_matrix(state)))
    negativity = float(-np.sum(eigs[eigs < 0.0]))
    return EntanglementResult(bool(eigs[0] < -1e-10), negativity)


def _asinc(u):
    """arcsin(u)/u, stable at u -> 0."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-6
    safe = np.where(small, 1.0, u)
    out = np.where(small, 1.0 + u * u / 6.0 + 3.0 * u**4 / 40.0,
                   np.arcsin(np.clip(safe, 0.0, 1.0)) / safe)
    return out


def steering_functional(corr: np.ndarray, rtol: float = 1e-9,
                        n_cos: int = 64, n_phi: int = 128,
                        method: str = "reduced") -> float:
    """(1/2pi) * integral over the sphere of |C n|; steerable iff > 1.

    The default path integrates the polar angle analytically in the singular
    frame of C and quadratures only the azimuth, which stays accurate for
    rank-deficient C where the integrand has conical kinks.  method="sphere"
    is the plain Gauss-Legendre x trapezoid product rule on the sphere.
    """
    C = np.asarray(corr, dtype=float)
    if method == "sphere":
        def integrand(pts):
            return np.linalg.norm(pts @ C.T, axis=1)

        return sphere_integral(integrand, rtol=rtol, n_cos=n_cos, n_phi=n_phi) \
            / (2.0 * np.pi)
    if method != "reduced":
        raise ValueError("method must be 'reduced' or 'sphere'")
    a2, b2, c2 = np.linalg.svd(C, compute_uv=False) ** 2
    if a2 <= 0.0:
        return 0.0

    def phi_integral(n):
        x, w = np.polynomial.legendre.leggauss(n)
        phi = (x + 1.0) * (np.pi / 4.0)
        g = a2 * np.cos(phi) ** 2 + b2 * np.sin(phi) ** 2
        sg = np.sqrt(g)
        u = np.sqrt(np.clip(1.0 - np.divide(c2, g, out=np.ones_like(g),
                                            where=g > 0.0), 0.0, 1.0))
        h = np.sqrt(c2) + sg * _asinc(u)
        return float(np.dot(w, h)) * (np.pi / 4.0)

    val = phi_integral(max(n_phi // 2, 32))
    n = max(n_phi, 64)
    for _ in range(5):
        new = phi_integral(n)
        if abs(new - val) <= rtol * max(1.0, abs(new)):
            val = new
            break
        val = new
        n *= 2
    return (2.0 / np.pi) * val


def t_family_steering_functional(c_perp: float, c_z: float) -> float:
    """Closed form of the steering functional for C = diag(cp, cp, cz)."""
    cp, cz = abs(c_perp), abs(c_z)
    if cp < cz:
        raise ValueError("closed form requires |c_perp| >= |c_z|")
    if cp == 0.0:
        return cz
    u2 = 1.0 - (cz / cp) ** 2
    if u2 < 1e-16:
        return cz + cp
    u = np.sqrt(u2)
    return cz + cp * np.arcsin(u) / u


def steering_boundary_cperp(cz: float, tol: float = 1e-10) -> float:
    """|C_perp| value where the T-family crosses the steerability boundary.

    Solves |Cz| + |Cp| arcsin(u)/u = 1 with u = sqrt(1 - Cz^2/Cp^2) for
    |Cp| >= |Cz| by bisection.  No root exists for |cz| >= 1/2.
    """
    cz = abs(cz)
    if cz >= 1.0:
        raise ValueError("|cz| must be < 1")
    lo, hi = cz, 1.0
    f_lo = 2.0 * cz - 1.0
    f_hi = t_family_steering_functional(hi, cz) - 1.0
    if f_lo >= 0.0 or f_hi <= 0.0:
        raise ValueError("steering boundary has no root with |c_perp| >= |cz|")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if t_family_steering_functional(mid, cz) - 1.0 < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def horodecki_parameter(corr: np.ndarray) -> float:
    """Sum of the two largest eigenvalues of C^T C."""
    eigs = np.linalg.eigvalsh(np.asarray(corr).T @ np.asarray(corr))
    return float(eigs[-1] + eigs[-2])


def is_bell_nonlocal(state: TwoQubitState) -> BellResult:
    require_physical(state)
    h = horodecki_parameter(state.corr)
    return BellResult(bool(h > 1.0 + 1e-12), h)


def classify(state: TwoQubitState, tol: float = CLASSIFY_TOL) -> HierarchyClass:
    """Innermost class of the correlation hierarchy satisfied by the state.

    Values within tol of a boundary fall to the outer (weaker) class.
    """
    require_physical(state)
    d = max(discord(state, "A").value, discord(state, "B").value)
    pt_min = float(np.linalg.eigvalsh(partial_transpose(to_density_matrix(state)))[0])
    entangled = pt_min < -tol
    steerable = steering_functional(state.corr) > 1.0 + tol
    bell = horodecki_parameter(state.corr) > 1.0 + tol

    if bell and not steerable:
        raise ConsistencyError("Bell nonlocal but not steerable")
    if steerable and not entangled:
        raise ConsistencyError("steerable but not entangled")
    if entangled and not d > tol:
        raise ConsistencyError("entangled but discord-free")

    if bell:
        return HierarchyClass.BELL_NONLOCAL
    if steerable:
        return HierarchyClass.STEERABLE_LOCAL
    if entangled:
        return HierarchyClass.ENTANGLED_UNSTEERABLE
    if d > tol:
        return HierarchyClass.DISCORDANT_SEPARABLE
    return HierarchyClass.CLASSICAL


def _proper_rotation(axes: np.ndarray) -> np.ndarray:
    out = axes.copy()
    if np.linalg.det(out) < 0.0:
        out[:, 2] = -out[:, 2]
    return out


def fit_quadric(points: np.ndarray):
    """Least-squares ellipsoid through points, with unit-trace quadratic form.

    Returns (center, semiaxes desc, orientation, rms_residual) or raises
    ValueError when the fitted quadratic form is not positive definite.
    """
    P = np.asarray(points, dtype=float)
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    design = np.column_stack([
        x * x - z * z, y * y - z * z, 2 * x * y, 2 * x * z, 2 * y * z,
        x, y, z, np.ones_like(x),
    ])
    rhs = -z * z
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    a1, a2, a4, a5, a6, b1, b2, b3, c0 = sol
    A = np.array([[a1, a4, a5], [a4, a2, a6], [a5, a6, 1.0 - a1 - a2]])
    evals, evecs = np.linalg.eigh(A)
    if evals[0] <= 1e-10 * max(abs(evals[-1]), 1e-30):
        raise ValueError("degenerate quadric: quadratic form not positive definite")
    bvec = np.array([b1, b2, b3])
    center = -0.5 * np.linalg.solve(A, bvec)
    k = float(center @ A @ center - c0)
    if k <= 0.0:
        raise ValueError("degenerate quadric: no real ellipsoid")
    semiaxes = np.sqrt(k / evals[::-1])
    orientation = _proper_rotation(evecs[:, ::-1])
    resid = design @ sol - rhs
    return center, semiaxes, orientation, float(np.sqrt(np.mean(resid**2)))


def _support_ellipsoid(points: np.ndarray) -> SteeringEllipsoid:
    """Degenerate fallback: principal axes of the swept cloud with support radii."""
    center = points.mean(axis=0)
    q = points - center
    _, svals, vt = np.linalg.svd(q, full_matrices=True)
    axes = _proper_rotation(vt.T)
    radii = np.max(np.abs(q @ axes), axis=0)
    order = np.argsort(radii)[::-1]
    radii = radii[order]
    radii[radii < 1e-9] = 0.0
    return SteeringEllipsoid(center, radii, _proper_rotation(axes[:, order]), degenerate=True)


def steered_points(state: TwoQubitState, dirs: np.ndarray) -> np.ndarray:
    """Exact conditional Bloch vectors of party A for measurement directions on B."""
    x = dirs @ state.bminus
    p = (1.0 + x) / 2.0
    if np.any(p <= 1e-14):
        raise ValueError("measuring party is pure along some direction")
    return (state.bplus[None, :] + dirs @ state.corr.T) / (2.0 * p[:, None])


def steering_ellipsoid(state: TwoQubitState, steered: str = "A",
                       n_dirs: int = 1000) -> SteeringEllipsoid:
    """Steering ellipsoid of the steered party.

    With an unpolarised measuring party the ellipsoid is exact: centered on
    the steered party's Bloch vector with semiaxes the singular values of C.
    Otherwise ``n_dirs`` conditional states are swept and a quadric fitted.
    """
    require_physical(state)
    st = state if steered == "A" else state.swapped() if steered == "B" else None
    if st is None:
        raise ValueError("steered must be 'A' or 'B'")
    if np.linalg.norm(st.bminus) < 1e-12:
        u, svals, _ = np.linalg.svd(st.corr)
        degenerate = bool(svals[-1] < 1e-12)
        svals = svals.copy()
        svals[svals < 1e-12] = 0.0
        return SteeringEllipsoid(st.bplus.copy(), svals, _proper_rotation(u), degenerate)
    pts = steered_points(st, fibonacci_sphere(n_dirs))
    try:
        center, semiaxes, orientation, _ = fit_quadric(pts)
    except ValueError:
        return _support_ellipsoid(pts)
    return SteeringEllipsoid(center, semiaxes, orientation, False)
