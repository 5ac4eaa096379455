"""CP-violation witnesses from discord and steering-ellipsoid asymmetries.

Standard-Model production at this order gives B+ = B- and C = C^T, so every
quantity below vanishes identically on symmetric states; a non-zero value
signals CP-odd new physics.  A model-agnostic injector perturbs a state by
(eps_b, eps_c) with a bisection back-off to stay physical.
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .measures import discord, steering_ellipsoid
from .states import TwoQubitState, require_physical, validate_state


@dataclass(frozen=True)
class EllipsoidAsymmetry:
    center_asymmetry: np.ndarray
    semiaxis_asymmetry: np.ndarray
    orientation_angle: float
    degenerate: bool = False


@dataclass(frozen=True)
class WitnessReport:
    delta_discord: float
    center_asymmetry: np.ndarray
    semiaxis_asymmetry: np.ndarray
    orientation_angle: float
    b_asymmetry: np.ndarray
    c_antisymmetry_norm: float


@dataclass(frozen=True)
class InjectionResult:
    state: TwoQubitState
    scale: float


def discord_asymmetry(state: TwoQubitState) -> float:
    """Discord difference between the two parties (zero for CP-even states).

    For symmetric states the two minimisations run on identical inputs, so
    the asymmetry vanishes exactly, not just to minimiser tolerance.
    """
    return discord(state, "A").value - discord(state, "B").value


def _principal_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Misalignment of the major principal axes, blind to axis sign."""
    c = abs(float(r1[:, 0] @ r2[:, 0]))
    return float(np.arccos(np.clip(c, 0.0, 1.0)))


def ellipsoid_asymmetry(state: TwoQubitState) -> EllipsoidAsymmetry:
    """Differences of the two parties' steering ellipsoids."""
    ea = steering_ellipsoid(state, "A")
    eb = steering_ellipsoid(state, "B")
    degenerate = ea.degenerate or eb.degenerate
    if degenerate:
        valid = (ea.semiaxes > 1e-12) & (eb.semiaxes > 1e-12)
        semi = np.where(valid, ea.semiaxes - eb.semiaxes, 0.0)
        angle = 0.0
    else:
        semi = ea.semiaxes - eb.semiaxes
        angle = _principal_angle(ea.orientation, eb.orientation)
    return EllipsoidAsymmetry(ea.center - eb.center, semi, angle, degenerate)


def inject_cp_violation(state: TwoQubitState, eps_b, eps_c) -> InjectionResult:
    """Perturb by B+ -> B+ + eps_b, B- -> B- - eps_b, C -> C + eps_c.

    If the full perturbation leaves the physical set, it is scaled down by
    bisection to the largest physical fraction (scale 0 at a pure state).
    """
    require_physical(state)
    eps_b = np.asarray(eps_b, dtype=float).reshape(3)
    eps_c = np.asarray(eps_c, dtype=float).reshape(3, 3)
    if np.max(np.abs(eps_c + eps_c.T)) > 1e-12:
        raise ValueError("eps_c must be antisymmetric")

    def perturbed(scale):
        return TwoQubitState(state.bplus + scale * eps_b,
                             state.bminus - scale * eps_b,
                             state.corr + scale * eps_c, state.frame)

    if validate_state(perturbed(1.0)).is_physical:
        return InjectionResult(perturbed(1.0), 1.0)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if validate_state(perturbed(mid)).is_physical:
            lo = mid
        else:
            hi = mid
    return InjectionResult(perturbed(lo), lo)


def antisymmetric_matrix(a_xy: float, a_xz: float, a_yz: float) -> np.ndarray:
    return np.array([
        [0.0, a_xy, a_xz],
        [-a_xy, 0.0, a_yz],
        [-a_xz, -a_yz, 0.0],
    ])


def witness_report(state: TwoQubitState) -> WitnessReport:
    """All CP witnesses of a state or of the helicity-integrated record."""
    ea = ellipsoid_asymmetry(state)
    return WitnessReport(
        delta_discord=discord_asymmetry(state),
        center_asymmetry=ea.center_asymmetry,
        semiaxis_asymmetry=ea.semiaxis_asymmetry,
        orientation_angle=ea.orientation_angle,
        b_asymmetry=state.bplus - state.bminus,
        c_antisymmetry_norm=float(np.linalg.norm(state.corr - state.corr.T)),
    )


def write_witness_csv(report: WitnessReport, path, header=()):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# generator = ttqcorr {__version__}\n")
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("key,value\n")
        fh.write(f"delta_discord,{report.delta_discord:.17g}\n")
        for i, ax in enumerate("xyz"):
            fh.write(f"center_asymmetry_{ax},{report.center_asymmetry[i]:.17g}\n")
        for i in range(3):
            fh.write(f"semiaxis_asymmetry_{i},{report.semiaxis_asymmetry[i]:.17g}\n")
        fh.write(f"orientation_angle,{report.orientation_angle:.17g}\n")
        for i, ax in enumerate("xyz"):
            fh.write(f"b_asymmetry_{ax},{report.b_asymmetry[i]:.17g}\n")
        fh.write(f"c_antisymmetry_norm,{report.c_antisymmetry_norm:.17g}\n")
