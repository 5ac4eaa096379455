"""Deterministic grids and quadrature on the unit sphere."""
from __future__ import annotations

import numpy as np

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform points on the unit sphere, shape (n, 3)."""
    if n < 1:
        raise ValueError("need at least one point")
    idx = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * idx / n
    phi = 2.0 * np.pi * idx / _GOLDEN
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def fibonacci_hemisphere(n: int) -> np.ndarray:
    """n quasi-uniform points with z > 0 (the upper half of a 2n-point grid)."""
    pts = fibonacci_sphere(2 * n)
    return pts[pts[:, 2] > 0.0]


def gauss_legendre_sphere(n_cos: int, n_phi: int):
    """Product quadrature: Gauss-Legendre in cos(theta) x uniform in phi.

    Returns (points (N,3), weights (N,)) with sum(weights) = 4*pi.
    """
    x, w = np.polynomial.legendre.leggauss(n_cos)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    st = np.sqrt(1.0 - x * x)
    cx = np.cos(phi)
    sx = np.sin(phi)
    pts = np.empty((n_cos * n_phi, 3))
    pts[:, 0] = np.outer(st, cx).ravel()
    pts[:, 1] = np.outer(st, sx).ravel()
    pts[:, 2] = np.repeat(x, n_phi)
    weights = np.repeat(w * wphi, n_phi)
    return pts, weights


def sphere_integral(fn, rtol: float = 1e-9, n_cos: int = 64, n_phi: int = 128,
                    max_doublings: int = 5) -> float:
    """Integrate fn(points) -> values over the sphere, doubling nodes until
    the relative change is below rtol."""
    pts, w = gauss_legendre_sphere(n_cos, n_phi)
    val = float(np.dot(w, fn(pts)))
    for _ in range(max_doublings):
        n_cos *= 2
        n_phi *= 2
        pts, w = gauss_legendre_sphere(n_cos, n_phi)
        new = float(np.dot(w, fn(pts)))
        if abs(new - val) <= rtol * max(1.0, abs(new)):
            return new
        val = new
    return val


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent uniform directions, shape (n, 3)."""
    z = rng.uniform(-1.0, 1.0, size=n)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def unit_to_angles(n: np.ndarray):
    """(theta, phi) spherical angles of a unit vector."""
    return float(np.arccos(np.clip(n[2], -1.0, 1.0))), float(np.arctan2(n[1], n[0]))


def angles_to_unit(theta: float, phi: float) -> np.ndarray:
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
