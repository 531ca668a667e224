"""Shared quadrature helpers: power-law ray integrals, Gauss rules, samplers.

Everything here is deterministic; adaptive routines wrap scipy.integrate.quad
with explicit singularity handling so callers never hand QUADPACK an endpoint
singularity it cannot see.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.stats import qmc

__all__ = [
    "power_ray_integral",
    "power_ray_integral_vec",
    "sphere_area",
    "gauss_nodes",
    "tensor_gauss",
    "halton_ball",
    "quad_with_algebraic_origin",
]


def power_ray_integral(p: float, a: float, b: float) -> float:
    """Exact ``int_a^b s^p ds`` for 0 <= a <= b <= inf, log branch at p = -1."""
    if b <= a:
        return 0.0
    if math.isinf(b):
        if p >= -1.0:
            return math.inf
        return -(a ** (p + 1.0)) / (p + 1.0)
    if abs(p + 1.0) < 1e-13:
        if a == 0.0:
            return math.inf
        return math.log(b / a)
    hi = b ** (p + 1.0)
    lo = 0.0 if a == 0.0 else a ** (p + 1.0)
    if a == 0.0 and p < -1.0:
        return math.inf
    return (hi - lo) / (p + 1.0)


def power_ray_integral_vec(p: float, a, b):
    """Vectorized power_ray_integral; b >= 1e250 is treated as infinity."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if abs(p + 1.0) < 1e-13:
        out = np.log(np.maximum(b, a) / a)
        return np.where(b > a, out, 0.0)
    apow = a ** (p + 1.0)
    if p < -1.0:
        bpow = np.where(b >= 1e250, 0.0, np.minimum(b, 1e249) ** (p + 1.0))
    else:
        bpow = b ** (p + 1.0)
    out = (bpow - apow) / (p + 1.0)
    return np.where(b > a, out, 0.0)


def sphere_area(d: int) -> float:
    """Surface measure of S^{d-1}; equals 2 for d = 1 (two points)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@lru_cache(maxsize=64)
def gauss_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def tensor_gauss(lo, hi, order: int):
    """Tensor Gauss-Legendre rule on a box; lo, hi are length-d sequences.

    Returns (points (N, d), weights (N,)).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, w = gauss_nodes(order)
    pts_1d = []
    wts_1d = []
    for a, b in zip(lo, hi):
        pts_1d.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wts_1d.append(0.5 * (b - a) * w)
    grids = np.meshgrid(*pts_1d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*wts_1d, indexing="ij")
    wts = np.ones(pts.shape[0])
    for g in wgrids:
        wts = wts * g.ravel()
    return pts, wts


def halton_ball(n: int, d: int, radius: float = 1.0, center=None):
    """Deterministic low-discrepancy sample of the ball B_radius(center)."""
    eng = qmc.Halton(d=d, scramble=False, seed=0)
    pts = []
    # rejection from the cube; Halton is deterministic so this is reproducible
    while len(pts) < n:
        cand = 2.0 * eng.random(4 * n) - 1.0
        keep = np.sum(cand**2, axis=1) < 1.0
        pts.extend(cand[keep])
    pts = np.asarray(pts[:n]) * radius
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def quad_with_algebraic_origin(f, power: float, a: float, b: float,
                               rtol: float = 1e-10, limit: int = 200) -> float:
    """Adaptive ``int_a^b f(s) s^power ds`` with a <= 0-endpoint singularity.

    ``power`` may be in (-1, 0); the substitution s = t^(1/(1+power)) removes
    the singularity at s = 0 when a == 0.  For a > 0 plain quad is used.
    """
    if b <= a:
        return 0.0
    if a > 0.0 or power >= 0.0:
        val, _ = integrate.quad(lambda s: f(s) * s**power, a, b,
                                limit=limit, epsrel=rtol, epsabs=0.0)
        return val
    q = 1.0 + power
    # s = t**(1/q), ds = (1/q) t^{1/q - 1} dt, s^power dt-weight cancels exactly
    val, _ = integrate.quad(lambda t: f(t ** (1.0 / q)) / q, 0.0, b**q,
                            limit=limit, epsrel=rtol, epsabs=0.0)
    return val
