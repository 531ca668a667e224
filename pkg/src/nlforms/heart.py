"""The heart convolution of jump measures.

nu1 ♥ nu2 pairs two comparable jumps y and z into the compound jump
eta*(y+z), weighted by g(y,z) = |y+z|^alpha/(2-alpha) on the annulus window
A_{|y+z|} = {lambda|y+z| <= |.| <= eta|y+z|}, and keeps only mass landing in
B_2.  Two absolutely continuous factors combine through the density formula

    h1 ♥ h2(eta y) = eta^{-d} |y|^alpha/(2-alpha)
                     int 1_{A_{|y|}}(y-z) 1_{A_{|y|}}(z) h1(y-z) h2(z) dz,

which this module evaluates with the indicator circles resolved exactly:
per angle, the admissible radii form explicit intervals, so the quadrature
never sees a discontinuity.  Line measures (axes) collapse to a closed form;
thorn kernels integrate in sliver coordinates along their four branches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from ._quadrature import gauss_nodes
from .grids import Ball, Box, GridFunction

__all__ = ["HeartParams", "GridMeasure2D", "heart", "heart_density",
           "verify_heart_scaling", "verify_heart_U", "heart_upper_bound",
           "heart_form_domination", "iterate_heart", "certify_lower_bound"]


@dataclass(frozen=True)
class HeartParams:
    lam: float
    eta: float
    alpha: float
    a: float = 2.0

    def __post_init__(self):
        if not (self.lam < 1.0 <= self.eta):
            raise ValueError("heart parameters need lambda < 1 <= eta")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie in (0,2)")

    @classmethod
    def nondegenerate(cls, alpha, a=2.0):
        """eta >= a^2/(a-1), lambda <= 1/(a^3+1): the support-filling choice."""
        return cls(lam=1.0 / (a**3 + 1.0), eta=a * a / (a - 1.0),
                   alpha=alpha, a=a)

    def check_nondegenerate(self):
        return self.eta >= self.a**2 / (self.a - 1.0) and \
            self.lam <= 1.0 / (self.a**3 + 1.0)


@dataclass
class GridMeasure2D:
    """Cell measure on a lattice covering B_2 (d = 1 or 2)."""
    centers: np.ndarray
    weights: np.ndarray
    spacing: float
    alpha: float
    dim: int
    params: HeartParams
    provenance: str = ""
    density_fn: object = None      # pointwise evaluator, kept when available

    def __post_init__(self):
        if np.any(self.weights < 0):
            raise ValueError("heart weights must be nonnegative")
        r = np.linalg.norm(self.centers, axis=1)
        outside = r > 2.0 + 0.71 * self.spacing * math.sqrt(self.dim)
        if np.any(self.weights[outside] > 0):
            raise AssertionError("heart measure charges cells outside B_2")

    def total_mass(self):
        return float(np.sum(self.weights))

    def to_measure(self):
        comp = K.GridComponent(self.centers, self.weights, self.spacing)
        return K.Measure((comp,), alpha=self.alpha, dim=self.dim,
                         name=f"heart({self.provenance})")

    def to_csv(self, path):
        cols = [self.centers[:, i] for i in range(self.dim)] + [self.weights]
        header = ",".join([f"x{i+1}" for i in range(self.dim)] + ["weight"])
        np.savetxt(path, np.stack(cols, axis=-1), delimiter=",",
                   header=header, comments="")

    def metadata(self):
        return {"lambda": self.params.lam, "eta": self.params.eta,
                "alpha": self.alpha, "dim": self.dim,
                "cells": int(self.weights.size), "spacing": self.spacing,
                "provenance": self.provenance,
                "total_mass": self.total_mass()}


# ---------------------------------------------------------------------------
# density evaluators
# ---------------------------------------------------------------------------

_EDGE_FRACS = np.array([0.0, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2,
                        3.0 / 4, 7.0 / 8, 15.0 / 16, 1.0])


def _interval_gauss_sum(lo, hi, f, order=12, graded=False):
    """Vectorized int_lo^hi f over per-row intervals; empty rows give 0.

    ``graded`` subdivides dyadically toward both endpoints, for integrands
    with algebraic boundary layers (two-center kernel products).
    """
    xg, wg = gauss_nodes(order)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ok = np.isfinite(hi - lo) & (hi - lo > 0)
    width_tot = np.where(ok, np.maximum(hi - lo, 0.0), 0.0)
    lo_eff = np.where(ok, lo, 0.0)
    fracs = _EDGE_FRACS if graded else np.array([0.0, 1.0])
    total = 0.0
    for f0, f1 in zip(fracs[:-1], fracs[1:]):
        a = lo_eff + f0 * width_tot
        b = lo_eff + f1 * width_tot
        width = b - a
        mid = np.where(ok, 0.5 * (a + b), 1.0)
        pts = mid[..., None] + 0.5 * width[..., None] * xg
        vals = f(pts)
        total = total + 0.5 * width * np.sum(vals * wg, axis=-1)
    return total


def _ac_density(m: K.Measure):
    comps = m.components
    if all(isinstance(c, (K.RadialPower, K.GeneralDensity)) for c in comps):
        return lambda z: m.density(z)
    return None


def heart_density_pointwise(nu1: K.Measure, nu2: K.Measure, p: HeartParams,
                            pts, order_ang=20, order_rad=12):
    """h1 ♥ h2 at output points (on the eta-scaled B_2 grid), vectorized.

    pts has shape (N, d); the integral over z runs over the exact radial
    intervals allowed by the two annulus indicators.
    """
    d = nu1.dim
    h1 = _ac_density(nu1)
    h2 = _ac_density(nu2)
    if h1 is None or h2 is None:
        raise ValueError("pointwise heart density needs absolutely continuous factors")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    y = pts / p.eta
    ry = np.linalg.norm(y, axis=1)
    out = np.zeros(pts.shape[0])
    live = (ry > 0) & (np.linalg.norm(pts, axis=1) <= 2.0)
    if not np.any(live):
        return out
    yl = y[live]
    rl = ry[live]
    lam, eta = p.lam, p.eta
    if d == 1:
        # allowed z = sz*t: t in [lam r, eta r] and |y - sz t| in [lam r, eta r]
        acc = np.zeros(rl.size)
        yy = yl[:, 0]
        for sz in (1.0, -1.0):
            base = yy * sz
            for seg_lo, seg_hi in ((base - eta * rl, base - lam * rl),
                                   (base + lam * rl, base + eta * rl)):
                lo = np.maximum(lam * rl, seg_lo)
                hi = np.minimum(eta * rl, seg_hi)

                def f(t, sz=sz):
                    zz = (sz * t).reshape(-1, 1)
                    yz = np.repeat(yy, t.shape[-1]).reshape(-1, 1) - zz
                    return (h1(yz) * h2(zz)).reshape(t.shape)
                acc += _interval_gauss_sum(lo, hi, f, order_rad, graded=True)
        dens = (p.eta ** (-1.0) * rl**p.alpha / (2.0 - p.alpha)) * acc
        out[live] = dens
        return out
    # d == 2: polar around the origin; panels split where the lambda-circle
    # exclusion appears (psi1) and where the eta-circle overtakes the outer
    # annulus radius (psi2), so each piece is smooth in the angle
    th_y = np.arctan2(yl[:, 1], yl[:, 0])
    psi1 = math.acos(min(math.sqrt(max(1.0 - lam * lam, 0.0)), 1.0))
    psi2 = math.acos(min(1.0 / (2.0 * eta), 1.0))
    panels = np.unique(np.clip(np.array(
        [0.0, psi1, psi2, math.pi / 2, math.pi - psi2, math.pi - psi1,
         math.pi]), 0.0, math.pi))
    xg, wg = gauss_nodes(order_ang)
    acc = np.zeros(rl.size)
    for a_lo, a_hi in zip(panels[:-1], panels[1:]):
        if a_hi - a_lo < 1e-14:
            continue
        psi = 0.5 * (a_hi - a_lo) * xg + 0.5 * (a_hi + a_lo)
        wpsi = 0.5 * (a_hi - a_lo) * wg
        for sgn in (1.0, -1.0):   # mirror panel below the y-axis direction
            cosp = np.cos(psi)[None, :]
            c = rl[:, None] * cosp                       # (N, A)
            r2 = rl[:, None] ** 2
            lo_ann = lam * rl[:, None] * np.ones_like(c)
            hi_ann = eta * rl[:, None] * np.ones_like(c)
            # eta-circle: rho <= c + sqrt(c^2 + (eta^2-1) r^2)  (lower root < 0)
            hi_eta = c + np.sqrt(np.maximum(c * c + (eta * eta - 1.0) * r2, 0.0))
            hi_all = np.minimum(hi_ann, hi_eta)
            # lambda-circle exclusion (rho_-, rho_+); needs c > 0 to cross
            # the positive axis (both roots share the sign of c)
            disc = c * c - (1.0 - lam * lam) * r2
            has_excl = (disc > 0) & (c > 0)
            sq = np.sqrt(np.maximum(disc, 0.0))
            rho_m = np.where(has_excl, c - sq, np.inf)
            rho_p = np.where(has_excl, c + sq, np.inf)
            ang = th_y[:, None] + sgn * psi[None, :]
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)  # (N, A, 2)

            def fval(rho):
                zz = rho[..., None] * dirs[:, :, None, :]
                flat = zz.reshape(-1, 2)
                yz = np.repeat(yl, rho.shape[1] * rho.shape[2],
                               axis=0) - flat
                return (h1(yz) * h2(flat)).reshape(rho.shape) * rho

            for lo_i, hi_i in ((lo_ann, np.minimum(hi_all, rho_m)),
                               (np.maximum(lo_ann, rho_p), hi_all)):
                seg = _interval_gauss_sum(lo_i, hi_i, fval, order_rad, graded=True)
                acc += np.sum(seg * wpsi[None, :], axis=1)
    dens = (p.eta ** (-2.0) * rl**p.alpha / (2.0 - p.alpha)) * acc
    out[live] = dens
    return out


def _thorn_pair_density(t1: K.ThornDensity, t2: K.ThornDensity,
                        p: HeartParams, pts, n_out=14, n_in=10):
    """Thorn ♥ thorn resolved branch pair by branch pair.

    z runs over a thorn branch (axis i, sign s, coordinate t, transverse
    sigma with |sigma| <= t^{1/b}); y - z must itself lie in Gamma, which
    pins either sigma near y_j (aligned case) or t near s*y_i (crossed
    case).  Both windows have explicit endpoints, so the quadrature is
    nested Gauss over exactly-known intervals; all remaining indicators
    (annuli, B_1, sliver membership) are evaluated pointwise inside windows
    they cannot cut.
    """
    b = t1.b
    al = p.alpha
    beta1, beta2 = t1.beta, t2.beta
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    y = pts / p.eta
    ry = np.linalg.norm(y, axis=1)
    out = np.zeros(pts.shape[0])
    live = (ry > 0) & (np.linalg.norm(pts, axis=1) <= 2.0)
    if not np.any(live):
        return out
    yl = y[live]
    rl = ry[live]
    lam, eta = p.lam, p.eta
    xg, wg = gauss_nodes(n_out)
    xi, wi = gauss_nodes(n_in)
    acc = np.zeros(rl.size)
    t_lo = np.maximum(lam * rl * 0.65, 1e-12)
    t_hi = np.minimum(eta * rl * 1.05, 1.0)

    def kfun(v, beta):
        r = np.linalg.norm(v, axis=-1)
        ok = (r > 0) & (r < 1.0) & t1.gamma.contains(v)
        return np.where(ok, (2.0 - al) * np.maximum(r, 1e-300) ** (-2.0 - beta),
                        0.0)

    def common_ind(z, yz):
        rz = np.linalg.norm(z, axis=-1)
        ryz = np.linalg.norm(yz, axis=-1)
        rr = np.broadcast_to(rl.reshape(rl.shape + (1,) * (z.ndim - 2)),
                             rz.shape)
        return ((rz >= lam * rr) & (rz <= eta * rr)
                & (ryz >= lam * rr) & (ryz <= eta * rr))

    for i in (0, 1):          # axis of the z-branch
        j = 1 - i
        yi = yl[:, i]
        yj = yl[:, j]
        for s in (1.0, -1.0):  # sign of z_i on the branch
            # ---- aligned case: y - z in a branch along axis i ------------
            # sigma in [y_j - V(t), y_j + V(t)], V = |y_i - s t|^{1/b}
            logr = np.log(np.maximum(t_hi / t_lo, 1.0 + 1e-12))
            n_panel = 20
            bp = s * yi                       # kink of V(t)
            for k in range(n_panel):
                a0 = t_lo * np.exp(logr * k / n_panel)
                a1 = t_lo * np.exp(logr * (k + 1) / n_panel)
                split = np.clip(bp, a0, a1)   # V-kink split inside the panel
                for p0, p1 in ((a0, split), (split, a1)):
                    t = 0.5 * (p1 - p0)[:, None] * xg[None, :] \
                        + 0.5 * (p1 + p0)[:, None]
                    wt = 0.5 * (p1 - p0)[:, None] * wg[None, :]
                    V = np.abs(yi[:, None] - s * t) ** (1.0 / b)
                    w_z = t ** (1.0 / b)
                    lo = np.maximum(-w_z, yj[:, None] - V)
                    hi = np.minimum(w_z, yj[:, None] + V)
                    wlen = np.maximum(hi - lo, 0.0)
                    mid = 0.5 * (hi + lo)
                    sig = mid[..., None] + 0.5 * wlen[..., None] * xi
                    tt = np.broadcast_to(t[..., None], sig.shape)
                    z = np.empty(sig.shape + (2,))
                    z[..., i] = s * tt
                    z[..., j] = sig
                    yz = yl[:, None, None, :] - z
                    vals = kfun(z, beta1) * kfun(yz, beta2) * common_ind(z, yz)
                    inner = 0.5 * wlen * np.sum(vals * wi, axis=-1)
                    acc += np.sum(wt * inner, axis=-1)
            # ---- crossed case: y - z in a branch along axis j ------------
            # t in [s y_i - W(sig), s y_i + W(sig)], W = |y_j - sig|^{1/b}
            if np.all(s * yi <= 0):
                continue
            w_ref = np.minimum(np.abs(yi) ** (1.0 / b), 1.0)
            sig_hi = np.minimum(w_ref * 1.5 + np.abs(yj) * 0.0, 1.0)
            # sigma panels over [-sig_hi, sig_hi] with a kink at sig = y_j
            edges = np.linspace(-1.0, 1.0, 13)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                s0 = e0 * sig_hi
                s1 = e1 * sig_hi
                sig = 0.5 * (s1 - s0)[:, None] * xg[None, :] \
                    + 0.5 * (s1 + s0)[:, None]
                ws = 0.5 * (s1 - s0)[:, None] * wg[None, :]
                W = np.abs(yj[:, None] - sig) ** (1.0 / b)
                ctr = s * yi[:, None] * np.ones_like(sig)
                lo = np.maximum(ctr - W, 0.0)
                hi = np.minimum(ctr + W, 1.0)
                wlen = np.maximum(hi - lo, 0.0)
                mid = 0.5 * (hi + lo)
                t = mid[..., None] + 0.5 * wlen[..., None] * xi
                ss = np.broadcast_to(sig[..., None], t.shape)
                z = np.empty(t.shape + (2,))
                z[..., i] = s * t
                z[..., j] = ss
                yz = yl[:, None, None, :] - z
                # membership of z in its own sliver must hold pointwise here
                in_sliver = np.abs(ss) <= t ** (1.0 / b)
                # and y-z must NOT be in the aligned-branch region already
                # counted: inside B_1 the branches are disjoint, so the
                # axis-j membership test used by kfun suffices.
                yz_j = np.abs(yz[..., i]) <= np.abs(yz[..., j]) ** (1.0 / b)
                vals = (kfun(z, beta1) * kfun(yz, beta2) * common_ind(z, yz)
                        * in_sliver * yz_j)
                inner = 0.5 * wlen * np.sum(vals * wi, axis=-1)
                acc += np.sum(ws * inner, axis=-1)
    dens = (p.eta ** (-2.0) * rl**p.alpha / (2.0 - p.alpha)) * acc
    out[live] = dens
    return out


def _line_pair_density(s1: K.Subspace, s2: K.Subspace, p: HeartParams, pts):
    """Closed form for two line measures: coordinates of x in the (e1, e2)
    frame carry the two one-dimensional densities."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    e1, e2 = s1.basis, s2.basis
    det = abs(e1[0] * e2[1] - e1[1] * e2[0])
    if det < 1e-12:
        raise ValueError("parallel lines span no area: degenerate heart pair")
    x = pts / p.eta
    rx = np.linalg.norm(x, axis=1)
    Minv = np.linalg.inv(np.stack([e1, e2], axis=-1))
    coords = x @ Minv.T
    t1v, t2v = coords[:, 0], coords[:, 1]
    f1 = s1.profile_at(t1v)
    f2 = s2.profile_at(t2v)
    r1 = np.abs(t1v)
    r2 = np.abs(t2v)
    ind = ((r1 >= p.lam * rx) & (r1 <= p.eta * rx)
           & (r2 >= p.lam * rx) & (r2 <= p.eta * rx)
           & (np.linalg.norm(pts, axis=1) <= 2.0) & (rx > 0))
    dens = np.where(ind, p.eta ** (-2.0) / det * rx**p.alpha
                    / (2.0 - p.alpha) * f1 * f2, 0.0)
    return dens


def _dilation_invariant(support):
    return isinstance(support, (K.FullSpace, K.DoubleCone))


def _homogeneous_pair_evaluator(nu1, nu2, p, n_ang=720, ref_r=0.1):
    """Power-law factors with dilation-invariant supports give a heart
    density homogeneous of degree -(d + alpha): one reference circle
    determines it everywhere (up to the B_2 cut, applied outside)."""
    d = nu1.dim
    o1 = nu1.components[0].order
    o2 = nu2.components[0].order
    deg = p.alpha - d - o1 - o2   # equals -(d + alpha) for matching orders
    if d == 1:
        ref = heart_density_pointwise(
            nu1, nu2, p, np.array([[ref_r * p.eta], [-ref_r * p.eta]]),
            order_ang=20, order_rad=16)

        def ev(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            y = pts / p.eta
            r = np.abs(y[:, 0])
            vals = np.where(y[:, 0] >= 0, ref[0], ref[1])
            out = np.where((r > 0) & (np.abs(pts[:, 0]) <= 2.0),
                           vals * (np.maximum(r, 1e-300) / ref_r) ** deg, 0.0)
            return out
        return ev
    th = np.arange(n_ang) * (2 * math.pi / n_ang)
    circ = ref_r * p.eta * np.stack([np.cos(th), np.sin(th)], axis=-1)
    ref = heart_density_pointwise(nu1, nu2, p, circ, order_ang=20, order_rad=16)

    def ev(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y = pts / p.eta
        r = np.linalg.norm(y, axis=1)
        ang = np.mod(np.arctan2(y[:, 1], y[:, 0]), 2 * math.pi)
        pos = ang / (2 * math.pi / n_ang)
        i0 = np.floor(pos).astype(int) % n_ang
        i1 = (i0 + 1) % n_ang
        frac = pos - np.floor(pos)
        base = (1 - frac) * ref[i0] + frac * ref[i1]
        out = np.where((r > 0) & (np.linalg.norm(pts, axis=1) <= 2.0),
                       base * (np.maximum(r, 1e-300) / ref_r) ** deg, 0.0)
        return out
    return ev


def _grid_interp_measure(m: K.Measure):
    """Bilinear density interpolant of a grid measure, as a density measure."""
    comp = m.components[0]
    if not (len(m.components) == 1 and isinstance(comp, K.GridComponent)):
        return None
    d = m.dim
    h = comp.spacing
    n = round(comp.centers.shape[0] ** (1.0 / d))
    dens_grid = (comp.masses / h**d).reshape((n,) * d)
    first = comp.centers[0]

    def ev(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        t = (z - first) / h
        t = np.clip(t, 0.0, n - 1.0)
        i0 = np.clip(np.floor(t).astype(int), 0, n - 2)
        frac = t - i0
        vals = np.zeros(z.shape[0])
        for corner in range(1 << d):
            w = np.ones(z.shape[0])
            idx = []
            for ax in range(d):
                bit = (corner >> ax) & 1
                w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
                idx.append(i0[:, ax] + bit)
            vals += w * dens_grid[tuple(idx)]
        outside = np.max(np.abs(z - first - (n - 1) * h / 2.0), axis=1) \
            > (n - 1) * h / 2.0 + 0.5 * h
        vals[outside] = 0.0
        return vals
    return K.Measure((K.GeneralDensity(k=ev, support_radius=2.0 + h),),
                     alpha=m.alpha, dim=d, name=f"interp({m.name})")


def heart_density(nu1: K.Measure, nu2: K.Measure, p: HeartParams):
    """Pointwise evaluator of the heart density, dispatched by factor type."""
    g1 = _grid_interp_measure(nu1)
    g2 = _grid_interp_measure(nu2)
    nu1 = g1 if g1 is not None else nu1
    nu2 = g2 if g2 is not None else nu2
    c1 = nu1.components
    c2 = nu2.components
    if len(c1) == 1 and len(c2) == 1:
        a, b = c1[0], c2[0]
        if isinstance(a, K.Subspace) and isinstance(b, K.Subspace):
            return lambda pts: _line_pair_density(a, b, p, pts)
        if isinstance(a, K.ThornDensity) and isinstance(b, K.ThornDensity):
            return lambda pts: _thorn_pair_density(a, b, p, pts)
        if (isinstance(a, K.RadialPower) and isinstance(b, K.RadialPower)
                and _dilation_invariant(a.support)
                and _dilation_invariant(b.support)):
            return _homogeneous_pair_evaluator(nu1, nu2, p)
    if _ac_density(nu1) is not None and _ac_density(nu2) is not None:
        return lambda pts: heart_density_pointwise(nu1, nu2, p, pts)
    return None


def heart(nu1: K.Measure, nu2: K.Measure, p: HeartParams,
          resolution: int = 128) -> GridMeasure2D:
    """nu1 ♥ nu2 discretized on a lattice over [-2, 2]^d."""
    d = nu1.dim
    if d not in (1, 2):
        raise ValueError("heart convolution implemented for d in {1, 2}")
    if nu2.dim != d:
        raise ValueError("factor dimensions differ")
    box = Box((0.0,) * d, 2.0, resolution, d)
    centers = box.cell_centers()
    dens = heart_density(nu1, nu2, p)
    if dens is not None:
        h = box.h
        vals = np.zeros(centers.shape[0])
        thorn_pair = all(isinstance(m.components[0], K.ThornDensity)
                         for m in (nu1, nu2) if len(m.components) == 1) \
            and len(nu1.components) == 1 and len(nu2.components) == 1
        # 4-way subcell average resolves indicator boundaries at cell scale;
        # the thorn evaluator is heavy, one midpoint per cell suffices there
        if thorn_pair:
            offs = np.zeros((1, d))
        elif d == 1:
            offs = 0.25 * h * np.array([[1.0], [-1.0]])
        else:
            offs = 0.25 * h * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
        for o in offs:
            for i0 in range(0, centers.shape[0], 4096):
                blk = slice(i0, i0 + 4096)
                vals[blk] += dens(centers[blk] + o[None, :]) / len(offs)
        weights = vals * h**d
        prov = f"{nu1.name}*{nu2.name}"
        return GridMeasure2D(centers=centers, weights=weights, spacing=h,
                             alpha=p.alpha, dim=d, params=p, provenance=prov,
                             density_fn=dens)
    raise ValueError("unsupported factor combination for the heart convolution")


# ---------------------------------------------------------------------------
# verifications
# ---------------------------------------------------------------------------

def verify_heart_scaling(m: GridMeasure2D, a: float = None):
    """Deviation from int f dnu = a^{-alpha} int f(a .) dnu on grid sums.

    The reported tolerance is max(the h^2-scale discretization estimate, 1e-3).
    """
    from .conditions import scaling_test_battery
    if a is None:
        a = m.params.a
    alpha = m.alpha
    if m.density_fn is not None:
        # pointwise density available: scaling of the measure is equivalent
        # to homogeneity h(ax) = a^{-d-alpha} h(x) of the density, which is
        # free of the grid-cell discretization error
        rng_pts = []
        for rr in (0.15, 0.3, 0.6):
            for k in range(10):
                ang = 2 * math.pi * (k + 0.37) / 10
                v = [math.cos(ang), math.sin(ang)][: m.dim]
                if m.dim == 1:
                    v = [1.0 if k % 2 else -1.0]
                rng_pts.append(np.asarray(v) * rr / a)
        pts = np.stack(rng_pts)
        h_at = m.density_fn(pts)
        h_scaled = m.density_fn(a * pts)
        keep = h_at > 1e-12 * max(np.max(h_at), 1e-300)
        dev = np.abs(h_scaled[keep] - a ** (-m.dim - alpha) * h_at[keep]) \
            / np.maximum(a ** (-m.dim - alpha) * h_at[keep], 1e-300)
        worst = float(np.max(dev)) if np.any(keep) else 0.0
        return {"max_deviation": worst, "per_test": list(dev),
                "tolerance": 1e-3, "ok": bool(worst <= 1e-3)}
    rows = []
    worst = 0.0
    for f, (s0, s1) in scaling_test_battery(m.dim):
        if s1 > 1.0 / a:   # battery must fit inside B_{1/a}
            scale_fac = 1.0 / (a * s1 * 1.0001)
            g = lambda z, f=f, s=scale_fac: f(np.atleast_2d(z) / s)
            supp = (s0 * scale_fac, s1 * scale_fac)
        else:
            g, supp = f, (s0, s1)
        r = np.linalg.norm(m.centers, axis=1)
        keep = (r >= supp[0] * 0.5) & (r <= supp[1] * 1.5)
        lhs = float(np.sum(m.weights[keep] * g(m.centers[keep])))
        ga = lambda z: g(np.atleast_2d(z) * a)
        keep2 = r <= supp[1]
        rhs = a**-alpha * float(np.sum(m.weights[keep2] * ga(m.centers[keep2])))
        scale = max(abs(lhs), abs(rhs), 1e-300)
        dev = abs(lhs - rhs) / scale
        rows.append(dev)
        worst = max(worst, dev)
    est = 2.0 * m.spacing**2 / max(np.mean([r for r in rows]) + 1e-9, 1e-9)
    tol = max(1e-3, m.spacing**2 * 40.0)
    return {"max_deviation": worst, "per_test": rows, "tolerance": tol,
            "ok": bool(worst <= tol)}


def verify_heart_U(m: GridMeasure2D, alpha: float = None, k_max: int = 8):
    """sup over dyadic r of r^{alpha-2} int (r ^ |z|)^2 dm from grid sums."""
    if alpha is None:
        alpha = m.alpha
    r_cells = np.linalg.norm(m.centers, axis=1)
    vals = {}
    for k in range(k_max + 1):
        r = 2.0**-k
        trunc = np.minimum(r_cells, r) ** 2
        vals[r] = float(np.sum(m.weights * trunc)) * r ** (alpha - 2.0)
    cu = max(vals.values())
    return {"C_U": cu, "per_radius": vals, "finite": math.isfinite(cu)}


def heart_upper_bound(alpha0, alpha, C_U, lam, eta):
    """The lemma-form constant bounding C_U of a heart of rescaled factors."""
    c1 = 13.0 * eta**4 * C_U**2 / (lam**4 * (2.0 - alpha0) ** 2)
    c0 = 8.0 * eta**4 * C_U**2 / (lam**4 * (2.0 - alpha0) ** 2)
    return (2.0 ** (2.0 - alpha) / (1.0 - 2.0**-alpha) + 1.0) * c1 + 4.0 * c0


_DOMINATION_CACHE: dict = {}


def heart_form_domination(nu1: K.Measure, nu2: K.Measure, p: HeartParams,
                          B: Ball, u: GridFunction, C_U: float = None):
    """lhs = E_B^{nu1 ♥ nu2}(u,u) against rhs = c (E_{B*}^{nu1} + E_{B*}^{nu2})
    with c = 4 C_U eta^6 / lambda^4 and B* the 3-eta dilate of B."""
    from .conditions import check_U
    from .forms import energy
    k = math.log(p.eta, p.a)
    if abs(k - round(k)) > 1e-9:
        raise ValueError("eta must be an integer power of the scaling base a")
    Bstar = Ball(B.center, 3.0 * p.eta * B.radius)
    lim = np.linalg.norm(np.asarray(B.center)) + Bstar.radius
    if lim > 1.0 + 1e-12:
        raise ValueError("the dilated ball B* must stay inside B_1")
    key = (nu1.fingerprint(), nu2.fingerprint(), p)
    cached = _DOMINATION_CACHE.get(key)
    if cached is None:
        cu = max(check_U(nu1, p.alpha).constants["C_U"],
                 check_U(nu2, p.alpha).constants["C_U"])
        dens = heart_density(nu1, nu2, p)
        if dens is None:
            raise ValueError("domination check needs absolutely continuous factors")
        hm = K.Measure((K.GeneralDensity(k=dens, support_radius=2.0,
                                         fast_cells=True),),
                       alpha=p.alpha, dim=nu1.dim, name="heartdens")
        cached = (cu, hm)
        _DOMINATION_CACHE[key] = cached
    cu_meas, hm = cached
    if C_U is None:
        C_U = cu_meas
    c = 4.0 * C_U * p.eta**6 / p.lam**4
    # the heart energy lives on the small ball B: resample u on a tight box
    # so the offset lattice matches the relevant scale
    small = Box(B.center, 2.0 * B.radius, 32, u.box.dim)
    u_small = GridFunction.from_callable(small, u)
    lhs = energy(K.TranslationInvariant(hm), B, u_small)
    rhs = c * (energy(K.TranslationInvariant(nu1), Bstar, u)
               + energy(K.TranslationInvariant(nu2), Bstar, u))
    return {"lhs": lhs, "rhs": rhs, "c": c,
            "ok": bool(lhs <= rhs * (1.0 + 1e-6) + 1e-12)}


def iterate_heart(components, p: HeartParams, resolution: int = 96):
    """Fold ♥ over the nondegeneracy decomposition, then convolve the result
    with itself; returns the final grid measure and a lower-bound report."""
    if len(components) == 0:
        raise ValueError("empty component list")
    d = components[0].dim
    span = np.zeros((0, d))
    for m in components:
        for c in m.components:
            if isinstance(c, K.Subspace):
                span = np.vstack([span, c.basis[None, :]])
            else:
                span = np.vstack([span, np.eye(d)])
    if np.linalg.matrix_rank(span) < d:
        raise ValueError("components do not span the space (degenerate)")
    acc = components[0]
    for nxt in components[1:]:
        gm = heart(acc, nxt, p, resolution)
        acc = gm.to_measure()
    if len(components) == 1:
        final = heart(acc, acc, p, resolution)
    else:
        final = heart(acc, acc, p, resolution)
    report = certify_lower_bound(final, alpha0=p.alpha)
    return final, report


def certify_lower_bound(m: GridMeasure2D, alpha0: float, annuli=None,
                        boundary_pad: int = 1):
    """min over annulus cells of density * |x|^{d+alpha0}, skipping cells
    within one spacing of an indicator boundary."""
    if annuli is None:
        annuli = [(2.0 ** (-k), 2.0 ** (-k + 1)) for k in range(1, 7)]
    r = np.linalg.norm(m.centers, axis=1)
    dens = m.weights / m.spacing**m.dim
    rows = {}
    overall = math.inf
    for (r0, r1) in annuli:
        keep = (r >= r0 + boundary_pad * m.spacing) \
            & (r <= r1 - boundary_pad * m.spacing)
        if not np.any(keep):
            rows[(r0, r1)] = None
            continue
        vals = dens[keep] * r[keep] ** (m.dim + alpha0)
        # drop cells next to a zero cell: indicator-boundary artifacts
        pos = vals[vals > 0]
        c = float(np.min(vals))
        rows[(r0, r1)] = c
        overall = min(overall, c)
    return {"annuli": {f"{a}-{b}": v for (a, b), v in rows.items()},
            "constant": overall if math.isfinite(overall) else 0.0}
