"""Nonlocal quadratic forms on uniform grids.

The discrete model: cell increments against a lattice of offset weights.  For
a translation-invariant measure nu the weight of offset m is the second
moment of nu over the offset cell divided by |mh|^2, which makes affine
functions exact shell by shell; the origin cell enters through the gradient
matrix Q = int_{cell_0} z z^T dnu.  Pair sums are evaluated with FFT
cross-correlations, so a full form evaluation is O(n^d log n).

Interaction with the exterior of the grid box is handled per measure
component: closed-form radial tails for power laws, ray/polar quadrature for
general data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft
from scipy import integrate, sparse

from . import kernels as K
from ._quadrature import gauss_nodes, power_ray_integral_vec
from .grids import (Ball, Box, ConstantExterior, FunctionExterior, GridFunction,
                    TailPolynomial, ZeroExterior)

__all__ = [
    "EnergyAssembly", "energy", "energy_cross", "assemble",
    "moser_inequality_gap", "log_identity_check", "rescale_problem",
    "get_engine", "dense_restricted_form",
]

_LATTICE_CACHE: dict = {}
_ENGINE_CACHE: dict = {}


@dataclass
class WeightLattice:
    W: np.ndarray      # moment-matched pair weights, shape (2n-1,)*d
    M: np.ndarray      # plain cell masses on the same offsets
    Q: np.ndarray      # near-field second-moment matrix (d, d)
    h: float
    n: int
    d: int


def weight_lattice(measure: K.Measure, n: int, h: float) -> WeightLattice:
    key = (measure.fingerprint(), n, round(h, 14))
    hit = _LATTICE_CACHE.get(key)
    if hit is not None:
        return hit
    d = measure.dim
    side = (np.arange(2 * n - 1) - (n - 1)) * h
    grids = np.meshgrid(*([side] * d), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=-1)
    mom = np.zeros(centers.shape[0])
    mass = np.zeros(centers.shape[0])
    for c in measure.components:
        mom += K.component_cell_integrals(c, d, centers, h, 2.0)
        mass += K.component_cell_integrals(c, d, centers, h, 0.0)
    r2 = np.sum(centers**2, axis=1)
    W = np.where(r2 > 0, mom / np.where(r2 > 0, r2, 1.0), 0.0)
    lat = WeightLattice(W=W.reshape((2 * n - 1,) * d),
                        M=mass.reshape((2 * n - 1,) * d),
                        Q=K.near_field_matrix(measure, h), h=h, n=n, d=d)
    _LATTICE_CACHE[key] = lat
    return lat


class EnergyEngine:
    """FFT evaluator of pair forms for one (measure, box geometry) pair."""

    def __init__(self, measure: K.Measure, box: Box):
        if measure.dim != box.dim:
            raise ValueError("measure and box dimensions differ")
        self.measure = measure
        self.box = box
        self.lat = weight_lattice(measure, box.n, box.h)
        n, d = box.n, box.dim
        self.fft_shape = tuple(sfft.next_fast_len(3 * n - 2) for _ in range(d))
        rev = self.lat.W[(slice(None, None, -1),) * d]
        self.Khat = sfft.rfftn(rev, self.fft_shape)
        revm = self.lat.M[(slice(None, None, -1),) * d]
        self.Mhat = sfft.rfftn(revm, self.fft_shape)
        self._sl = tuple(slice(n - 1, 2 * n - 1) for _ in range(d))
        self._qops: dict = {}
        self._fm: Optional[np.ndarray] = None

    def corr(self, f, masses=False):
        """(W * f)(x) = sum_m W_m f(x + m), f on the box grid (zero outside)."""
        F = sfft.rfftn(f, self.fft_shape)
        out = sfft.irfftn(F * (self.Mhat if masses else self.Khat), self.fft_shape)
        return out[self._sl]

    # -- pair part ---------------------------------------------------------

    def pair_form(self, mask, u, v=None):
        """sum_m W_m sum_{x, x+m in mask} (u(x+m)-u(x)) (v(x+m)-v(x)) h^d."""
        a = mask.astype(float)
        if v is None:
            v = u
        au, av, auv = a * u, a * v, a * u * v
        tot = (np.vdot(a, self.corr(auv)) + np.vdot(auv, self.corr(a))
               - np.vdot(au, self.corr(av)) - np.vdot(av, self.corr(au)))
        return self.box.h**self.box.dim * float(tot)

    def row_apply(self, mask, u):
        """Rows of the pair operator: x -> 2 h^d sum_m W_m (u(x) - u(x+m)).

        u lives on the whole box; rows are restricted to `mask`.
        """
        a = np.ones_like(u)
        s = self.corr(a)            # sum of reachable weights per cell
        out = 2.0 * self.box.h**self.box.dim * (u * s - self.corr(u))
        return np.where(mask, out, 0.0)

    # -- gradient (near-field) part ----------------------------------------

    def _grad_ops(self, mask_key, mask):
        ops = self._qops.get(mask_key)
        if ops is not None:
            return ops
        n, d, h = self.box.n, self.box.dim, self.box.h
        N = n**d
        idx = np.arange(N).reshape(mask.shape)
        ops = []
        for ax in range(d):
            has_p = np.zeros_like(mask)
            has_m = np.zeros_like(mask)
            slc_in = [slice(None)] * d
            slc_out = [slice(None)] * d
            slc_in[ax] = slice(1, None)
            slc_out[ax] = slice(None, -1)
            has_p[tuple(slc_out)] = mask[tuple(slc_in)]
            has_m[tuple(slc_in)] = mask[tuple(slc_out)]
            idx_p = np.roll(idx, -1, axis=ax)
            idx_m = np.roll(idx, 1, axis=ax)
            rows, cols, vals = [], [], []
            cen = mask & has_p & has_m
            fwd = mask & has_p & ~has_m
            bwd = mask & ~has_p & has_m
            for sel, cp, cm, vp, vm in (
                    (cen, idx_p, idx_m, 0.5 / h, -0.5 / h),
                    (fwd, idx_p, idx, 1.0 / h, -1.0 / h),
                    (bwd, idx, idx_m, 1.0 / h, -1.0 / h)):
                r = idx[sel]
                rows.append(np.concatenate([r, r]))
                cols.append(np.concatenate([cp[sel], cm[sel]]))
                vals.append(np.concatenate([np.full(r.size, vp),
                                            np.full(r.size, vm)]))
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            vals = np.concatenate(vals)
            ops.append(sparse.csr_matrix((vals, (rows, cols)), shape=(N, N)))
        self._qops[mask_key] = ops
        return ops

    def q_matrix(self, mask_key, mask):
        """Sparse near-field matrix h^d sum_ij Q_ij D_i^T D_j on box dofs."""
        ops = self._grad_ops(mask_key, mask)
        d = self.box.dim
        Q = self.lat.Q
        M = None
        for i in range(d):
            for j in range(d):
                if abs(Q[i, j]) < 1e-300:
                    continue
                term = (ops[i].T @ ops[j]) * Q[i, j]
                M = term if M is None else M + term
        if M is None:
            M = sparse.csr_matrix((self.box.n**d, self.box.n**d))
        return M * self.box.h**self.box.dim

    def q_form(self, mask_key, mask, u, v=None):
        Mq = self.q_matrix(mask_key, mask)
        uv = u.ravel()
        vv = uv if v is None else v.ravel()
        return float(uv @ (Mq @ vv))

    # -- far field -----------------------------------------------------------

    def far_mass(self):
        """fm(x) = nu({z : x + z outside the box}) for every cell center x."""
        if self._fm is None:
            self._fm = mass_outside_box(self.measure, self.box)
        return self._fm


def get_engine(measure: K.Measure, box: Box) -> EnergyEngine:
    key = (measure.fingerprint(), box)
    eng = _ENGINE_CACHE.get(key)
    if eng is None:
        eng = EnergyEngine(measure, box)
        _ENGINE_CACHE[key] = eng
    return eng


# ---------------------------------------------------------------------------
# exterior interaction
# ---------------------------------------------------------------------------

def _exit_distances(x, dirs, lo, hi):
    """Distance from x to the box boundary along each direction.

    Either one x against many directions, or paired rows of x and dirs.
    """
    x = np.asarray(x, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    num_hi = np.atleast_2d(hi - x)
    num_lo = np.atleast_2d(lo - x)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = num_hi / dirs
        t_lo = num_lo / dirs
    t = np.where(dirs > 0, t_hi, np.where(dirs < 0, t_lo, np.inf))
    return np.min(t, axis=1)


def _sphere_dirs(d, n_ang):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        th = (np.arange(n_ang) + 0.5) * (2 * math.pi / n_ang)
        return (np.stack([np.cos(th), np.sin(th)], axis=-1),
                np.full(n_ang, 2 * math.pi / n_ang))
    # d = 3: Fibonacci sphere
    i = np.arange(n_ang) + 0.5
    phi = math.pi * (1 + 5**0.5) * i
    z = 1 - 2 * i / n_ang
    r = np.sqrt(np.maximum(1 - z * z, 0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    return dirs, np.full(n_ang, 4 * math.pi / n_ang)


def mass_outside_box(measure: K.Measure, box: Box, pts=None, n_ang=512):
    """Vector of nu({z: x+z not in box}) over cell centers x (or given pts)."""
    if pts is None:
        pts = box.cell_centers()
    lo, hi = box.lo(), box.hi()
    d = measure.dim
    out = np.zeros(pts.shape[0])
    for comp in measure.components:
        if isinstance(comp, K.Subspace):
            e = comp.basis
            for sgn in (1.0, -1.0):
                s = _exit_distances(pts, np.tile(sgn * e, (pts.shape[0], 1)), lo, hi)
                if comp.profile_power is not None:
                    sc, o = comp.profile_power
                    out += sc * (2.0 - o) * power_ray_integral_vec(
                        -1.0 - o, np.maximum(s, 1e-300), np.full_like(s, 1e300))
                else:
                    for i, si in enumerate(s):
                        v, _ = integrate.quad(
                            lambda t: comp.profile_at(np.array([sgn * t]))[0],
                            si, np.inf, limit=100)
                        out[i] += v
            continue
        if isinstance(comp, K.GridComponent):
            for i, x in enumerate(pts):
                tgt = comp.centers + x
                outside = ~np.all((tgt >= lo) & (tgt <= hi), axis=1)
                out[i] += float(np.sum(comp.masses[outside]))
            continue
        dirs, wang = _sphere_dirs(d, n_ang)
        s = np.stack([_exit_distances(x, dirs, lo, hi) for x in pts])  # (P, A)
        if isinstance(comp, K.RadialPower):
            w0, w1 = comp.support.radial_window()
            a = np.clip(s, w0, w1)
            coef = comp.scale * (2.0 - comp.order)
            radial = coef * power_ray_integral_vec(
                -1.0 - comp.order + (d - 1), np.maximum(a, 1e-300),
                np.full_like(a, w1 if math.isfinite(w1) else 1e300))
            if d == 1:
                ind = np.ones(dirs.shape[0])
            else:
                ind = comp.support.contains(dirs).astype(float) \
                    if isinstance(comp.support, K.DoubleCone) else np.ones(dirs.shape[0])
            out += radial @ (wang * ind)
        else:
            rsup = getattr(comp, "support_radius", math.inf)
            rmax = min(rsup, 1e4)
            xs, ws = gauss_nodes(32)
            for i, x in enumerate(pts):
                si = s[i]
                live = si < rmax
                if not np.any(live):
                    continue
                acc = 0.0
                aa = si[live]
                dd = dirs[live]
                wa = wang[live]
                r = 0.5 * (rmax - aa)[:, None] * xs[None, :] + 0.5 * (rmax + aa)[:, None]
                wr = 0.5 * (rmax - aa)[:, None] * ws[None, :]
                zz = r[..., None] * dd[:, None, :]
                dens = comp.density(zz.reshape(-1, d), d).reshape(r.shape)
                acc = np.sum(wa[:, None] * wr * dens * r ** (d - 1))
                out[i] += acc
    return out


def exterior_flux(measure: K.Measure, box: Box, exterior, pts=None,
                  n_ang=256):
    """fl(x) = int_{x+z not in box} g(x+z) nu(dz) per cell center."""
    if pts is None:
        pts = box.cell_centers()
    if isinstance(exterior, ZeroExterior):
        return np.zeros(pts.shape[0])
    if isinstance(exterior, ConstantExterior):
        return exterior.c * mass_outside_box(measure, box, pts)
    gsup = getattr(exterior, "support_radius", math.inf)
    if math.isfinite(gsup) and np.all(np.abs(box.lo()) >= gsup) \
            and np.all(np.abs(box.hi()) >= gsup):
        # the data ball sits inside the box: nothing lives beyond it
        return np.zeros(pts.shape[0])
    lo, hi = box.lo(), box.hi()
    d = measure.dim
    out = np.zeros(pts.shape[0])
    for comp in measure.components:
        if isinstance(comp, K.Subspace):
            for sgn in (1.0, -1.0):
                e = sgn * comp.basis
                s = _exit_distances(pts, np.tile(e, (pts.shape[0], 1)), lo, hi)
                for i, si in enumerate(s):
                    f = lambda t: (exterior((pts[i] + t * e)[None, :])[0]
                                   * comp.profile_at(np.array([sgn * t]))[0])
                    v, _ = integrate.quad(f, si, np.inf, limit=200)
                    out[i] += v
            continue
        if isinstance(comp, K.GridComponent):
            for i, x in enumerate(pts):
                zpts = comp.centers
                tgt = zpts + x
                outside = ~np.all((tgt >= lo) & (tgt <= hi), axis=1)
                if np.any(outside):
                    out[i] += float(np.sum(comp.masses[outside]
                                           * exterior(tgt[outside])))
            continue
        dirs, wang = _sphere_dirs(d, n_ang)
        if d == 1:
            for i, x in enumerate(pts):
                s = _exit_distances(x, dirs, lo, hi)
                for j, e in enumerate(dirs):
                    f = lambda t: (exterior((x + t * e)[None, :])[0]
                                   * comp.density((t * e)[None, :], d)[0])
                    v, _ = integrate.quad(f, s[j], np.inf, limit=200)
                    out[i] += v
            continue
        # d >= 2: geometric radial panels out to the support / decay horizon,
        # vectorized over blocks of cells
        rsup = getattr(comp, "support_radius", math.inf)
        if math.isfinite(gsup):
            rsup = min(rsup, gsup + float(np.max(np.abs(pts))))
        rmax = rsup if math.isfinite(rsup) else 64.0 * float(box.half)
        xs, ws = gauss_nodes(12)
        n_panel = 10
        for i0 in range(0, pts.shape[0], 128):
            blk = pts[i0:i0 + 128]
            P = blk.shape[0]
            s = np.stack([_exit_distances(x, dirs, lo, hi) for x in blk])  # (P,A)
            s = np.minimum(s, rmax)
            edges = np.geomspace(1.0, max(rmax / max(np.min(s), 1e-9), 1.0 + 1e-9),
                                 n_panel + 1)
            acc = np.zeros(P)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                r = (0.5 * (e1 - e0) * xs[None, None, :]
                     + 0.5 * (e1 + e0)) * s[..., None]          # (P,A,G)
                wr = 0.5 * (e1 - e0) * ws[None, None, :] * s[..., None]
                keep = r <= rmax
                zz = r[..., None] * dirs[None, :, None, :]
                flat = zz.reshape(-1, d)
                dens = comp.density(flat, d).reshape(r.shape)
                gval = exterior(flat + np.repeat(blk, dirs.shape[0] * xs.size,
                                                 axis=0)).reshape(r.shape)
                acc += np.sum(np.where(keep, wang[None, :, None] * wr * dens
                                       * gval * r ** (d - 1), 0.0), axis=(1, 2))
            out[i0:i0 + 128] += acc
    return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _require_ti(kernel):
    if isinstance(kernel, K.TranslationInvariant):
        return kernel.base
    return None


def _coarse_check(D: Ball, box: Box):
    if 2.0 * D.radius / box.h < 8.0 - 1e-9:
        raise ValueError("grid too coarse: fewer than 8 cells across the ball")
    c = np.asarray(D.center, dtype=float)
    if np.any(c - D.radius < box.lo() - 1e-12) or np.any(c + D.radius > box.hi() + 1e-12):
        raise ValueError("ball not covered by the grid box")


def energy(kernel, D: Ball, u: GridFunction) -> float:
    """E^mu_D(u,u): squared-increment integral over D x D."""
    _coarse_check(D, u.box)
    base = _require_ti(kernel)
    if base is None:
        return _energy_density_family(kernel, D, u)
    eng = get_engine(base, u.box)
    mask = D.mask(u.box)
    val = eng.pair_form(mask, u.values)
    val += eng.q_form(("ball", D), mask, u.values)
    return float(val)


def _energy_density_family(kernel: K.DensityFamily, D: Ball, u: GridFunction,
                           exclude: int = 2):
    """Direct pair quadrature with near-diagonal exclusion and Richardson."""
    def level(box, vals):
        pts = box.cell_centers()
        inside = D.contains(pts)
        P = pts[inside]
        V = vals.ravel()[inside]
        total = 0.0
        for i0 in range(0, P.shape[0], 256):
            Pi = P[i0:i0 + 256]
            Vi = V[i0:i0 + 256]
            diff = Pi[:, None, :] - P[None, :, :]
            dist = np.max(np.abs(diff), axis=-1)
            keep = dist >= (exclude - 0.5) * box.h
            kv = kernel.k(np.repeat(Pi, P.shape[0], axis=0),
                          np.tile(P, (Pi.shape[0], 1))).reshape(Pi.shape[0], -1)
            incr = (Vi[:, None] - V[None, :]) ** 2
            total += float(np.sum(np.where(keep, kv * incr, 0.0)))
        return total * box.h ** (2 * box.dim)

    b1 = u.box
    e1 = level(b1, u.values)
    b2 = Box(b1.center, b1.half, 2 * b1.n, b1.dim)
    u2 = GridFunction.from_callable(b2, lambda p: u(p), exterior=u.exterior)
    e2 = level(b2, u2.values)
    r = 0.5 ** (2.0 - kernel.alpha)
    return e2 + (e2 - e1) * r / (1.0 - r)


def energy_cross(kernel, u: GridFunction, phi: GridFunction, D: Ball) -> float:
    """E^mu(u, phi) for phi compactly supported in D (zero outside D)."""
    base = _require_ti(kernel)
    if phi.box != u.box:
        raise ValueError("u and phi must share a grid")
    pts = phi.box.cell_centers()
    outside = ~D.contains(pts)
    if np.any(np.abs(phi.values.ravel()[outside]) > 0) or not isinstance(
            phi.exterior, ZeroExterior):
        raise ValueError("phi is not compactly supported in D")
    if base is None:
        raise NotImplementedError("cross energies need a translation-invariant kernel")
    eng = get_engine(base, u.box)
    ones = np.ones(u.box.shape, dtype=bool)
    val = eng.pair_form(ones, u.values, phi.values)
    val += eng.q_form(("box",), ones, u.values, phi.values)
    fm = eng.far_mass()
    fl = exterior_flux(base, u.box, u.exterior)
    h_d = u.box.h**u.box.dim
    val += 2.0 * h_d * float(np.sum(phi.values.ravel()
                                    * (u.values.ravel() * fm - fl)))
    return float(val)


@dataclass
class EnergyAssembly:
    """Discrete global form restricted to the free cells of a ball."""
    engine: EnergyEngine
    domain: Ball
    free: np.ndarray          # boolean grid mask of unknowns
    measure_id: str
    q_mat: sparse.csr_matrix  # near-field matrix on box dofs

    @property
    def box(self):
        return self.engine.box

    @property
    def n_free(self):
        return int(np.sum(self.free))

    def matvec(self, u_free):
        """(M u)_i for u supported on the free cells."""
        full = np.zeros(self.box.shape)
        full[self.free] = u_free
        out = self.engine.row_apply(self.free, full)
        out += (self.q_mat @ full.ravel()).reshape(self.box.shape)
        out += 2.0 * self.box.h**self.box.dim * self.engine.far_mass().reshape(
            self.box.shape) * full
        return out[self.free]

    def apply_full(self, full_values):
        """Rows at free cells of the operator applied to box-wide values."""
        out = self.engine.row_apply(self.free, full_values)
        out += (self.q_mat @ full_values.ravel()).reshape(self.box.shape)
        out += 2.0 * self.box.h**self.box.dim * self.engine.far_mass().reshape(
            self.box.shape) * full_values
        return out[self.free]

    def boundary_load(self, exterior_values, exterior):
        """RHS carrying clamped in-box cells and the beyond-box exterior."""
        full = np.array(exterior_values, dtype=float).reshape(self.box.shape)
        full[self.free] = 0.0
        load = -self.apply_full(full)
        fl = exterior_flux(self.engine.measure, self.box, exterior)
        load += 2.0 * self.box.h**self.box.dim * fl.reshape(self.box.shape)[self.free]
        return load

    def diagonal(self):
        eng = self.engine
        s = eng.corr(np.ones(self.box.shape))
        diag = 2.0 * self.box.h**self.box.dim * (s + eng.far_mass().reshape(
            self.box.shape))
        diag = diag + self.q_mat.diagonal().reshape(self.box.shape)
        return diag[self.free]

    def to_dense(self):
        nf = self.n_free
        M = np.zeros((nf, nf))
        eye = np.eye(nf)
        for j in range(nf):
            M[:, j] = self.matvec(eye[:, j])
        return M

    def export_matrix_market(self, path):
        from scipy.io import mmwrite
        mmwrite(path, sparse.csr_matrix(self.to_dense()))


def assemble(kernel, D: Ball, box: Box, margin_cells: int = 0) -> EnergyAssembly:
    """Build the global-form operator on cells inside D.

    ``margin_cells`` shrinks the free set away from the boundary of D, which
    keeps the nodal test functions supported inside D.
    """
    base = _require_ti(kernel)
    if base is None:
        raise NotImplementedError("assembly needs a translation-invariant kernel")
    _coarse_check(D, box)
    eng = get_engine(base, box)
    free = Ball(D.center, D.radius).mask(box, shrink=margin_cells * box.h)
    q_mat = eng.q_matrix(("box",), np.ones(box.shape, dtype=bool))
    return EnergyAssembly(engine=eng, domain=D, free=free,
                          measure_id=base.fingerprint(), q_mat=q_mat)


def dense_restricted_form(measure: K.Measure, box: Box, mask) -> np.ndarray:
    """Dense matrix of the D x D restricted form on the masked cells."""
    eng = get_engine(measure, box)
    pts = box.cell_centers()[mask.ravel()]
    n_s = pts.shape[0]
    h = box.h
    d = box.dim
    mi = np.round((pts[:, None, :] - pts[None, :, :]) / h).astype(int)
    idx = tuple(mi[..., ax] + (box.n - 1) for ax in range(d))
    Wd = eng.lat.W[idx]
    h_d = h**d
    M = -2.0 * h_d * Wd
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -M.sum(axis=1))
    # near-field gradient term restricted to the mask
    Mq = eng.q_matrix(("mask", mask.tobytes()), mask)
    sel = np.nonzero(mask.ravel())[0]
    M += Mq[np.ix_(sel, sel)].toarray()
    return M


# ---------------------------------------------------------------------------
# scalar machinery
# ---------------------------------------------------------------------------

def moser_inequality_gap(a, b, p, tau1, tau2):
    """LHS - RHS of the scalar Moser-iteration inequality; must be >= 0.

    Accepts scalars or arrays; tau = 0 is handled by the limit value 0 of the
    corresponding terms.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    t1 = np.asarray(tau1, dtype=float)
    t2 = np.asarray(tau2, dtype=float)
    lhs = (b - a) * (t1 ** (p + 1) * a ** (-p) - t2 ** (p + 1) * b ** (-p))

    def pw(tau, base, expo):
        # (base/tau)^expo * [tau > 0], with the tau->0 limit equal to 0
        out = np.zeros(np.broadcast(tau, base, expo).shape)
        pos = np.broadcast_to(tau > 0, out.shape)
        ratio = np.where(pos, np.where(pos, base, 1.0) / np.where(tau > 0, tau, 1.0), 1.0)
        out = np.where(pos, ratio**expo, 0.0)
        return out

    half = (1.0 - p) / 2.0
    s1 = (t1 * t2 / (p - 1.0)) * (pw(t2, b, half) - pw(t1, a, half)) ** 2
    cp = np.maximum(4.0, (6.0 * p - 5.0) / 2.0)
    s2 = cp * (t2 - t1) ** 2 * (pw(t2, b, 1.0 - p) + pw(t1, a, 1.0 - p))
    rhs = s1 - s2
    gap = lhs - rhs
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(s1)), np.abs(s2))
    return gap, scale


def log_identity_check(a: float, b: float, K_order: int):
    """((a-b)^2/(ab), truncated even-log series); they agree as K grows."""
    if a <= 0 or b <= 0:
        raise ValueError("a, b must be positive")
    exact = (a - b) ** 2 / (a * b)
    t = math.log(a) - math.log(b)
    partial = t * t
    term = 1.0
    for k in range(2, K_order + 1):
        partial += 2.0 * t ** (2 * k) / math.factorial(2 * k)
    return exact, partial


# ---------------------------------------------------------------------------
# rescaling
# ---------------------------------------------------------------------------

def _rescale_support(support, r):
    if isinstance(support, K.BallSupport):
        return K.BallSupport(support.r / r)
    if isinstance(support, K.AnnulusSupport):
        return K.AnnulusSupport(support.r / r, support.R / r)
    return support  # full space and cones are dilation invariant


def rescale_measure(m: K.Measure, r: float) -> K.Measure:
    """nu_tilde(B) = r^alpha nu(rB): the jump measure of u(J(x)), J = r x + xi."""
    al = m.alpha
    comps = []
    for c in m.components:
        if isinstance(c, K.RadialPower):
            comps.append(K.RadialPower(c.scale * r ** (al - c.order), c.order,
                                       _rescale_support(c.support, r)))
        elif isinstance(c, K.Subspace):
            if c.profile_power is not None:
                s, o = c.profile_power
                comps.append(K.Subspace(c.basis, profile_power=(s * r ** (al - o), o)))
            else:
                prof = c.profile
                comps.append(K.Subspace(
                    c.basis,
                    profile=lambda t, prof=prof: r ** (al + 1) * prof(r * np.asarray(t))))
        elif isinstance(c, K.GridComponent):
            comps.append(K.GridComponent(c.centers / r, c.masses * r**al,
                                         c.spacing / r,
                                         excluded_mass=c.excluded_mass * r**al,
                                         excluded_moment2=c.excluded_moment2 * r ** (al - 2)))
        else:
            k0 = c.k
            d = m.dim

            def knew(z, k0=k0, r=r, al=al, d=d):
                return r ** (al + d) * np.asarray(k0(np.atleast_2d(z) * r), dtype=float)
            comps.append(K.GeneralDensity(k=knew,
                                          support_radius=c.support_radius / r))
    return K.Measure(tuple(comps), alpha=al, dim=m.dim, symmetric=m.symmetric,
                     name=f"{m.name}@r={r}")


def rescale_problem(kernel, u: GridFunction, f: GridFunction, xi, r: float):
    """Rescaled triple (mu~, u~, f~) with u~(x) = u(rx+xi), f~ = r^a f(rx+xi)."""
    if not (0.0 < r < 1.0):
        raise ValueError("scaling factor r must lie in (0,1)")
    base = _require_ti(kernel)
    if base is None:
        raise NotImplementedError("rescaling needs a translation-invariant kernel")
    xi = np.asarray(xi, dtype=float)
    alpha = base.alpha
    new_kernel = K.TranslationInvariant(rescale_measure(base, r))

    def make(gf, scale_val):
        b = gf.box
        new_box = Box(tuple((np.asarray(b.center) - xi) / r), b.half / r, b.n, b.dim)
        ext = gf.exterior

        def new_ext(pts, ext=ext, gf=gf):
            return scale_val * gf(np.atleast_2d(pts) * r + xi)
        return GridFunction(new_box, scale_val * gf.values.copy(),
                            FunctionExterior(new_ext))

    return new_kernel, make(u, 1.0), make(f, r**alpha)
