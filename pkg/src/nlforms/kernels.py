"""Jump-measure catalog: radial powers, cones, axes measures, thorn kernels.

A `Measure` is a finite sum of components; each component knows how to
integrate itself over radial windows, grid cells, and against test functions.
All catalog densities carry the ``(2 - alpha)`` normalization so that derived
constants stay bounded as the order approaches 2.

Dimensions d in {1, 2, 3} are supported; d = 2 is the workhorse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from ._quadrature import (
    gauss_nodes,
    power_ray_integral,
    power_ray_integral_vec,
    sphere_area,
    tensor_gauss,
)

__all__ = [
    "FullSpace", "BallSupport", "AnnulusSupport", "DoubleCone", "ThornSet",
    "RadialPower", "GeneralDensity", "ThornDensity", "Subspace", "GridComponent",
    "Measure", "TranslationInvariant", "DensityFamily",
    "catalog", "tail_mass", "rescale_alpha", "mollify_to_grid",
    "measure_to_dict",
]


# ---------------------------------------------------------------------------
# support sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullSpace:
    def contains(self, z):
        return np.ones(z.shape[0], dtype=bool)

    def radial_window(self):
        return 0.0, math.inf

    def angular_fraction(self, d):
        return 1.0


@dataclass(frozen=True)
class BallSupport:
    r: float

    def contains(self, z):
        return np.sum(z * z, axis=-1) < self.r**2

    def radial_window(self):
        return 0.0, self.r

    def angular_fraction(self, d):
        return 1.0


@dataclass(frozen=True)
class AnnulusSupport:
    r: float
    R: float

    def contains(self, z):
        s = np.sum(z * z, axis=-1)
        return (s >= self.r**2) & (s < self.R**2)

    def radial_window(self):
        return self.r, self.R

    def angular_fraction(self, d):
        return 1.0


@dataclass(frozen=True)
class DoubleCone:
    """M = {h : |<h/|h|, v>| >= theta}; v a unit vector, theta in [0, 1)."""
    axis: tuple
    threshold: float

    def contains(self, z):
        v = np.asarray(self.axis, dtype=float)
        nz = np.linalg.norm(z, axis=-1)
        nz = np.where(nz == 0.0, 1.0, nz)
        return np.abs(z @ v) >= self.threshold * nz

    def radial_window(self):
        return 0.0, math.inf

    def angular_fraction(self, d):
        if d == 1:
            return 1.0
        if d == 2:
            return 2.0 * math.acos(self.threshold) / math.pi
        return 1.0 - self.threshold  # d = 3: two spherical caps

    def arcs_2d(self):
        """The two angular arcs (in radians) of the cone in d = 2."""
        v = np.asarray(self.axis, dtype=float)
        phi0 = math.atan2(v[1], v[0])
        g = math.acos(self.threshold)
        return [(phi0 - g, phi0 + g), (phi0 + math.pi - g, phi0 + math.pi + g)]


@dataclass(frozen=True)
class ThornSet:
    """Gamma = {|x2| >= |x1|^b or |x1| >= |x2|^b} in the plane, b in (0,1)."""
    b: float

    def contains(self, z):
        a1 = np.abs(z[..., 0])
        a2 = np.abs(z[..., 1])
        return (a2 >= a1**self.b) | (a1 >= a2**self.b)

    def radial_window(self):
        return 0.0, math.inf


# ---------------------------------------------------------------------------
# measure components
# ---------------------------------------------------------------------------

def _power_shell(scale, order, d, angfrac, p_extra, r0, r1):
    """int over {r0<|z|<r1} of |z|^p_extra * scale*(2-order)*|z|^{-d-order} dz."""
    coef = scale * (2.0 - order) * angfrac * sphere_area(d)
    return coef * power_ray_integral(p_extra - 1.0 - order, r0, r1)


@dataclass
class RadialPower:
    """Density z -> scale * (2 - order) * |z|^{-d-order} restricted to support."""
    scale: float
    order: float
    support: object = field(default_factory=FullSpace)

    def density(self, z, d):
        nz = np.linalg.norm(z, axis=-1)
        out = np.zeros(z.shape[0])
        ok = (nz > 0) & self.support.contains(z)
        out[ok] = self.scale * (2.0 - self.order) * nz[ok] ** (-d - self.order)
        return out

    def _window(self, r0, r1):
        w0, w1 = self.support.radial_window()
        return max(r0, w0), min(r1, w1)

    def mass_between(self, d, r0, r1):
        a, b = self._window(r0, r1)
        return _power_shell(self.scale, self.order, d,
                            self.support.angular_fraction(d), 0.0, a, b)

    def moment2_between(self, d, r0, r1):
        a, b = self._window(r0, r1)
        return _power_shell(self.scale, self.order, d,
                            self.support.angular_fraction(d), 2.0, a, b)

    def is_absolutely_continuous(self, d):
        return True


@dataclass
class GeneralDensity:
    """Arbitrary nonnegative density k(z); integrals fall back to quadrature.

    ``fast_cells`` selects low-order cell rules for expensive evaluators
    (pointwise heart densities) where the caller tolerates percent-level
    lattice error.
    """
    k: Callable
    support_radius: float = math.inf
    fast_cells: bool = False

    def density(self, z, d):
        return np.asarray(self.k(z), dtype=float)

    def _polar_integral(self, d, r0, r1, radial_weight_pow, n_angle=256, n_rad=160):
        """int over {r0<|z|<r1} |z|^pow * k(z) dz by log-graded polar rule."""
        r1 = min(r1, self.support_radius)
        if not math.isfinite(r1):
            r1 = max(1e6, 100.0 * max(r0, 1.0))   # numeric horizon
        if r1 <= r0:
            return 0.0
        if r0 <= 0:
            r0 = 1e-12 * max(r1, 1.0)
        if getattr(self, "fast_cells", False):
            n_angle = min(n_angle, 64)
            n_rad = 16
        xs, ws = gauss_nodes(n_rad if n_rad <= 48 else 48)
        # piecewise log-graded radial panels
        n_panel = max(4, int(math.ceil(math.log(r1 / r0) / math.log(2.0))))
        edges = np.geomspace(r0, r1, n_panel + 1)
        total = 0.0
        if d == 1:
            for a, b in zip(edges[:-1], edges[1:]):
                r = 0.5 * (b - a) * xs + 0.5 * (a + b)
                w = 0.5 * (b - a) * ws
                z = r[:, None]
                total += np.sum(w * r**radial_weight_pow *
                                (self.density(z, d) + self.density(-z, d)))
            return total
        th = (np.arange(n_angle) + 0.5) * (2 * math.pi / n_angle)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        for a, b in zip(edges[:-1], edges[1:]):
            r = 0.5 * (b - a) * xs + 0.5 * (a + b)
            w = 0.5 * (b - a) * ws
            pts = r[:, None, None] * dirs[None, :, :]
            vals = self.density(pts.reshape(-1, 2), d).reshape(len(r), n_angle)
            total += (2 * math.pi / n_angle) * np.sum(
                w * r ** (radial_weight_pow + d - 1) * vals.sum(axis=1))
        return total

    def mass_between(self, d, r0, r1):
        if d == 1 and not math.isfinite(r1):
            # slowly decaying tails (log corrections) need the real infinity
            import warnings
            f = lambda s: (self.density(np.array([[s]]), 1)[0]
                           + self.density(np.array([[-s]]), 1)[0])
            hi = self.support_radius
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                if math.isfinite(hi):
                    if hi <= r0:
                        return 0.0
                    val, _ = integrate.quad(f, r0, hi, limit=200)
                else:
                    val, _ = integrate.quad(f, r0, np.inf, limit=400)
            return val
        return self._polar_integral(d, r0, r1, 0.0)

    def moment2_between(self, d, r0, r1):
        return self._polar_integral(d, r0, r1, 2.0)

    def is_absolutely_continuous(self, d):
        return True


class ThornDensity(GeneralDensity):
    """k(z) = (2-alpha) 1_{Gamma cap B_1}(z) |z|^{-2-beta}, beta = alpha-1+1/b.

    The four thorns around the half-axes are disjoint inside B_1, so every
    integral is a sum over branches; each branch is integrated in sliver
    coordinates (t along the axis, sigma across, |sigma| <= t^{1/b}).
    """

    def __init__(self, b: float, alpha: float):
        self.b = b
        self.alpha = alpha
        self.beta = alpha - 1.0 + 1.0 / b
        self.gamma = ThornSet(b)
        super().__init__(k=self._k, support_radius=1.0)

    def _k(self, z):
        nz = np.linalg.norm(z, axis=-1)
        out = np.zeros(z.shape[0])
        ok = (nz > 0) & (nz < 1.0) & self.gamma.contains(z)
        out[ok] = (2.0 - self.alpha) * nz[ok] ** (-2.0 - self.beta)
        return out

    def width(self, t):
        """Half-width of a thorn branch at axis coordinate t > 0."""
        t = np.asarray(t, dtype=float)
        return np.minimum(t ** (1.0 / self.b), np.sqrt(np.maximum(1.0 - t * t, 0.0)))

    def _branch_integral(self, pow_extra, r0, r1, n_panel=200):
        """One branch of int |z|^pow k(z) dz over {r0 < |z| < r1}.

        Sliver coordinates: t along the axis, sigma across, |sigma| <= w(t).
        By symmetry the sigma-integral runs over [s_lo, s_hi] and doubles.
        """
        r1 = min(r1, 1.0)
        if r1 <= r0:
            return 0.0
        if r0 <= 0.0 and pow_extra <= self.alpha:
            return math.inf
        t_min = max(r0 * 0.7, 1e-13)  # for t < ~r0 the radial clip empties the sliver
        if t_min >= r1:
            return 0.0
        xs, ws = gauss_nodes(12)
        si, wi = gauss_nodes(8)
        edges = np.geomspace(t_min, r1, n_panel + 1)
        # split exactly at the radial-clip onset and at min() kinks of the width
        extra = [r0] if t_min < r0 < r1 else []
        for rr_clip in (1.0, r1):
            lo_t, hi_t = 0.5 * rr_clip, rr_clip
            for _ in range(60):  # bisect t^{2/b} + t^2 = rr_clip^2
                mid_t = 0.5 * (lo_t + hi_t)
                if mid_t ** (2.0 / self.b) + mid_t**2 > rr_clip**2:
                    hi_t = mid_t
                else:
                    lo_t = mid_t
            if t_min < lo_t < r1:
                extra.append(lo_t)
        if extra:
            edges = np.unique(np.concatenate([edges, np.asarray(extra)]))
        total = 0.0
        for a, bb in zip(edges[:-1], edges[1:]):
            t = 0.5 * (bb - a) * xs + 0.5 * (a + bb)
            wt = 0.5 * (bb - a) * ws
            s_hi = np.minimum(self.width(t), np.sqrt(np.maximum(r1 * r1 - t * t, 0.0)))
            s_lo = np.sqrt(np.maximum(r0 * r0 - t * t, 0.0))
            wlen = np.maximum(s_hi - s_lo, 0.0)
            mid = 0.5 * (s_hi + s_lo)
            s = mid[:, None] + 0.5 * wlen[:, None] * si[None, :]
            rr = np.sqrt(t[:, None] ** 2 + s**2)
            vals = (2.0 - self.alpha) * rr ** (pow_extra - 2.0 - self.beta)
            inner = 0.5 * wlen * (vals * wi[None, :]).sum(axis=1)
            total += 2.0 * float(np.sum(wt * inner))
        return total

    def mass_between(self, d, r0, r1):
        return 4.0 * self._branch_integral(0.0, r0, r1)

    def moment2_between(self, d, r0, r1):
        return 4.0 * self._branch_integral(2.0, r0, r1)


@dataclass
class Subspace:
    """Density f on a line E = span(e) carried by 1D Hausdorff measure.

    `basis` is a single unit vector (higher-dimensional subspaces appear only
    through the heart convolution, which reduces them before they reach here).
    Power profiles store (scale, order) for closed-form integrals; otherwise
    `profile` is a callable t -> density.
    """
    basis: np.ndarray
    profile_power: Optional[tuple] = None   # (scale, order)
    profile: Optional[Callable] = None

    def __post_init__(self):
        e = np.asarray(self.basis, dtype=float).reshape(-1)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("subspace basis vector must be orthonormal to 1e-12")
        self.basis = e

    def profile_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.profile_power is not None:
            s, o = self.profile_power
            out = np.zeros_like(t)
            nz = np.abs(t) > 0
            out[nz] = s * (2.0 - o) * np.abs(t[nz]) ** (-1.0 - o)
            return out
        return np.asarray(self.profile(t), dtype=float)

    def mass_between(self, d, r0, r1):
        if self.profile_power is not None:
            s, o = self.profile_power
            return 2.0 * s * (2.0 - o) * power_ray_integral(-1.0 - o, r0, r1)
        return _line_quad(self.profile_at, 0.0, r0, r1)

    def moment2_between(self, d, r0, r1):
        if self.profile_power is not None:
            s, o = self.profile_power
            return 2.0 * s * (2.0 - o) * power_ray_integral(1.0 - o, r0, r1)
        return _line_quad(self.profile_at, 2.0, r0, r1)

    def is_absolutely_continuous(self, d):
        return d == 1


def _line_quad(profile, pow_extra, r0, r1):
    if not math.isfinite(r1):
        r1 = 1e8
    f = lambda t: t**pow_extra * (profile(np.array([t]))[0] + profile(np.array([-t]))[0])
    val, _ = integrate.quad(f, r0, r1, limit=200)
    return val


@dataclass
class GridComponent:
    """Lattice measure: point masses at cell centers (spacing-h lattice)."""
    centers: np.ndarray          # (N, d)
    masses: np.ndarray           # (N,)
    spacing: float
    excluded_mass: float = 0.0           # near-origin ball mass, may be inf
    excluded_moment2: float = 0.0        # int_{|z|<spacing/2} |z|^2 dnu

    def __post_init__(self):
        if np.any(self.masses < 0):
            raise ValueError("grid weights must be nonnegative")

    def radii(self):
        return np.linalg.norm(self.centers, axis=-1)

    def mass_between(self, d, r0, r1):
        r = self.radii()
        return float(np.sum(self.masses[(r >= r0) & (r < r1)]))

    def moment2_between(self, d, r0, r1):
        r = self.radii()
        keep = (r >= r0) & (r < r1)
        return float(np.sum(self.masses[keep] * r[keep] ** 2))

    def is_absolutely_continuous(self, d):
        return False


# ---------------------------------------------------------------------------
# measures and kernel families
# ---------------------------------------------------------------------------

@dataclass
class Measure:
    components: tuple
    alpha: float
    dim: int
    symmetric: bool = True
    name: str = "custom"

    def density(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if not all(c.is_absolutely_continuous(self.dim) for c in self.components):
            raise ValueError("measure has singular components; no pointwise density")
        out = np.zeros(z.shape[0])
        for c in self.components:
            if isinstance(c, Subspace):
                out += c.profile_at(z[:, 0])
            else:
                out += c.density(z, self.dim)
        return out

    def mass_between(self, r0, r1):
        return sum(c.mass_between(self.dim, r0, r1) for c in self.components)

    def moment2_between(self, r0, r1):
        return sum(c.moment2_between(self.dim, r0, r1) for c in self.components)

    def mass_outside(self, r):
        return self.mass_between(r, math.inf)

    def truncated_moment(self, r):
        """int (r ^ |z|)^2 dnu -- the quantity driving condition (U)."""
        return self.moment2_between(0.0, r) + r * r * self.mass_outside(r)

    def fingerprint(self):
        parts = [f"{self.name}:a{self.alpha}:d{self.dim}"]
        for c in self.components:
            if isinstance(c, RadialPower):
                parts.append(f"RP({c.scale},{c.order},{c.support})")
            elif isinstance(c, ThornDensity):
                parts.append(f"TH({c.b},{c.alpha})")
            elif isinstance(c, Subspace):
                parts.append(f"SS({tuple(np.round(c.basis, 12))},{c.profile_power},{id(c.profile) if c.profile else 0})")
            elif isinstance(c, GridComponent):
                parts.append(f"GR(id{id(c)})")
            else:
                parts.append(f"GD(id{id(c)})")
        return "|".join(parts)


@dataclass
class TranslationInvariant:
    """mu(x, A) = base(A - x)."""
    base: Measure

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def dim(self):
        return self.base.dim


@dataclass
class DensityFamily:
    """mu(x, dy) = k(x, y) dy with k symmetric; k vectorized over rows."""
    k: Callable
    alpha: float
    dim: int


def _axes_measure(d, alpha):
    comps = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        comps.append(Subspace(basis=e, profile_power=(1.0, alpha)))
    return Measure(tuple(comps), alpha=alpha, dim=d, name="axes")


def catalog(name: str, params: dict):
    """Build a named kernel family.

    Names: mu_alpha, mixed_order, cone, axes, thorn, custom.  Parameters are
    validated; alpha must lie in (0, 2).
    """
    p = dict(params)
    d = int(p.get("d", 2))
    if d not in (1, 2, 3):
        raise ValueError(f"dimension {d} unsupported (need 1, 2 or 3)")
    alpha = p.get("alpha")
    if name != "custom" or alpha is not None:
        alpha = float(alpha)
        if not (0.0 < alpha < 2.0):
            raise ValueError(f"alpha={alpha} outside (0,2)")

    if name == "mu_alpha":
        base = Measure((RadialPower(1.0, alpha),), alpha=alpha, dim=d, name="mu_alpha")
        return TranslationInvariant(base)

    if name == "axes":
        return TranslationInvariant(_axes_measure(d, alpha))

    if name == "cone":
        v = np.asarray(p.get("v", [1.0] + [0.0] * (d - 1)), dtype=float)
        v = v / np.linalg.norm(v)
        theta = float(p.get("theta", 0.5))
        if not (0.0 <= theta < 1.0):
            raise ValueError("cone threshold must lie in [0,1)")
        base = Measure((RadialPower(1.0, alpha, DoubleCone(tuple(v), theta)),),
                       alpha=alpha, dim=d, name="cone")
        return TranslationInvariant(base)

    if name == "thorn":
        if d != 2:
            raise ValueError("thorn kernel is planar (d=2) only")
        b = float(p["b"])
        if not (0.0 < b < 1.0):
            raise ValueError("thorn parameter b must lie in (0,1)")
        base = Measure((ThornDensity(b, alpha),), alpha=alpha, dim=2, name="thorn")
        return TranslationInvariant(base)

    if name == "mixed_order":
        beta = float(p["beta"])
        if not (0.0 < beta <= alpha):
            raise ValueError("mixed_order requires 0 < beta <= alpha")
        f, g = p.get("f"), p.get("g")
        if f is None and g is None:
            base = Measure((RadialPower(1.0, alpha), RadialPower(1.0, beta)),
                           alpha=alpha, dim=d, name="mixed_order")
            return TranslationInvariant(base)

        def k(x, y):
            z = np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)
            fv = f(x, y) if f is not None else 1.0
            gv = g(x, y) if g is not None else 1.0
            return (fv * (2 - alpha) * z ** (-d - alpha)
                    + gv * (2 - beta) * z ** (-d - beta))
        return DensityFamily(k=k, alpha=alpha, dim=d)

    if name == "custom":
        if "measure" in p:
            return TranslationInvariant(p["measure"])
        if "density" in p:
            base = Measure((GeneralDensity(p["density"], p.get("support_radius", math.inf)),),
                           alpha=alpha, dim=d, name="custom")
            return TranslationInvariant(base)
        if "k_xy" in p:
            return DensityFamily(k=p["k_xy"], alpha=alpha, dim=d)
        raise ValueError("custom kernel needs 'measure', 'density' or 'k_xy'")

    raise ValueError(f"unknown kernel name {name!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def tail_mass(m: Measure, r: float) -> float:
    """nu(R^d \\ B_r(0)); closed form for power components, quadrature else."""
    if r <= 0:
        raise ValueError("tail radius must be positive")
    return float(m.mass_outside(r))


def rescale_alpha(m: Measure, alpha0: float, alpha: float) -> Measure:
    """Interpolated measure: density times ((2-a)/(2-a0)) |z|^{a0-a}.

    Identity when alpha == alpha0; power components stay in closed form.
    """
    if alpha < alpha0:
        raise ValueError("rescale_alpha requires alpha >= alpha0")
    if not (0.0 < alpha0 <= alpha < 2.0):
        raise ValueError("orders must satisfy 0 < alpha0 <= alpha < 2")
    if alpha == alpha0:
        return m
    fac = (2.0 - alpha) / (2.0 - alpha0)
    comps = []
    for c in m.components:
        if isinstance(c, RadialPower):
            # scale*(2-a0)|z|^{-d-a0} * fac*|z|^{a0-a} = scale*(2-a)|z|^{-d-a}
            comps.append(RadialPower(c.scale, alpha, c.support))
        elif isinstance(c, Subspace):
            if c.profile_power is not None:
                s, _ = c.profile_power
                comps.append(Subspace(c.basis, profile_power=(s, alpha)))
            else:
                prof = c.profile
                comps.append(Subspace(
                    c.basis,
                    profile=lambda t, prof=prof: fac * np.abs(t) ** (alpha0 - alpha) * prof(t)))
        elif isinstance(c, ThornDensity):
            # fac * |z|^{a0-a} * (2-a0)|z|^{-2-beta(a0)} = (2-a)|z|^{-2-beta(a)}
            comps.append(ThornDensity(c.b, alpha))
        elif isinstance(c, GridComponent):
            r = c.radii()
            w = np.where(r > 0, fac * r ** (alpha0 - alpha), 0.0)
            comps.append(GridComponent(c.centers, c.masses * w, c.spacing,
                                       excluded_mass=math.inf if c.excluded_mass else 0.0,
                                       excluded_moment2=c.excluded_moment2 * fac))
        else:
            k0 = c.k
            da = alpha0 - alpha

            def knew(z, k0=k0, fac=fac, da=da):
                z = np.atleast_2d(z)
                nz = np.linalg.norm(z, axis=-1)
                out = np.asarray(k0(z), dtype=float) * fac
                pos = nz > 0
                out[pos] = out[pos] * nz[pos] ** da
                return out
            comps.append(GeneralDensity(k=knew, support_radius=c.support_radius))
    return Measure(tuple(comps), alpha=alpha, dim=m.dim, symmetric=m.symmetric,
                   name=f"{m.name}^({alpha}<-{alpha0})")


def _cell_centers(L, n, d):
    h = 2.0 * L / n
    side = -L + (np.arange(n) + 0.5) * h
    grids = np.meshgrid(*([side] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1), h


class _GridIndex:
    """Maps points to flat indices of a regular cell grid."""

    def __init__(self, centers, h):
        self.h = h
        self.d = centers.shape[1]
        self.first = centers[0]
        # infer shape: centers come flattened from an (n,)*d meshgrid
        n = round(centers.shape[0] ** (1.0 / self.d))
        assert n**self.d == centers.shape[0]
        self.shape = (n,) * self.d

    def flat(self, pts):
        """Flat indices for points; -1 where outside the grid."""
        idx = np.round((np.atleast_2d(pts) - self.first) / self.h).astype(int)
        ok = np.all((idx >= 0) & (idx < self.shape[0]), axis=1)
        flat = np.full(idx.shape[0], -1, dtype=int)
        if np.any(ok):
            flat[ok] = np.ravel_multi_index(tuple(idx[ok].T), self.shape)
        return flat


def component_cell_integrals(comp, d, centers, h, pow_extra, origin_mode="zero"):
    """Per-cell integrals int_cell |z|^pow_extra dnu for one component.

    Cells are the cubes center +- h/2 of a regular grid.  Cells meeting the
    origin are either zeroed out (``origin_mode='zero'``, the energy-lattice
    convention) or keep the part outside the ball B_{h/2}
    (``origin_mode='mask_ball'``, the mollifier convention).
    """
    N = centers.shape[0]
    out = np.zeros(N)
    touching = np.all(np.abs(centers) < 0.51 * h, axis=1)
    gi = _GridIndex(centers, h)
    ball_clip = 0.5 * h if origin_mode == "mask_ball" else 0.0

    if isinstance(comp, RadialPower) and d == 1:
        sides = np.abs(centers[:, 0])
        lo = np.maximum(sides - 0.5 * h, 0.0)
        hi = sides + 0.5 * h
        lo = np.where(touching, max(ball_clip, 0.0), lo)
        w0, w1 = comp.support.radial_window()
        a = np.clip(lo, w0, w1)
        b = np.clip(hi, w0, w1)
        coef = comp.scale * (2.0 - comp.order)
        out = coef * power_ray_integral_vec(pow_extra - 1.0 - comp.order,
                                            np.maximum(a, 1e-300), b)
        if origin_mode == "zero":
            out[touching] = 0.0
        return out
    if isinstance(comp, RadialPower) and d == 2:
        # polar (exact in r) near the origin and on support boundaries,
        # vectorized tensor Gauss in the smooth far field
        rr_min = np.maximum(np.max(np.abs(centers), axis=1) - 0.5 * h, 0.0)
        rr_max = np.linalg.norm(np.abs(centers) + 0.5 * h, axis=1)
        near = np.max(np.abs(centers), axis=1) <= 8.5 * h
        w0, w1 = comp.support.radial_window()
        straddle = np.zeros(N, dtype=bool)
        for rs in (w0, w1):
            if 0.0 < rs < math.inf:
                straddle |= (rr_min < rs) & (rs < rr_max)
        if isinstance(comp.support, DoubleCone):
            corners = (centers[:, None, :]
                       + 0.5 * h * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])[None])
            inside = comp.support.contains(corners.reshape(-1, 2)).reshape(N, 4)
            straddle |= ~(np.all(inside, axis=1) | ~np.any(inside, axis=1))
        polar_sel = near | straddle
        out = np.zeros(N)
        out[polar_sel] = _radial_cells_2d(comp, centers[polar_sel], h, pow_extra,
                                          touching[polar_sel], ball_clip,
                                          origin_mode)
        far = ~polar_sel
        if np.any(far):
            x, w = gauss_nodes(6)
            offs = np.stack(np.meshgrid(0.5 * h * x, 0.5 * h * x,
                                        indexing="ij"), axis=-1).reshape(-1, 2)
            wts = np.stack(np.meshgrid(0.5 * h * w, 0.5 * h * w,
                                       indexing="ij"), axis=-1).reshape(-1, 2).prod(axis=1)
            ids = np.nonzero(far)[0]
            for i0 in range(0, ids.size, 4096):
                blk = ids[i0:i0 + 4096]
                pts = (centers[blk, None, :] + offs[None, :, :]).reshape(-1, 2)
                vals = comp.density(pts, 2)
                if pow_extra:
                    vals = vals * np.sum(pts * pts, axis=1) ** (pow_extra / 2.0)
                out[blk] = vals.reshape(len(blk), -1) @ wts
        return out
    if isinstance(comp, ThornDensity):
        return _thorn_cells(comp, centers, h, pow_extra, touching, gi, ball_clip,
                            origin_mode)
    if isinstance(comp, Subspace):
        return _line_cells(comp, d, centers, h, pow_extra, touching, gi, ball_clip,
                           origin_mode)
    if isinstance(comp, GridComponent):
        flat = gi.flat(comp.centers)
        r = comp.radii()
        w = comp.masses * (r**pow_extra if pow_extra else 1.0)
        keep = flat >= 0
        if origin_mode == "zero":
            keep &= ~touching[np.clip(flat, 0, N - 1)]
        else:
            keep &= r > ball_clip
        np.add.at(out, flat[keep], w[keep])
        return out
    # generic density in d >= 1: tensor Gauss with masking, refined near origin
    near = np.max(np.abs(centers), axis=1) <= 4.5 * h
    orders = (4, 1) if getattr(comp, "fast_cells", False) else (16, 4)
    for sel, order in ((near, orders[0]), (~near, orders[1])):
        ids = np.nonzero(sel)[0]
        if ids.size == 0:
            continue
        x, w = gauss_nodes(order)
        grids = np.meshgrid(*([0.5 * h * x] * d), indexing="ij")
        offs = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*([0.5 * h * w] * d), indexing="ij")
        wts = np.ones(offs.shape[0])
        for g in wgrids:
            wts = wts * g.ravel()
        for i0 in range(0, ids.size, 2048):
            blk = ids[i0:i0 + 2048]
            pts = centers[blk, None, :] + offs[None, :, :]
            flat = pts.reshape(-1, d)
            vals = comp.density(flat, d)
            rr = np.linalg.norm(flat, axis=-1)
            if pow_extra:
                vals = vals * rr**pow_extra
            if ball_clip > 0:
                vals = vals * (rr > ball_clip)
            out[blk] = (vals.reshape(len(blk), -1)) @ wts
    if origin_mode == "zero":
        out[touching] = 0.0
    return out


def _radial_cells_2d(comp, centers, h, pow_extra, touching, ball_clip,
                     origin_mode):
    """Exact-in-radius polar integration of a radial power over square cells.

    Per angle the ray crosses a cell in one radial interval with closed-form
    power integral; the angular quadrature is split at cell-corner angles and
    (for cones) at the arc boundaries, so every piece is smooth.
    """
    N = centers.shape[0]
    out = np.zeros(N)
    w0, w1 = comp.support.radial_window()
    coef = comp.scale * (2.0 - comp.order)
    p = pow_extra - 1.0 - comp.order  # power of r after the area element
    arcs = comp.support.arcs_2d() if isinstance(comp.support, DoubleCone) else None
    xg, wg = gauss_nodes(24)
    for i in range(N):
        cx, cy = centers[i]
        if origin_mode == "zero" and touching[i]:
            continue
        a1, b1, a2, b2 = cx - 0.5 * h, cx + 0.5 * h, cy - 0.5 * h, cy + 0.5 * h
        corners = np.array([[a1, a2], [a1, b2], [b1, a2], [b1, b2]])
        angs = np.arctan2(corners[:, 1], corners[:, 0])
        if angs.max() - angs.min() > math.pi:  # wrap across the -x axis
            angs = np.where(angs < 0, angs + 2 * math.pi, angs)
        splits = np.unique(angs)
        if a1 <= 0.0 <= b1 and a2 <= 0.0 <= b2:
            # origin inside the closure: the cell is seen under all angles
            splits = np.concatenate([splits, [splits[0] + 2 * math.pi]])
        if arcs is not None:
            ext = []
            for lo, hi_ in arcs:
                for t in (lo, hi_):
                    for shift in (-2 * math.pi, 0.0, 2 * math.pi):
                        tt = t + shift
                        if splits.min() < tt < splits.max():
                            ext.append(tt)
            if ext:
                splits = np.unique(np.concatenate([splits, np.asarray(ext)]))
        val = 0.0
        for t0, t1 in zip(splits[:-1], splits[1:]):
            if t1 - t0 < 1e-15:
                continue
            th = 0.5 * (t1 - t0) * xg + 0.5 * (t0 + t1)
            wth = 0.5 * (t1 - t0) * wg
            c, s = np.cos(th), np.sin(th)
            rin = np.zeros_like(th)
            rout = np.full_like(th, np.inf)
            for ax_lo, ax_hi, cc in ((a1, b1, c), (a2, b2, s)):
                with np.errstate(divide="ignore", invalid="ignore"):
                    t_lo = ax_lo / cc
                    t_hi = ax_hi / cc
                lo_r = np.minimum(t_lo, t_hi)
                hi_r = np.maximum(t_lo, t_hi)
                small = np.abs(cc) < 1e-15
                lo_r = np.where(small, 0.0, lo_r)
                hi_r = np.where(small, np.inf, hi_r)
                rin = np.maximum(rin, lo_r)
                rout = np.minimum(rout, hi_r)
            rin = np.maximum(rin, max(ball_clip, w0))
            rout = np.minimum(rout, w1)
            if arcs is not None:
                inside = np.zeros_like(th, dtype=bool)
                for lo, hi_ in arcs:
                    for shift in (-2 * math.pi, 0.0, 2 * math.pi):
                        inside |= (th >= lo + shift) & (th <= hi_ + shift)
                rout = np.where(inside, rout, rin)
            rad = coef * power_ray_integral_vec(
                p, np.maximum(rin, 1e-300), np.maximum(rout, np.maximum(rin, 1e-300)))
            val += float(np.sum(wth * rad))
        out[i] = val
    return out


def _line_cells(comp, d, centers, h, pow_extra, touching, gi, ball_clip,
                origin_mode):
    """March along the line t -> t*e, splitting at cell-boundary crossings."""
    e = comp.basis
    out = np.zeros(centers.shape[0])
    L = np.max(np.abs(centers)) + 0.5 * h
    tmax = L / np.max(np.abs(e)) + h
    bps = [0.0, tmax]
    for i in range(d):
        if abs(e[i]) < 1e-15:
            continue
        edge0 = abs(centers[0][i]) % h  # cell-boundary offset pattern
        ks = np.arange(0.0, tmax * abs(e[i]) / h + 2.0)
        bps.extend((ks * h + (0.5 * h - edge0 % h)) / abs(e[i]))
    if ball_clip > 0:
        bps.append(ball_clip)
    bps = np.unique(np.clip(np.asarray(bps), 0.0, tmax))
    mids = 0.5 * (bps[:-1] + bps[1:])
    eps = 1e-9 * h
    for sgn in (1.0, -1.0):
        pts = mids[:, None] * (sgn * e)[None, :]
        # a line riding a cell boundary is split between both neighbours
        flat_a = gi.flat(pts + eps)
        flat_b = gi.flat(pts - eps)
        for seg, (a, b) in enumerate(zip(bps[:-1], bps[1:])):
            if ball_clip > 0 and b <= ball_clip:
                continue
            if comp.profile_power is not None:
                s, o = comp.profile_power
                def seg_val(a_eff):
                    return s * (2.0 - o) * power_ray_integral(
                        pow_extra - 1.0 - o, a_eff, b)
            else:
                def seg_val(a_eff):
                    f = lambda t: comp.profile_at(np.array([sgn * t]))[0] * t**pow_extra
                    v, _ = integrate.quad(f, a_eff, b, limit=60)
                    return v
            targets = {flat_a[seg], flat_b[seg]}
            share = 1.0 / len(targets)
            for i in targets:
                if i < 0:
                    continue
                if origin_mode == "zero" and touching[i]:
                    continue
                a_eff = max(a, ball_clip) if touching[i] else a
                out[i] += share * seg_val(a_eff)
    return out


def _thorn_cells(comp, centers, h, pow_extra, touching, gi, ball_clip,
                 origin_mode):
    """Branch-aware cell integrals; the sliver is far thinner than a cell."""
    out = np.zeros(centers.shape[0])
    nmax = int((np.max(np.abs(centers)) + h) / h) + 1
    xs, ws = gauss_nodes(12)
    si, wi = gauss_nodes(8)
    # t-columns follow the cell boundary pattern of the target grid
    edge0 = (abs(centers[0][0]) % h)
    col_edges = np.arange(-1.0, nmax + 1.0) * h + (0.5 * h - edge0 % h)
    col_edges = col_edges[(col_edges > 0) & (col_edges < 1.0 + h)]
    col_edges = np.concatenate([[1e-13], col_edges, [1.0]])
    col_edges = np.unique(np.clip(col_edges, 1e-13, 1.0))
    def sigma_piece(t, wt, lo, hi, target_z0, target_z1, axis, sgn):
        """Integrate one sigma-interval [lo, hi] (arrays over t) into a cell."""
        wlen = np.maximum(hi - lo, 0.0)
        if not np.any(wlen > 0):
            return
        mid = 0.5 * (np.maximum(lo, hi * 0 + lo) + np.minimum(hi, hi))
        mid = 0.5 * (lo + hi)
        s = mid[:, None] + 0.5 * wlen[:, None] * si[None, :]
        rr = np.sqrt(t[:, None] ** 2 + s**2)
        vals = (2.0 - comp.alpha) * rr ** (pow_extra - 2.0 - comp.beta)
        inner = 0.5 * wlen * (vals * wi[None, :]).sum(axis=1)
        z = np.array([sgn * target_z0, target_z1] if axis == 0
                     else [target_z1, sgn * target_z0])
        i = gi.flat(z[None, :])[0]
        if i < 0:
            return
        if origin_mode == "zero" and touching[i]:
            return
        out[i] += float(np.sum(wt * inner))

    for axis in (0, 1):
        for sgn in (1.0, -1.0):
            for a, bcol in zip(col_edges[:-1], col_edges[1:]):
                # subdivide wide columns geometrically; split at the ball clip
                sub = list(np.geomspace(a, bcol, 10) if bcol / a > 1.5
                           else [a, bcol])
                if ball_clip > 0 and a < ball_clip < bcol:
                    sub = sorted(set(sub) | {ball_clip})
                for a2, b2 in zip(sub[:-1], sub[1:]):
                    t = 0.5 * (b2 - a2) * xs + 0.5 * (a2 + b2)
                    wt = 0.5 * (b2 - a2) * ws
                    wd = comp.width(t)
                    s_ball = (np.sqrt(np.maximum(ball_clip**2 - t * t, 0.0))
                              if ball_clip > 0 else np.zeros_like(t))
                    ms_hi = int(np.max(wd) / h) + 2
                    tm = 0.5 * (a2 + b2)
                    for ms in range(-ms_hi, ms_hi + 1):
                        s_cell_lo = centers[0][1] - 0.5 * h + (ms + round(
                            (0.0 - centers[0][1]) / h)) * h
                        s0 = np.maximum(s_cell_lo, -wd)
                        s1 = np.minimum(s_cell_lo + h, wd)
                        sm = s_cell_lo + 0.5 * h
                        # remove the excluded ball interval (-s_ball, s_ball)
                        sigma_piece(t, wt, s0, np.minimum(s1, -s_ball),
                                    tm, sm, axis, sgn)
                        sigma_piece(t, wt, np.maximum(s0, s_ball), s1,
                                    tm, sm, axis, sgn)
    return out


def component_integrate(comp, d, f, r0, r1, f_limit=0.0, n_ang=128,
                        kink_radii=(), n_rad_panel=24):
    """int_{r0 < |z| < r1} f(z) dnu for one component; f vectorized (N,d)->(N,).

    ``f_limit`` is the value of f at infinity; when r1 is infinite the far
    field beyond a numeric horizon enters exactly as f_limit * tail mass.
    ``kink_radii`` lists radii where f loses smoothness (quadrature splits).
    """
    horizon = None
    if not math.isfinite(r1):
        horizon = max([64.0, 4.0 * max([k for k in kink_radii], default=1.0)])
        tail = comp.mass_between(d, horizon, math.inf)
        far = f_limit * tail
        r1 = horizon
    else:
        far = 0.0
    if r1 <= r0:
        return far
    if isinstance(comp, Subspace):
        import warnings
        e = comp.basis
        total = 0.0
        for sgn in (1.0, -1.0):
            fun = lambda t: (float(np.asarray(f((t * sgn * e)[None, :])).ravel()[0])
                             * comp.profile_at(np.array([sgn * t]))[0])
            pts = sorted({r0, r1, *[k for k in kink_radii if r0 < k < r1]})
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                for a, b in zip(pts[:-1], pts[1:]):
                    v, _ = integrate.quad(fun, a, b, limit=400)
                    total += v
        return total + far
    if isinstance(comp, GridComponent):
        r = comp.radii()
        keep = (r >= r0) & (r < r1)
        if not np.any(keep):
            return far
        vals = np.asarray(f(comp.centers[keep])).ravel()
        return float(np.sum(vals * comp.masses[keep])) + far
    if isinstance(comp, ThornDensity):
        return _thorn_integrate_f(comp, f, r0, min(r1, 1.0)) + far
    if d == 1:
        w0, w1 = comp.support.radial_window() if isinstance(comp, RadialPower) \
            else (0.0, getattr(comp, "support_radius", math.inf))
        a0, b0 = max(r0, w0), min(r1, w1)
        if b0 <= a0:
            return far
        import warnings
        total = 0.0
        for sgn in (1.0, -1.0):
            def fun(s):
                z = np.array([[sgn * s]])
                return float(np.asarray(f(z)).ravel()[0]) * comp.density(z, 1)[0]
            pts = sorted({a0, b0, *[k for k in kink_radii if a0 < k < b0]})
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                for a, b in zip(pts[:-1], pts[1:]):
                    v, _ = integrate.quad(fun, a, b, limit=400)
                    total += v
        return total + far
    # d >= 2 (densities incl. cones): angular nodes x log-graded radial panels
    if isinstance(comp, RadialPower) and isinstance(comp.support, DoubleCone):
        arcs = comp.support.arcs_2d()
        th = np.concatenate([np.linspace(a, b, n_ang // 2, endpoint=False)
                             + (b - a) / n_ang for a, b in arcs])
        wth = np.full(th.size, sum(b - a for a, b in arcs) / th.size)
    else:
        th = (np.arange(n_ang) + 0.5) * (2 * math.pi / n_ang)
        wth = np.full(n_ang, 2 * math.pi / n_ang)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    if isinstance(comp, RadialPower):
        w0, w1 = comp.support.radial_window()
        a0, b0 = max(r0, w0, 1e-12), min(r1, w1)
    else:
        a0, b0 = max(r0, 1e-12), min(r1, getattr(comp, "support_radius", r1))
    if b0 <= a0:
        return far
    edges = np.geomspace(a0, b0, n_rad_panel + 1)
    kk = [k for k in kink_radii if a0 < k < b0]
    if kk:
        edges = np.unique(np.concatenate([edges, np.asarray(kk)]))
    xg, wg = gauss_nodes(12)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        rr = 0.5 * (b - a) * xg + 0.5 * (a + b)
        wr = 0.5 * (b - a) * wg
        pts = rr[:, None, None] * dirs[None, :, :]
        flat = pts.reshape(-1, d)
        fv = np.asarray(f(flat)).ravel()
        dv = comp.density(flat, d)
        vals = (fv * dv).reshape(rr.size, th.size)
        total += float(np.sum(wr[:, None] * wth[None, :] * vals
                              * rr[:, None] ** (d - 1)))
    return total + far


def _thorn_integrate_f(comp: ThornDensity, f, r0, r1, n_panel=160):
    total = 0.0
    xs, ws = gauss_nodes(10)
    si, wi = gauss_nodes(6)
    t_min = max(r0 * 0.7, 1e-10)
    if t_min >= r1:
        return 0.0
    edges = np.geomspace(t_min, r1, n_panel + 1)
    if t_min < r0 < r1:
        edges = np.unique(np.concatenate([edges, [r0]]))
    for axis in (0, 1):
        for sgn in (1.0, -1.0):
            for a, bb in zip(edges[:-1], edges[1:]):
                t = 0.5 * (bb - a) * xs + 0.5 * (a + bb)
                wt = 0.5 * (bb - a) * ws
                s_hi = np.minimum(comp.width(t),
                                  np.sqrt(np.maximum(r1 * r1 - t * t, 0.0)))
                s_lo = np.sqrt(np.maximum(r0 * r0 - t * t, 0.0))
                for sd in (1.0, -1.0):
                    lo, hi = sd * s_hi, sd * s_lo
                    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
                    wlen = np.maximum(hi - lo, 0.0)
                    mid = 0.5 * (hi + lo)
                    s = mid[:, None] + 0.5 * wlen[:, None] * si[None, :]
                    tt = np.broadcast_to(t[:, None], s.shape)
                    if axis == 0:
                        pts = np.stack([sgn * tt, s], axis=-1)
                    else:
                        pts = np.stack([s, sgn * tt], axis=-1)
                    flat = pts.reshape(-1, 2)
                    rr = np.sqrt(np.sum(flat * flat, axis=1)).reshape(s.shape)
                    fv = np.asarray(f(flat)).ravel().reshape(s.shape)
                    kv = (2.0 - comp.alpha) * rr ** (-2.0 - comp.beta)
                    inner = 0.5 * wlen * ((fv * kv) * wi[None, :]).sum(axis=1)
                    total += float(np.sum(wt * inner))
    return total


def measure_integrate(m: Measure, f, r0=0.0, r1=math.inf, f_limit=0.0,
                      kink_radii=()):
    """int f dnu over the radial window; see component_integrate."""
    return sum(component_integrate(c, m.dim, f, r0, r1, f_limit=f_limit,
                                   kink_radii=kink_radii)
               for c in m.components)


def near_field_matrix(m: Measure, h: float):
    """Q = int_{cell_0} z z^T dnu over the origin cell [-h/2, h/2]^d."""
    d = m.dim
    Q = np.zeros((d, d))
    for c in m.components:
        if isinstance(c, RadialPower):
            tr_ball = c.moment2_between(d, 0.0, 0.5 * h)
            if d == 1:
                Q[0, 0] += tr_ball
            else:
                ang = _angular_moment_matrix(c.support, d)
                Q += tr_ball * ang
                Q += _corner_moment(c, d, h)
        elif isinstance(c, Subspace):
            e = c.basis
            t_exit = 0.5 * h / np.max(np.abs(e))
            Q += np.outer(e, e) * c.moment2_between(d, 0.0, t_exit)
        elif isinstance(c, GridComponent):
            keep = np.all(np.abs(c.centers) < 0.5 * h, axis=1)
            for z, w in zip(c.centers[keep], c.masses[keep]):
                Q += w * np.outer(z, z)
            Q += (c.excluded_moment2 / d) * np.eye(d)
        elif isinstance(c, ThornDensity):
            q = c.moment2_between(d, 0.0, 0.5 * h)
            Q[0, 0] += 0.5 * q   # branches hug the axes; split trace evenly
            Q[1, 1] += 0.5 * q
            Q += _corner_moment(c, d, h)
        else:
            Q += (c.moment2_between(d, 0.0, 0.5 * h) / d) * np.eye(d)
            Q += _corner_moment(c, d, h)
    return Q


def _angular_moment_matrix(support, d):
    """Normalized angular matrix: int w w^T dS / int |w|^2 dS over the support."""
    if isinstance(support, DoubleCone) and d == 2:
        arcs = support.arcs_2d()
        M = np.zeros((2, 2))
        tot = 0.0
        for a, b in arcs:
            th = np.linspace(a, b, 200)
            w = np.stack([np.cos(th), np.sin(th)], axis=-1)
            M += np.trapezoid(np.einsum("ni,nj->nij", w, w), th, axis=0)
            tot += b - a
        return M / max(np.trace(M), 1e-300)
    return np.eye(d) / d


def _corner_moment(comp, d, h):
    """z z^T mass in cell_0 outside the inscribed ball (d >= 2 corner bits)."""
    order = 8 if getattr(comp, "fast_cells", False) else 24
    pts, wts = tensor_gauss([-0.5 * h] * d, [0.5 * h] * d, order)
    rr = np.linalg.norm(pts, axis=-1)
    mask = rr > 0.5 * h
    if not np.any(mask):
        return np.zeros((d, d))
    dens = comp.density(pts[mask], d)
    w = wts[mask] * dens
    return np.einsum("n,ni,nj->ij", w, pts[mask], pts[mask])


def mollify_to_grid(m: Measure, L: float, n: int) -> Measure:
    """Cell-averaged grid approximation of a measure on the box [-L, L]^d.

    The origin cell keeps only its annular part (outside the ball of radius
    spacing/2); the excluded near-origin mass and second moment are recorded
    on the component for second-difference quadrature.
    """
    if n < 8:
        raise ValueError("need at least 8 cells per axis")
    d = m.dim
    centers, h = _cell_centers(L, n, d)
    masses = np.zeros(centers.shape[0])
    for c in m.components:
        masses += component_cell_integrals(c, d, centers, h, 0.0,
                                           origin_mode="mask_ball")
    excl_mass = m.mass_between(0.0, 0.5 * h)
    excl_m2 = m.moment2_between(0.0, 0.5 * h)
    comp = GridComponent(centers=centers, masses=masses, spacing=h,
                         excluded_mass=excl_mass, excluded_moment2=excl_m2)
    return Measure((comp,), alpha=m.alpha, dim=d, symmetric=m.symmetric,
                   name=f"grid({m.name})")


def measure_to_dict(m: Measure):
    """JSON-friendly description (reconstruction goes through `catalog`)."""
    comps = []
    for c in m.components:
        if isinstance(c, RadialPower):
            comps.append({"type": "radial_power", "scale": c.scale,
                          "order": c.order, "support": repr(c.support)})
        elif isinstance(c, ThornDensity):
            comps.append({"type": "thorn", "b": c.b, "alpha": c.alpha})
        elif isinstance(c, Subspace):
            comps.append({"type": "subspace", "basis": list(map(float, c.basis)),
                          "profile_power": c.profile_power})
        elif isinstance(c, GridComponent):
            comps.append({"type": "grid", "cells": int(c.masses.size),
                          "spacing": c.spacing,
                          "total_mass": float(np.sum(c.masses))})
        else:
            comps.append({"type": "general_density",
                          "support_radius": c.support_radius})
    return {"name": m.name, "alpha": m.alpha, "dim": m.dim,
            "symmetric": m.symmetric, "components": comps}
