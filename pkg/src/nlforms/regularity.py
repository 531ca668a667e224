"""Poisson-kernel machinery on balls, Harnack reformulations, and the
oscillation-decay route from weak Harnack inequalities to Hoelder bounds.

The fractional Poisson kernel of the ball B_R,

    P(x, y) = c * (R^2-|x|^2)^{a/2} (|y|^2-R^2)^{-a/2} |x-y|^{-d},

is evaluated with the edge singularity at |y| = R handled by the substitution
t = |y|^2 - R^2 and QUADPACK's algebraic weighting; radial data reduce to a
one-dimensional integral over (0, inf) which two power substitutions make
smooth at both ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .grids import Ball, Box, FunctionExterior, GridFunction

__all__ = [
    "PoissonBall", "OscillationCertificate",
    "poisson_constant", "frac_laplace_constant",
    "poisson_extend", "radial_poisson", "counterexample",
    "frac_laplacian", "harnack_ratio_constant",
    "harnack_two_sided_check", "harnack_positive_part_check",
    "oscillation_decay", "holder_from_covering",
    "measure_holder_exponent", "log_bmo_energy",
]


@dataclass(frozen=True)
class PoissonBall:
    R: float
    alpha: float      # order in (0, 2]; 2 selects the classical kernel
    dim: int

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("radius must be positive")
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError("order must lie in (0, 2]")


def poisson_constant(d: int, alpha: float) -> float:
    """c = pi^{-d/2-1} Gamma(d/2) sin(pi alpha / 2)."""
    return math.pi ** (-d / 2.0 - 1.0) * math.gamma(d / 2.0) \
        * math.sin(math.pi * alpha / 2.0)


def frac_laplace_constant(d: int, alpha: float) -> float:
    """Normalizer of the singular-integral fractional Laplacian."""
    return math.gamma((d + alpha) / 2.0) / (
        2.0**(-alpha) * math.pi ** (d / 2.0) * abs(math.gamma(-alpha / 2.0)))


def _scalar(f):
    def g(y):
        return float(np.asarray(f(np.atleast_2d(y))).ravel()[0])
    return g


def _ray_integral_alg(h, alpha, T, breaks=()):
    """int_0^inf h(t) t^{-alpha/2} dt with the origin handled by QAWS."""
    pieces = sorted({0.0, T, *[b for b in breaks if 0.0 < b < T]})
    total = 0.0
    v, _ = integrate.quad(lambda t: h(t), pieces[0], pieces[1],
                          weight="alg", wvar=(-alpha / 2.0, 0.0), limit=200)
    total += v
    for a, b in zip(pieces[1:-1], pieces[2:]):
        v, _ = integrate.quad(lambda t: h(t) * t ** (-alpha / 2.0), a, b,
                              limit=200)
        total += v
    v, _ = integrate.quad(lambda t: h(t) * t ** (-alpha / 2.0), T, np.inf,
                          limit=200)
    return total + v


def poisson_extend(b: PoissonBall, f, x, f_breaks=()) -> float:
    """H_alpha(f | B_R)(x): the alpha-harmonic extension of exterior data f.

    f is a callable on (N, d) arrays; x an interior point (|x| < R).  For
    alpha = 2 the classical kernel of the ball is used (d = 1: linear
    interpolation of the two endpoint values).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    R, alpha, d = b.R, b.alpha, b.dim
    r = float(np.linalg.norm(x))
    if r >= R:
        return float(np.asarray(f(x[None, :])).ravel()[0])
    fs = _scalar(f)
    if alpha == 2.0:
        if d == 1:
            gl, gr = fs(np.array([-R])), fs(np.array([R]))
            return float(((R - x[0]) * gl + (R + x[0]) * gr) / (2 * R))
        th = (np.arange(512) + 0.5) * (2 * math.pi / 512)
        ypts = R * np.stack([np.cos(th), np.sin(th)], axis=-1)
        ker = (R * R - r * r) / (2 * math.pi * R
                                 * np.sum((ypts - x) ** 2, axis=1))
        vals = np.asarray(f(ypts)).ravel()
        return float(np.sum(ker * vals) * (2 * math.pi * R / 512))

    c = poisson_constant(d, alpha)
    # breaks in t = |y|^2 - R^2 coordinates
    tbreaks = [abs(s * s - R * R) for s in f_breaks]
    if d == 1:
        def h(t):
            y = math.sqrt(R * R + t)
            return (fs(np.array([y])) / abs(x[0] - y)
                    + fs(np.array([-y])) / abs(x[0] + y)) / (2.0 * y)
        val = _ray_integral_alg(h, alpha, T=max(4.0 * R * R, 1.0), breaks=tbreaks)
        return c * (R * R - r * r) ** (alpha / 2.0) * val
    if d == 2:
        n_th = 256
        th = (np.arange(n_th) + 0.5) * (2 * math.pi / n_th)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)

        def h(t):
            rho = math.sqrt(R * R + t)
            ypts = rho * dirs
            vals = np.asarray(f(ypts)).ravel()
            ker = 1.0 / np.sum((ypts - x) ** 2, axis=1)
            ang = float(np.sum(vals * ker)) * (2 * math.pi / n_th)
            return 0.5 * ang  # rho drho dtheta with drho = dt / (2 rho)
        val = _ray_integral_alg(h, alpha, T=max(4.0 * R * R, 1.0), breaks=tbreaks)
        return c * (R * R - r * r) ** (alpha / 2.0) * val
    raise NotImplementedError("poisson_extend supports d in {1, 2}")


def radial_poisson(b: PoissonBall, phi, x, phi_breaks=()) -> float:
    """h_R^phi(x) via the one-dimensional kernel for radial exterior data.

    phi maps radii in [R, inf) to values; the s-integral is made smooth at
    both endpoints by the substitutions s = t^{2/(2-alpha)} and s = w^{-2/alpha}.
    """
    R, alpha = b.R, b.alpha
    r = float(np.linalg.norm(np.atleast_1d(x)))
    if r >= R:
        return float(phi(r))
    if alpha == 2.0:
        return float(phi(R))
    A = R * R - r * r

    def arg(s):
        return math.sqrt(R * R + s * A)

    # break locations in s from radius breaks of phi
    sbr = sorted({(rr * rr - R * R) / A for rr in phi_breaks
                  if (rr * rr - R * R) / A > 0.0})
    q = 1.0 - alpha / 2.0
    pieces = [0.0] + [s for s in sbr if s < 1.0] + [1.0]
    total = 0.0
    for a0, b0 in zip(pieces[:-1], pieces[1:]):
        v, _ = integrate.quad(
            lambda t: phi(arg(t ** (1.0 / q))) / (1.0 + t ** (1.0 / q)) / q,
            a0**q, b0**q, limit=200)
        total += v
    pieces_hi = [1.0] + [s for s in sbr if s > 1.0]
    # s in [1, inf): s = w^{-2/alpha}, ds weight collapses to 2/alpha dw
    ws = sorted({s ** (-alpha / 2.0) for s in pieces_hi}, reverse=True)
    ws = ws + [0.0]
    for w_hi, w_lo in zip(ws[:-1], ws[1:]):
        v, _ = integrate.quad(
            lambda w: (2.0 / alpha) * phi(arg(w ** (-2.0 / alpha)))
            / (1.0 + w ** (2.0 / alpha)), w_lo, w_hi, limit=200)
        total += v
    return math.sin(math.pi * alpha / 2.0) / math.pi * total


def counterexample(b: PoissonBall, phi=None, n: int = 256,
                   phi_breaks=None):
    """Bounded function, alpha-harmonic in B_R, zero at 0 and positive in
    B_R \\ {0}: u = h^phi_R - h^phi_R(0) for a decreasing profile phi with a
    strict drop.

    Returns (u GridFunction, u_exact callable, h0) with the radial evaluator
    exact up to quadrature.
    """
    R = b.R
    if phi is None:
        drop = 1.25 * R
        phi = lambda s: 1.0 if s <= drop else 0.0
        phi_breaks = (drop,)
    phi_breaks = tuple(phi_breaks or ())
    h0 = radial_poisson(b, phi, np.zeros(b.dim), phi_breaks=phi_breaks)

    def u_exact(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        for i, p in enumerate(pts):
            rr = float(np.linalg.norm(p))
            if rr >= R:
                out[i] = phi(rr) - h0
            else:
                out[i] = radial_poisson(b, phi, p, phi_breaks=phi_breaks) - h0
        return out

    box = Box((0.0,) * b.dim, R, n, b.dim)
    u = GridFunction.from_callable(box, u_exact,
                                   exterior=FunctionExterior(u_exact))
    return u, u_exact, h0


def frac_laplacian(u_eval, x, alpha: float, d: int, delta: float = 1e-3,
                   breaks=(), rmax: float = 60.0) -> float:
    """Second-difference singular integral for the fractional Laplacian.

    u_eval takes (N, d) arrays; the inner ball of radius delta is replaced by
    the Taylor term driven by a finite-difference second derivative.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = frac_laplace_constant(d, alpha)
    if d == 1:
        def d2(s):
            return float(u_eval(np.array([[x[0] + s], [x[0] - s]])).sum()
                         - 2.0 * u_eval(np.array([[x[0]]]))[0])
        hh = delta
        upp = (d2(hh)) / hh**2
        core = upp * delta ** (2.0 - alpha) / (2.0 - alpha)
        pieces = sorted({delta, rmax, *[abs(bb - x[0]) for bb in breaks],
                         *[abs(-bb - x[0]) for bb in breaks]})
        pieces = [p for p in pieces if delta <= p <= rmax]
        if pieces[0] > delta:
            pieces = [delta] + pieces
        val = 0.0
        for a0, b0 in zip(pieces[:-1], pieces[1:]):
            v, _ = integrate.quad(lambda s: d2(s) * s ** (-1.0 - alpha),
                                  a0, b0, limit=200)
            val += v
        v, _ = integrate.quad(lambda s: d2(s) * s ** (-1.0 - alpha),
                              rmax, np.inf, limit=100)
        val += v
        return 0.5 * C * (core + val)
    # d == 2: polar second difference with an angular trapezoid
    n_th = 64
    th = (np.arange(n_th) + 0.5) * (math.pi / n_th)   # half circle; +/- pairs
    dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    u0 = float(u_eval(x[None, :])[0])

    def ang_d2(s):
        pts = np.concatenate([x[None, :] + s * dirs, x[None, :] - s * dirs])
        vals = np.asarray(u_eval(pts)).ravel()
        return float(np.sum(vals) - 2 * n_th * u0) * (math.pi / n_th)

    lap = ang_d2(delta) / (math.pi * delta**2) * 2.0
    core = math.pi * lap * delta ** (2.0 - alpha) / (2.0 - alpha)
    val = 0.0
    pieces = sorted({delta, *[b for b in breaks if delta < b < rmax], rmax})
    for a0, b0 in zip(pieces[:-1], pieces[1:]):
        v, _ = integrate.quad(lambda s: ang_d2(s) * s ** (-1.0 - alpha) * s,
                              a0, b0, limit=100)
        val += v
    v, _ = integrate.quad(lambda s: ang_d2(s) * s ** (-alpha), rmax, np.inf,
                          limit=60)
    val += v
    return 0.5 * C * (core + val)


# ---------------------------------------------------------------------------
# Harnack reformulations
# ---------------------------------------------------------------------------

def harnack_ratio_constant(d: int, alpha: float, inner: float = 0.5) -> float:
    """Exact sup of Poisson-kernel ratios P(x,y)/P(x',y) over x, x' in
    B_{inner R}, y outside B_R; scale free.  Valid for alpha = 2 as well."""
    return (1.0 / (1.0 - inner**2)) ** (alpha / 2.0) \
        * ((1.0 + inner) / (1.0 - inner)) ** d


def harnack_two_sided_check(b: PoissonBall, g, x, y, f_breaks=()):
    """Evaluate both sides of the sign-free Harnack reformulation.

    u = H_alpha(g | B_R); the bounds read
        c (u(y) - H(g^+)(y)) <= u(x) <= c (u(y) + H(g^-)(y)).
    """
    inner = 0.5
    c = harnack_ratio_constant(b.dim, b.alpha, inner)
    gp = lambda p: np.maximum(np.asarray(g(p), dtype=float), 0.0)
    gm = lambda p: np.maximum(-np.asarray(g(p), dtype=float), 0.0)
    ux = poisson_extend(b, g, x, f_breaks)
    uy = poisson_extend(b, g, y, f_breaks)
    hplus = poisson_extend(b, gp, y, f_breaks)
    hminus = poisson_extend(b, gm, y, f_breaks)
    lower = c * (uy - hplus)
    upper = c * (uy + hminus)
    return {"c": c, "u_x": ux, "u_y": uy, "H_plus": hplus, "H_minus": hminus,
            "lower": lower, "upper": upper,
            "ok": bool(lower <= ux * (1 + 1e-9) + 1e-12
                       and ux <= upper * (1 + 1e-9) + 1e-12)}


def _positive_part_c2(d, alpha, n_grid=48):
    """sup over y in B_{1/2}, |z| >= 1 of P^{3/4}(y,z) / (a(2-a)|z|^{-d-a})."""
    c = poisson_constant(d, alpha)
    rho = 0.75
    ys = np.linspace(-0.49, 0.49, n_grid)
    zs = np.concatenate([np.linspace(1.0 + 1e-9, 4, n_grid),
                         np.geomspace(4, 200, n_grid)])
    best = 0.0
    for ysign in (1.0, -1.0):
        for yv in ys:
            y = yv * ysign
            for zsign in (1.0, -1.0):
                z = zs * zsign
                ker = c * (rho**2 - y * y) ** (alpha / 2.0) \
                    * (zs**2 - rho**2) ** (-alpha / 2.0) * np.abs(z - y) ** (-d)
                ref = alpha * (2.0 - alpha) * zs ** (-d - alpha)
                best = max(best, float(np.max(ker / ref)))
    return best


def harnack_positive_part_check(b: PoissonBall, g, x, y, f_breaks=()):
    """u nonnegative in B_1, alpha-harmonic there; checks
       u(x) <= c ( u(y) + a(2-a) int_{|z|>1} u^-(z) |z|^{-d-a} dz )."""
    if abs(b.R - 1.0) > 1e-12:
        raise ValueError("the positive-part form is normalized to B_1")
    alpha, d = b.alpha, b.dim
    c1 = harnack_ratio_constant(d, alpha, inner=0.5 / 0.75)
    c2 = c1 * _positive_part_c2(d, alpha) if alpha < 2.0 else c1
    c = max(c1, c2)
    gm = lambda p: np.maximum(-np.asarray(g(p), dtype=float), 0.0)
    ux = poisson_extend(b, g, x, f_breaks)
    uy = poisson_extend(b, g, y, f_breaks)
    if d == 1:
        tail, _ = integrate.quad(
            lambda z: (gm(np.array([[z]]))[0] + gm(np.array([[-z]]))[0])
            * z ** (-1.0 - alpha), 1.0, np.inf, limit=200)
    else:
        th = (np.arange(128) + 0.5) * (2 * math.pi / 128)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)

        def ang(z):
            return float(np.sum(gm(z * dirs))) * (2 * math.pi / 128)
        tail, _ = integrate.quad(lambda z: ang(z) * z ** (-1.0 - alpha),
                                 1.0, np.inf, limit=200)
    tail *= alpha * (2.0 - alpha)
    upper = c * (uy + tail)
    return {"c": c, "u_x": ux, "u_y": uy, "tail": tail, "upper": upper,
            "ok": bool(ux <= upper * (1 + 1e-9) + 1e-12)}


# ---------------------------------------------------------------------------
# oscillation decay: weak Harnack -> Hoelder
# ---------------------------------------------------------------------------

@dataclass
class OscillationCertificate:
    c1: float
    p: float
    lam: float
    sigma: float
    theta: float
    tail_c: float
    tail_chi: float
    kappa: float
    beta: float
    beta_initial: float
    split_index: int
    tail_sum: float
    head_sum: float
    halvings: int
    history: list = field(default_factory=list)

    def final_bound(self, norm_u, rho, r):
        """osc_{B_rho} u <= 2 theta^beta ||u||_inf (rho / r)^beta."""
        return 2.0 * self.theta**self.beta * norm_u * (rho / r) ** self.beta


def _decay_sums(beta, theta, chi, c1, j_max=100000):
    budget = 1.0 / (16.0 * c1)
    q = theta**beta / chi
    if q >= 1.0:
        return None
    # smallest l with sum_{j>l} theta^{j beta} chi^{-j-1} <= budget
    tail = q ** 1 / (chi * (1 - q))
    l = 0
    while tail > budget:
        l += 1
        tail = q ** (l + 1) / (chi * (1 - q))
        if l > j_max:
            return None
    js = np.arange(1, l + 1)
    head = float(np.sum((theta ** (js * beta) - 1.0) * chi ** (-js - 1.0)))
    return l, tail, head


def oscillation_decay(c1: float, p: float, lam: float, sigma: float,
                      theta: float, tail_c: float, tail_chi: float,
                      max_halvings: int = 200) -> OscillationCertificate:
    """Certified Hoelder exponent from the weak-Harnack constants.

    kappa = (2 c1 2^{1/p})^{-1}; beta starts at ln(2/(2-kappa))/ln(theta) and
    is halved until both tail sums fit under (16 c1)^{-1}.
    """
    if tail_chi <= 1.0:
        raise ValueError("tail decay base chi must exceed 1 (divergent sums)")
    if c1 < 1.0 or p <= 0 or min(lam, sigma, theta) <= 1.0:
        raise ValueError("need c1 >= 1, p > 0 and lambda, sigma, theta > 1")
    kappa = 1.0 / (2.0 * c1 * 2.0 ** (1.0 / p))
    beta0 = math.log(2.0 / (2.0 - kappa)) / math.log(theta)
    beta = beta0
    budget = 1.0 / (16.0 * c1)
    halvings = 0
    while True:
        got = _decay_sums(beta, theta, tail_chi, c1)
        if got is not None:
            l, tail, head = got
            if tail <= budget and head <= budget:
                break
        beta *= 0.5
        halvings += 1
        if halvings > max_halvings:
            raise RuntimeError("could not certify a positive exponent")
    return OscillationCertificate(
        c1=c1, p=p, lam=lam, sigma=sigma, theta=theta, tail_c=tail_c,
        tail_chi=tail_chi, kappa=kappa, beta=beta, beta_initial=beta0,
        split_index=l, tail_sum=tail, head_sum=head, halvings=halvings)


def oscillation_bookkeeping(cert: OscillationCertificate, u_eval, r: float,
                            x0, n_steps: int, d: int = 1, n_sample: int = 512):
    """Run the two-sided M_n/m_n update for a concrete function and check the
    inductive band M_n - m_n <= K theta^{-n beta} at every step."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    theta, beta, lam = cert.theta, cert.beta, cert.lam

    def ball_sample(rad):
        if d == 1:
            pts = x0[None, :] + np.linspace(-rad, rad, n_sample)[:, None]
        else:
            k = int(math.sqrt(n_sample))
            rr = np.linspace(0, rad, k)
            th = np.linspace(0, 2 * math.pi, k, endpoint=False)
            R, T = np.meshgrid(rr, th, indexing="ij")
            pts = x0[None, :] + np.stack(
                [(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
        return np.asarray(u_eval(pts)).ravel()

    sup_global = float(np.max(np.abs(ball_sample(8.0 * r))))
    M = [sup_global]
    m = [-sup_global]
    KK = M[0] - m[0]
    rows = []
    ok = True
    for k in range(1, n_steps + 1):
        vals_prev = ball_sample(r * theta ** (-(k - 1)))
        vals_med = ball_sample(r * theta ** (-(k - 1)) / lam)
        mid = 0.5 * (M[-1] + m[-1])
        v = (vals_med - mid) * 2.0 * theta ** ((k - 1) * beta) / max(KK, 1e-300)
        case1 = np.mean(v <= 0) >= 0.5
        if case1:
            m_k = m[-1]
            M_k = m_k + KK * theta ** (-k * beta)
        else:
            M_k = M[-1]
            m_k = M_k - KK * theta ** (-k * beta)
        vals_k = ball_sample(r * theta ** (-k))
        slack = 1e-12 * max(1.0, KK)
        step_ok = bool(np.all(vals_k <= M_k + slack)
                       and np.all(vals_k >= m_k - slack)
                       and (M_k - m_k) <= KK * theta ** (-k * beta) + slack)
        ok = ok and step_ok
        rows.append({"n": k, "M": M_k, "m": m_k, "case1": bool(case1),
                     "band": KK * theta ** (-k * beta), "ok": step_ok})
        M.append(M_k)
        m.append(m_k)
    return ok, rows


def holder_from_covering(beta: float, theta: float, r0: float, x0=None,
                         norm_u: float = 1.0):
    """Evaluable bound |u(x)-u(y)| <= 16 theta^beta ||u|| (d(x,y)/(d(x,O^c) v d(y,O^c)))^beta."""
    def bound(x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        c = np.zeros_like(x) if x0 is None else np.asarray(x0, dtype=float)
        dx = r0 - np.linalg.norm(x - c)
        dy = r0 - np.linalg.norm(y - c)
        dd = np.linalg.norm(x - y)
        denom = max(max(dx, dy), 1e-300)
        return 16.0 * theta**beta * norm_u * (dd / denom) ** beta
    return bound


def measure_holder_exponent(u_eval, centers, radii=None, d: int = 1,
                            n_sample: int = 256):
    """Least-squares log-log slope of oscillation against radius.

    Returns (beta_hat, stderr, table); constants yield the sentinel inf.
    """
    if radii is None:
        radii = [2.0 ** (-k) for k in range(2, 8)]
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    slopes = []
    tables = []
    for c in np.atleast_2d(np.asarray(centers, dtype=float)):
        oscs = []
        for rho in radii:
            if d == 1:
                pts = c[None, :] + np.linspace(-rho, rho, n_sample)[:, None]
            else:
                k = int(math.sqrt(n_sample))
                rr = np.linspace(0, rho, k)
                th = np.linspace(0, 2 * math.pi, k, endpoint=False)
                R, T = np.meshgrid(rr, th, indexing="ij")
                offs = np.stack([(R * np.cos(T)).ravel(),
                                 (R * np.sin(T)).ravel()], axis=-1)
                pts = c[None, :] + offs
            vals = np.asarray(u_eval(pts)).ravel()
            oscs.append(float(np.max(vals) - np.min(vals)))
        oscs = np.asarray(oscs)
        tables.append((radii.copy(), oscs))
        if np.all(oscs <= 0):
            slopes.append((math.inf, 0.0))
            continue
        keep = oscs > 0
        lx, ly = np.log(radii[keep]), np.log(oscs[keep])
        if np.sum(keep) < 2:
            slopes.append((math.inf, 0.0))
            continue
        A = np.stack([lx, np.ones_like(lx)], axis=-1)
        coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
        dof = max(len(lx) - 2, 1)
        sig2 = float(res[0]) / dof if np.size(res) else 0.0
        var = sig2 * np.linalg.inv(A.T @ A)[0, 0]
        slopes.append((float(coef[0]), math.sqrt(max(var, 0.0))))
    finite = [s for s in slopes if math.isfinite(s[0])]
    if not finite:
        return math.inf, 0.0, tables
    i_min = int(np.argmin([s[0] for s in finite]))
    return finite[i_min][0], finite[i_min][1], tables


def log_bmo_energy(u_sol, kernel, z0, r, eps_floor: float = 1e-12):
    """Scaled log-energy of a positive solution over B_r(z0) x B_r(z0)."""
    from .forms import energy
    box = u_sol.box if isinstance(u_sol, GridFunction) else u_sol.u.box
    gf = u_sol if isinstance(u_sol, GridFunction) else u_sol.u
    vals = np.maximum(gf.values, eps_floor)
    logu = GridFunction(box, np.log(vals), exterior=gf.exterior)
    alpha = kernel.alpha
    d = box.dim
    e = energy(kernel, Ball(tuple(np.atleast_1d(z0)), r), logu)
    return e / r ** (d - alpha)
