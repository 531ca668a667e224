"""Uniform cell grids, grid functions, exterior data, and balls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["Box", "Ball", "GridFunction",
           "ZeroExterior", "ConstantExterior", "FunctionExterior",
           "TailPolynomial"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned cube [center - half, center + half]^d with n cells/axis."""
    center: tuple
    half: float
    n: int
    dim: int

    @property
    def h(self):
        return 2.0 * self.half / self.n

    @property
    def shape(self):
        return (self.n,) * self.dim

    def axis_centers(self):
        c = np.asarray(self.center, dtype=float)
        return [c[i] - self.half + (np.arange(self.n) + 0.5) * self.h
                for i in range(self.dim)]

    def cell_centers(self):
        grids = np.meshgrid(*self.axis_centers(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def lo(self):
        return np.asarray(self.center, dtype=float) - self.half

    def hi(self):
        return np.asarray(self.center, dtype=float) + self.half

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo()) & (pts <= self.hi()), axis=1)

    def flat_index(self, pts):
        """Nearest-cell flat indices, -1 outside."""
        pts = np.atleast_2d(pts)
        idx = np.floor((pts - self.lo()) / self.h).astype(int)
        ok = np.all((idx >= 0) & (idx < self.n), axis=1)
        out = np.full(pts.shape[0], -1, dtype=int)
        if np.any(ok):
            out[ok] = np.ravel_multi_index(tuple(idx[ok].T), self.shape)
        return out


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        c = np.asarray(self.center, dtype=float)
        return np.sum((pts - c) ** 2, axis=1) < self.radius**2

    def mask(self, box: Box, shrink: float = 0.0):
        """Boolean grid mask of cells with center inside the (shrunk) ball."""
        pts = box.cell_centers()
        c = np.asarray(self.center, dtype=float)
        r = self.radius - shrink
        return (np.sum((pts - c) ** 2, axis=1) < r * r).reshape(box.shape)


class ZeroExterior:
    def __call__(self, pts):
        return np.zeros(np.atleast_2d(pts).shape[0])


@dataclass
class ConstantExterior:
    c: float

    def __call__(self, pts):
        return np.full(np.atleast_2d(pts).shape[0], self.c)


@dataclass
class FunctionExterior:
    g: Callable
    support_radius: float = math.inf   # g vanishes beyond this radius, if finite

    def __call__(self, pts):
        return np.asarray(self.g(np.atleast_2d(pts)), dtype=float)


@dataclass
class TailPolynomial:
    """g(y) = amp * |y|^{-rate}; negative rate means polynomial growth."""
    rate: float
    amp: float = 1.0

    def __call__(self, pts):
        r = np.linalg.norm(np.atleast_2d(pts), axis=1)
        return self.amp * np.maximum(r, 1e-300) ** (-self.rate)


@dataclass
class GridFunction:
    """Cell-center values on a box plus an exterior rule beyond the box."""
    box: Box
    values: np.ndarray
    exterior: object = field(default_factory=ZeroExterior)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.box.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @classmethod
    def from_callable(cls, box: Box, f, exterior=None):
        vals = np.asarray(f(box.cell_centers()), dtype=float).reshape(box.shape)
        return cls(box, vals, exterior if exterior is not None else ZeroExterior())

    def __call__(self, pts):
        """Multilinear interpolation of cell values inside, exterior outside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        inside = self.box.contains(pts)
        if np.any(~inside):
            out[~inside] = self.exterior(pts[~inside])
        if np.any(inside):
            out[inside] = self._interp(pts[inside])
        return out

    def _interp(self, pts):
        b = self.box
        # coordinates in units of cells, relative to the first cell center
        t = (pts - (b.lo() + 0.5 * b.h)) / b.h
        t = np.clip(t, 0.0, b.n - 1.0)
        i0 = np.clip(np.floor(t).astype(int), 0, b.n - 2) if b.n > 1 else np.zeros(
            t.shape, dtype=int)
        frac = t - i0
        vals = np.zeros(pts.shape[0])
        d = b.dim
        for corner in range(1 << d):
            w = np.ones(pts.shape[0])
            idx = []
            for ax in range(d):
                bit = (corner >> ax) & 1
                w = w * (frac[:, ax] if bit else 1.0 - frac[:, ax])
                idx.append(i0[:, ax] + bit)
            vals += w * self.values[tuple(idx)]
        return vals

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path):
        pts = self.box.cell_centers()
        cols = [pts[:, i] for i in range(self.box.dim)] + [self.values.ravel()]
        header = ",".join([f"x{i+1}" for i in range(self.box.dim)] + ["value"])
        np.savetxt(path, np.stack(cols, axis=-1), delimiter=",",
                   header=header, comments="")
