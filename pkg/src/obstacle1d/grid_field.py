"""Uniform space-time grids, grid functions and finite-difference derivatives.

A :class:`Field` stores nodal values with shape ``(nt, nx)``: row ``n`` is
the time slice ``t_n`` and column ``i`` the abscissa ``x_i``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import GridError

# Relative slack (in units of a step) tolerated on box-membership tests.
_EDGE_SLACK = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on the box ``[x_min, x_max] x [t_min, t_max]``."""

    x_min: float
    x_max: float
    t_min: float
    t_max: float
    nx: int
    nt: int

    def __post_init__(self) -> None:
        for name in ("x_min", "x_max", "t_min", "t_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "nt", int(self.nt))
        if not self.x_min < self.x_max:
            raise GridError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if not self.t_min < self.t_max:
            raise GridError(f"t_min={self.t_min} must be < t_max={self.t_max}")
        if self.nx < 3:
            raise GridError(f"nx={self.nx}: need at least 3 space nodes")
        if self.nt < 2:
            raise GridError(f"nt={self.nt}: need at least 2 time nodes")

    @classmethod
    def from_steps(cls, x_min: float, x_max: float, t_min: float, t_max: float,
                   h: float, tau: float) -> "GridSpec":
        """Grid whose steps are as close as possible to (and not above) h, tau."""
        nx = int(np.ceil((x_max - x_min) / h - 1e-9)) + 1
        nt = int(np.ceil((t_max - t_min) / tau - 1e-9)) + 1
        return cls(x_min, x_max, t_min, t_max, max(nx, 3), max(nt, 2))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def tau(self) -> float:
        return (self.t_max - self.t_min) / (self.nt - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.t_min + self.tau * np.arange(self.nt)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``(X, T)`` of shape ``(nt, nx)``."""
        X, T = np.meshgrid(self.x, self.t)
        return X, T

    def node(self, i: int, n: int) -> tuple[float, float]:
        return self.x_min + i * self.h, self.t_min + n * self.tau

    def contains(self, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        ex = _EDGE_SLACK * self.h
        et = _EDGE_SLACK * self.tau
        return ((x >= self.x_min - ex) & (x <= self.x_max + ex)
                & (t >= self.t_min - et) & (t <= self.t_max + et))

    def nearest_index(self, x: float, t: float) -> tuple[int, int]:
        i = int(np.clip(round((x - self.x_min) / self.h), 0, self.nx - 1))
        n = int(np.clip(round((t - self.t_min) / self.tau), 0, self.nt - 1))
        return i, n

    def shifted(self, dx: float = 0.0, dt: float = 0.0, x_scale: float = 1.0) -> "GridSpec":
        """Grid with coordinates mapped by ``x -> (x - dx) / x_scale``, ``t -> t - dt``."""
        return GridSpec((self.x_min - dx) / x_scale, (self.x_max - dx) / x_scale,
                        self.t_min - dt, self.t_max - dt, self.nx, self.nt)


@dataclass(frozen=True, eq=False)
class Field:
    """Grid function with values of shape ``(nt, nx)``.

    ``obstacle=True`` marks the field as an obstacle-problem solution, which
    additionally requires non-negative values.
    """

    grid: GridSpec
    values: np.ndarray
    obstacle: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float, copy=True)
        g = self.grid
        if vals.shape != (g.nt, g.nx):
            raise GridError(f"values shape {vals.shape} does not match grid ({g.nt}, {g.nx})")
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        if self.obstacle and vals.min() < 0.0:
            raise GridError(f"obstacle solution has negative value {vals.min():.3e}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable, obstacle: bool = False,
                      **meta) -> "Field":
        """Sample a vectorised ``func(x, t)`` at the grid nodes."""
        X, T = grid.mesh()
        vals = np.broadcast_to(np.asarray(func(X, T), dtype=float), X.shape)
        return cls(grid, vals, obstacle=obstacle, meta=dict(meta))

    @cached_property
    def derived(self) -> tuple["Field", "Field", "Field"]:
        return derived_fields(self)

    def sample(self, x, t):
        return sample(self, x, t)

    def slice_at(self, n: int) -> np.ndarray:
        return self.values[n]


def _dx(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    out[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * h)
    out[:, 0] = (-3 * u[:, 0] + 4 * u[:, 1] - u[:, 2]) / (2 * h)
    out[:, -1] = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * h)
    return out


def _dxx(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    h2 = h * h
    out[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / h2
    if u.shape[1] >= 4:
        out[:, 0] = (2 * u[:, 0] - 5 * u[:, 1] + 4 * u[:, 2] - u[:, 3]) / h2
        out[:, -1] = (2 * u[:, -1] - 5 * u[:, -2] + 4 * u[:, -3] - u[:, -4]) / h2
    else:
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, -2]
    return out


def _dt(u: np.ndarray, tau: float) -> np.ndarray:
    out = np.empty_like(u)
    out[1:] = (u[1:] - u[:-1]) / tau
    out[0] = out[1]
    return out


def derived_fields(u: Field) -> tuple[Field, Field, Field]:
    """Finite-difference ``(ut, ux, uxx)`` of ``u``.

    Space derivatives are central in the interior and one-sided second order
    at the two space edges.  ``ut`` is a backward difference for ``n >= 1``
    and the forward difference at ``n = 0``.
    """
    g = u.grid
    if g.nx < 3:
        raise GridError("derived_fields needs nx >= 3")
    v = u.values
    ut = Field(g, _dt(v, g.tau))
    ux = Field(g, _dx(v, g.h))
    uxx = Field(g, _dxx(v, g.h))
    return ut, ux, uxx


def _lagrange_weights(s: np.ndarray, cubic: np.ndarray) -> np.ndarray:
    """Weights on the four nodes ``i-1 .. i+2`` for local coordinate ``s``."""
    w = np.empty(s.shape + (4,))
    w[..., 0] = -s * (s - 1) * (s - 2) / 6
    w[..., 1] = (s + 1) * (s - 1) * (s - 2) / 2
    w[..., 2] = -(s + 1) * s * (s - 2) / 2
    w[..., 3] = (s + 1) * s * (s - 1) / 6
    lin = np.zeros_like(w)
    lin[..., 1] = 1 - s
    lin[..., 2] = s
    return np.where(cubic[..., None], w, lin)


def _locate(coord: np.ndarray, lo: float, step: float, count: int):
    pos = (coord - lo) / step
    idx = np.clip(np.floor(pos).astype(int), 0, count - 2)
    s = pos - idx
    cubic = (idx >= 1) & (idx <= count - 3)
    return idx, s, cubic


def sample(u: Field, x, t):
    """Piecewise bicubic interpolation of ``u`` at ``(x, t)``.

    Each direction uses four-point Lagrange interpolation, degrading to
    linear in the cells touching the box edge.  Exact at nodes and for
    cubics away from the edge.  Raises :class:`GridError` outside the box.
    """
    g = u.grid
    x_arr, t_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    inside = g.contains(x_arr, t_arr)
    if not np.all(inside):
        bad = np.flatnonzero(~inside.ravel())[0]
        raise GridError(
            f"query ({x_arr.ravel()[bad]:.6g}, {t_arr.ravel()[bad]:.6g}) outside box "
            f"[{g.x_min}, {g.x_max}] x [{g.t_min}, {g.t_max}]")
    xs = np.clip(x_arr, g.x_min, g.x_max)
    ts = np.clip(t_arr, g.t_min, g.t_max)
    i, sx, cx = _locate(xs, g.x_min, g.h, g.nx)
    n, st, ct = _locate(ts, g.t_min, g.tau, g.nt)
    wx = _lagrange_weights(sx, cx)
    wt = _lagrange_weights(st, ct)
    v = u.values
    out = np.zeros(xs.shape)
    for b in range(4):
        nb = np.clip(n - 1 + b, 0, g.nt - 1)
        row = np.zeros(xs.shape)
        for a in range(4):
            ia = np.clip(i - 1 + a, 0, g.nx - 1)
            row += wx[..., a] * v[nb, ia]
        out += wt[..., b] * row
    if out.ndim == 0:
        return float(out)
    return out


class FieldSource:
    """Point-evaluation adapter exposing ``value``, ``dx`` and ``dt`` of a Field.

    Closed-form solutions expose the same three methods analytically, so the
    energy functionals accept either.
    """

    def __init__(self, u: Field):
        self.field = u
        self.grid = u.grid
        self._ut, self._ux, _ = u.derived

    def value(self, x, t):
        return sample(self.field, x, t)

    def dx(self, x, t):
        return sample(self._ux, x, t)

    def dt(self, x, t):
        return sample(self._ut, x, t)


def as_source(u):
    """Wrap a Field in a :class:`FieldSource`; pass any other source through."""
    if isinstance(u, Field):
        return FieldSource(u)
    return u


def write_field_csv(u: Field, path: str | Path) -> Path:
    """Dump ``x,t,u,ut,ux,uxx`` per node, row-major in t then x."""
    path = Path(path)
    ut, ux, uxx = u.derived
    X, T = u.grid.mesh()
    cols = [X, T, u.values, ut.values, ux.values, uxx.values]
    flat = np.column_stack([c.ravel() for c in cols])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "u", "ut", "ux", "uxx"])
        for row in flat:
            w.writerow([f"{v:.17g}" for v in row])
    return path


def read_field_csv(path: str | Path) -> Field:
    """Inverse of :func:`write_field_csv` (only the ``u`` column is used)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ts = np.unique(data[:, 1])
    grid = GridSpec(xs[0], xs[-1], ts[0], ts[-1], len(xs), len(ts))
    return Field(grid, data[:, 2].reshape(len(ts), len(xs)))
