"""Uniform node-centered grids on the unit square, scalar/tensor fields,
region masks and the discrete L2/H1/Linf norms used everywhere else.

Fields are stored as (nx, ny) arrays with values[i, j] = f(x_i, y_j).
Row-major flattening of that layout is the on-disk order of field dumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

# Distance value reported where a field has no zero set at all.
NO_ZERO_SENTINEL = 10.0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0,1]^2 with nx*ny nodes, origin at (0,0)."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def hy(self) -> float:
        return 1.0 / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def coords(self):
        """Node coordinate arrays X, Y of shape (nx, ny)."""
        x = np.linspace(0.0, 1.0, self.nx)
        y = np.linspace(0.0, 1.0, self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def boundary(self) -> np.ndarray:
        """Boolean array marking the boundary node set."""
        b = np.zeros(self.shape, dtype=bool)
        b[0, :] = b[-1, :] = True
        b[:, 0] = b[:, -1] = True
        return b

    def interior(self) -> np.ndarray:
        return ~self.boundary()

    def quad_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights; they sum exactly to the unit area."""
        cx = np.ones(self.nx)
        cx[0] = cx[-1] = 0.5
        cy = np.ones(self.ny)
        cy[0] = cy[-1] = 0.5
        return np.outer(cx, cy) * (self.hx * self.hy)


def make_grid(n: int) -> Grid:
    """Square n x n grid on the unit square."""
    return Grid(n, n)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        X, Y = grid.coords()
        return cls(grid, fn(X, Y))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))


@dataclass(frozen=True)
class TensorField:
    """Symmetric coefficient matrix A = [[a11, a12], [a12, a22]] per node."""

    grid: Grid
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        for name in ("a11", "a12", "a22"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != self.grid.shape:
                raise ValueError(f"{name} shape {v.shape} does not match grid")
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls, grid: Grid) -> "TensorField":
        one = np.ones(grid.shape)
        return cls(grid, one, np.zeros(grid.shape), one)

    @classmethod
    def diagonal(cls, grid: Grid, d1, d2) -> "TensorField":
        X, Y = grid.coords()
        a11 = d1(X, Y) if callable(d1) else np.full(grid.shape, float(d1))
        a22 = d2(X, Y) if callable(d2) else np.full(grid.shape, float(d2))
        return cls(grid, a11, np.zeros(grid.shape), a22)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of A over all nodes (the ellipticity floor)."""
        tr = self.a11 + self.a22
        disc = np.sqrt((self.a11 - self.a22) ** 2 + 4.0 * self.a12**2)
        return float(np.min((tr - disc) / 2.0))


@dataclass(frozen=True)
class RegionMask:
    grid: Grid
    mask: np.ndarray
    descriptor: str = "custom"

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")
        object.__setattr__(self, "mask", m)

    @classmethod
    def full(cls, grid: Grid) -> "RegionMask":
        return cls(grid, np.ones(grid.shape, dtype=bool), "full")

    @classmethod
    def ball(cls, grid: Grid, center, r: float) -> "RegionMask":
        """All nodes within distance r of center; grid nodes all lie in the
        closed unit square, so the intersection with Omega-bar is automatic."""
        X, Y = grid.coords()
        m = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= r * r
        return cls(grid, m, f"ball(({center[0]:g},{center[1]:g}),{r:g})")

    @classmethod
    def inset(cls, grid: Grid, margin: float) -> "RegionMask":
        """Compact inset: nodes at distance >= margin from the boundary."""
        X, Y = grid.coords()
        d = np.minimum(np.minimum(X, 1.0 - X), np.minimum(Y, 1.0 - Y))
        return cls(grid, d >= margin, f"inset({margin:g})")

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.grid, self.mask & other.mask,
                          f"({self.descriptor})&({other.descriptor})")


def gradient(f: ScalarField):
    """Discrete gradient: central differences interior, one-sided at the
    boundary, both second order (exact on quadratics)."""
    g = f.grid
    gx = np.gradient(f.values, g.hx, axis=0, edge_order=2)
    gy = np.gradient(f.values, g.hy, axis=1, edge_order=2)
    return ScalarField(g, gx), ScalarField(g, gy)


def _check_mask(f: ScalarField, m: RegionMask | None) -> np.ndarray:
    if m is None:
        return np.ones(f.grid.shape, dtype=bool)
    if m.grid.shape != f.grid.shape:
        raise ValueError("mask and field live on different grids")
    if not m.mask.any():
        raise ValueError("empty region mask")
    return m.mask


def l2_norm(f: ScalarField, m: RegionMask | None = None) -> float:
    """Trapezoid-weight L2 norm restricted to the mask."""
    sel = _check_mask(f, m)
    w = f.grid.quad_weights()
    return math.sqrt(float(np.sum(w[sel] * f.values[sel] ** 2)))


def h1_norm(f: ScalarField, m: RegionMask | None = None) -> float:
    """Full H1 norm: sqrt(||f||^2 + ||df/dx||^2 + ||df/dy||^2) on the mask."""
    gx, gy = gradient(f)
    return math.sqrt(l2_norm(f, m) ** 2 + l2_norm(gx, m) ** 2 + l2_norm(gy, m) ** 2)


def linf_norm(f: ScalarField, m: RegionMask | None = None) -> float:
    sel = _check_mask(f, m)
    return float(np.max(np.abs(f.values[sel])))


def zero_points(u: ScalarField) -> np.ndarray:
    """Points of the nodal set {u = 0}, located by linear interpolation along
    sign-changing grid edges; returns an (m, 2) array (possibly empty)."""
    g = u.grid
    v = u.values
    X, Y = g.coords()
    pts = []

    exact = v == 0.0
    if exact.any():
        pts.append(np.column_stack([X[exact], Y[exact]]))

    # horizontal edges (along x)
    a, b = v[:-1, :], v[1:, :]
    cross = a * b < 0
    if cross.any():
        t = a[cross] / (a[cross] - b[cross])
        pts.append(np.column_stack([X[:-1, :][cross] + t * g.hx, Y[:-1, :][cross]]))

    # vertical edges (along y)
    a, b = v[:, :-1], v[:, 1:]
    cross = a * b < 0
    if cross.any():
        t = a[cross] / (a[cross] - b[cross])
        pts.append(np.column_stack([X[:, :-1][cross], Y[:, :-1][cross] + t * g.hy]))

    if not pts:
        return np.empty((0, 2))
    return np.vstack(pts)


def dist_to_zero_set(u: ScalarField) -> ScalarField:
    """Distance from every node to the nodal set of u; a sentinel constant
    (larger than the domain diameter) when u has no zero."""
    g = u.grid
    pts = zero_points(u)
    if pts.shape[0] == 0:
        return ScalarField.constant(g, NO_ZERO_SENTINEL)
    X, Y = g.coords()
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    d, _ = cKDTree(pts).query(nodes)
    return ScalarField(g, d.reshape(g.shape))


def dump_field(f: ScalarField, path) -> None:
    """Plain-text dump: header `nx ny hx hy`, then values row-major."""
    g = f.grid
    lines = [f"{g.nx} {g.ny} {g.hx!r} {g.hy!r}"]
    lines.extend(repr(float(v)) for v in f.values.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().split()
        nx, ny = int(header[0]), int(header[1])
        vals = np.loadtxt(fh)
    g = Grid(nx, ny)
    return ScalarField(g, vals.reshape(g.shape))
