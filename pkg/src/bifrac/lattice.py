"""Sampled functions on a uniform lattice with exact cell-wise integration.

A GridFunction is piecewise constant on the cells of [-L, L)^n and zero
outside the box, so every integral over a lattice-aligned cube is a
finite cell sum and therefore exact.  That choice trades smoothness for
testability: the structural identities downstream hold with equality on
step functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConjugateMismatch,
    DegenerateCube,
    InputUnreadable,
    NonAlignedCube,
    NonNegativityViolation,
    OutOfBox,
)
from .geometry import Cube

CONJUGATE_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice over the box [-L, L)^n.

    N (cells per axis) must be a power of two so dyadic cubes align with
    cell boundaries.
    """

    dim: int
    half_width: float
    cells_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        n = self.cells_per_axis
        if n < 1 or (n & (n - 1)) != 0:
            raise ValueError(f"cells_per_axis must be a power of two, got {n}")

    @property
    def h(self) -> float:
        """Cell side length."""
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis ** self.dim

    @property
    def box_cube(self) -> Cube:
        return Cube((-self.half_width,) * self.dim, 2.0 * self.half_width)

    def midpoints(self) -> np.ndarray:
        """Per-axis cell midpoint coordinates."""
        i = np.arange(self.cells_per_axis)
        return -self.half_width + (i + 0.5) * self.h

    def cell_cube(self, index: tuple[int, ...]) -> Cube:
        corner = tuple(-self.half_width + i * self.h for i in index)
        return Cube(corner, self.h)

    def cell_of_point(self, x) -> tuple[int, ...] | None:
        """Cell index containing x, or None when x is outside the box."""
        idx = []
        for xi in x:
            t = (xi + self.half_width) / self.h
            i = int(math.floor(t + 1e-12))
            if i < 0 or i >= self.cells_per_axis:
                return None
            idx.append(i)
        return tuple(idx)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples, one per lattice cell, row-major; zero outside the box."""

    spec: GridSpec
    samples: np.ndarray
    nonnegative: bool = field(default=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.shape != self.spec.shape:
            raise ValueError(f"samples shape {arr.shape} != spec shape {self.spec.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must all be finite")
        if self.nonnegative and arr.size and float(arr.min()) < 0.0:
            raise NonNegativityViolation(
                f"declared nonnegative but min sample is {arr.min()}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridFunction":
        return cls(spec, np.full(spec.shape, float(value)), nonnegative=value >= 0)

    @classmethod
    def from_callable(cls, spec: GridSpec, fn, nonnegative: bool = False) -> "GridFunction":
        """Sample fn at cell midpoints."""
        mids = spec.midpoints()
        if spec.dim == 1:
            vals = np.array([fn(x) for x in mids], dtype=np.float64)
        else:
            vals = np.array(
                [[fn(x, y) for y in mids] for x in mids], dtype=np.float64
            )
        return cls(spec, vals, nonnegative=nonnegative)

    @classmethod
    def indicator(cls, spec: GridSpec, cube: Cube) -> "GridFunction":
        """Characteristic function of a lattice-aligned cube."""
        arr = np.zeros(spec.shape)
        sl = _cell_slices(spec, cube, clip=True)
        arr[sl] = 1.0
        return cls(spec, arr, nonnegative=True)

    def value_at(self, x) -> float:
        idx = self.spec.cell_of_point(x if hasattr(x, "__len__") else (x,))
        if idx is None:
            return 0.0
        return float(self.samples[idx])

    def values_at(self, points: np.ndarray) -> np.ndarray:
        """Vectorized piecewise-constant lookup (1D spec only)."""
        if self.spec.dim != 1:
            raise ValueError("values_at is one-dimensional")
        t = (points + self.spec.half_width) / self.spec.h
        idx = np.floor(t + 1e-12).astype(np.int64)
        ok = (idx >= 0) & (idx < self.spec.cells_per_axis)
        out = np.zeros(points.shape)
        out[ok] = self.samples[idx[ok]]
        return out

    def abs_pow(self, p: float) -> "GridFunction":
        """|f|^p as a grid function."""
        return GridFunction(self.spec, np.abs(self.samples) ** p, nonnegative=True)

    def shifted(self, cells: tuple[int, ...]) -> "GridFunction":
        """Translate by whole cells; mass pushed past the box edge is dropped."""
        arr = np.zeros(self.spec.shape)
        src = []
        dst = []
        for k in cells if isinstance(cells, tuple) else (cells,):
            n = self.spec.cells_per_axis
            lo_dst, hi_dst = max(0, k), min(n, n + k)
            src.append(slice(lo_dst - k, hi_dst - k))
            dst.append(slice(lo_dst, hi_dst))
        arr[tuple(dst)] = self.samples[tuple(src)]
        return GridFunction(self.spec, arr, nonnegative=self.nonnegative)

    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            if other.spec != self.spec:
                raise ValueError("grid functions on different specs")
            return GridFunction(self.spec, op(self.samples, other.samples))
        return GridFunction(self.spec, op(self.samples, float(other)))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)


def _cell_slices(spec: GridSpec, Q: Cube, clip: bool = False):
    """Cell index slices covered by a lattice-aligned cube.

    With clip=True the slices are clamped to the box (cube may stick out);
    otherwise OutOfBox is raised for any overhang.
    """
    if Q.dim != spec.dim:
        raise NonAlignedCube(f"cube dimension {Q.dim} != spec dimension {spec.dim}")
    h = spec.h
    n = spec.cells_per_axis
    tol = 1e-9
    width = Q.side / h
    iw = round(width)
    if iw == 0:
        raise DegenerateCube(f"cube side {Q.side} is below one cell")
    if abs(width - iw) > tol * max(1.0, width):
        raise NonAlignedCube(f"side {Q.side} is not a whole number of cells")
    slices = []
    for c in Q.corner:
        t = (c + spec.half_width) / h
        i0 = round(t)
        if abs(t - i0) > tol * max(1.0, abs(t)):
            raise NonAlignedCube(f"corner {c} off the cell lattice")
        i1 = i0 + iw
        if clip:
            i0, i1 = max(0, i0), min(n, i1)
            if i0 >= i1:
                slices.append(slice(0, 0))
                continue
        elif i0 < 0 or i1 > n:
            raise OutOfBox(f"cube {Q.serialize()} leaves the box")
        slices.append(slice(int(i0), int(i1)))
    return tuple(slices)


def integrate(f: GridFunction, Q: Cube) -> float:
    """Exact integral of f over a lattice-aligned cube inside the box."""
    sl = _cell_slices(f.spec, Q, clip=False)
    return float(np.sum(f.samples[sl])) * f.spec.h ** f.spec.dim


def cube_average(f: GridFunction, Q: Cube, p: float) -> float:
    """((1/|Q|) \\int_Q |f|^p)^(1/p), exact for step data."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    sl = _cell_slices(f.spec, Q, clip=False)
    total = float(np.sum(np.abs(f.samples[sl]) ** p)) * f.spec.h ** f.spec.dim
    return (total / Q.measure) ** (1.0 / p)


def clipped_power_integral(f: GridFunction, Q: Cube, p: float) -> float:
    """\\int_{Q ∩ box} |f|^p for a lattice-aligned cube that may leave the box."""
    sl = _cell_slices(f.spec, Q, clip=True)
    return float(np.sum(np.abs(f.samples[sl]) ** p)) * f.spec.h ** f.spec.dim


def check_conjugate(r: float, s: float) -> None:
    if r <= 1 or s <= 1 or abs(1.0 / r + 1.0 / s - 1.0) > CONJUGATE_TOL:
        raise ConjugateMismatch(f"1/{r} + 1/{s} != 1 within {CONJUGATE_TOL}")


def bilinear_average(f: GridFunction, g: GridFunction, Q: Cube, r: float, s: float) -> float:
    """m_Q(|f|^r, |g|^s): product of the two Hoelder-conjugate cube averages.

    Q must be lattice-aligned but may stick out of the box; the functions
    vanish outside, so integration runs over the intersection while the
    normalizing measure stays |Q|.
    """
    check_conjugate(r, s)
    fi = clipped_power_integral(f, Q, r)
    gi = clipped_power_integral(g, Q, s)
    return (fi / Q.measure) ** (1.0 / r) * (gi / Q.measure) ** (1.0 / s)


def box_power_integral(f: GridFunction, corner, side: float, p: float) -> float:
    """Exact \\int over an arbitrary axis-aligned cube of |f|^p.

    Handles partial cell overlaps (needed for shifted-grid cubes whose
    corners are thirds); the integrand is a step function so the integral
    is a sum of per-cell overlap volumes.
    """
    spec = f.spec
    h = spec.h
    n = spec.cells_per_axis
    weights = []
    for ax in range(spec.dim):
        lo = corner[ax]
        hi = lo + side
        edges = -spec.half_width + h * np.arange(n + 1)
        left = np.maximum(edges[:-1], lo)
        right = np.minimum(edges[1:], hi)
        weights.append(np.maximum(right - left, 0.0))
    pw = np.abs(f.samples) ** p
    if spec.dim == 1:
        return float(np.dot(weights[0], pw))
    return float(weights[0] @ pw @ weights[1])


def lp_norm(f: GridFunction, p: float) -> float:
    """Global L^p norm over the box."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    total = float(np.sum(np.abs(f.samples) ** p)) * f.spec.h ** f.spec.dim
    return total ** (1.0 / p)


def write_grid_file(path, f: GridFunction) -> None:
    """Text format: header `n L N`, then N^n samples row-major."""
    with open(path, "w", encoding="ascii") as fh:
        spec = f.spec
        fh.write(f"{spec.dim} {spec.half_width!r} {spec.cells_per_axis}\n")
        flat = f.samples.reshape(-1)
        fh.write(" ".join(repr(float(v)) for v in flat))
        fh.write("\n")


def read_grid_file(path) -> GridFunction:
    """Inverse of write_grid_file; rejects non-power-of-two N."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise InputUnreadable(f"{path}: header must be `n L N`")
            dim, half_width, n = int(header[0]), float(header[1]), int(header[2])
            body = fh.read().split()
    except OSError as exc:
        raise InputUnreadable(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise InputUnreadable(f"{path}: bad header ({exc})") from exc
    if n < 1 or (n & (n - 1)) != 0:
        raise InputUnreadable(f"{path}: N={n} is not a power of two")
    spec = GridSpec(dim, half_width, n)
    if len(body) != spec.cell_count:
        raise InputUnreadable(
            f"{path}: expected {spec.cell_count} samples, found {len(body)}"
        )
    try:
        arr = np.array([float(v) for v in body]).reshape(spec.shape)
    except ValueError as exc:
        raise InputUnreadable(f"{path}: bad sample ({exc})") from exc
    return GridFunction(spec, arr)
