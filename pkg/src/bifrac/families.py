"""Finite cube families over which discrete suprema are taken.

The weight constants, Morrey norms, and maximal operators all maximize
over the same default families so that both sides of any inequality are
compared on identical index sets:

* n = 1: every lattice-aligned interval in the box, ordered by
  (corner, side).
* n = 2: every lattice-aligned square whose side is a power of two
  times the cell width, plus the in-box cubes of all four shifted
  dyadic grids, capped at a configurable count with deterministic
  stride subsampling.

Nested pair families enumerate lattice-aligned pairs Q ⊆ Q'.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import EmptyCubeFamily
from .geometry import Cube, DyadicGrid, grid_cubes
from .lattice import GridSpec

DEFAULT_CUBE_CAP = 4096
DEFAULT_PAIR_CAP = 1_500_000


@dataclass(frozen=True)
class CubeFamily:
    """Ordered cube list plus integer cell bounds for the aligned members.

    `lo`/`hi` hold per-axis cell index bounds; rows are -1 for cubes that
    do not sit on the cell lattice (shifted-grid cubes in 2D).
    """

    spec: GridSpec
    cubes: tuple[Cube, ...]
    lo: np.ndarray
    hi: np.ndarray
    name: str = "custom"

    @property
    def size(self) -> int:
        return len(self.cubes)

    @property
    def aligned(self) -> np.ndarray:
        return self.lo[:, 0] >= 0

    def require_nonempty(self):
        if not self.cubes:
            raise EmptyCubeFamily(f"family {self.name!r} is empty")


def family_from_cubes(spec: GridSpec, cubes, name: str = "custom") -> CubeFamily:
    """Wrap an explicit cube list, computing aligned cell bounds."""
    cubes = tuple(cubes)
    m = len(cubes)
    lo = np.full((m, spec.dim), -1, dtype=np.int64)
    hi = np.full((m, spec.dim), -1, dtype=np.int64)
    h = spec.h
    n = spec.cells_per_axis
    for k, Q in enumerate(cubes):
        w = Q.side / h
        iw = round(w)
        if abs(w - iw) > 1e-9 * max(1.0, w) or iw < 1:
            continue
        ok = True
        cells = []
        for c in Q.corner:
            t = (c + spec.half_width) / h
            i0 = round(t)
            if abs(t - i0) > 1e-9 * max(1.0, abs(t)) or i0 < 0 or i0 + iw > n:
                ok = False
                break
            cells.append((int(i0), int(i0 + iw)))
        if ok:
            for ax, (a, b) in enumerate(cells):
                lo[k, ax] = a
                hi[k, ax] = b
    return CubeFamily(spec, cubes, lo, hi, name)


def all_intervals(spec: GridSpec) -> CubeFamily:
    """Every lattice interval [ih, jh) in the box (1D), O(N^2) of them."""
    if spec.dim != 1:
        raise ValueError("all_intervals is one-dimensional")
    n = spec.cells_per_axis
    h = spec.h
    cubes = []
    lo = []
    hi = []
    for i in range(n):
        for j in range(i + 1, n + 1):
            cubes.append(Cube((-spec.half_width + i * h,), (j - i) * h))
            lo.append((i,))
            hi.append((j,))
    return CubeFamily(
        spec,
        tuple(cubes),
        np.array(lo, dtype=np.int64),
        np.array(hi, dtype=np.int64),
        name="intervals",
    )


def _po2_squares(spec: GridSpec) -> list[Cube]:
    n = spec.cells_per_axis
    h = spec.h
    out = []
    s = 1
    while s <= n:
        for i in range(n - s + 1):
            for j in range(n - s + 1):
                out.append(
                    Cube(
                        (-spec.half_width + i * h, -spec.half_width + j * h),
                        s * h,
                    )
                )
        s *= 2
    return out


def _shifted_grid_cubes(spec: GridSpec) -> list[Cube]:
    """In-box cubes of every shifted dyadic grid, all levels down to one cell."""
    box = spec.box_cube
    out = []
    import math

    k_min = math.ceil(-math.log2(box.side))
    k_max = math.floor(-math.log2(spec.h) + 1e-9)
    shifts = list(product((0.0, 1.0 / 3.0), repeat=spec.dim))
    for shift in shifts:
        grid = DyadicGrid(shift)
        for level in range(k_min, k_max + 1):
            for Q in grid_cubes(grid, level, box):
                if box.contains_cube(Q, tol=1e-12 * box.side):
                    out.append(Q)
    return out


def default_family(spec: GridSpec, cap: int = DEFAULT_CUBE_CAP) -> CubeFamily:
    """Shared default cube family for sups (see module docstring)."""
    if spec.dim == 1:
        return all_intervals(spec)
    seen = set()
    cubes = []
    for Q in _po2_squares(spec) + _shifted_grid_cubes(spec):
        key = (tuple(round(c, 12) for c in Q.corner), round(Q.side, 12))
        if key not in seen:
            seen.add(key)
            cubes.append(Q)
    cubes.sort(key=lambda Q: (Q.corner, Q.side))
    if cap and len(cubes) > cap:
        stride = -(-len(cubes) // cap)
        cubes = cubes[::stride]
    return family_from_cubes(spec, cubes, name="squares+shifted")


@dataclass(frozen=True)
class NestedPairs:
    """Index pairs (inner, outer) into `family` with Q_inner ⊆ Q_outer."""

    family: CubeFamily
    inner: np.ndarray
    outer: np.ndarray

    @property
    def size(self) -> int:
        return len(self.inner)

    def require_nonempty(self):
        if self.size == 0:
            raise EmptyCubeFamily("nested pair family is empty")


def nested_pairs(family: CubeFamily, cap: int = DEFAULT_PAIR_CAP) -> NestedPairs:
    """All aligned pairs Q ⊆ Q', deterministic order (outer-major)."""
    ali = np.nonzero(family.aligned)[0]
    lo = family.lo[ali]
    hi = family.hi[ali]
    inner_parts = []
    outer_parts = []
    for pos, k in enumerate(ali):
        inside = np.all(lo >= lo[pos], axis=1) & np.all(hi <= hi[pos], axis=1)
        idx = ali[np.nonzero(inside)[0]]
        inner_parts.append(idx)
        outer_parts.append(np.full(len(idx), k, dtype=np.int64))
    inner = np.concatenate(inner_parts) if inner_parts else np.zeros(0, np.int64)
    outer = np.concatenate(outer_parts) if outer_parts else np.zeros(0, np.int64)
    if cap and len(inner) > cap:
        stride = -(-len(inner) // cap)
        inner = inner[::stride]
        outer = outer[::stride]
    return NestedPairs(family, inner, outer)


def default_pair_family(spec: GridSpec, cap: int = DEFAULT_PAIR_CAP) -> NestedPairs:
    return nested_pairs(default_family(spec), cap=cap)


def measures(family: CubeFamily) -> np.ndarray:
    return np.array([Q.measure for Q in family.cubes])


def sides(family: CubeFamily) -> np.ndarray:
    return np.array([Q.side for Q in family.cubes])
