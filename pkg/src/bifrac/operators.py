"""Integral and maximal operators with exact singular-kernel cell weights.

The kernel |y|^(alpha-n) is integrated exactly (1D: closed-form
antiderivative; 2D: polar reduction to sec-power integrals, singular
origin cell included) over half-shifted offset cells [(d-1/2)h, (d+1/2)h)^n.
With that convention the bilinear sum at a cell midpoint x samples
f(x - dh) and g(x + dh) exactly at cell midpoints, so for step data the
grid outputs are exact values of the continuum operators.

All big reductions run in a fixed offset order with compensated
summation, so results are identical run to run and independent of any
parallel schedule upstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, POutOfRange, SpecMismatch
from .families import CubeFamily, default_family
from .geometry import Cube, DyadicGrid
from .lattice import GridFunction, GridSpec, box_power_integral, check_conjugate

_GAUSS_ORDER = 48


@dataclass(frozen=True)
class KernelTable:
    """Per-offset-cell masses of the kernel |y|^(alpha-n).

    weights[d + N - 1] (per axis) is the exact integral of the kernel
    over the offset cell centered at d*h.  Symmetric and positive.
    """

    spec: GridSpec
    alpha: float
    weights: np.ndarray

    def weight(self, offset) -> float:
        n1 = self.spec.cells_per_axis - 1
        if self.spec.dim == 1:
            d = offset if isinstance(offset, int) else offset[0]
            return float(self.weights[d + n1])
        d0, d1 = offset
        return float(self.weights[d0 + n1, d1 + n1])


def _axis_masses_1d(h: float, alpha: float, count: int) -> np.ndarray:
    """Exact 1D masses via the antiderivative |y|^alpha * sign(y) / alpha."""
    d = np.arange(1, count)
    pos = (np.power(d + 0.5, alpha) - np.power(d - 0.5, alpha)) * h ** alpha / alpha
    origin = 2.0 * (0.5 * h) ** alpha / alpha
    right = np.concatenate(([origin], pos))
    return np.concatenate((right[:0:-1], right))


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_ORDER)


def _sec_power_integral_to(alpha: float, t: float) -> float:
    """\\int_0^t sec(u)^alpha du for t in [0, pi/2).

    The integrand blows up at pi/2, so the interval is split into
    segments whose distance to the pole halves, with Gauss-Legendre on
    each; accuracy is ~1e-14 for every t our cell geometry produces.
    """
    if t <= 0.0:
        return 0.0
    half_pi = 0.5 * math.pi
    breaks = [0.0]
    while half_pi - breaks[-1] > 1e-15 and breaks[-1] < t:
        nxt = half_pi - 0.5 * (half_pi - breaks[-1])
        if nxt >= t:
            break
        breaks.append(nxt)
    breaks.append(t)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        x = 0.5 * (b - a) * _GAUSS_NODES + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.dot(_GAUSS_WEIGHTS, np.cos(x) ** (-alpha)))
    return total


def _corner_mass_2d(x: float, y: float, alpha: float) -> float:
    """\\int_{[0,x] x [0,y]} |u|^(alpha-2) du, exact polar reduction.

    Splitting at the diagonal angle turns the integral into two smooth
    sec-power integrals:  (x^a S(atan(y/x)) + y^a S(atan(x/y))) / a.
    """
    if x <= 0.0 or y <= 0.0:
        return 0.0
    return (
        x ** alpha * _sec_power_integral_to(alpha, math.atan2(y, x))
        + y ** alpha * _sec_power_integral_to(alpha, math.atan2(x, y))
    ) / alpha


def _fold_nonnegative(lo: float, hi: float) -> list[tuple[float, float]]:
    """Reflect an interval onto [0, inf); the kernel is even per axis."""
    out = []
    if hi > 0.0:
        out.append((max(lo, 0.0), hi))
    if lo < 0.0:
        out.append((max(-hi, 0.0), -lo))
    return out


def _rect_mass_2d(x0: float, x1: float, y0: float, y1: float, alpha: float) -> float:
    """Exact \\int over [x0,x1] x [y0,y1] of |u|^(alpha-2)."""
    total = 0.0
    for a, b in _fold_nonnegative(x0, x1):
        for c, d in _fold_nonnegative(y0, y1):
            total += (
                _corner_mass_2d(b, d, alpha)
                - _corner_mass_2d(a, d, alpha)
                - _corner_mass_2d(b, c, alpha)
                + _corner_mass_2d(a, c, alpha)
            )
    return total


_KERNEL_CACHE: dict[tuple, KernelTable] = {}


def kernel_table(spec: GridSpec, alpha: float) -> KernelTable:
    """Exact kernel cell masses for |y|^(alpha - n); requires 0 < alpha < n."""
    if not (0.0 < alpha < spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in (0, {spec.dim}), got {alpha}")
    key = (spec.dim, spec.half_width, spec.cells_per_axis, alpha)
    cached = _KERNEL_CACHE.get(key)
    if cached is not None:
        return cached
    n = spec.cells_per_axis
    h = spec.h
    if spec.dim == 1:
        weights = _axis_masses_1d(h, alpha, n)
    else:
        count = n
        half = np.zeros((count, count))
        for d0 in range(count):
            for d1 in range(d0, count):
                ax = (d0 - 0.5) * h
                ay = (d1 - 0.5) * h
                m = _rect_mass_2d(ax, ax + h, ay, ay + h, alpha)
                half[d0, d1] = m
                half[d1, d0] = m
        full = np.zeros((2 * count - 1, 2 * count - 1))
        for d0 in range(-(count - 1), count):
            for d1 in range(-(count - 1), count):
                full[d0 + count - 1, d1 + count - 1] = half[abs(d0), abs(d1)]
        weights = full
    table = KernelTable(spec, alpha, weights)
    _KERNEL_CACHE[key] = table
    return table


def _check_same_spec(*fns: GridFunction) -> GridSpec:
    spec = fns[0].spec
    for f in fns[1:]:
        if f.spec != spec:
            raise SpecMismatch("operands live on different grid specs")
    return spec


def _kahan_add(acc, comp, sl, term):
    y = term - comp[sl]
    t = acc[sl] + y
    comp[sl] = (t - acc[sl]) - y
    acc[sl] = t


def _bilinear_sum_1d(fs, gs, weights) -> np.ndarray:
    n = len(fs)
    out = np.zeros(n)
    comp = np.zeros(n)
    for d in range(-(n - 1), n):
        lo, hi = abs(d), n - abs(d)
        if lo >= hi:
            continue
        w = weights[d + n - 1]
        if w == 0.0:
            continue
        term = fs[lo - d : hi - d] * gs[lo + d : hi + d] * w
        _kahan_add(out, comp, slice(lo, hi), term)
    return out


def _bilinear_sum_2d(fs, gs, weights) -> np.ndarray:
    n = fs.shape[0]
    out = np.zeros((n, n))
    comp = np.zeros((n, n))
    for d0 in range(-(n - 1), n):
        lo0, hi0 = abs(d0), n - abs(d0)
        if lo0 >= hi0:
            continue
        for d1 in range(-(n - 1), n):
            lo1, hi1 = abs(d1), n - abs(d1)
            if lo1 >= hi1:
                continue
            w = weights[d0 + n - 1, d1 + n - 1]
            if w == 0.0:
                continue
            term = (
                fs[lo0 - d0 : hi0 - d0, lo1 - d1 : hi1 - d1]
                * gs[lo0 + d0 : hi0 + d0, lo1 + d1 : hi1 + d1]
                * w
            )
            _kahan_add(out, comp, (slice(lo0, hi0), slice(lo1, hi1)), term)
    return out


def bi_frac(f: GridFunction, g: GridFunction, alpha: float, weights: np.ndarray | None = None) -> GridFunction:
    """Bilinear fractional integral sampled at cell midpoints.

    out(x) = sum over offset cells d of f(x - dh) g(x + dh) * kernel mass,
    exact for step data at midpoints.  An explicit `weights` table (same
    layout as KernelTable.weights) lets callers split the kernel.
    """
    spec = _check_same_spec(f, g)
    if weights is None:
        weights = kernel_table(spec, alpha).weights
    if spec.dim == 1:
        out = _bilinear_sum_1d(f.samples, g.samples, weights)
    else:
        out = _bilinear_sum_2d(f.samples, g.samples, weights)
    return GridFunction(spec, out)


def bi_frac_at(f: GridFunction, g: GridFunction, alpha: float, point) -> float:
    """Point evaluation of the bilinear fractional integral (any point)."""
    spec = _check_same_spec(f, g)
    table = kernel_table(spec, alpha)
    n = spec.cells_per_axis
    h = spec.h
    if spec.dim == 1:
        x = point[0] if hasattr(point, "__len__") else point
        d = np.arange(-(n - 1), n)
        fv = f.values_at(x - d * h)
        gv = g.values_at(x + d * h)
        return float(math.fsum(fv * gv * table.weights))
    x0, x1 = point
    total = []
    for d0 in range(-(n - 1), n):
        for d1 in range(-(n - 1), n):
            w = table.weights[d0 + n - 1, d1 + n - 1]
            a = f.value_at((x0 - d0 * h, x1 - d1 * h))
            if a == 0.0:
                continue
            b = g.value_at((x0 + d0 * h, x1 + d1 * h))
            if b == 0.0:
                continue
            total.append(a * b * w)
    return math.fsum(total)


def frac_int(f: GridFunction, alpha: float) -> GridFunction:
    """Fractional integral: convolution of f with the kernel table (exact)."""
    spec = f.spec
    table = kernel_table(spec, alpha)
    n = spec.cells_per_axis
    if spec.dim == 1:
        out = np.zeros(n)
        comp = np.zeros(n)
        for d in range(-(n - 1), n):
            lo, hi = max(0, d), min(n, n + d)
            if lo >= hi:
                continue
            term = f.samples[lo - d : hi - d] * table.weights[d + n - 1]
            _kahan_add(out, comp, slice(lo, hi), term)
    else:
        out = np.zeros((n, n))
        comp = np.zeros((n, n))
        for d0 in range(-(n - 1), n):
            lo0, hi0 = max(0, d0), min(n, n + d0)
            if lo0 >= hi0:
                continue
            for d1 in range(-(n - 1), n):
                lo1, hi1 = max(0, d1), min(n, n + d1)
                if lo1 >= hi1:
                    continue
                term = (
                    f.samples[lo0 - d0 : hi0 - d0, lo1 - d1 : hi1 - d1]
                    * table.weights[d0 + n - 1, d1 + n - 1]
                )
                _kahan_add(out, comp, (slice(lo0, hi0), slice(lo1, hi1)), term)
    return GridFunction(spec, out)


def frac_int_at(f: GridFunction, alpha: float, point) -> float:
    """Point evaluation of the fractional integral.

    In 1D the kernel is integrated exactly against the step function
    (per-cell antiderivative differences), so the value is exact for any
    evaluation point; in 2D cell midpoint masses are used.
    """
    spec = f.spec
    n = spec.cells_per_axis
    h = spec.h
    if spec.dim == 1:
        if not (0.0 < alpha < 1.0):
            raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {alpha}")
        x = point[0] if hasattr(point, "__len__") else point
        edges = -spec.half_width + h * np.arange(n + 1)
        u = x - edges  # antiderivative F(u) = sign(u)|u|^alpha / alpha
        F = np.sign(u) * np.abs(u) ** alpha / alpha
        masses = F[:-1] - F[1:]
        return float(math.fsum(f.samples * masses))
    table = kernel_table(spec, alpha)
    x0, x1 = point
    terms = []
    for d0 in range(-(n - 1), n):
        for d1 in range(-(n - 1), n):
            a = f.value_at((x0 - d0 * h, x1 - d1 * h))
            if a != 0.0:
                terms.append(a * table.weights[d0 + n - 1, d1 + n - 1])
    return math.fsum(terms)


def _multi_kernel_row(spec: GridSpec, alpha: float, x) -> np.ndarray:
    """Distances |x - midpoint| per cell, flattened (2D) or 1D."""
    mids = spec.midpoints()
    if spec.dim == 1:
        return np.abs((x[0] if hasattr(x, "__len__") else x) - mids)
    dx = x[0] - mids
    dy = x[1] - mids
    return np.sqrt(dx[:, None] ** 2 + dy[None, :] ** 2)


def _dist(x, y) -> float:
    if not hasattr(x, "__len__"):
        x = (x,)
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)))


def _quadrant_offsets(dim: int, step: float):
    from itertools import product as _product

    return [tuple(s * step for s in signs) for signs in _product((-1, 1), repeat=dim)]


def multi_frac_int(f1: GridFunction, f2: GridFunction, alpha: float) -> GridFunction:
    """Two-fold fractional integral with kernel (|x-y1|+|x-y2|)^(alpha-2n)."""
    spec = _check_same_spec(f1, f2)
    if not (0.0 < alpha < 2.0 * spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in (0, {2 * spec.dim}), got {alpha}")
    mids = spec.midpoints()
    if spec.dim == 1:
        out = np.array([multi_frac_int_at(f1, f2, alpha, (x,)) for x in mids])
    else:
        out = np.array(
            [
                [multi_frac_int_at(f1, f2, alpha, (x, y)) for y in mids]
                for x in mids
            ]
        )
    return GridFunction(spec, out)


def multi_frac_int_at(f1: GridFunction, f2: GridFunction, alpha: float, point) -> float:
    """Point evaluation of the two-fold fractional integral."""
    spec = _check_same_spec(f1, f2)
    if not (0.0 < alpha < 2.0 * spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in (0, {2 * spec.dim}), got {alpha}")
    n_dim = spec.dim
    h = spec.h
    vol = h ** n_dim
    expo = alpha - 2.0 * n_dim
    dist = _multi_kernel_row(spec, alpha, point).reshape(-1)
    f1v = f1.samples.reshape(-1)
    f2v = f2.samples.reshape(-1)
    near = dist <= 0.5 * h * (1.0 + 1e-12)
    if not near.any():
        kval = np.add.outer(dist, dist) ** expo
        return float(f1v @ kval @ f2v) * vol * vol
    # split off pairs where both cells are near the evaluation point
    far = ~near
    dist_far = dist[far]
    kff = np.add.outer(dist_far, dist_far) ** expo
    total = float(f1v[far] @ kff @ f2v[far]) * vol * vol
    near_idx = np.nonzero(near)[0]
    sub = _quadrant_offsets(n_dim, 0.25 * h)
    mids = spec.midpoints()
    if n_dim == 1:
        center_of = lambda i: (mids[i],)
    else:
        nn = spec.cells_per_axis
        center_of = lambda i: (mids[i // nn], mids[i % nn])
    pt = point if hasattr(point, "__len__") else (point,)
    # near x far cross terms: only the near cell needs care, midpoint is fine
    for i in near_idx:
        ci = center_of(i)
        di = _dist(pt, ci)
        row = (di + dist_far) ** expo
        total += float(f1v[i] * np.dot(row, f2v[far])) * vol * vol
        total += float(f2v[i] * np.dot(row, f1v[far])) * vol * vol
    # near x near pairs: one level of 4^n-fold subdivision
    for i in near_idx:
        ci = np.array(center_of(i))
        pts_i = [ci + np.array(o) for o in sub]
        for j in near_idx:
            cj = np.array(center_of(j))
            pts_j = [cj + np.array(o) for o in sub]
            acc = 0.0
            for u in pts_i:
                du = _dist(pt, u)
                for v in pts_j:
                    acc += (du + _dist(pt, v)) ** expo
            total += f1v[i] * f2v[j] * acc * (vol / len(pts_i)) * (vol / len(pts_j))
    return total


def local_global_split(f: GridFunction, g: GridFunction, alpha: float, Q0: Cube):
    """Kernel sum split at |y| <= 2*delta (delta = half the side of Q0).

    Returns (local, global) grid functions whose sum is bi_frac(f, g).
    """
    spec = _check_same_spec(f, g)
    table = kernel_table(spec, alpha)
    n = spec.cells_per_axis
    h = spec.h
    radius = Q0.side  # 2 * delta with delta = side / 2
    d = np.arange(-(n - 1), n) * h
    if spec.dim == 1:
        mask = np.abs(d) <= radius + 1e-12
    else:
        mask = np.sqrt(d[:, None] ** 2 + d[None, :] ** 2) <= radius + 1e-12
    w_local = np.where(mask, table.weights, 0.0)
    w_global = np.where(mask, 0.0, table.weights)
    return (
        bi_frac(f, g, alpha, weights=w_local),
        bi_frac(f, g, alpha, weights=w_global),
    )


# ---------------------------------------------------------------------------
# Maximal operators.  Per-cube values are computed with plain slice sums in
# a fixed canonical formula so an exhaustive enumeration oracle written the
# same way reproduces them bit for bit.
# ---------------------------------------------------------------------------


def _clipped_slices(lo, hi, n):
    return tuple(slice(max(0, a), min(n, b)) for a, b in zip(lo, hi))


def _sweep_max(spec: GridSpec, family: CubeFamily, cube_value) -> GridFunction:
    """Max of cube_value(k) over the family cubes containing each midpoint."""
    family.require_nonempty()
    n = spec.cells_per_axis
    out = np.full(spec.shape, -np.inf)
    h = spec.h
    for k, Q in enumerate(family.cubes):
        val = cube_value(k, Q)
        if family.lo[k, 0] >= 0:
            sl = tuple(
                slice(int(a), int(b)) for a, b in zip(family.lo[k], family.hi[k])
            )
        else:
            rng = []
            for ax in range(spec.dim):
                a = Q.corner[ax]
                b = a + Q.side
                c0 = int(math.ceil((a + spec.half_width) / h - 0.5 - 1e-12))
                c1 = int(math.floor((b + spec.half_width) / h - 0.5 + 1e-12))
                rng.append(slice(max(0, c0), min(n, c1 + 1)))
            sl = tuple(rng)
        view = out[sl]
        np.maximum(view, val, out=view)
    out[~np.isfinite(out)] = 0.0
    return GridFunction(spec, out)


def _avg_pow(f: GridFunction, Q: Cube, k: int, family: CubeFamily, p: float) -> float:
    """((1/|Q|) \\int_Q |f|^p)^(1/p) by direct slice sum (canonical formula)."""
    spec = f.spec
    if family.lo[k, 0] >= 0:
        sl = tuple(slice(int(a), int(b)) for a, b in zip(family.lo[k], family.hi[k]))
        total = np.sum(np.abs(f.samples[sl]) ** p) * spec.h ** spec.dim
    else:
        total = box_power_integral(f, Q.corner, Q.side, p)
    return (total / Q.measure) ** (1.0 / p)


def maximal(f: GridFunction, family: CubeFamily | None = None) -> GridFunction:
    """Uncentered Hardy-Littlewood maximal function over the family."""
    family = family if family is not None else default_family(f.spec)
    return _sweep_max(f.spec, family, lambda k, Q: _avg_pow(f, Q, k, family, 1.0))


def frac_maximal(f: GridFunction, alpha: float, family: CubeFamily | None = None) -> GridFunction:
    """Fractional maximal function |Q|^(alpha/n - 1) \\int_Q |f|."""
    if not (0.0 < alpha < f.spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in (0, {f.spec.dim}), got {alpha}")
    family = family if family is not None else default_family(f.spec)
    return _sweep_max(
        f.spec,
        family,
        lambda k, Q: Q.side ** alpha * _avg_pow(f, Q, k, family, 1.0),
    )


def p_maximal(f: GridFunction, p: float, family: CubeFamily | None = None) -> GridFunction:
    """L^p-average maximal function, p > 1."""
    if p <= 1.0:
        raise POutOfRange(f"p must exceed 1, got {p}")
    family = family if family is not None else default_family(f.spec)
    return _sweep_max(f.spec, family, lambda k, Q: _avg_pow(f, Q, k, family, p))


def multi_maximal(
    f1: GridFunction,
    f2: GridFunction,
    alpha: float,
    r1: float,
    r2: float,
    family: CubeFamily | None = None,
) -> GridFunction:
    """sup over Q of side^alpha * prod_i ((1/|Q|)\\int_Q |f_i|^{r_i})^{1/r_i}.

    The averages take the r_i-th powers of the entries, consistent with
    how the bound is applied downstream.
    """
    spec = _check_same_spec(f1, f2)
    if not (0.0 <= alpha < 2.0 * spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in [0, {2 * spec.dim}), got {alpha}")
    if r1 <= 0 or r2 <= 0:
        raise POutOfRange("averaging exponents must be positive")
    family = family if family is not None else default_family(spec)

    def value(k, Q):
        return (
            Q.side ** alpha
            * _avg_pow(f1, Q, k, family, r1)
            * _avg_pow(f2, Q, k, family, r2)
        )

    return _sweep_max(spec, family, value)


def _m3q(f, g, Q, r, s, spec) -> float:
    """m_{3Q}(|f|^r, |g|^s) with integration clipped to the box.

    The normalizing measure is the full |3Q| (functions vanish outside
    the box), matching the compact-support convention.
    """
    n = spec.cells_per_axis
    h = spec.h
    w = round(Q.side / h)
    lo = [round((c + spec.half_width) / h) - w for c in Q.corner]
    hi = [a + 3 * w for a in lo]
    sl = _clipped_slices(lo, hi, n)
    meas3 = (3.0 * Q.side) ** spec.dim
    fi = np.sum(np.abs(f.samples[sl]) ** r) * h ** spec.dim
    gi = np.sum(np.abs(g.samples[sl]) ** s) * h ** spec.dim
    return (fi / meas3) ** (1.0 / r) * (gi / meas3) ** (1.0 / s)


def weighted_bilinear_maximal(
    f: GridFunction,
    g: GridFunction,
    w1: GridFunction,
    w2: GridFunction,
    alpha: float,
    r: float,
    s: float,
    q: float,
    family: CubeFamily | None = None,
) -> GridFunction:
    """sup over Q of side^alpha * m_{3Q}(|f|^r,|g|^s) * ((1/|Q|)\\int_Q nu^q)^{1/q}.

    nu is the product weight w1*w2; both weights must be positive.
    """
    spec = _check_same_spec(f, g, w1, w2)
    check_conjugate(r, s)
    if q <= 0:
        raise POutOfRange(f"q must be positive, got {q}")
    from .errors import NonPositiveWeight

    if float(w1.samples.min()) <= 0.0 or float(w2.samples.min()) <= 0.0:
        raise NonPositiveWeight("weights must be strictly positive")
    family = family if family is not None else default_family(spec)
    nu = GridFunction(spec, w1.samples * w2.samples, nonnegative=True)

    def value(k, Q):
        return (
            Q.side ** alpha
            * _m3q(f, g, Q, r, s, spec)
            * _avg_pow(nu, Q, k, family, q)
        )

    return _sweep_max(spec, family, value)


def sparse_bound(
    f: GridFunction,
    g: GridFunction,
    alpha: float,
    r: float,
    s: float,
    Q0: Cube,
    grid: DyadicGrid,
) -> GridFunction:
    """sum over dyadic Q ⊆ Q0 (down to single cells) of side^alpha m_{3Q} χ_Q."""
    spec = _check_same_spec(f, g)
    check_conjugate(r, s)
    if not (0.0 < alpha < spec.dim):
        raise AlphaOutOfRange(f"alpha must lie in (0, {spec.dim}), got {alpha}")
    from .sparse import subcube_blocks  # local import to avoid a cycle

    out = np.zeros(spec.shape)
    for lo, width in subcube_blocks(spec, Q0, grid):
        corner = tuple(-spec.half_width + i * spec.h for i in lo)
        Q = Cube(corner, width * spec.h)
        val = Q.side ** alpha * _m3q(f, g, Q, r, s, spec)
        sl = tuple(slice(i, i + width) for i in lo)
        out[sl] += val
    return GridFunction(spec, out)
