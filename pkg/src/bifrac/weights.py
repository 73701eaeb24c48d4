"""Weight-class constants as maxima over finite cube and nested-pair families.

Every constant is the discrete analogue of a supremum; maxima run over
explicit families in a deterministic order (corner, then side), so the
first attaining cube is the canonical witness.  Averages of negative
powers of step weights are exact; zero samples are tolerated only in
the sense of a +inf sentinel, strictly negative ones are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveWeight, POutOfRange
from .families import CubeFamily, NestedPairs
from .geometry import Cube
from .lattice import GridFunction, box_power_integral


@dataclass(frozen=True)
class WeightVector:
    """A pair of strictly positive weights, optionally with a second-kind v."""

    w1: GridFunction
    w2: GridFunction
    v: GridFunction | None = None

    def __post_init__(self):
        for name, w in (("w1", self.w1), ("w2", self.w2), ("v", self.v)):
            if w is None:
                continue
            if float(w.samples.min()) <= 0.0:
                raise NonPositiveWeight(f"{name} has a non-positive sample")
        if self.w2.spec != self.w1.spec or (
            self.v is not None and self.v.spec != self.w1.spec
        ):
            raise ValueError("weight components live on different specs")
        nu = GridFunction(self.w1.spec, self.w1.samples * self.w2.samples, nonnegative=True)
        object.__setattr__(self, "_nu", nu)

    @property
    def nu(self) -> GridFunction:
        """Product weight w1 * w2."""
        return self._nu


@dataclass(frozen=True)
class ConstantReport:
    """Value of a discrete weight constant plus its attaining witness."""

    value: float
    witness: Cube | tuple[Cube, Cube]
    family_size: int


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def _family_power_averages(w: GridFunction, expo: float, family: CubeFamily) -> np.ndarray:
    """(1/|Q|) \\int_Q w^expo per family cube, exact for step weights.

    A zero sample raised to a negative power yields +inf; cubes touching
    such a cell report the +inf sentinel (prefix sums would otherwise
    turn it into nan).
    """
    spec = w.spec
    vals = np.empty(family.size)
    with np.errstate(divide="ignore", over="ignore"):
        pw = np.power(w.samples, expo, dtype=np.float64)
    bad = ~np.isfinite(pw)
    pw_clean = np.where(bad, 0.0, pw)
    voxel = spec.h ** spec.dim
    if spec.dim == 1:
        prefix = np.concatenate(([0.0], np.cumsum(pw_clean))) * voxel
        bad_prefix = np.concatenate(([0], np.cumsum(bad.astype(np.int64))))
        aligned = family.aligned
        i = family.lo[:, 0]
        j = family.hi[:, 0]
        meas = np.array([Q.measure for Q in family.cubes])
        vals[aligned] = (prefix[j[aligned]] - prefix[i[aligned]]) / meas[aligned]
        if bad.any():
            ali = np.nonzero(aligned)[0]
            hit = (bad_prefix[j[ali]] - bad_prefix[i[ali]]) > 0
            vals[ali[hit]] = np.inf
        for k in np.nonzero(~aligned)[0]:
            Q = family.cubes[k]
            vals[k] = _rect_power_integral(pw, w, Q) / Q.measure
        return vals
    sat = np.zeros((spec.cells_per_axis + 1, spec.cells_per_axis + 1))
    np.cumsum(np.cumsum(pw_clean, axis=0), axis=1, out=sat[1:, 1:])
    bad_sat = np.zeros((spec.cells_per_axis + 1, spec.cells_per_axis + 1), dtype=np.int64)
    np.cumsum(np.cumsum(bad.astype(np.int64), axis=0), axis=1, out=bad_sat[1:, 1:])
    for k, Q in enumerate(family.cubes):
        if family.lo[k, 0] >= 0:
            a0, a1 = family.lo[k]
            b0, b1 = family.hi[k]
            nbad = bad_sat[b0, b1] - bad_sat[a0, b1] - bad_sat[b0, a1] + bad_sat[a0, a1]
            if nbad > 0:
                vals[k] = np.inf
                continue
            total = (sat[b0, b1] - sat[a0, b1] - sat[b0, a1] + sat[a0, a1]) * voxel
        else:
            total = _rect_power_integral(pw, w, Q)
        vals[k] = total / Q.measure
    return vals


def _rect_power_integral(pw: np.ndarray, w: GridFunction, Q: Cube) -> float:
    """Partial-overlap integral of a precomputed power array over Q."""
    spec = w.spec
    h = spec.h
    n = spec.cells_per_axis
    weights = []
    for ax in range(spec.dim):
        lo = Q.corner[ax]
        hi = lo + Q.side
        edges = -spec.half_width + h * np.arange(n + 1)
        left = np.maximum(edges[:-1], lo)
        right = np.minimum(edges[1:], hi)
        weights.append(np.maximum(right - left, 0.0))
    if spec.dim == 1:
        return float(np.dot(weights[0], pw))
    return float(weights[0] @ pw @ weights[1])


def _family_minima(w: GridFunction, family: CubeFamily) -> np.ndarray:
    """min over each cube of the weight (cell minimum)."""
    vals = np.empty(family.size)
    for k, Q in enumerate(family.cubes):
        if family.lo[k, 0] >= 0:
            sl = tuple(
                slice(int(a), int(b)) for a, b in zip(family.lo[k], family.hi[k])
            )
            vals[k] = float(w.samples[sl].min())
        else:
            # shifted cube: minimum over every cell it touches
            spec = w.spec
            h = spec.h
            rng = []
            for ax in range(spec.dim):
                a = int(np.floor((Q.corner[ax] + spec.half_width) / h + 1e-12))
                b = int(np.ceil((Q.corner[ax] + Q.side + spec.half_width) / h - 1e-12))
                rng.append(slice(max(0, a), min(spec.cells_per_axis, b)))
            vals[k] = float(w.samples[tuple(rng)].min())
    return vals


def _check_positive(*ws: GridFunction):
    for w in ws:
        if float(w.samples.min()) < 0.0:
            raise NonPositiveWeight("weight has a negative sample")


def _sanitize(vals: np.ndarray) -> np.ndarray:
    # 0 * inf from a weight vanishing on a whole cube: not in the class
    return np.where(np.isnan(vals), np.inf, vals)


def _argmax_report(vals: np.ndarray, family: CubeFamily) -> ConstantReport:
    vals = _sanitize(vals)
    k = int(np.argmax(vals))
    return ConstantReport(float(vals[k]), family.cubes[k], family.size)


def ap_constant(w: GridFunction, p: float, family: CubeFamily) -> ConstantReport:
    """Muckenhoupt constant sup_Q (avg_Q w)(avg_Q w^{1-p'})^{p-1}.

    For p = 1 the ratio form sup_Q (avg_Q w) / (min_Q w) is used.
    """
    if p < 1.0:
        raise POutOfRange(f"p must be at least 1, got {p}")
    _check_positive(w)
    family.require_nonempty()
    avg1 = _family_power_averages(w, 1.0, family)
    if p == 1.0:
        mins = _family_minima(w, family)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = avg1 / mins
    else:
        pp = conjugate(p)
        dual = _family_power_averages(w, 1.0 - pp, family)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = avg1 * dual ** (p - 1.0)
    return _argmax_report(vals, family)


def apq_constant(w: GridFunction, p: float, q: float, family: CubeFamily) -> ConstantReport:
    """sup_Q (avg_Q w^q)^{1/q} (avg_Q w^{-p'})^{1/p'} for 1 < p < q."""
    if not (1.0 < p < q):
        raise POutOfRange(f"need 1 < p < q, got p={p}, q={q}")
    _check_positive(w)
    family.require_nonempty()
    pp = conjugate(p)
    with np.errstate(invalid="ignore"):
        lead = _family_power_averages(w, q, family) ** (1.0 / q)
        dual = _family_power_averages(w, -pp, family) ** (1.0 / pp)
        return _argmax_report(lead * dual, family)


def multiple_apq_constant(
    wv: WeightVector, p1: float, p2: float, q: float, family: CubeFamily
) -> ConstantReport:
    """sup_Q (avg_Q nu^q)^{1/q} prod_i (avg_Q w_i^{-p_i'})^{1/p_i'}.

    A p_i = 1 component contributes (min_Q w_i)^{-1}.
    """
    if p1 < 1.0 or p2 < 1.0 or q <= 0.0:
        raise POutOfRange("need p_i >= 1 and q > 0")
    family.require_nonempty()
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = _family_power_averages(wv.nu, q, family) ** (1.0 / q)
        for p, w in ((p1, wv.w1), (p2, wv.w2)):
            if p == 1.0:
                vals = vals / _family_minima(w, family)
            else:
                pp = conjugate(p)
                vals = vals * _family_power_averages(w, -pp, family) ** (1.0 / pp)
    return _argmax_report(vals, family)


def _pair_report(vals: np.ndarray, pairs: NestedPairs) -> ConstantReport:
    vals = _sanitize(vals)
    k = int(np.argmax(vals))
    witness = (
        pairs.family.cubes[int(pairs.inner[k])],
        pairs.family.cubes[int(pairs.outer[k])],
    )
    return ConstantReport(float(vals[k]), witness, pairs.size)


def iida_constant(
    wv: WeightVector,
    q0: float,
    q: float,
    p1: float,
    p2: float,
    pairs: NestedPairs,
) -> ConstantReport:
    """Two-cube constant over nested pairs Q ⊆ Q':

    (|Q|/|Q'|)^{1/q0} (avg_Q nu^q)^{1/q} prod_i (avg_{Q'} w_i^{-p_i'})^{1/p_i'}.
    """
    if p1 <= 1.0 or p2 <= 1.0:
        raise POutOfRange("pair constants need p_i > 1")
    if q0 <= 0.0 or q <= 0.0:
        raise POutOfRange("need q0 > 0 and q > 0")
    pairs.require_nonempty()
    fam = pairs.family
    meas = np.array([Q.measure for Q in fam.cubes])
    with np.errstate(invalid="ignore"):
        inner_lead = _family_power_averages(wv.nu, q, fam) ** (1.0 / q)
        cp1, cp2 = conjugate(p1), conjugate(p2)
        outer_1 = _family_power_averages(wv.w1, -cp1, fam) ** (1.0 / cp1)
        outer_2 = _family_power_averages(wv.w2, -cp2, fam) ** (1.0 / cp2)
        ratio = (meas[pairs.inner] / meas[pairs.outer]) ** (1.0 / q0)
        vals = (
            ratio
            * inner_lead[pairs.inner]
            * outer_1[pairs.outer]
            * outer_2[pairs.outer]
        )
    return _pair_report(vals, pairs)


def two_weight_constant(
    v: GridFunction,
    wv: WeightVector,
    q0: float,
    q: float,
    p1: float,
    p2: float,
    pairs: NestedPairs,
    r0: float | None = None,
) -> ConstantReport:
    """Two-weight pair constant; v replaces the product weight in the lead factor.

    With r0 given, the extra factor |Q'|^{1/r0} is inserted.
    """
    if p1 <= 1.0 or p2 <= 1.0:
        raise POutOfRange("pair constants need p_i > 1")
    if q0 <= 0.0 or q <= 0.0:
        raise POutOfRange("need q0 > 0 and q > 0")
    _check_positive(v)
    pairs.require_nonempty()
    fam = pairs.family
    meas = np.array([Q.measure for Q in fam.cubes])
    with np.errstate(invalid="ignore"):
        inner_lead = _family_power_averages(v, q, fam) ** (1.0 / q)
        cp1, cp2 = conjugate(p1), conjugate(p2)
        outer_1 = _family_power_averages(wv.w1, -cp1, fam) ** (1.0 / cp1)
        outer_2 = _family_power_averages(wv.w2, -cp2, fam) ** (1.0 / cp2)
        vals = (
            (meas[pairs.inner] / meas[pairs.outer]) ** (1.0 / q0)
            * inner_lead[pairs.inner]
            * outer_1[pairs.outer]
            * outer_2[pairs.outer]
        )
        if r0 is not None:
            vals = vals * meas[pairs.outer] ** (1.0 / r0)
    return _pair_report(vals, pairs)


def reverse_holder_probe(w: GridFunction, epsilon: float, family: CubeFamily) -> float:
    """Smallest C with (avg_Q w^{1+eps})^{1/(1+eps)} <= C avg_Q w on the family."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_positive(w)
    family.require_nonempty()
    hi = _family_power_averages(w, 1.0 + epsilon, family) ** (1.0 / (1.0 + epsilon))
    lo = _family_power_averages(w, 1.0, family)
    return float(np.max(hi / lo))


def iida_pair_value(
    wv: WeightVector, q0: float, q: float, p1: float, p2: float, Q: Cube, Qp: Cube
) -> float:
    """Integrand of iida_constant at one nested pair (witness re-evaluation)."""
    cp1, cp2 = conjugate(p1), conjugate(p2)
    with np.errstate(divide="ignore", over="ignore"):
        nu_q = box_power_integral(wv.nu, Q.corner, Q.side, q) / Q.measure
        d1 = box_power_integral(_pow_fn(wv.w1, -cp1), Qp.corner, Qp.side, 1.0) / Qp.measure
        d2 = box_power_integral(_pow_fn(wv.w2, -cp2), Qp.corner, Qp.side, 1.0) / Qp.measure
    return (
        (Q.measure / Qp.measure) ** (1.0 / q0)
        * nu_q ** (1.0 / q)
        * d1 ** (1.0 / cp1)
        * d2 ** (1.0 / cp2)
    )


def _pow_fn(w: GridFunction, expo: float) -> GridFunction:
    with np.errstate(divide="ignore", over="ignore"):
        return GridFunction(w.spec, np.power(w.samples, expo))
