"""Discrete Morrey norms over finite cube families.

The norm is computed as max over the family of |Q|^{1/p0} (avg_Q |f|^q)^{1/q},
algebraically identical to |Q|^{1/p0 - 1/q} ||f chi_Q||_q but numerically
stabler.  These are under-approximations of the continuum suprema;
comparisons always run both sides over the same family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCubeFamily, ExponentOrder
from .families import CubeFamily
from .geometry import Cube
from .lattice import GridFunction
from .weights import _family_power_averages


@dataclass(frozen=True)
class MorreyParams:
    """Outer exponent p0 and inner exponent q with 0 < q <= p0."""

    p0: float
    q: float

    def __post_init__(self):
        if not (0.0 < self.q <= self.p0):
            raise ExponentOrder(f"need 0 < q <= p0, got q={self.q}, p0={self.p0}")


def _norm_values(f: GridFunction, p0: float, q: float, family: CubeFamily) -> np.ndarray:
    meas = np.array([Q.measure for Q in family.cubes])
    avgs = _family_power_averages(f.abs_pow(1.0), q, family)
    return meas ** (1.0 / p0) * avgs ** (1.0 / q)


def morrey_norm(f: GridFunction, params: MorreyParams, family: CubeFamily) -> float:
    """max over the family of |Q|^{1/p0 - 1/q} (int_Q |f|^q)^{1/q}."""
    if family.size == 0:
        raise EmptyCubeFamily("morrey_norm over an empty family")
    return float(np.max(_norm_values(f, params.p0, params.q, family)))


def morrey_norm_witness(
    f: GridFunction, params: MorreyParams, family: CubeFamily
) -> tuple[float, Cube]:
    if family.size == 0:
        raise EmptyCubeFamily("morrey_norm over an empty family")
    vals = _norm_values(f, params.p0, params.q, family)
    k = int(np.argmax(vals))
    return float(vals[k]), family.cubes[k]


def vector_morrey_norm(
    f1: GridFunction,
    f2: GridFunction,
    p0: float,
    p1: float,
    p2: float,
    family: CubeFamily,
) -> float:
    """max over Q of |Q|^{1/p0} prod_i ((1/|Q|) int_Q |f_i|^{p_i})^{1/p_i}."""
    if family.size == 0:
        raise EmptyCubeFamily("vector_morrey_norm over an empty family")
    if p1 <= 0 or p2 <= 0:
        raise ExponentOrder("component exponents must be positive")
    meas = np.array([Q.measure for Q in family.cubes])
    a1 = _family_power_averages(f1.abs_pow(1.0), p1, family) ** (1.0 / p1)
    a2 = _family_power_averages(f2.abs_pow(1.0), p2, family) ** (1.0 / p2)
    return float(np.max(meas ** (1.0 / p0) * a1 * a2))


def power_scaling_check(
    f: GridFunction, p0: float, q: float, ell: float, family: CubeFamily
) -> tuple[float, float]:
    """Both sides of ||f^ell||^{1/ell} with scaled exponents vs ||f||.

    The per-cube quantities are algebraically identical, so the two
    returned values agree to rounding.
    """
    if not (1.0 < ell < q):
        raise ExponentOrder(f"need 1 < ell < q, got ell={ell}, q={q}")
    lhs = morrey_norm(
        f.abs_pow(ell), MorreyParams(p0 / ell, q / ell), family
    ) ** (1.0 / ell)
    rhs = morrey_norm(f, MorreyParams(p0, q), family)
    return lhs, rhs
