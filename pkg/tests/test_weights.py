"""Weight constants against exhaustive enumeration and invariances."""

import math

import numpy as np
import pytest

from bifrac import (
    Cube,
    GridFunction,
    GridSpec,
    NonPositiveWeight,
    POutOfRange,
    WeightVector,
    all_intervals,
    ap_constant,
    apq_constant,
    iida_constant,
    multiple_apq_constant,
    nested_pairs,
    reverse_holder_probe,
    two_weight_constant,
)
from bifrac.weights import conjugate


def brute_interval_values(w_samples, h, i, j, expo):
    total = np.sum(np.power(w_samples[i:j], expo)) * h
    return total / ((j - i) * h)


def step_weight(spec):
    arr = np.where(spec.midpoints() < 0, 2.0, 1.0)
    return GridFunction(spec, arr)


class TestApConstant:
    def test_unit_weight(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        for p in (1.0, 1.5, 2.0, 4.0):
            rep = ap_constant(one, p, intervals32)
            assert rep.value == 1.0
            assert rep.family_size == intervals32.size

    def test_two_level_step(self, spec32, intervals32):
        w = step_weight(spec32)
        rep = ap_constant(w, 2.0, intervals32)
        # exhaustive check
        best = 0.0
        h = spec32.h
        for i in range(32):
            for j in range(i + 1, 33):
                a1 = brute_interval_values(w.samples, h, i, j, 1.0)
                a2 = brute_interval_values(w.samples, h, i, j, -1.0)
                best = max(best, a1 * a2)
        assert rep.value == pytest.approx(best, rel=1e-12)
        assert rep.value == pytest.approx(9.0 / 8.0, rel=1e-12)
        assert rep.witness == Cube((-1.0,), 2.0)

    def test_p_one_branch(self, spec32, intervals32):
        w = step_weight(spec32)
        rep = ap_constant(w, 1.0, intervals32)
        # exhaustive sup of avg / min
        best = 0.0
        h = spec32.h
        for i in range(32):
            for j in range(i + 1, 33):
                avg = brute_interval_values(w.samples, h, i, j, 1.0)
                best = max(best, avg / np.min(w.samples[i:j]))
        assert rep.value == pytest.approx(best, rel=1e-12)

    def test_scale_invariance(self, spec32, intervals32, rng):
        w = GridFunction(spec32, rng.uniform(0.3, 3.0, 32))
        a = ap_constant(w, 2.5, intervals32).value
        b = ap_constant(w * 17.0, 2.5, intervals32).value
        assert a == pytest.approx(b, rel=1e-12)

    def test_power_weight_refinement_stability(self):
        # |x|^(1/2) lies inside the p=2 class: constants drift < 5% as N doubles
        vals = []
        for n in (64, 128, 256):
            spec = GridSpec(1, 1.0, n)
            w = GridFunction(
                spec, np.maximum(np.abs(spec.midpoints()) ** 0.5, 1e-8)
            )
            vals.append(ap_constant(w, 2.0, all_intervals(spec)).value)
        assert abs(vals[1] - vals[0]) / vals[0] < 0.05
        assert abs(vals[2] - vals[1]) / vals[1] < 0.05

    def test_rejects_negative(self, spec32, intervals32):
        arr = np.ones(32)
        arr[4] = -0.5
        with pytest.raises(NonPositiveWeight):
            ap_constant(GridFunction(spec32, arr), 2.0, intervals32)

    def test_p_below_one(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        with pytest.raises(POutOfRange):
            ap_constant(one, 0.8, intervals32)


class TestApqConstant:
    def test_unit(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        assert apq_constant(one, 2.0, 3.0, intervals32).value == 1.0

    def test_constant_scale_cancels(self, spec32, intervals32):
        c = GridFunction.constant(spec32, 5.0)
        assert apq_constant(c, 2.0, 3.0, intervals32).value == pytest.approx(1.0, rel=1e-12)

    def test_step_matches_enumeration(self, spec32, intervals32):
        w = step_weight(spec32)
        p, q = 2.0, 3.0
        rep = apq_constant(w, p, q, intervals32)
        pp = conjugate(p)
        best = 0.0
        h = spec32.h
        for i in range(32):
            for j in range(i + 1, 33):
                lead = brute_interval_values(w.samples, h, i, j, q) ** (1.0 / q)
                dual = brute_interval_values(w.samples, h, i, j, -pp) ** (1.0 / pp)
                best = max(best, lead * dual)
        assert rep.value == pytest.approx(best, rel=1e-12)

    def test_range_check(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        with pytest.raises(POutOfRange):
            apq_constant(one, 3.0, 2.0, intervals32)


class TestMultipleApq:
    def test_units(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        wv = WeightVector(one, one)
        assert multiple_apq_constant(wv, 2.0, 2.0, 3.0, intervals32).value == 1.0

    def test_reciprocal_pair(self, spec32, intervals32):
        c = GridFunction.constant(spec32, 3.0)
        inv = GridFunction.constant(spec32, 1.0 / 3.0)
        wv = WeightVector(c, inv)
        assert multiple_apq_constant(wv, 2.0, 2.0, 3.0, intervals32).value == pytest.approx(
            1.0, rel=1e-12
        )

    def test_joint_rescale_invariance(self, spec32, intervals32, rng):
        w1 = GridFunction(spec32, rng.uniform(0.3, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.3, 2.0, 32))
        base = multiple_apq_constant(WeightVector(w1, w2), 2.0, 3.0, 2.5, intervals32).value
        c = 7.3
        scaled = multiple_apq_constant(
            WeightVector(w1 * c, w2 * (1.0 / c)), 2.0, 3.0, 2.5, intervals32
        ).value
        assert base == pytest.approx(scaled, rel=1e-12)

    def test_random_matches_enumeration(self, spec32, intervals32, rng):
        w1 = GridFunction(spec32, rng.uniform(0.3, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.3, 2.0, 32))
        p1, p2, q = 2.0, 3.0, 2.0
        rep = multiple_apq_constant(WeightVector(w1, w2), p1, p2, q, intervals32)
        nu = w1.samples * w2.samples
        h = spec32.h
        best = 0.0
        for i in range(32):
            for j in range(i + 1, 33):
                lead = brute_interval_values(nu, h, i, j, q) ** (1.0 / q)
                d1 = brute_interval_values(w1.samples, h, i, j, -conjugate(p1)) ** (
                    1.0 / conjugate(p1)
                )
                d2 = brute_interval_values(w2.samples, h, i, j, -conjugate(p2)) ** (
                    1.0 / conjugate(p2)
                )
                best = max(best, lead * d1 * d2)
        assert rep.value == pytest.approx(best, rel=1e-12)

    def test_p_equal_one_uses_minimum(self, spec32, intervals32):
        w1 = step_weight(spec32)
        one = GridFunction.constant(spec32, 1.0)
        rep = multiple_apq_constant(WeightVector(w1, one), 1.0, 2.0, 2.0, intervals32)
        h = spec32.h
        best = 0.0
        for i in range(32):
            for j in range(i + 1, 33):
                lead = brute_interval_values(w1.samples, h, i, j, 2.0) ** 0.5
                best = max(best, lead / np.min(w1.samples[i:j]))
        assert rep.value == pytest.approx(best, rel=1e-12)


class TestIidaConstant:
    def test_units_attained_at_equal_pair(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        pairs = nested_pairs(intervals32)
        rep = iida_constant(WeightVector(one, one), 4.0, 2.0, 2.0, 2.0, pairs)
        assert rep.value == 1.0
        inner, outer = rep.witness
        assert inner == outer

    def test_exponent_translation_identity(self):
        # substituted component exponents reproduce the direct display
        for (r, p1) in ((2.0, 4.0), (2.5, 6.0), (1.5, 2.0)):
            s = r / (r - 1.0)
            u = s * p1 / (s + p1)
            up = conjugate(u)
            assert up == pytest.approx(p1 * r / (p1 - r), rel=1e-12)
            assert 1.0 / up == pytest.approx(1.0 / r - 1.0 / p1, rel=1e-12)

    def test_step_matches_pair_enumeration(self, spec32, intervals32, rng):
        w1 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        q0, q, p1, p2 = 4.0, 2.0, 2.0, 3.0
        pairs = nested_pairs(intervals32)
        rep = iida_constant(WeightVector(w1, w2), q0, q, p1, p2, pairs)
        nu = w1.samples * w2.samples
        h = spec32.h
        cp1, cp2 = conjugate(p1), conjugate(p2)
        best = 0.0
        for io in range(32):
            for jo in range(io + 1, 33):
                d1 = brute_interval_values(w1.samples, h, io, jo, -cp1) ** (1.0 / cp1)
                d2 = brute_interval_values(w2.samples, h, io, jo, -cp2) ** (1.0 / cp2)
                for ii in range(io, jo):
                    for ji in range(ii + 1, jo + 1):
                        ratio = ((ji - ii) / (jo - io)) ** (1.0 / q0)
                        lead = brute_interval_values(nu, h, ii, ji, q) ** (1.0 / q)
                        best = max(best, ratio * lead * d1 * d2)
        assert rep.value == pytest.approx(best, rel=1e-12)

    def test_witness_reproduces_value(self, spec32, intervals32, rng):
        from bifrac.weights import iida_pair_value

        w1 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        wv = WeightVector(w1, w2)
        pairs = nested_pairs(intervals32)
        rep = iida_constant(wv, 4.0, 2.0, 2.0, 2.0, pairs)
        inner, outer = rep.witness
        again = iida_pair_value(wv, 4.0, 2.0, 2.0, 2.0, inner, outer)
        assert again == pytest.approx(rep.value, rel=1e-12)

    def test_reduces_to_single_cube_on_diagonal(self, spec32, intervals32, rng):
        # pairs restricted to Q = Q' with the ratio factor trivial
        from bifrac.families import NestedPairs

        w1 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        wv = WeightVector(w1, w2)
        idx = np.arange(intervals32.size, dtype=np.int64)
        diag = NestedPairs(intervals32, idx, idx)
        got = iida_constant(wv, 1e18, 2.0, 2.0, 3.0, diag).value
        want = multiple_apq_constant(wv, 2.0, 3.0, 2.0, intervals32).value
        assert got == pytest.approx(want, rel=1e-9)


class TestTwoWeightConstant:
    def test_all_units(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        pairs = nested_pairs(intervals32)
        rep = two_weight_constant(one, WeightVector(one, one), 4.0, 2.0, 2.0, 2.0, pairs)
        assert rep.value == 1.0

    def test_r0_factor_picks_largest_outer(self, spec32, intervals32):
        one = GridFunction.constant(spec32, 1.0)
        pairs = nested_pairs(intervals32)
        r0 = 2.0
        rep = two_weight_constant(
            one, WeightVector(one, one), 4.0, 2.0, 2.0, 2.0, pairs, r0=r0
        )
        biggest = max(Q.measure for Q in intervals32.cubes)
        assert rep.value == pytest.approx(biggest ** (1.0 / r0), rel=1e-12)
        inner, outer = rep.witness
        assert inner == outer
        assert outer.measure == pytest.approx(biggest)

    def test_v_equal_product_reduces_to_iida(self, spec32, intervals32, rng):
        w1 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        w2 = GridFunction(spec32, rng.uniform(0.4, 2.0, 32))
        nu = GridFunction(spec32, w1.samples * w2.samples)
        wv = WeightVector(w1, w2)
        pairs = nested_pairs(intervals32)
        a = two_weight_constant(nu, wv, 4.0, 2.0, 2.0, 2.0, pairs).value
        b = iida_constant(wv, 4.0, 2.0, 2.0, 2.0, pairs).value
        assert a == pytest.approx(b, rel=1e-12)


class TestReverseHolder:
    def test_constant_weight(self, spec32, intervals32):
        c = GridFunction.constant(spec32, 4.2)
        for eps in (0.25, 1.0, 3.0):
            assert reverse_holder_probe(c, eps, intervals32) == pytest.approx(1.0)

    def test_at_least_one(self, spec32, intervals32, rng):
        w = GridFunction(spec32, rng.uniform(0.2, 5.0, 32))
        assert reverse_holder_probe(w, 0.5, intervals32) >= 1.0 - 1e-15

    def test_step_matches_enumeration(self, spec32, intervals32):
        w = step_weight(spec32)
        got = reverse_holder_probe(w, 1.0, intervals32)
        h = spec32.h
        best = 0.0
        for i in range(32):
            for j in range(i + 1, 33):
                hi = brute_interval_values(w.samples, h, i, j, 2.0) ** 0.5
                lo = brute_interval_values(w.samples, h, i, j, 1.0)
                best = max(best, hi / lo)
        assert got == pytest.approx(best, rel=1e-12)


class TestFamilyMonotonicity:
    def test_bigger_family_never_smaller(self, spec32, rng):
        from bifrac.families import family_from_cubes

        w = GridFunction(spec32, rng.uniform(0.3, 2.0, 32))
        full = all_intervals(spec32)
        half = family_from_cubes(spec32, full.cubes[::2], name="half")
        assert (
            ap_constant(w, 2.0, half).value
            <= ap_constant(w, 2.0, full).value + 1e-15
        )

    def test_zero_weight_gives_inf_sentinel(self, spec32, intervals32):
        arr = np.ones(32)
        arr[5] = 0.0
        w = GridFunction(spec32, arr)
        rep = ap_constant(w, 2.0, intervals32)
        assert math.isinf(rep.value)


def test_empty_family_raises(spec32):
    from bifrac import EmptyCubeFamily
    from bifrac.families import family_from_cubes

    one = GridFunction.constant(spec32, 1.0)
    with pytest.raises(EmptyCubeFamily):
        ap_constant(one, 2.0, family_from_cubes(spec32, []))
