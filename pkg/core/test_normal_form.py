"""
Tests for the jet-order normal forms at simple rank-one poles
"""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from core.errors import NormalFormError, ResonanceError
from core.exact_kernel import random_constant_gauge
from core.higgs_field import HiggsField
from core.normal_form import (CASE1, CASE2, detect_case, gauge_invariants, reduce, reduce_case1,
                              reduce_case2, verify_normal_form)

CASE1_FIELD = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0])
CASE2_FIELD = HiggsField.from_rows([["0", "1"], ["1/x", "0"]], poles=[0])
CASE1_RANK3 = HiggsField.from_rows([["1/x", "1", "0"], ["1", "0", "1"], ["0", "1", "3"]], poles=[0])
CASE2_RANK3 = HiggsField.from_rows([["0", "1", "0"], ["1/x", "0", "1"], ["1", "0", "2"]], poles=[0])

seeds = st.integers(min_value=0, max_value=10 ** 6)


def _same_jets(left, right, low, order):
    return all(left.coefficient(k) == right.coefficient(k) for k in range(low, order + 1))


class TestDetectCase:
    def test_examples(self):
        assert detect_case(CASE1_FIELD.polar_part(0)) == CASE1
        assert detect_case(CASE2_FIELD.polar_part(0)) == CASE2
        nilpotent = HiggsField.from_rows([["0", "1/x"], ["0", "0"]], poles=[0])
        assert detect_case(nilpotent.polar_part(0)) == CASE2

    def test_rank_two_rejected(self):
        field = HiggsField.from_rows([["1/x", "0"], ["0", "1/x"]], poles=[0])
        with pytest.raises(NormalFormError, match="rank one"):
            detect_case(field.polar_part(0))


class TestCase1:
    def test_already_normal(self):
        field = HiggsField.from_rows([["1/x", "0"], ["0", "5"]], poles=[0])
        result = reduce_case1(field, 0, 3)
        assert result.gauge.coefficient(0) == sp.eye(2)
        assert all(result.gauge.coefficient(k) == sp.zeros(2, 2) for k in range(1, 5))
        assert result.leading['a_-1'] == 1

    def test_block_diagonal(self):
        result = reduce_case1(CASE1_FIELD, 0, 3)
        assert result.case == CASE1
        for k in range(-1, 4):
            C = result.normalized.coefficient(k)
            assert C[0, 1] == 0 and C[1, 0] == 0
        assert verify_normal_form(result, CASE1_FIELD, 0, 3)

    def test_blocks_share_trace_and_determinant(self):
        result = reduce_case1(CASE1_FIELD, 0, 3)
        a = result.normalized.map(lambda c: c[0, 0])
        A = result.normalized.map(lambda c: c[1, 1])
        total = a + A
        assert total.coefficient(-1) == 1
        assert all(total.coefficient(k) == 0 for k in range(0, 4))
        product = a * A
        assert product.coefficient(0) == -1
        assert all(product.coefficient(k) == 0 for k in (-2, -1, 1, 2))

    def test_a_minus_one_is_trace_residue(self):
        for field in (CASE1_FIELD, CASE1_RANK3):
            result = reduce_case1(field, 0, 2)
            assert result.leading['a_-1'] == dict(field.trace_residues())[0]

    @settings(max_examples=6, deadline=None)
    @given(seeds)
    def test_gauge_invariance(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        base = reduce_case1(CASE1_FIELD, 0, 3)
        moved = reduce_case1(CASE1_FIELD.gauge_transform(g), 0, 3)
        assert _same_jets(base.normalized, moved.normalized, -1, 3)

    def test_rank_three(self):
        result = reduce_case1(CASE1_RANK3, 0, 2)
        assert verify_normal_form(result, CASE1_RANK3, 0, 2)
        g = random_constant_gauge(3, np.random.default_rng(11))
        moved = reduce_case1(CASE1_RANK3.gauge_transform(g), 0, 2)
        assert gauge_invariants(moved) == gauge_invariants(result)

    def test_wrong_case(self):
        with pytest.raises(NormalFormError, match="not Case1"):
            reduce_case1(CASE2_FIELD, 0, 2)


class TestCase2:
    def test_already_normal(self):
        result = reduce_case2(CASE2_FIELD, 0, 3)
        assert result.leading == {'a_0': 1, 'b_0': 0}
        assert result.normalized.coefficient(-1) == sp.Matrix([[0, 0], [1, 0]])
        assert verify_normal_form(result, CASE2_FIELD, 0, 3)

    @settings(max_examples=6, deadline=None)
    @given(seeds)
    def test_gauge_invariance(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        base = reduce_case2(CASE2_FIELD, 0, 3)
        moved = reduce_case2(CASE2_FIELD.gauge_transform(g), 0, 3)
        assert moved.leading == base.leading
        assert _same_jets(base.normalized, moved.normalized, -1, 3)

    def test_degenerate_branch(self):
        field = HiggsField.from_rows([["0", "x"], ["1/x", "0"]], poles=[0])
        with pytest.raises(NormalFormError, match="non-generic Case2"):
            reduce_case2(field, 0, 2)

    def test_rank_three_split(self):
        result = reduce_case2(CASE2_RANK3, 0, 2)
        assert verify_normal_form(result, CASE2_RANK3, 0, 2)
        for k in range(-1, 3):
            C = result.normalized.coefficient(k)
            assert C[0:2, 2:] == sp.zeros(2, 1)
            assert C[2:, 0:2] == sp.zeros(1, 2)
        g = random_constant_gauge(3, np.random.default_rng(5))
        moved = reduce_case2(CASE2_RANK3.gauge_transform(g), 0, 2)
        assert gauge_invariants(moved) == gauge_invariants(result)

    def test_residue_class_preserved(self):
        result = reduce(CASE2_FIELD, 0, 2)
        residue = result.normalized.coefficient(-1)
        assert residue.rank() == 1
        assert residue.trace() == 0


class TestVerify:
    def test_tampered_gauge(self):
        result = reduce_case1(CASE1_FIELD, 0, 3)
        coeffs = list(result.gauge.coefficients)
        coeffs[0] = coeffs[0] + sp.Matrix([[0, 0], [1, 0]])
        tampered = type(result)(result.case, result.point, result.order,
                                type(result.gauge)(result.gauge.base, result.gauge.low,
                                                   result.gauge.order, tuple(coeffs)),
                                result.normalized, result.leading)
        assert not verify_normal_form(tampered, CASE1_FIELD, 0, 3)

    def test_order_beyond_reduction(self):
        result = reduce_case1(CASE1_FIELD, 0, 2)
        with pytest.raises(NormalFormError, match="insufficient jet data"):
            verify_normal_form(result, CASE1_FIELD, 0, 4)

    def test_lower_order_check(self):
        result = reduce_case2(CASE2_FIELD, 0, 4)
        assert verify_normal_form(result, CASE2_FIELD, 0, 2)


def test_resonance_carries_order():
    err = ResonanceError(order=3)
    assert "at order 3" in str(err)
    assert err.order == 3
