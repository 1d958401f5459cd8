"""
Tests for Higgs field validation, polar data, gauge and L-retrivialization
"""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from core.errors import HiggsFieldError
from core.exact_kernel import X, RatFunc, RationalFunctionMatrix, random_constant_gauge
from core.higgs_field import HiggsField
from core.surface_geom import LineBundleCocycle

CASE1 = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0])
CASE2 = HiggsField.from_rows([["0", "1"], ["1/x", "0"]], poles=[0])
TWO_POLES = HiggsField.from_rows([["0", "1"], ["1/x + 1/(x-1)", "0"]], poles=[0, 1])

seeds = st.integers(min_value=0, max_value=10 ** 6)


class TestPolarPart:
    def test_case1_residue(self):
        pd = CASE1.polar_part(0)
        assert pd.residue == sp.Matrix([[1, 0], [0, 0]])
        assert pd.rank == 1
        assert pd.trace_residue == 1

    def test_case2_residue(self):
        pd = CASE2.polar_part(0)
        assert pd.residue == sp.Matrix([[0, 0], [1, 0]])
        assert (pd.rank, pd.trace_residue) == (1, 0)

    def test_holomorphic_declared_pole(self):
        field = HiggsField.from_rows([["1", "0"], ["0", "2"]], poles=[0])
        assert field.polar_part(0).rank == 0
        assert not field.validate().valid

    def test_not_a_pole(self):
        with pytest.raises(HiggsFieldError, match="not a pole"):
            CASE1.polar_part(1)

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_conjugation_of_residue(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        moved = TWO_POLES.gauge_transform(g)
        for p in (0, 1):
            assert moved.polar_part(p).residue == g * TWO_POLES.polar_part(p).residue * g.inv()


class TestValidate:
    def test_valid_fixtures(self):
        for field in (CASE1, CASE2, TWO_POLES):
            assert field.validate().valid

    def test_double_pole(self):
        report = HiggsField.from_rows([["1/x^2", "0"], ["0", "0"]], poles=[0]).validate()
        assert not report.valid
        assert any("pole of order 2" in v for v in report.violations)

    def test_rank_two_residue(self):
        report = HiggsField.from_rows([["1/x", "0"], ["0", "1/x"]], poles=[0]).validate()
        assert any("residue rank 2" in v for v in report.violations)

    def test_pole_outside_divisor(self):
        report = HiggsField.from_rows([["1/x", "1/(x^2+1)"], ["1", "0"]], poles=[0]).validate()
        assert any("pole outside C" in v for v in report.violations)

    def test_unit_must_be_identity(self):
        field = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0], unit=[[1, 0], [0, 2]])
        assert any("identity" in v for v in field.validate().violations)

    def test_require_valid(self):
        with pytest.raises(HiggsFieldError, match="invalid Higgs field"):
            HiggsField.from_rows([["1/x", "0"], ["0", "1/x"]], poles=[0]).require_valid()


class TestWedge:
    def test_identity_commutes(self):
        assert CASE1.wedge_check()

    def test_diagonal_unit_against_nilpotent(self):
        field = HiggsField.from_rows([["0", "1"], ["0", "0"]], unit=[[1, 0], [0, 2]])
        assert not field.wedge_check()

    def test_diagonal_unit_against_diagonal(self):
        field = HiggsField.from_rows([["1/x", "0"], ["0", "3"]], poles=[0], unit=[[1, 0], [0, 2]])
        assert field.wedge_check()


class TestGauge:
    def test_identity_gauge(self):
        assert CASE1.gauge_transform(sp.eye(2)).matrix == CASE1.matrix

    def test_singular_at_pole(self):
        g = RationalFunctionMatrix.from_rows([[X, 0], [0, 1]])
        with pytest.raises(HiggsFieldError, match="vanishes at x=0"):
            CASE1.gauge_transform(g)

    def test_singular_gauge(self):
        with pytest.raises(HiggsFieldError, match="not invertible"):
            CASE1.gauge_transform(sp.Matrix([[1, 1], [1, 1]]))

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_trace_residues_invariant(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        assert TWO_POLES.gauge_transform(g).trace_residues() == TWO_POLES.trace_residues()


class TestRetrivialize:
    def test_constant_is_noop(self):
        assert CASE1.retrivialize_L(5).matrix == CASE1.matrix

    def test_shift_by_log_derivative(self):
        moved = CASE1.retrivialize_L(X - 3)
        assert moved.matrix[0, 0] == RatFunc.from_expr(1 / X + 1 / (X - 3))
        assert moved.trace_residues() == CASE1.trace_residues()

    def test_zero_at_pole_moves_residue(self):
        moved = CASE2.retrivialize_L(X)
        assert moved.trace_residues() == [(0, 2)]


class TestTraceResidues:
    def test_examples(self):
        assert CASE1.trace_residues() == [(0, 1)]
        assert CASE2.trace_residues() == [(0, 0)]

    def test_linearity(self):
        field = HiggsField.from_rows([["2/x + 1/(x-1)", "0"], ["0", "-3/(x-1)"]], poles=[0, 1])
        assert field.trace_residues() == [(0, 2), (1, -2)]

    def test_residue_theorem(self):
        for field in (CASE1, CASE2, TWO_POLES):
            total, at_infinity = field.trace_residue_balance()
            assert total + at_infinity == 0


class TestCharts:
    def test_u1_matrix_trivial_bundle(self):
        h1 = CASE1.chart_matrix('U1')
        # h(1/y) * (-1/y^2) with h11 = 1/x
        assert h1[0, 0] == RatFunc.from_expr(-1 / X)
        assert h1[0, 1] == RatFunc.from_expr(-1 / X ** 2)

    def test_u1_matrix_picks_up_shift(self):
        field = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0],
                                     line_bundle=LineBundleCocycle.of_degree(2))
        h1 = field.chart_matrix('U1')
        # sigma_10 = d log y^2 = 2/y
        assert h1[1, 1] == RatFunc.from_expr(2 / X)
        assert field.validate().valid
