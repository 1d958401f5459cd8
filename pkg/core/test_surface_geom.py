"""
Tests for the base atlas, the connection torsor and the Poisson surface
"""

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from core.errors import GeometryError
from core.exact_kernel import MU, X, RatFunc
from core.surface_geom import (SHAPE_2E, SHAPE_2E_PLUS, SHAPE_E_E, SHAPE_E_E_PLUS, BaseAtlas,
                               LineBundleCocycle, build_torsor, classify_ruled_poisson,
                               compactify, curvature_form, global_section, shifted_curvature,
                               torsor_class, transition_jacobian)

degrees = st.integers(min_value=-5, max_value=5)
coefficients = st.lists(st.integers(min_value=-4, max_value=4), min_size=1, max_size=4)


def _polynomial(coeffs):
    return RatFunc.from_expr(sum((c * X ** k for k, c in enumerate(coeffs)), sp.Integer(0)))


class TestBaseAtlas:
    def test_standard_pair(self):
        atlas = BaseAtlas.projective_line()
        assert atlas.transition('U0', 'U1') == RatFunc.from_expr(1 / X)
        assert atlas.missing_point('U0', 'U1') == 0
        assert atlas.cocycle_violations() == []

    def test_extra_chart_triples(self):
        atlas = BaseAtlas.projective_line(centers=[1])
        assert len(atlas.triples()) == 6
        assert atlas.cocycle_violations() == []
        assert atlas.missing_point('U0', 'U2') == 1

    def test_export(self):
        data = BaseAtlas.projective_line().to_dict()
        assert {n['id'] for n in data['nodes']} == {'U0', 'U1'}
        assert data['genus'] == 0

    def test_degenerate_chart(self):
        with pytest.raises(GeometryError, match="Möbius"):
            BaseAtlas(0, {'U0': (1, 1, 1, 1)})


class TestLineBundle:
    @pytest.mark.parametrize("d", [-2, 0, 3])
    def test_standard_transition(self, d):
        L = LineBundleCocycle.of_degree(d)
        assert L.transition('U0', 'U1') == RatFunc.from_expr(X ** d)
        assert L.violations() == []
        assert L.cech_degree() == d

    def test_three_chart_cocycle(self):
        L = LineBundleCocycle.of_degree(2, BaseAtlas.projective_line(centers=[1]))
        assert L.violations() == []

    def test_tensor_and_dual(self):
        L = LineBundleCocycle.of_degree(2)
        M = LineBundleCocycle.of_degree(-3)
        assert L.tensor(M).degree == -1
        assert L.tensor(L.dual()).transition('U0', 'U1') == 1

    def test_wrong_declared_degree(self):
        L = LineBundleCocycle.from_transition(X ** 2, degree=1)
        assert any("declared degree" in v for v in L.violations())

    def test_zero_inside_overlap(self):
        L = LineBundleCocycle.from_transition(X - 1)
        assert L.violations()


class TestTorsor:
    def test_trivial_bundle(self):
        T = build_torsor(LineBundleCocycle.of_degree(0))
        assert T.shift('U0', 'U1') == 0
        assert torsor_class(T) == 0
        section = global_section(T)
        assert section is not None
        assert all(v == 0 for v in section.values.values())

    @pytest.mark.parametrize("d", range(-3, 4))
    def test_class_is_degree(self, d):
        T = build_torsor(LineBundleCocycle.of_degree(d))
        assert T.shift('U0', 'U1') == RatFunc.from_expr(sp.Integer(d) / X)
        assert torsor_class(T) == d
        assert (global_section(T) is not None) == (d == 0)

    @settings(max_examples=15, deadline=None)
    @given(degrees, degrees)
    def test_product_adds_shifts(self, d, e):
        L, M = LineBundleCocycle.of_degree(d), LineBundleCocycle.of_degree(e)
        lhs = build_torsor(L.tensor(M)).shift('U0', 'U1')
        rhs = build_torsor(L).shift('U0', 'U1') + build_torsor(M).shift('U0', 'U1')
        assert lhs == rhs

    def test_zero_transition(self):
        with pytest.raises(GeometryError):
            build_torsor(LineBundleCocycle.from_transition(0))

    def test_coboundary_keeps_class_and_splits(self):
        T = build_torsor(LineBundleCocycle.of_degree(0))
        tau = {'U0': RatFunc.from_expr(X ** 2 + 1), 'U1': RatFunc.from_expr(X)}
        shifted = T.with_coboundary(tau)
        assert shifted.shift('U0', 'U1') == RatFunc.from_expr(X ** 2 + 1 + 1 / X ** 3)
        assert torsor_class(shifted) == 0
        section = global_section(shifted)
        assert section.values['U0'] == tau['U0']
        assert section.values['U1'] == tau['U1']

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=-3, max_value=3), coefficients, coefficients)
    def test_random_coboundary_keeps_class(self, d, near, far):
        T = build_torsor(LineBundleCocycle.of_degree(d))
        tau = {'U0': _polynomial(near), 'U1': _polynomial(far)}
        shifted = T.with_coboundary(tau)
        assert shifted.holomorphy_violations() == []
        assert torsor_class(shifted) == d
        section = global_section(shifted)
        if d != 0:
            assert section is None
        else:
            assert section.values['U0'] == tau['U0']
            assert section.values['U1'] == tau['U1']

    def test_three_charts_additivity(self):
        atlas = BaseAtlas.projective_line(centers=[2])
        T = build_torsor(LineBundleCocycle.of_degree(3, atlas))
        assert T.additivity_violations() == []
        assert T.holomorphy_violations() == []
        with pytest.raises(GeometryError, match="two-chart"):
            torsor_class(T)


class TestCurvature:
    def test_finite_chart(self):
        T = build_torsor(LineBundleCocycle.of_degree(1))
        form = curvature_form(T, 'U0')
        assert form.coefficient == 1
        assert form.pole_order == 0

    def test_shift_keeps_liouville(self):
        assert shifted_curvature(RatFunc.from_expr(X ** 3 - 2)) == 1

    def test_mu_chart_pole(self):
        T = build_torsor(LineBundleCocycle.of_degree(0))
        form = curvature_form(T, 'U1:mu')
        assert sp.simplify(form.coefficient + 1 / MU ** 2) == 0
        assert form.pole_order == 2

    @pytest.mark.parametrize("d", [0, 4])
    def test_chart_change_preserves_form(self, d):
        T = build_torsor(LineBundleCocycle.of_degree(d))
        assert transition_jacobian(T, 'U0', 'U1') == 1
        assert transition_jacobian(T, 'U1', 'U0') == 1

    @pytest.mark.parametrize("d", [-1, 3])
    def test_second_chart_follows_jacobian(self, d):
        T = build_torsor(LineBundleCocycle.of_degree(d, BaseAtlas.projective_line(centers=[2])))
        for chart in ('U1', 'U2'):
            assert curvature_form(T, chart).coefficient == transition_jacobian(T, chart, 'U0') == 1

    def test_coefficient_is_transported(self, monkeypatch):
        monkeypatch.setattr("core.surface_geom.transition_jacobian", lambda T, a, b: sp.Integer(2))
        T = build_torsor(LineBundleCocycle.of_degree(1))
        assert curvature_form(T, 'U0').coefficient == 1
        assert curvature_form(T, 'U1').coefficient == 2
        assert sp.simplify(curvature_form(T, 'U1:mu').coefficient + 2 / MU ** 2) == 0


class TestCompactify:
    @pytest.mark.parametrize("d", [0, 2])
    def test_bivector_at_infinity(self, d):
        S = compactify(build_torsor(LineBundleCocycle.of_degree(d)))
        assert S.bivector('U0') == 1
        assert sp.expand(S.bivector('U0:mu') + MU ** 2) == 0
        assert S.double_zero_at_infinity()
        assert S.restricted_to_infinity('U1:mu') == 0
        assert all(v == 1 for v in S.finite_transition_factors().values())


class TestClassification:
    def test_genus_two_extension(self):
        result = classify_ruled_poisson(2, 'extension', 1)
        assert result.divisor_shapes == (SHAPE_2E,)
        assert result.case == 'nontrivial-extension'

    def test_genus_one_degree_zero(self):
        result = classify_ruled_poisson(1, 'split', 0)
        assert SHAPE_E_E in result.divisor_shapes

    def test_genus_zero(self):
        result = classify_ruled_poisson(0, 'split', 3)
        assert set(result.divisor_shapes) == {SHAPE_2E_PLUS, SHAPE_E_E_PLUS}

    def test_split_needs_canonical_degree(self):
        with pytest.raises(GeometryError, match="deg L >= 4"):
            classify_ruled_poisson(3, 'split', 1)

    def test_extension_over_p1_rejected(self):
        with pytest.raises(GeometryError, match="g >= 1"):
            classify_ruled_poisson(0, 'extension', 1)

    def test_extension_degree_zero_rejected(self):
        with pytest.raises(GeometryError, match="deg L != 0"):
            classify_ruled_poisson(2, 'extension', 0)

    def test_negative_degree_normalized(self):
        result = classify_ruled_poisson(2, 'split', -3)
        assert result.degree == 3
        assert result.notes
