"""
Tests for spectral curves, the cokernel divisor and pushdown lattices
"""

from dataclasses import replace

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from core.errors import SpectralError
from core.exact_kernel import ETA, MU, X, BiPoly, random_constant_gauge
from core.higgs_field import HiggsField
from core.normal_form import CASE1, CASE2, reduce
from core.spectral import (LatticeSheaf, SpectralCurve, branch_points, cokernel_divisor, genus,
                           infinity_intersection, pushdown_lattices, reconstruct, sample_real_points,
                           retrivialization_shift_check, smoothness_check, spectral_curve, verify_lattices)

CASE1_FIELD = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0])
CASE2_FIELD = HiggsField.from_rows([["0", "1"], ["1/x", "0"]], poles=[0])
TWO_POLES = HiggsField.from_rows([["0", "1"], ["1/x + 1/(x-1)", "0"]], poles=[0, 1])
DIVISOR_FIELD = HiggsField.from_rows([["1/x", "x - 2"], ["1", "0"]], poles=[0])
CONSTANT_TERM_FIELD = HiggsField.from_rows([["2/x + 1", "(x-2)/x"], ["1/(x-1) + 3", "1/(x-1)"]], poles=[0, 1])

seeds = st.integers(min_value=0, max_value=10 ** 6)


def _curve(P, Q):
    return SpectralCurve(BiPoly.from_expr(P, ETA), BiPoly.from_expr(Q, MU), (), 2, ())


def _odd_order_genus(S):
    # hyperelliptic w^2 = disc: g = (odd-order points of div(disc) on P^1) / 2 - 1
    disc = sp.Poly(sp.discriminant(S.P.as_expr(), ETA), X)
    _, factors = disc.sqf_list()
    odd = sum(f.degree() for f, k in factors if k % 2 == 1)
    odd += disc.degree() % 2
    return odd // 2 - 1


class TestSpectralCurve:
    def test_case1_example(self):
        S = spectral_curve(CASE1_FIELD)
        assert str(S.P) == "x*eta^2 - eta - x"
        assert S.Q == BiPoly.from_expr(X - MU - X * MU ** 2, MU)
        assert S.infinity_points == ((0, CASE1),)

    def test_case2_example(self):
        S = spectral_curve(CASE2_FIELD)
        assert S.P == BiPoly.from_expr(X * ETA ** 2 - 1)
        assert S.Q == BiPoly.from_expr(X - MU ** 2, MU)
        assert S.infinity_points == ((0, CASE2),)

    def test_invalid_field(self):
        with pytest.raises(SpectralError, match="invalid Higgs field"):
            spectral_curve(HiggsField.from_rows([["1/x^2", "0"], ["0", "0"]], poles=[0]))

    @settings(max_examples=8, deadline=None)
    @given(seeds)
    def test_gauge_invariance(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        for field in (CASE1_FIELD, TWO_POLES):
            assert spectral_curve(field.gauge_transform(g)).P == spectral_curve(field).P


class TestInfinity:
    def test_case1_meets_transversally(self):
        (hit,) = infinity_intersection(spectral_curve(CASE1_FIELD))
        assert (hit.point, hit.trace_residue, hit.fiber_multiplicity) == (0, 1, 1)
        assert hit.local_equation == "1*mu - (x - 0)"

    def test_shifted_pole(self):
        field = HiggsField.from_rows([["3/(x-2)", "1"], ["1", "0"]], poles=[2])
        (hit,) = infinity_intersection(spectral_curve(field))
        assert (hit.point, hit.trace_residue, hit.case) == (2, 3, CASE1)

    def test_case2_is_tangent(self):
        hits = infinity_intersection(spectral_curve(TWO_POLES))
        assert [h.fiber_multiplicity for h in hits] == [2, 2]
        assert all(h.trace_residue == 0 for h in hits)


class TestSmoothness:
    def test_examples_are_smooth(self):
        for field in (CASE1_FIELD, CASE2_FIELD, TWO_POLES, DIVISOR_FIELD):
            assert smoothness_check(spectral_curve(field)).smooth

    def test_node(self):
        report = smoothness_check(_curve(ETA ** 2 - X ** 2, 1 - X ** 2 * MU ** 2))
        assert not report.smooth
        assert "singular point (x, eta) = (0, 0)" in report.witnesses

    def test_singular_in_mu_chart(self):
        # Q = x^2 - mu^2: two branches cross at (0, 0) in the mu chart
        report = smoothness_check(_curve(X ** 2 * ETA ** 2 - 1, X ** 2 - MU ** 2))
        assert not report.smooth
        assert any("(x, mu) = (0, 0)" in w for w in report.witnesses)

    def test_cusp_over_x_infinity(self):
        # s^3 P(1/s, zeta) = (1 + s^3)(zeta - 1)^2 - s^3: a cusp at (s, zeta) = (0, 1)
        P = (X ** 3 + 1) * (ETA - 1) ** 2 - 1
        report = smoothness_check(_curve(P, (X ** 3 + 1) * (1 - MU) ** 2 - MU ** 2))
        assert report.witnesses == ["singular point over x = infinity"]


class TestGenus:
    def test_examples(self):
        assert genus(spectral_curve(CASE1_FIELD)) == 0
        assert genus(spectral_curve(CASE2_FIELD)) == 0
        assert genus(spectral_curve(TWO_POLES)) == 1

    @pytest.mark.parametrize("field", [CASE1_FIELD, CASE2_FIELD, TWO_POLES, DIVISOR_FIELD])
    def test_matches_odd_order_count(self, field):
        S = spectral_curve(field)
        assert genus(S) == _odd_order_genus(S)

    def test_reducible(self):
        S = spectral_curve(HiggsField.from_rows([["0", "1"], ["1", "0"]]))
        with pytest.raises(SpectralError, match="reducible"):
            genus(S)

    def test_diagonal_field_is_reducible(self):
        S = spectral_curve(HiggsField.from_rows([["1/x", "0"], ["0", "5"]], poles=[0]))
        with pytest.raises(SpectralError, match="reducible"):
            genus(S)

    def test_branch_points(self):
        assert sorted(branch_points(spectral_curve(TWO_POLES))) == [0, sp.Rational(1, 2), 1]
        numeric = branch_points(spectral_curve(CASE1_FIELD))
        assert len(numeric) == 2
        assert all(abs(z.real) < 1e-9 and abs(abs(z.imag) - 0.5) < 1e-9 for z in numeric)


class TestCokernelDivisor:
    def test_single_point(self):
        data = cokernel_divisor(DIVISOR_FIELD)
        assert data.exact
        assert data.points == [(2, sp.Rational(1, 2))]
        assert data.degree == 1

    def test_empty_divisor(self):
        data = cokernel_divisor(CASE1_FIELD)
        assert data.points == [] and data.degree == 0

    def test_non_cyclic(self):
        with pytest.raises(SpectralError, match="non-cyclic"):
            cokernel_divisor(HiggsField.from_rows([["1/x", "0"], ["0", "2"]], poles=[0]))

    def test_swap_when_h12_vanishes(self):
        data = cokernel_divisor(HiggsField.from_rows([["1/x", "0"], ["1", "0"]], poles=[0]))
        assert data.swapped
        assert data.points == []

    def test_zero_on_the_pole(self):
        data = cokernel_divisor(HiggsField.from_rows([["1/x", "x"], ["1", "0"]], poles=[0]))
        assert data.at_infinity == [0]
        assert data.points == []

    def test_irrational_zeros(self):
        data = cokernel_divisor(HiggsField.from_rows([["1/x", "x^2 - 2"], ["1", "0"]], poles=[0]))
        assert not data.exact
        assert len(data.points) == 2
        for x_k, e_k in data.points:
            assert abs(data.curve.P.evaluate_numeric(x_k, e_k)) < 1e-9


class TestReconstruct:
    def test_roundtrip(self):
        for field in (DIVISOR_FIELD, HiggsField.from_rows([["1/x", "(x-2)*(x-3)"], ["1", "0"]], poles=[0])):
            data = cokernel_divisor(field)
            assert reconstruct(data.curve, data).matrix == field.matrix

    def test_constant_term_in_h11(self):
        data = cokernel_divisor(CONSTANT_TERM_FIELD)
        assert data.points == [(2, 2)]
        psi = reconstruct(data.curve, data)
        assert spectral_curve(psi).P == data.curve.P
        assert cokernel_divisor(psi).points == data.points
        assert psi.matrix[0, 1] == CONSTANT_TERM_FIELD.matrix[0, 1]

    def test_two_poles_reproduce_field(self):
        field = HiggsField.from_rows([["1/x", "1 - 6/x + 2/(x-1)"], ["1", "0"]], poles=[0, 1])
        data = cokernel_divisor(field)
        assert reconstruct(data.curve, data).matrix == field.matrix

    def test_empty_divisor_gives_companion(self):
        data = cokernel_divisor(CASE1_FIELD)
        psi = reconstruct(data.curve, data)
        assert spectral_curve(psi).P == data.curve.P
        assert psi.matrix[0, 0].is_zero

    def test_point_off_curve(self):
        data = cokernel_divisor(DIVISOR_FIELD)
        moved = replace(data, points=[(sp.Integer(2), sp.Integer(1))])
        with pytest.raises(SpectralError, match="inconsistent divisor"):
            reconstruct(data.curve, moved)

    def test_numeric_divisor_rejected(self):
        data = cokernel_divisor(HiggsField.from_rows([["1/x", "x^2 - 2"], ["1", "0"]], poles=[0]))
        with pytest.raises(SpectralError, match="exact"):
            reconstruct(data.curve, data)


class TestLattices:
    def test_case1_orders(self):
        nf = reduce(CASE1_FIELD, 0, 3)
        report = pushdown_lattices(nf)
        assert report.E0.orders == (1, 0)
        assert report.E00.orders == (2, 0)
        assert report.Epsi.orders == (-1, 0)
        assert report.end_poles == [[0, 1], [1, 0]]
        assert verify_lattices(report, nf, CASE1_FIELD)

    def test_case2_orders(self):
        nf = reduce(CASE2_FIELD, 0, 3)
        report = pushdown_lattices(nf)
        assert report.case == CASE2
        assert (report.E0.orders, report.E00.orders, report.Epsi.orders) == ((1, 0), (1, 1), (0, -1))
        assert report.constraints == ["res X_11 + res X_22 = 0"]
        assert verify_lattices(report, nf, CASE2_FIELD)

    def test_wrong_orders_fail_verification(self):
        nf = reduce(CASE1_FIELD, 0, 3)
        report = pushdown_lattices(nf)
        loose = replace(report, E0=LatticeSheaf('E_0', (2, 0)))
        assert not verify_lattices(loose, nf, CASE1_FIELD)

    @settings(max_examples=5, deadline=None)
    @given(seeds)
    def test_orders_gauge_invariant(self, seed):
        g = random_constant_gauge(2, np.random.default_rng(seed))
        moved = CASE1_FIELD.gauge_transform(g)
        nf = reduce(moved, 0, 3)
        report = pushdown_lattices(nf)
        assert report.E00.orders == (2, 0)
        assert verify_lattices(report, nf, moved)


def test_sample_real_points():
    rows = sample_real_points(spectral_curve(CASE1_FIELD), (-2.0, 2.0), 5)
    assert len(rows) == 8
    assert all(r['x'] != 0.0 for r in rows)
    assert all(r['im_eta'] == 0.0 for r in rows)


def test_sample_complex_branches():
    rows = sample_real_points(spectral_curve(CASE2_FIELD), (-1.0, -1.0), 1)
    assert [r['branch'] for r in rows] == [0, 1]
    assert sorted(r['im_eta'] for r in rows) == pytest.approx([-1.0, 1.0])
    assert all(abs(r['re_eta']) < 1e-12 for r in rows)


def test_retrivialization_shifts_eta():
    for ell in (X - 3, X ** 2 + 1, 7):
        assert retrivialization_shift_check(TWO_POLES, ell)
