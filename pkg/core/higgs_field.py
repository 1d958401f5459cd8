"""
HIGGS FIELD - Das Higgsfeld
L-connection-valued Higgs fields (E, psi) in chart form

psi is stored as (u, h) in the chart U0 of P^1: u is the unit component
(the identity) and h the End(E) (x) K(C) part with at most simple poles
on the divisor C. The chart U1 is reached by transport of h plus the
shift of the connection torsor of L.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple

import sympy as sp

from core.errors import AlgebraError, HiggsFieldError
from core.exact_kernel import (X, RatFunc, RationalFunctionMatrix, parse_rational, rational_str,
                               residue, residue_at_infinity, residue_matrix)
from core.surface_geom import BaseAtlas, LineBundleCocycle, build_torsor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolarData:
    """Residue of h at a pole of C"""
    point: sp.Rational
    residue: sp.ImmutableMatrix
    rank: int
    trace_residue: sp.Rational

    def to_dict(self) -> Dict[str, Any]:
        return {
            'point': rational_str(self.point),
            'residue': [[rational_str(e) for e in self.residue.row(i)] for i in range(self.residue.rows)],
            'rank': self.rank,
            'trace_residue': rational_str(self.trace_residue),
        }


@dataclass
class ValidationReport:
    valid: bool
    violations: List[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class HiggsField:
    """
    Higgs field on P^1 with simple poles on C

    Attributes:
        matrix: h in the chart U0
        poles: points of C (distinct rationals)
        unit: unit component u (must be the identity)
        line_bundle: cocycle of L; None means the trivial bundle
        atlas: base atlas (the standard two-chart P^1)
    """
    matrix: RationalFunctionMatrix
    poles: Tuple[sp.Rational, ...]
    unit: Optional[sp.ImmutableMatrix] = None
    line_bundle: Optional[LineBundleCocycle] = None
    atlas: BaseAtlas = field(default_factory=BaseAtlas.projective_line, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(parse_rational(p) for p in self.poles))
        unit = sp.eye(self.rank) if self.unit is None else self.unit
        object.__setattr__(self, 'unit', sp.ImmutableMatrix(unit))

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[Any]], poles: Iterable[Any] = (),
                  unit: Any = None, line_bundle: Optional[LineBundleCocycle] = None) -> 'HiggsField':
        """Builds a field from entry rows (strings like "1/x" or sympy expressions)"""
        matrix = RationalFunctionMatrix.from_rows(rows)
        if unit is not None:
            unit = sp.ImmutableMatrix([[parse_rational(e) for e in row] for row in unit])
        return cls(matrix, tuple(poles), unit, line_bundle)

    @property
    def rank(self) -> int:
        return self.matrix.n

    # ------------------------------------------------------------------
    # Charts
    # ------------------------------------------------------------------

    def chart_matrix(self, chart: str = 'U0') -> RationalFunctionMatrix:
        """
        h in the given chart; in U1 (coordinate y = 1/x):
        h_1(y) = h(1/y) * (-1/y^2) + sigma_10(y) * Id
        """
        if chart == 'U0':
            return self.matrix
        if chart != 'U1':
            raise HiggsFieldError(f"unknown chart {chart}")
        transport = self.atlas.transition('U1', 'U0')
        dphi = transport.derivative()
        moved = self.matrix.map(lambda e: e.compose(transport) * dphi)
        if self.line_bundle is None:
            return moved
        return moved.add_scalar(build_torsor(self.line_bundle).shift('U1', 'U0'))

    # ------------------------------------------------------------------
    # Polar data
    # ------------------------------------------------------------------

    def polar_part(self, p: Any) -> PolarData:
        p = parse_rational(p)
        if p not in self.poles:
            raise HiggsFieldError(f"not a pole: x={p} is not in C = {list(map(str, self.poles))}")
        R = residue_matrix(self.matrix, p)
        return PolarData(p, R, R.rank(), R.trace())

    def polar_parts(self) -> List[PolarData]:
        return [self.polar_part(p) for p in self.poles]

    def trace_residues(self) -> List[Tuple[sp.Rational, sp.Rational]]:
        tr = self.matrix.trace()
        return [(p, residue(tr, p)) for p in self.poles]

    def trace_residue_balance(self) -> Tuple[sp.Rational, sp.Rational]:
        """(sum of r_i, residue of tr h at infinity); they add up to zero"""
        total = sum((r for _, r in self.trace_residues()), sp.Integer(0))
        return total, residue_at_infinity(self.matrix.trace())

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def wedge_check(self) -> bool:
        """[u, h] = 0"""
        u = sp.Matrix(self.unit)
        commutator = self.matrix.left_multiply(u) - self.matrix * u
        return all(e.is_zero for row in commutator.entries for e in row)

    def validate(self) -> ValidationReport:
        violations = []
        n = self.rank
        if len(set(self.poles)) != len(self.poles):
            violations.append("poles of C are not distinct")
        if self.unit.shape != (n, n) or self.unit != sp.eye(n):
            violations.append("unit component is not the identity")
        elif not self.wedge_check():
            violations.append("unit component does not commute with h")

        lcm = self.matrix.denominator_lcm()
        leftover = lcm
        for p in dict.fromkeys(self.poles):
            order = RatFunc.from_polys(1, lcm).pole_order(p)
            if order > 1:
                violations.append(f"pole of order {order} at x={p}")
            linear = sp.Poly(X - p, X, domain=sp.QQ)
            for _ in range(order):
                leftover = leftover.exquo(linear)
            R = residue_matrix(self.matrix, p)
            rank = R.rank()
            if rank == 0:
                violations.append(f"h is holomorphic at the declared pole x={p} (residue rank 0)")
            elif rank > 1:
                violations.append(f"residue rank {rank} at x={p} (rank one required)")
        if leftover.degree() > 0:
            _, factors = leftover.factor_list()
            for f, k in factors:
                violations.append(f"pole outside C: factor ({f.as_expr()})^{k}")

        if self.line_bundle is not None:
            violations.extend(self.line_bundle.violations())

        report = ValidationReport(not violations, violations)
        logger.debug("validate: %d violation(s)", len(violations))
        return report

    def require_valid(self) -> 'HiggsField':
        report = self.validate()
        if not report.valid:
            raise HiggsFieldError("invalid Higgs field: " + "; ".join(report.violations))
        return self

    # ------------------------------------------------------------------
    # Gauge and L-retrivialization
    # ------------------------------------------------------------------

    def gauge_transform(self, g: Any) -> 'HiggsField':
        """h -> g h g^-1 for g invertible at every pole"""
        if not isinstance(g, RationalFunctionMatrix):
            g = RationalFunctionMatrix.from_sympy(sp.Matrix(g))
        if g.n != self.rank:
            raise HiggsFieldError(f"gauge has size {g.n}, field has rank {self.rank}")
        det = g.det()
        if det.is_zero:
            raise HiggsFieldError("gauge is not invertible (det g = 0)")
        for p in self.poles:
            try:
                value = det(p)
            except AlgebraError:
                raise HiggsFieldError(f"gauge has a pole at x={p}")
            if value == 0:
                raise HiggsFieldError(f"det g vanishes at x={p}")
        return replace(self, matrix=self.matrix.conjugate(g))

    def retrivialize_L(self, ell: Any) -> 'HiggsField':
        """
        Local change of the trivialization of L by ell: h -> h + d log(ell) Id

        Only h in U0 changes; trace residues move by residue(d log ell, p_i).
        """
        ell = RatFunc.lift(ell)
        if ell.is_zero:
            raise HiggsFieldError("retrivialization by the zero function")
        return replace(self, matrix=self.matrix.add_scalar(ell.log_derivative()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rank': self.rank,
            'poles': [rational_str(p) for p in self.poles],
            'matrix': self.matrix.to_strings(),
            'line_bundle_degree': None if self.line_bundle is None else self.line_bundle.degree,
        }
