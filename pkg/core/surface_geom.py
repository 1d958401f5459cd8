"""
SURFACE GEOMETRY - Die Poisson-Fläche
Chart models of the base curve, line bundles, the connection torsor and
the compactified Poisson surface

Exact computation happens on P^1 covered by Möbius charts. Every chart
coordinate is x_a = (a*x + b)/(c*x + d) in terms of the coordinate x of
the first chart. Charts are nodes of a networkx DiGraph; each edge (a, b)
carries the transition x_b = phi_ab(x_a).

Conventions:
- g_ab is a function of x_a with s_a = g_ab * s_b on the overlap.
- sigma_ab = d log g_ab is the coefficient of dx_a.
- A section of the torsor is a tuple (eta_a) with
  eta_a - (eta_b o phi_ab) * phi_ab' = sigma_ab.
- torsor_class = residue of sigma_01 at the point missing from the second
  chart (x = 0 for the standard pair U0 = x, U1 = 1/x).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import sympy as sp

from core.errors import AlgebraError, GeometryError
from core.exact_kernel import (ETA, MU, X, RatFunc, laurent_expand, parse_rational, rational_roots,
                               residue)

logger = logging.getLogger(__name__)

Mobius = Tuple[sp.Rational, sp.Rational, sp.Rational, sp.Rational]

FINITE = 'eta'
AT_INFINITY = 'mu'


def _mobius_inverse(m: Mobius) -> Mobius:
    a, b, c, d = m
    return (d, -b, -c, a)


def _mobius_expr(m: Mobius, var: sp.Symbol = X) -> sp.Expr:
    a, b, c, d = m
    return (a * var + b) / (c * var + d)


# =============================================================================
# Base curve
# =============================================================================

class BaseAtlas:
    """
    Chart cover of the base curve

    Only genus 0 carries exact charts; higher genus atlases are labels for
    the classifier and hold no charts.
    """

    def __init__(self, genus: int = 0, charts: Optional[Dict[str, Mobius]] = None):
        if genus < 0:
            raise GeometryError(f"genus must be >= 0, got {genus}")
        if genus > 0 and charts:
            raise GeometryError("exact charts are only supported on P^1 (genus 0)")
        self.genus = genus
        self.charts: Dict[str, Mobius] = {}
        self.graph = nx.DiGraph()
        for name, m in (charts or {}).items():
            m = tuple(parse_rational(v) for v in m)
            if m[0] * m[3] - m[1] * m[2] == 0:
                raise GeometryError(f"chart {name} is not a Möbius coordinate (ad - bc = 0)")
            self.charts[name] = m
            self.graph.add_node(name, mobius=m)
        names = list(self.charts)
        for a, b in itertools.permutations(names, 2):
            self.graph.add_edge(a, b, transition=self._transition(a, b), relation="overlap")

    @classmethod
    def projective_line(cls, centers: Iterable = ()) -> 'BaseAtlas':
        """
        Standard cover U0 (x), U1 (1/x), plus one chart 1/(x - c) per extra center
        """
        charts: Dict[str, Mobius] = {'U0': (1, 0, 0, 1), 'U1': (0, 1, 1, 0)}
        for k, c in enumerate(centers, start=2):
            c = parse_rational(c)
            charts[f'U{k}'] = (0, 1, 1, -c)
        return cls(0, charts)

    def _transition(self, a: str, b: str) -> RatFunc:
        # x_b as a function of x_a: m_b(m_a^-1(x_a))
        inner = _mobius_expr(_mobius_inverse(self.charts[a]))
        return RatFunc.from_expr(_mobius_expr(self.charts[b], inner))

    @property
    def chart_names(self) -> List[str]:
        return list(self.charts)

    def transition(self, a: str, b: str) -> RatFunc:
        if not self.graph.has_edge(a, b):
            raise GeometryError(f"charts {a} and {b} do not overlap")
        return self.graph.edges[a, b]['transition']

    def missing_point(self, a: str, b: str) -> sp.Rational:
        """The point of chart a that chart b does not cover (pole of phi_ab)"""
        poles = rational_roots(self.transition(a, b).den)
        if len(poles) != 1:
            raise GeometryError(f"charts {a} and {b} miss the same point")
        return next(iter(poles))

    def triples(self) -> List[Tuple[str, str, str]]:
        return [t for t in itertools.permutations(self.graph.nodes, 3)
                if self.graph.has_edge(t[0], t[1]) and self.graph.has_edge(t[1], t[2])
                and self.graph.has_edge(t[0], t[2])]

    def cocycle_violations(self) -> List[Tuple[str, str, str]]:
        """Triples where phi_bc o phi_ab differs from phi_ac"""
        bad = []
        for a, b, c in self.triples():
            if self.transition(b, c).compose(self.transition(a, b)) != self.transition(a, c):
                bad.append((a, b, c))
        return bad

    def transport(self, f: RatFunc, a: str, b: str) -> RatFunc:
        """A 1-form f(x_b) dx_b rewritten as a coefficient of dx_a"""
        phi = self.transition(a, b)
        return f.compose(phi) * phi.derivative()

    def to_dict(self) -> Dict:
        g = nx.DiGraph()
        for name, m in self.charts.items():
            g.add_node(name, mobius=[str(v) for v in m])
        for a, b, data in self.graph.edges(data=True):
            g.add_edge(a, b, transition=str(data['transition']))
        data = nx.node_link_data(g)
        data['genus'] = self.genus
        return data


# =============================================================================
# Line bundles and the connection torsor
# =============================================================================

@dataclass
class LineBundleCocycle:
    """Transition functions g_ab (function of x_a) and the declared degree"""
    base: BaseAtlas
    transitions: Dict[Tuple[str, str], RatFunc]
    degree: int

    @classmethod
    def of_degree(cls, degree: int, base: Optional[BaseAtlas] = None) -> 'LineBundleCocycle':
        """
        O(d) on a Möbius atlas: g_ab = (l_b / l_a)^d, with l_a the linear form
        c*x + d of chart a. On the standard pair this is g_01 = x^d.
        """
        base = base or BaseAtlas.projective_line()
        transitions = {}
        for a, b in base.graph.edges:
            _, _, ca, da = base.charts[a]
            _, _, cb, db = base.charts[b]
            ratio = RatFunc.from_expr((cb * X + db) / (ca * X + da))
            inner = RatFunc.from_expr(_mobius_expr(_mobius_inverse(base.charts[a])))
            transitions[(a, b)] = (ratio ** degree).compose(inner)
        return cls(base, transitions, degree)

    @classmethod
    def from_transition(cls, g01, degree: Optional[int] = None) -> 'LineBundleCocycle':
        """Two-chart cocycle on P^1 from g_01(x); g_10(y) = 1 / g_01(1/y)"""
        base = BaseAtlas.projective_line()
        g01 = RatFunc.lift(g01)
        if g01.is_zero:
            raise GeometryError("non-invertible transition: g_01 = 0")
        g10 = RatFunc.constant(1) / g01.compose(base.transition('U1', 'U0'))
        computed = g01.valuation(0)
        cocycle = cls(base, {('U0', 'U1'): g01, ('U1', 'U0'): g10},
                      computed if degree is None else degree)
        return cocycle

    def transition(self, a: str, b: str) -> RatFunc:
        return self.transitions[(a, b)]

    def tensor(self, other: 'LineBundleCocycle') -> 'LineBundleCocycle':
        return LineBundleCocycle(self.base, {k: g * other.transitions[k] for k, g in self.transitions.items()},
                                 self.degree + other.degree)

    def dual(self) -> 'LineBundleCocycle':
        return LineBundleCocycle(self.base, {k: RatFunc.constant(1) / g for k, g in self.transitions.items()},
                                 -self.degree)

    def cech_degree(self) -> int:
        """Valuation of g_ab at the point chart b misses (any edge gives the same)"""
        a, b = next(iter(self.transitions))
        return self.transitions[(a, b)].valuation(self.base.missing_point(a, b))

    def violations(self) -> List[str]:
        out = []
        for (a, b), g in self.transitions.items():
            if g.is_zero:
                out.append(f"g_{a}{b} vanishes identically")
                continue
            missing = self.base.missing_point(a, b)
            for poly in (g.num, g.den):
                for p in rational_roots(poly):
                    if p != missing:
                        out.append(f"g_{a}{b} has a zero or pole at {p} inside the overlap")
                roots_total = sum(rational_roots(poly).values())
                if roots_total != poly.degree():
                    out.append(f"g_{a}{b} has irrational zeros or poles inside the overlap")
            back = self.transitions.get((b, a))
            if back is not None and g * back.compose(self.base.transition(a, b)) != 1:
                out.append(f"g_{a}{b} * g_{b}{a} != 1")
        for a, b, c in self.base.triples():
            lhs = self.transitions[(a, c)]
            rhs = self.transitions[(a, b)] * self.transitions[(b, c)].compose(self.base.transition(a, b))
            if lhs != rhs:
                out.append(f"cocycle condition fails on ({a},{b},{c})")
        if not out and self.cech_degree() != self.degree:
            out.append(f"declared degree {self.degree} != Cech degree {self.cech_degree()}")
        return out


@dataclass
class TorsorSection:
    """Per-chart fiber functions eta_a(x_a) of a global section"""
    values: Dict[str, RatFunc]

    def to_strings(self) -> Dict[str, str]:
        return {k: str(v) for k, v in self.values.items()}


@dataclass
class TorsorAtlas:
    """Affine bundle of connections: shift cocycle sigma_ab = d log g_ab"""
    base: BaseAtlas
    shifts: Dict[Tuple[str, str], RatFunc]

    def shift(self, a: str, b: str) -> RatFunc:
        return self.shifts[(a, b)]

    def additivity_violations(self) -> List[Tuple[str, str, str]]:
        bad = []
        for a, b, c in self.base.triples():
            if self.shifts[(a, c)] != self.shifts[(a, b)] + self.base.transport(self.shifts[(b, c)], a, b):
                bad.append((a, b, c))
        return bad

    def holomorphy_violations(self) -> List[str]:
        out = []
        for (a, b), s in self.shifts.items():
            if s.is_zero:
                continue
            missing = self.base.missing_point(a, b)
            poles = rational_roots(s.den)
            if sum(poles.values()) != s.den.degree() or any(p != missing for p in poles):
                out.append(f"sigma_{a}{b} = {s} has a pole inside the overlap")
        return out

    def with_coboundary(self, tau: Dict[str, RatFunc]) -> 'TorsorAtlas':
        """sigma_ab + tau_a - transport(tau_b); tau_a holomorphic on chart a"""
        for name, t in tau.items():
            if not RatFunc.lift(t).is_polynomial:
                raise GeometryError(f"tau_{name} must be holomorphic (polynomial) on its chart")
        shifts = {}
        for (a, b), s in self.shifts.items():
            shifts[(a, b)] = s + RatFunc.lift(tau.get(a, 0)) - self.base.transport(RatFunc.lift(tau.get(b, 0)), a, b)
        return TorsorAtlas(self.base, shifts)


def build_torsor(L: LineBundleCocycle) -> TorsorAtlas:
    """
    Connection torsor of L: sigma_ab = (d/dx_a) log g_ab

    Raises:
        GeometryError: a transition is not invertible or the cocycle is invalid
    """
    problems = L.violations()
    if problems:
        raise GeometryError("invalid line bundle cocycle: " + "; ".join(problems))
    shifts = {}
    for key, g in L.transitions.items():
        try:
            shifts[key] = g.log_derivative()
        except AlgebraError:
            raise GeometryError(f"non-invertible transition g_{key[0]}{key[1]}")
    torsor = TorsorAtlas(L.base, shifts)
    logger.info("torsor built for degree %d over %d charts", L.degree, len(L.base.charts))
    return torsor


def _require_two_charts(T: TorsorAtlas) -> Tuple[str, str]:
    names = T.base.chart_names
    if len(names) != 2:
        raise GeometryError(f"unsupported: two-chart atlas required, got {len(names)} charts")
    return names[0], names[1]


def torsor_class(T: TorsorAtlas) -> sp.Rational:
    """Cech class of sigma in H^1(K) = residue of sigma_01 at the point U1 misses"""
    a, b = _require_two_charts(T)
    return residue(T.shift(a, b), T.base.missing_point(a, b))


def global_section(T: TorsorAtlas) -> Optional[TorsorSection]:
    """
    Splitting of the torsor, or None when the class is nonzero

    The Laurent polynomial sigma_01 is split at the missing point: the
    holomorphic part goes to chart 0, the part of order <= -2 is carried
    to chart 1; the residue term is the obstruction.
    """
    a, b = _require_two_charts(T)
    if T.holomorphy_violations():
        raise GeometryError("shift cocycle is not holomorphic on the overlap")
    sigma = T.shift(a, b)
    if sigma.is_zero:
        return TorsorSection({a: RatFunc.constant(0), b: RatFunc.constant(0)})
    if torsor_class(T) != 0:
        return None
    p = T.base.missing_point(a, b)
    t = RatFunc.from_expr(X - p)
    pole = sigma.pole_order(p)
    top = max(sigma.num.degree() - sigma.den.degree(), 0)
    jet = laurent_expand(sigma, p, top)
    eta_a = RatFunc.constant(0)
    tail = RatFunc.constant(0)
    for k in range(-pole, top + 1):
        c = jet.coefficient(k)
        if k >= 0:
            eta_a = eta_a + t ** k * c
        elif k <= -2:
            tail = tail + t ** k * c
    # transport(eta_b) = -tail  =>  eta_b = (-tail / phi') o phi^-1
    phi = T.base.transition(a, b)
    eta_b = ((-tail) / phi.derivative()).compose(T.base.transition(b, a))
    section = TorsorSection({a: eta_a, b: eta_b})
    if not eta_b.is_polynomial or eta_a - T.base.transport(eta_b, a, b) != sigma:
        raise GeometryError("splitting failed re-substitution")
    return section


# =============================================================================
# Curvature and the compactified surface
# =============================================================================

@dataclass
class CurvatureForm:
    """Coefficient of d(fiber)^dx for the tautological connection's curvature"""
    chart: str
    fiber: sp.Symbol
    coefficient: sp.Expr
    pole_order: int


def _chart_parts(chart: str) -> Tuple[str, str]:
    base, _, fiber = chart.partition(':')
    return base, (fiber or FINITE)


def curvature_form(T: TorsorAtlas, chart: str) -> CurvatureForm:
    """
    Curvature of d + eta dx on the chart; chart is "U0" or "U0:mu"

    On the first chart of the atlas the connection form is eta dx, with
    curvature coefficient 1 on d(eta)^dx. Other charts receive it through
    the Jacobian of the chart change, so a transition that fails to
    preserve d(eta)^dx shows up in the coefficient.
    """
    base, fiber = _chart_parts(chart)
    if base not in T.base.charts:
        raise GeometryError(f"unknown chart {base}")
    reference = next(iter(T.base.charts))
    coefficient = sp.diff(ETA, ETA)
    if base != reference:
        coefficient = coefficient * transition_jacobian(T, base, reference)
    if fiber == FINITE:
        return CurvatureForm(chart, ETA, sp.simplify(coefficient), 0)
    if fiber != AT_INFINITY:
        raise GeometryError(f"unknown fiber chart {fiber}")
    # eta = 1/mu: d(eta) = -mu^-2 d(mu)
    pulled = sp.simplify(coefficient.subs(ETA, 1 / MU) * sp.diff(1 / MU, MU))
    _, den = sp.fraction(sp.together(pulled))
    return CurvatureForm(chart, MU, pulled, sp.Poly(den, MU).degree())


def shifted_curvature(shift) -> sp.Expr:
    """Curvature coefficient of d + (eta + shift(x)) dx"""
    a = ETA + RatFunc.lift(shift).as_expr()
    return sp.simplify(sp.diff(a, ETA))


def transition_jacobian(T: TorsorAtlas, a: str, b: str) -> sp.Expr:
    """
    Jacobian determinant of (eta_b, x_b) in terms of (eta_a, x_a); 1 means
    d(eta)^dx is preserved by the chart change
    """
    phi = T.base.transition(a, b).as_expr()
    dphi = sp.diff(phi, X)
    eta_b = (ETA - T.shift(a, b).as_expr()) / dphi
    J = sp.Matrix([[sp.diff(eta_b, ETA), sp.diff(eta_b, X)],
                   [sp.diff(phi, ETA), sp.diff(phi, X)]])
    return sp.simplify(J.det())


@dataclass
class PoissonSurfaceAtlas:
    """Torsor charts plus mu = 1/eta charts, with bivector coefficients"""
    torsor: TorsorAtlas
    bivectors: Dict[str, sp.Expr] = field(default_factory=dict)

    def bivector(self, chart: str) -> sp.Expr:
        return self.bivectors[chart]

    def double_zero_at_infinity(self) -> bool:
        """Every mu-chart coefficient is divisible by mu^2"""
        for chart, b in self.bivectors.items():
            if _chart_parts(chart)[1] != AT_INFINITY:
                continue
            poly = sp.Poly(sp.expand(b), MU)
            if not poly.rem(sp.Poly(MU ** 2, MU)).is_zero:
                return False
        return True

    def restricted_to_infinity(self, chart: str) -> sp.Expr:
        return sp.simplify(self.bivectors[chart].subs(MU, 0))

    def finite_transition_factors(self) -> Dict[Tuple[str, str], sp.Expr]:
        """Jacobian factor of theta between finite charts (1 means consistent)"""
        return {(a, b): transition_jacobian(self.torsor, a, b) for a, b in self.torsor.shifts}


def compactify(T: TorsorAtlas) -> PoissonSurfaceAtlas:
    """
    Adds mu = 1/eta charts; theta = d_x ^ d_eta becomes -mu^2 d_x ^ d_mu
    """
    atlas = PoissonSurfaceAtlas(T)
    # bivector coefficient scales by det d(x, mu)/d(x, eta)
    factor = sp.diff(1 / ETA, ETA).subs(ETA, 1 / MU)
    for name in T.base.chart_names:
        atlas.bivectors[name] = sp.Integer(1)
        atlas.bivectors[f"{name}:{AT_INFINITY}"] = sp.simplify(factor)
    if not atlas.double_zero_at_infinity():
        raise GeometryError("bivector does not vanish to order two along infinity")
    return atlas


# =============================================================================
# Classification of Poisson ruled surfaces
# =============================================================================

SHAPE_2E_PLUS = "2E+pi*(D')"
SHAPE_E_E = "E+E'"
SHAPE_E_E_PLUS = "E+E'+pi*(D'')"
SHAPE_2E = "2E"


@dataclass
class SurfaceClass:
    case: str
    divisor_shapes: Tuple[str, ...]
    genus: int
    degree: int
    bundle: str
    admissible: Dict[str, bool]
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            'case': self.case,
            'divisor_shapes': list(self.divisor_shapes),
            'genus': self.genus,
            'degree': self.degree,
            'bundle': self.bundle,
            'admissible': dict(self.admissible),
            'notes': list(self.notes),
        }


def classify_ruled_poisson(genus: int, kind: str, degree: int) -> SurfaceClass:
    """
    Admissible Poisson divisors on P(V) over a genus-g curve

    Args:
        genus: genus of the base
        kind: "split" for V = L + O, "extension" for V = J^1(L) (x) L^*
        degree: deg L

    Raises:
        GeometryError: the combination is excluded, with the violated clause
    """
    if genus < 0:
        raise GeometryError(f"genus must be >= 0, got {genus}")
    if kind == 'split':
        d = abs(degree)
        notes = []
        if degree < 0:
            notes.append(f"normalized L + O with deg {degree} to deg {d}")
        if genus == 0:
            shapes = (SHAPE_2E_PLUS, SHAPE_E_E_PLUS)
        elif genus == 1 and d == 0:
            shapes = (SHAPE_2E_PLUS, SHAPE_E_E)
            notes.append("2E+pi*(D') needs L = K_X; E+E' is the extra degree-0 case")
        else:
            if d < 2 * genus - 2:
                raise GeometryError(
                    f"split case requires L = K_X(D) with D >= 0, i.e. deg L >= {2 * genus - 2}; got {d}")
            shapes = (SHAPE_2E_PLUS,)
            notes.append(f"L = K_X(D) with deg D = {d - (2 * genus - 2)}")
        return SurfaceClass('split', shapes, genus, d, f"L+O, deg L = {d}",
                            {s: True for s in shapes}, tuple(notes))
    if kind == 'extension':
        if genus < 1:
            raise GeometryError(
                "nontrivial extension requires g >= 1; over P^1 the extension bundle splits "
                "as O(-1)+O(-1) and the surface falls under the split case")
        if degree == 0:
            raise GeometryError("nontrivial extension requires deg L != 0 (the jet sequence splits)")
        return SurfaceClass('nontrivial-extension', (SHAPE_2E,), genus, degree,
                            "J^1(L) (x) L^*", {SHAPE_2E: True},
                            ("E is the projectivized inclusion K_X -> V",))
    raise GeometryError(f"unknown bundle kind '{kind}' (expected split or extension)")
