"""
SPECTRAL - Die Spektralkurve
Spectral curve of a Higgs field, its behaviour along infinity, the
cokernel divisor, pushdown lattices and the rank-two inverse problem

P(x, eta) = prod(x - p_i) * det(h - eta I); Q(x, mu) = mu^n P(x, 1/mu).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from core.errors import HiggsFieldError, SpectralError
from core.exact_kernel import (ETA, MU, X, BiPoly, LaurentJet, RatFunc, char_poly, laurent_expand,
                               rational_roots, rational_str)
from core.higgs_field import HiggsField
from core.normal_form import CASE1, CASE2, NormalFormResult, detect_case

logger = logging.getLogger(__name__)

NUMERIC_TOL = 1e-9

# chart over x = infinity: s = 1/x, weighted fiber coordinate zeta
S_INF = sp.Symbol('s')
ZETA = sp.Symbol('zeta')

Point = Tuple[Union[sp.Rational, complex], Union[sp.Rational, complex]]


@dataclass(frozen=True)
class SpectralCurve:
    P: BiPoly
    Q: BiPoly
    infinity_points: Tuple[Tuple[sp.Rational, str], ...]
    degree: int
    poles: Tuple[sp.Rational, ...]
    trace_residues: Tuple[sp.Rational, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'P': str(self.P),
            'Q': str(self.Q),
            'degree': self.degree,
            'infinity_points': [{'point': rational_str(p), 'type': t} for p, t in self.infinity_points],
        }


@dataclass(frozen=True)
class InfinityIntersection:
    """Q modulo mu^2 near (p, 0), compared with r*mu - (x - p)"""
    point: sp.Rational
    trace_residue: sp.Rational
    case: str
    fiber_multiplicity: int
    local_equation: str


@dataclass
class SmoothnessReport:
    smooth: bool
    witnesses: List[str] = field(default_factory=list)


@dataclass
class SpectralData:
    """
    Divisor of the cokernel section: zeros x_k of h12 with eta_k = h11(x_k)

    `zeros` lists every zero of h12 with multiplicity; those on C carry an
    infinite eta and are kept in `at_infinity`.
    """
    curve: SpectralCurve
    points: List[Point]
    exact: bool
    zeros: List[Tuple[Any, int]]
    b_factor: Optional[RatFunc]
    at_infinity: List[sp.Rational] = field(default_factory=list)
    swapped: bool = False

    @property
    def degree(self) -> int:
        return sum(k for _, k in self.zeros)

    def to_dict(self) -> Dict[str, Any]:
        def text(v):
            return rational_str(v) if isinstance(v, sp.Basic) else repr(complex(v))
        return {
            'points': [[text(x), text(e)] for x, e in self.points],
            'exact': self.exact,
            'degree': self.degree,
            'at_infinity': [rational_str(p) for p in self.at_infinity],
            'swapped': self.swapped,
        }


@dataclass
class LatticeSheaf:
    """Vanishing orders per coordinate in the normal-form trivialization"""
    name: str
    orders: Tuple[int, ...]


@dataclass
class LatticeReport:
    point: sp.Rational
    case: str
    E0: LatticeSheaf
    E00: LatticeSheaf
    Epsi: LatticeSheaf
    hom_bounds: List[List[Optional[int]]]
    end_poles: List[List[int]]
    constraints: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'point': rational_str(self.point),
            'case': self.case,
            'E_0': list(self.E0.orders),
            'E_00': list(self.E00.orders),
            'E_psi': list(self.Epsi.orders),
            'End_psi': self.end_poles,
            'constraints': self.constraints,
        }


# =============================================================================
# Construction and infinity
# =============================================================================

def _pole_product(poles: Sequence[sp.Rational]) -> sp.Expr:
    return sp.Mul(*[(X - p) for p in poles])


def spectral_curve(psi: HiggsField) -> SpectralCurve:
    """
    Raises:
        SpectralError: psi does not validate
    """
    try:
        psi.require_valid()
    except HiggsFieldError as e:
        raise SpectralError(str(e))
    n = psi.rank
    cp = char_poly(psi.matrix)
    cleared = sp.cancel(_pole_product(psi.poles) * cp.as_expr())
    P = BiPoly.from_expr(cleared, ETA)
    Q = BiPoly.from_expr(sp.expand(sp.cancel(MU ** n * P.as_expr().subs(ETA, 1 / MU))), MU)
    points = tuple((pd.point, detect_case(pd)) for pd in psi.polar_parts())
    curve = SpectralCurve(P, Q, points, n, psi.poles, tuple(r for _, r in psi.trace_residues()))
    logger.info("spectral curve P = %s (degree %d, %d infinity points)", P, n, len(points))
    return curve


def _fiber_coefficient(Q: BiPoly, k: int) -> sp.Poly:
    coeffs = Q.fiber_coefficients()
    return coeffs[k] if k < len(coeffs) else sp.Poly(0, X, domain=sp.QQ)


def infinity_intersection(S: SpectralCurve) -> List[InfinityIntersection]:
    """
    Checks Q0(x) + Q1(x) mu = 0 against r*mu - (x - p) at every pole

    Raises:
        SpectralError: the truncation does not match (non-simple pole or bad input)
    """
    Q0 = _fiber_coefficient(S.Q, 0)
    Q1 = _fiber_coefficient(S.Q, 1)
    dQ0 = Q0.diff(X)
    out = []
    for (p, case), r in zip(S.infinity_points, S.trace_residues):
        if Q0.eval(p) != 0:
            raise SpectralError(f"Q(x, 0) does not vanish at the pole x={p}")
        slope = dQ0.eval(p)
        if slope == 0:
            raise SpectralError(f"Q(x, 0) has a multiple zero at x={p}; pole is not simple")
        local_r = -Q1.eval(p) / slope
        if local_r != r:
            raise SpectralError(f"first-neighbourhood slope {local_r} at x={p} differs from trace residue {r}")
        fiber = sp.Poly(S.Q.as_expr().subs(X, p), MU, domain=sp.QQ)
        multiplicity = next((k for k, c in enumerate(reversed(fiber.all_coeffs())) if c != 0), None)
        if multiplicity is None:
            raise SpectralError(f"fibre of the curve over x={p} is the whole line")
        expected = 1 if case == CASE1 else 2
        if multiplicity != expected:
            raise SpectralError(
                f"{case} pole x={p} meets infinity with multiplicity {multiplicity}, expected {expected}")
        equation = f"{rational_str(r)}*mu - (x - {rational_str(p)})"
        out.append(InfinityIntersection(p, r, case, multiplicity, equation))
    return out


# =============================================================================
# Smoothness and genus
# =============================================================================

def classical_discriminant(S: SpectralCurve) -> sp.Poly:
    """disc_eta(P) with the usual normalization (b^2 - 4ac for n = 2)"""
    D = sp.discriminant(S.P.as_expr(), ETA)
    return sp.Poly(sp.cancel(D), X, domain=sp.QQ)


def _singular_over(P: sp.Expr, factor: sp.Expr, fiber: sp.Symbol = ETA, base: sp.Symbol = X) -> bool:
    basis = sp.groebner([factor, P, sp.diff(P, base), sp.diff(P, fiber)], fiber, base, order='lex', domain=sp.QQ)
    return not (len(basis.exprs) == 1 and basis.exprs[0] == 1)


def smoothness_check(S: SpectralCurve) -> SmoothnessReport:
    """
    Singular points of the curve in the eta and mu charts over U0, and in
    the weighted chart over x = infinity

    Candidates sit over repeated factors of the discriminant; each one is
    decided exactly by a Groebner basis of (factor, P, P_x, P_eta). Over
    x = infinity the same test runs on s^top P(1/s, zeta s^-w) with factor s.
    """
    witnesses = []
    P = S.P.as_expr()
    D = classical_discriminant(S)
    if D.is_zero:
        return SmoothnessReport(False, ["discriminant vanishes identically (non-reduced curve)"])
    _, factors = D.factor_list()
    for f, k in factors:
        if k < 2 or f.degree() <= 0:
            continue
        if not _singular_over(P, f.as_expr()):
            continue
        roots = rational_roots(f)
        if roots:
            for a in roots:
                fiber = sp.Poly(P.subs(X, a), ETA, domain=sp.QQ)
                g = fiber.gcd(sp.Poly(sp.diff(P, X).subs(X, a), ETA, domain=sp.QQ))
                g = g.gcd(sp.Poly(sp.diff(P, ETA).subs(X, a), ETA, domain=sp.QQ))
                for e in rational_roots(g) or ['(irrational)']:
                    witnesses.append(f"singular point (x, eta) = ({a}, {e})")
        else:
            witnesses.append(f"singular point over the roots of {f.as_expr()}")

    Q0 = _fiber_coefficient(S.Q, 0)
    Q1 = _fiber_coefficient(S.Q, 1)
    common = Q0.gcd(Q0.diff(X)).gcd(Q1)
    if common.degree() > 0:
        for a in rational_roots(common) or ['(irrational)']:
            witnesses.append(f"singular point (x, mu) = ({a}, 0)")
    if _singular_over(_chart_at_infinity(S), S_INF, ZETA, S_INF):
        witnesses.append("singular point over x = infinity")
    report = SmoothnessReport(not witnesses, witnesses)
    logger.debug("smoothness: %s", "smooth" if report.smooth else witnesses)
    return report


def _reducibility(S: SpectralCurve) -> Optional[str]:
    _, factors = sp.factor_list(S.P.as_expr(), X, ETA)
    fiber_factors = [f for f, _ in factors if sp.degree(f, ETA) > 0]
    if any(sp.degree(f, ETA) == 0 and sp.degree(f, X) > 0 for f, _ in factors):
        return "P has a factor depending on x only"
    if len(fiber_factors) > 1 or any(k > 1 for f, k in factors if sp.degree(f, ETA) > 0):
        return f"P factors as {sp.factor(S.P.as_expr())}"
    return None


def _weights_at_infinity(S: SpectralCurve) -> Tuple[int, int, Dict[int, int]]:
    # smallest w with eta = zeta * x^w keeping every branch finite over x = infinity
    degrees = {k: c.degree() for k, c in enumerate(S.P.fiber_coefficients()) if not c.is_zero}
    n = max(degrees)
    dn = degrees[n]
    w = max((int(sp.ceiling(sp.Rational(d - dn, n - k))) for k, d in degrees.items() if k < n), default=0)
    top = max(d + w * k for k, d in degrees.items())
    return w, top, degrees


def _chart_at_infinity(S: SpectralCurve) -> sp.Expr:
    w, top, _ = _weights_at_infinity(S)
    local = S.P.as_expr().subs({X: 1 / S_INF, ETA: ZETA * S_INF ** (-w)}, simultaneous=True)
    return sp.expand(sp.cancel(S_INF ** top * local))


def _branching_at_infinity(S: SpectralCurve, finite: int) -> int:
    n = S.degree
    if n == 2:
        return finite % 2
    w, top, degrees = _weights_at_infinity(S)
    dn = degrees[n]
    if dn + w * n != top:
        raise SpectralError("RH assumption violated: leading branch escapes at x = infinity")
    fiber = sp.Poly(_chart_at_infinity(S).subs(S_INF, 0), ZETA, domain=sp.QQ)
    if sp.discriminant(fiber.as_expr(), ZETA) == 0:
        raise SpectralError("RH assumption violated: branching over x = infinity")
    return 0


def genus(S: SpectralCurve) -> int:
    """
    Riemann-Hurwitz over P^1: 2g - 2 = -2n + (simple branch points)

    Raises:
        SpectralError: reducible curve, singular curve or non-simple branching
    """
    reason = _reducibility(S)
    if reason:
        raise SpectralError(f"reducible spectral curve: {reason}")
    if not smoothness_check(S).smooth:
        raise SpectralError("genus needs a smooth spectral curve")
    D = classical_discriminant(S)
    if D.degree() > 0 and D.gcd(D.diff(X)).degree() > 0:
        raise SpectralError("RH assumption violated: discriminant is not square-free")
    finite = max(D.degree(), 0)
    branch = finite + _branching_at_infinity(S, finite)
    twice = branch - 2 * S.degree
    if twice % 2:
        raise SpectralError(f"RH assumption violated: odd branch count {branch}")
    g = twice // 2 + 1
    if g < 0:
        raise SpectralError(f"reducible spectral curve: negative genus {g}")
    logger.info("genus %d from %d finite branch point(s)", g, finite)
    return g


def branch_points(S: SpectralCurve, tol: float = NUMERIC_TOL) -> List[Union[sp.Rational, complex]]:
    """Zeros of the discriminant: exact when rational, complex doubles otherwise (imaginary parts below tol dropped)"""
    D = classical_discriminant(S)
    if D.is_zero:
        raise SpectralError("discriminant vanishes identically")
    out: List[Union[sp.Rational, complex]] = []
    _, factors = D.factor_list()
    for f, _ in factors:
        roots = rational_roots(f)
        if roots:
            out.extend(sorted(roots))
        else:
            coeffs = [float(c) for c in f.all_coeffs()]
            zs = [complex(z.real, 0.0) if abs(z.imag) < tol else complex(z) for z in np.roots(coeffs)]
            out.extend(sorted(zs, key=lambda z: (round(z.real, 9), round(z.imag, 9))))
    return out


# =============================================================================
# Cokernel divisor and inverse problem
# =============================================================================

SWAP = sp.Matrix([[0, 1], [1, 0]])


def cokernel_divisor(psi: HiggsField) -> SpectralData:
    """
    Divisor of the cokernel section for n = 2

    Raises:
        SpectralError: h12 and h21 both vanish ("non-cyclic fixture")
    """
    if psi.rank != 2:
        raise SpectralError("cokernel_divisor is implemented for rank 2")
    curve = spectral_curve(psi)
    swapped = False
    h = psi.matrix
    if h[0, 1].is_zero:
        if h[1, 0].is_zero:
            raise SpectralError("non-cyclic fixture: h12 and h21 vanish identically")
        h = h.conjugate(SWAP)
        swapped = True
    B, A = h[0, 1], h[0, 0]
    roots = rational_roots(B.num)
    rest = B.num
    zeros: List[Tuple[Any, int]] = []
    for a, k in sorted(roots.items()):
        rest = rest.exquo(sp.Poly((X - a) ** k, X, domain=sp.QQ))
        zeros.append((a, k))
    exact = rest.degree() <= 0
    if not exact:
        for z in np.roots([complex(c) for c in rest.all_coeffs()]):
            zeros.append((complex(z), 1))

    points: List[Point] = []
    at_infinity = []
    for a, _ in zeros:
        if isinstance(a, complex):
            points.append((a, A.evaluate_numeric(a)))
        elif A.pole_order(a) > 0:
            at_infinity.append(a)
        else:
            points.append((a, A(a)))

    b_factor = None
    if exact:
        vanishing = sp.Mul(*[(X - a) ** k for a, k in zeros])
        b_factor = B / RatFunc.from_expr(vanishing)
    data = SpectralData(curve, points, exact, zeros, b_factor, at_infinity, swapped)
    for x_k, e_k in points:
        if exact and curve.P.evaluate(x_k, e_k) != 0:
            raise SpectralError(f"divisor point ({x_k}, {e_k}) is not on the curve")
    logger.info("cokernel divisor: %d point(s), degree %d", len(points), data.degree)
    return data


def _interpolation_unknowns(degree: int) -> List[sp.Symbol]:
    return [sp.Symbol(f"s{k}") for k in range(degree + 1)]


def reconstruct(S: SpectralCurve, data: SpectralData) -> HiggsField:
    """
    Rank-two field [[A, B], [C, D]] with B vanishing on the divisor,
    A interpolating eta_k at x_k and the curve's trace and determinant

    With Pi the pole product, alpha = A*Pi has degree <= #poles and is
    fixed by the divisor only up to omega*s, omega = prod(x - x_k). The
    free part s is solved so that C = -(A^2 - tr*A + det)/B has at most
    simple poles on C. Unknowns the data leaves open are set to zero and
    the candidate of lowest degree is tried first.

    Raises:
        SpectralError: numeric divisor, point off the curve, or no field with this data
    """
    if S.degree != 2:
        raise SpectralError("reconstruct is implemented for rank 2")
    if not data.exact or data.b_factor is None:
        raise SpectralError("reconstruct needs an exact (rational) divisor")
    for x_k, e_k in data.points:
        if S.P.evaluate(x_k, e_k) != 0:
            raise SpectralError(f"inconsistent divisor: ({x_k}, {e_k}) is not on the curve")
    if any(k > 1 for a, k in data.zeros if a not in data.at_infinity):
        raise SpectralError("reconstruct needs a reduced divisor")

    c0, c1, c2 = (RatFunc.from_polys(c) for c in S.P.fiber_coefficients())
    trace, det = -c1 / c2, c0 / c2
    B = data.b_factor * RatFunc.from_expr(sp.Mul(*[(X - a) ** k for a, k in data.zeros]))

    pi = _pole_product(S.poles)
    N = len(S.poles)
    tau = sp.cancel(trace.as_expr() * pi)
    delta = sp.cancel(det.as_expr() * pi ** 2)
    beta = sp.Poly(sp.cancel(B.as_expr() * pi), X)

    xs = [x for x, _ in data.points]
    lagrange = sp.Integer(0)
    for i, (x_i, e_i) in enumerate(data.points):
        basis = sp.Mul(*[(X - x_j) / (x_i - x_j) for j, x_j in enumerate(xs) if j != i])
        lagrange += basis * e_i * pi.subs(X, x_i)
    omega = sp.Mul(*[(X - x_k) for x_k in xs])
    unknowns = _interpolation_unknowns(N - len(xs))
    alpha = sp.expand(lagrange + omega * sum(s * X ** k for k, s in enumerate(unknowns)))

    F = sp.Poly(sp.expand(alpha ** 2 - tau * alpha + delta), X)
    conditions = [sp.expand(c) for c in F.rem(beta).coeffs()]
    conditions = [c for c in conditions if c != 0]
    if not conditions:
        solutions = [{}]
    elif not unknowns:
        solutions = []
    else:
        solutions = sp.solve(conditions, unknowns, dict=True)

    candidates = []
    for sol in solutions:
        value = sp.expand(alpha.subs(sol).subs({s: 0 for s in unknowns}))
        if all(c.is_Rational for c in sp.Poly(value, X).all_coeffs()):
            candidates.append(value)
    for value in sorted(set(candidates), key=lambda v: (sp.degree(v, X), sp.default_sort_key(v))):
        A = RatFunc.from_expr(value / pi)
        D = trace - A
        C = (A * D - det) / B
        try:
            psi = HiggsField.from_rows([[A, B], [C, D]], poles=S.poles)
            if spectral_curve(psi).P == S.P:
                return psi
        except SpectralError as e:
            logger.debug("reconstruction candidate A*Pi = %s rejected: %s", value, e)
    raise SpectralError("no Higgs field with simple poles has this curve and divisor")


# =============================================================================
# Pushdown lattices
# =============================================================================

def _entry_valuation(N, i: int, j: int, order: int) -> Optional[int]:
    for k in range(N.low, min(order, N.order) + 1):
        if N.coefficient(k)[i, j] != 0:
            return k
    return None


def pushdown_lattices(nf: NormalFormResult) -> LatticeReport:
    """
    E_0 = {s : h s holomorphic}, E_00 = {s in E_0 : h s in E_0}, E_psi = h(O^n)
    and the pole pattern of End_psi, from entry valuations of the normal form

    Raises:
        SpectralError: the jet is not in normal form
    """
    N = nf.normalized
    n = N.shape[0]
    if nf.case not in (CASE1, CASE2):
        raise SpectralError(f"unknown normal form case {nf.case}")
    if N.coefficient(-1).rank() != 1:
        raise SpectralError("input is not a normalized jet at a rank-one pole")
    val = [[_entry_valuation(N, i, j, nf.order) for j in range(n)] for i in range(n)]

    e0 = []
    for j in range(n):
        present = [v for v in (val[i][j] for i in range(n)) if v is not None]
        e0.append(max(0, -min(present)) if present else 0)
    e00 = []
    for j in range(n):
        needs = [e0[i] - val[i][j] for i in range(n) if val[i][j] is not None]
        e00.append(max([e0[j], 0] + needs))
    epsi = []
    for i in range(n):
        present = [v for v in val[i] if v is not None]
        epsi.append(min([0] + present))

    bounds = [[epsi[i] - e0[j] for j in range(n)] for i in range(n)]
    poles = [[min(1, max(0, -bounds[i][j])) for j in range(n)] for i in range(n)]
    constraints = []
    diagonal = [i for i in range(n) if poles[i][i]]
    if len(diagonal) == 1:
        poles[diagonal[0]][diagonal[0]] = 0
    elif len(diagonal) > 1:
        slots = ' + '.join(f"res X_{i + 1}{i + 1}" for i in diagonal)
        constraints.append(f"{slots} = 0")

    return LatticeReport(nf.point, nf.case, LatticeSheaf('E_0', tuple(e0)),
                         LatticeSheaf('E_00', tuple(e00)), LatticeSheaf('E_psi', tuple(epsi)),
                         bounds, poles, constraints)


def verify_lattices(report: LatticeReport, nf: NormalFormResult, psi: HiggsField) -> bool:
    """
    Maps the E_0 and E_00 generators back through G^-1 and checks the
    defining conditions on the original jet, including minimality
    """
    p, m = nf.point, nf.order
    H = laurent_expand(psi.matrix, p, m)
    Ginv = nf.gauge.inverse()
    n = psi.rank

    def holomorphic(jet) -> bool:
        return all(e == 0 for k in range(jet.low, 0) for e in jet.coefficient(k))

    def conditions(j: int, power: int) -> Tuple[bool, bool]:
        e = sp.zeros(n, 1)
        e[j] = 1
        s = Ginv * LaurentJet.monomial(p, e, power, m + 1)
        hs = H * s
        return holomorphic(hs), holomorphic(hs) and holomorphic(H * hs)

    for j in range(n):
        o0, o00 = report.E0.orders[j], report.E00.orders[j]
        if not conditions(j, o0)[0] or not conditions(j, o00)[1]:
            return False
        if o0 > 0 and conditions(j, o0 - 1)[0]:
            return False
        if o00 > o0 and conditions(j, o00 - 1)[1]:
            return False
    return True


# =============================================================================
# Sampling for plots
# =============================================================================

def sample_real_points(S: SpectralCurve, x_range: Tuple[float, float] = (-3.0, 3.0),
                       count: int = 61, tol: float = NUMERIC_TOL) -> List[Dict[str, float]]:
    """
    Every eta-branch of P(x, eta) = 0 over a real grid of x values (poles
    skipped), as re_eta and im_eta; imaginary parts below tol are set to 0
    """
    coeffs = S.P.fiber_coefficients()
    rows = []
    for x in np.linspace(x_range[0], x_range[1], count):
        if any(abs(x - float(p)) < NUMERIC_TOL for p in S.poles):
            continue
        values = [complex(c.eval(sp.Float(x))) for c in coeffs]
        while len(values) > 1 and abs(values[-1]) < NUMERIC_TOL:
            values.pop()
        if len(values) < 2:
            continue
        roots = np.roots(list(reversed(values)))
        etas = sorted((complex(r.real, 0.0 if abs(r.imag) < tol else r.imag) for r in roots),
                      key=lambda z: (z.real, z.imag))
        for branch, eta in enumerate(etas):
            rows.append({'x': float(x), 'branch': branch, 're_eta': eta.real, 'im_eta': eta.imag})
    return rows


def retrivialization_shift_check(psi: HiggsField, ell: Any) -> bool:
    """det(h + dlog(ell) - eta) equals det(h - eta) at eta - dlog(ell)"""
    shift = RatFunc.lift(ell).log_derivative().as_expr()
    moved = char_poly(psi.retrivialize_L(ell).matrix).as_expr()
    original = char_poly(psi.matrix).as_expr().subs(ETA, ETA - shift)
    return sp.cancel(moved - original) == 0
