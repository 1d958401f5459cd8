"""
EXACT KERNEL - Der exakte Rechenkern
Exact rational algebra for the chart models

Everything here is exact: rationals are sympy Rationals, polynomials are
sympy Polys over QQ. The only float entry points are the explicit
`*_numeric` helpers used by the complex-double path.

Conventions (fixed in this one place):
- UniPoly coefficients are listed ascending.
- discriminant_in_eta(P) is the plain Sylvester resultant Res_eta(P, dP/deta),
  no sign correction and no division by the leading coefficient.
- A LaurentJet stores coefficients for orders low..order inclusive; products
  are valid up to min(a.order + b.low, b.order + a.low).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from core.errors import AlgebraError, ResonanceError

logger = logging.getLogger(__name__)

# Chart coordinates
X = sp.Symbol('x')
ETA = sp.Symbol('eta')
MU = sp.Symbol('mu')

QQ = sp.QQ

Rational = sp.Rational
UniPoly = sp.Poly

__all__ = [
    'X', 'ETA', 'MU', 'Rational', 'UniPoly', 'RatFunc', 'BiPoly', 'LaurentJet',
    'RationalFunctionMatrix', 'CharPoly', 'parse_rational', 'rational_str',
    'uni_poly', 'ascending_coefficients', 'rational_roots', 'char_poly',
    'residue', 'residue_matrix', 'residue_at_infinity', 'residue_sum_check',
    'discriminant_in_eta', 'sylvester_solve', 'laurent_expand',
    'random_constant_gauge', 'format_bipoly',
]


# =============================================================================
# Rationals and univariate polynomials
# =============================================================================

def parse_rational(value: Any) -> sp.Rational:
    """
    Parses an exact rational from "p/q" strings, integers or Fractions

    Floats are refused so that no binary rounding leaks into exact data.
    """
    if isinstance(value, bool):
        raise AlgebraError(f"malformed rational {value!r}")
    if isinstance(value, sp.Rational):
        return value
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, float):
        raise AlgebraError(f"float {value!r} is not an exact rational; quote it as \"p/q\"")
    if isinstance(value, str):
        try:
            q = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise AlgebraError(f"malformed rational '{value}'")
        return sp.Rational(q.numerator, q.denominator)
    if isinstance(value, sp.Basic) and value.is_Rational:
        return sp.Rational(value)
    raise AlgebraError(f"malformed rational {value!r}")


def rational_str(value: Any) -> str:
    """Canonical "p/q" text of an exact rational"""
    return str(sp.Rational(value))


def uni_poly(coefficients: Sequence[Any], gen: sp.Symbol = X) -> sp.Poly:
    """Builds a UniPoly from ascending coefficients"""
    coeffs = [parse_rational(c) for c in coefficients]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return sp.Poly(list(reversed(coeffs)) or [0], gen, domain=QQ)


def ascending_coefficients(poly: sp.Poly) -> List[sp.Rational]:
    """Ascending coefficient list; empty for the zero polynomial"""
    if poly.is_zero:
        return []
    return list(reversed(poly.all_coeffs()))


def rational_roots(poly: sp.Poly) -> Dict[sp.Rational, int]:
    """Rational roots with multiplicities"""
    if poly.is_zero or poly.degree() <= 0:
        return {}
    return dict(sp.roots(poly, filter='Q'))


_TRANSFORMS = standard_transformations + (convert_xor,)


def parse_function(text: str) -> sp.Expr:
    """Parses a rational-function string in x, e.g. "(2*x - 1)/(x^2 - x)" """
    try:
        expr = parse_expr(text, local_dict={'x': X}, transformations=_TRANSFORMS)
    except (SyntaxError, TypeError, ValueError, sp.SympifyError, ZeroDivisionError) as e:
        raise AlgebraError(f"malformed expression '{text}' ({e})")
    return expr


def _as_poly(value: Any, gen: sp.Symbol = X) -> sp.Poly:
    try:
        return sp.Poly(value, gen, domain=QQ)
    except (sp.PolynomialError, sp.polys.polyerrors.CoercionFailed) as e:
        raise AlgebraError(f"not a polynomial over QQ in {gen}: {value} ({e})")


# =============================================================================
# Rational functions
# =============================================================================

@dataclass(frozen=True, eq=False)
class RatFunc:
    """
    Rational function num/den in x over QQ

    Always built through from_polys/from_expr, which enforce den monic and
    gcd(num, den) = 1. The zero function is 0/1.
    """
    num: sp.Poly
    den: sp.Poly

    @classmethod
    def from_polys(cls, num: Any, den: Any = 1) -> 'RatFunc':
        num = _as_poly(num)
        den = _as_poly(den)
        if den.is_zero:
            raise AlgebraError("zero denominator")
        if num.is_zero:
            return cls(_as_poly(0), _as_poly(1))
        g = num.gcd(den)
        num = num.exquo(g)
        den = den.exquo(g)
        lc = den.LC()
        return cls(num.quo_ground(lc), den.monic())

    @classmethod
    def from_expr(cls, expr: Any) -> 'RatFunc':
        if isinstance(expr, RatFunc):
            return expr
        if isinstance(expr, (Fraction, bool, float)):
            return cls.constant(parse_rational(expr))
        if isinstance(expr, str):
            expr = parse_function(expr)
        expr = sp.sympify(expr)
        if expr.has(sp.zoo, sp.oo, -sp.oo, sp.nan):
            raise AlgebraError(f"undefined value in {expr}")
        if expr.atoms(sp.Float):
            raise AlgebraError(f"float coefficient in {expr}")
        extra = expr.free_symbols - {X}
        if extra:
            raise AlgebraError(f"unexpected symbols {sorted(map(str, extra))} in {expr}")
        num, den = sp.fraction(sp.cancel(sp.together(expr)))
        return cls.from_polys(num, den)

    @classmethod
    def constant(cls, value: Any) -> 'RatFunc':
        return cls.from_polys(parse_rational(value) if not isinstance(value, sp.Basic) else value, 1)

    @classmethod
    def lift(cls, value: Any) -> 'RatFunc':
        if isinstance(value, RatFunc):
            return value
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return cls.constant(value)
        return cls.from_expr(value)

    # arithmetic ------------------------------------------------------------

    def __add__(self, other: Any) -> 'RatFunc':
        o = RatFunc.lift(other)
        return RatFunc.from_polys(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self) -> 'RatFunc':
        return RatFunc(-self.num, self.den)

    def __sub__(self, other: Any) -> 'RatFunc':
        return self + (-RatFunc.lift(other))

    def __rsub__(self, other: Any) -> 'RatFunc':
        return RatFunc.lift(other) - self

    def __mul__(self, other: Any) -> 'RatFunc':
        o = RatFunc.lift(other)
        return RatFunc.from_polys(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> 'RatFunc':
        o = RatFunc.lift(other)
        if o.is_zero:
            raise AlgebraError("division by the zero rational function")
        return RatFunc.from_polys(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other: Any) -> 'RatFunc':
        return RatFunc.lift(other) / self

    def __pow__(self, k: int) -> 'RatFunc':
        if k < 0:
            return RatFunc.constant(1) / (self ** (-k))
        return RatFunc.from_polys(self.num ** k, self.den ** k)

    def __eq__(self, other: Any) -> bool:
        try:
            o = RatFunc.lift(other)
        except (AlgebraError, sp.SympifyError, TypeError):
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    # queries ---------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_constant(self) -> bool:
        return self.num.degree() <= 0 and self.den.degree() == 0

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree() == 0

    def as_expr(self) -> sp.Expr:
        return self.num.as_expr() / self.den.as_expr()

    def __str__(self) -> str:
        return str(self.as_expr())

    def __call__(self, value: Any) -> sp.Rational:
        d = self.den.eval(value)
        if d == 0:
            raise AlgebraError(f"pole at x={value}")
        return self.num.eval(value) / d

    def evaluate_numeric(self, z: complex) -> complex:
        num = np.polyval([complex(c) for c in self.num.all_coeffs()], z)
        den = np.polyval([complex(c) for c in self.den.all_coeffs()], z)
        return num / den

    def derivative(self) -> 'RatFunc':
        return RatFunc.from_polys(
            self.num.diff(X) * self.den - self.num * self.den.diff(X), self.den ** 2)

    def log_derivative(self) -> 'RatFunc':
        if self.is_zero:
            raise AlgebraError("log derivative of zero")
        return self.derivative() / self

    def compose(self, inner: Any) -> 'RatFunc':
        """self(inner(x))"""
        inner_expr = RatFunc.lift(inner).as_expr()
        return RatFunc.from_expr(self.as_expr().subs(X, inner_expr))

    def pole_order(self, p: Any) -> int:
        p = parse_rational(p)
        k = 0
        d = self.den
        linear = _as_poly(X - p)
        while d.degree() > 0 and d.eval(p) == 0:
            d = d.exquo(linear)
            k += 1
        return k

    def valuation(self, p: Any) -> Optional[int]:
        """Order of vanishing at p (negative for poles); None for zero"""
        if self.is_zero:
            return None
        p = parse_rational(p)
        k = 0
        n = self.num
        linear = _as_poly(X - p)
        while n.eval(p) == 0:
            n = n.exquo(linear)
            k += 1
        return k - self.pole_order(p)


# =============================================================================
# Bivariate polynomials
# =============================================================================

def format_bipoly(poly: sp.Poly) -> str:
    """
    Deterministic text form: terms by descending fiber degree, then
    descending x degree, e.g. "x*eta^2 - eta - x"
    """
    x_gen, fiber = poly.gens
    terms = sorted(poly.as_dict().items(), key=lambda item: (-item[0][1], -item[0][0]))
    if not terms:
        return "0"
    pieces: List[str] = []
    for (i, j), c in terms:
        c = sp.Rational(c)
        parts = []
        if i:
            parts.append(str(x_gen) if i == 1 else f"{x_gen}^{i}")
        if j:
            parts.append(str(fiber) if j == 1 else f"{fiber}^{j}")
        mono = '*'.join(parts)
        a = abs(c)
        if mono:
            body = mono if a == 1 else f"{a}*{mono}"
        else:
            body = str(a)
        if not pieces:
            pieces.append(f"-{body}" if c < 0 else body)
        else:
            pieces.append(f" - {body}" if c < 0 else f" + {body}")
    return ''.join(pieces)


@dataclass(frozen=True, eq=False)
class BiPoly:
    """Polynomial in (x, fiber) over QQ; the fiber is eta or mu"""
    poly: sp.Poly

    @classmethod
    def from_expr(cls, expr: Any, fiber: sp.Symbol = ETA) -> 'BiPoly':
        expr = sp.expand(sp.sympify(expr))
        try:
            return cls(sp.Poly(expr, X, fiber, domain=QQ))
        except (sp.PolynomialError, sp.polys.polyerrors.CoercionFailed) as e:
            raise AlgebraError(f"not a polynomial in (x, {fiber}): {expr} ({e})")

    @classmethod
    def from_coefficients(cls, coefficients: Dict[Tuple[int, int], Any],
                          fiber: sp.Symbol = ETA) -> 'BiPoly':
        expr = sum((parse_rational(c) * X ** i * fiber ** j
                    for (i, j), c in coefficients.items()), sp.Integer(0))
        return cls.from_expr(expr, fiber)

    @property
    def fiber(self) -> sp.Symbol:
        return self.poly.gens[1]

    @property
    def coefficients(self) -> Dict[Tuple[int, int], sp.Rational]:
        return {k: sp.Rational(v) for k, v in self.poly.as_dict().items()}

    @property
    def degree_x(self) -> int:
        return max(0, self.poly.degree(X))

    @property
    def degree_fiber(self) -> int:
        return max(0, self.poly.degree(self.fiber))

    @property
    def is_zero(self) -> bool:
        return self.poly.is_zero

    def as_expr(self) -> sp.Expr:
        return self.poly.as_expr()

    def diff(self, var: sp.Symbol) -> 'BiPoly':
        return BiPoly(self.poly.diff(var))

    def fiber_coefficients(self) -> List[sp.Poly]:
        """Coefficients of fiber^0, fiber^1, ... as UniPolys in x"""
        coeffs = [sp.Integer(0)] * (self.degree_fiber + 1)
        for (i, j), c in self.poly.as_dict().items():
            coeffs[j] += c * X ** i
        return [_as_poly(c) for c in coeffs]

    def evaluate(self, x_value: Any, fiber_value: Any) -> sp.Rational:
        return self.as_expr().subs({X: x_value, self.fiber: fiber_value})

    def evaluate_numeric(self, x_value: complex, fiber_value: complex) -> complex:
        total = 0j
        for (i, j), c in self.poly.as_dict().items():
            total += complex(c) * x_value ** i * fiber_value ** j
        return total

    def at_x(self, x_value: Any) -> sp.Poly:
        """Fiber polynomial over a rational x"""
        return sp.Poly(self.as_expr().subs(X, x_value), self.fiber, domain=QQ)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, BiPoly):
            return NotImplemented
        return self.poly == other.poly

    def __hash__(self) -> int:
        return hash(self.poly)

    def __str__(self) -> str:
        return format_bipoly(self.poly)


# =============================================================================
# Laurent jets
# =============================================================================

def _is_zero(c: Any) -> bool:
    if isinstance(c, sp.MatrixBase):
        return all(e == 0 for e in c)
    return c == 0


def _freeze(c: Any) -> Any:
    if isinstance(c, sp.MatrixBase):
        return sp.ImmutableMatrix(c)
    return sp.sympify(c)


@dataclass(frozen=True)
class LaurentJet:
    """
    Truncated Laurent series sum_{k=low}^{order} c_k (x - base)^k

    Coefficients are Rationals or constant sympy matrices. Orders below
    `low` are zero; orders above `order` are unknown.
    """
    base: sp.Rational
    low: int
    order: int
    coefficients: Tuple[Any, ...]

    def __post_init__(self):
        if self.order < self.low:
            raise AlgebraError(f"truncation order {self.order} below lowest order {self.low}")
        if len(self.coefficients) != self.order - self.low + 1:
            raise AlgebraError("coefficient count does not match the order range")
        object.__setattr__(self, 'coefficients', tuple(_freeze(c) for c in self.coefficients))

    @property
    def is_matrix(self) -> bool:
        return isinstance(self.coefficients[0], sp.MatrixBase)

    @property
    def shape(self) -> Optional[Tuple[int, int]]:
        return self.coefficients[0].shape if self.is_matrix else None

    def zero(self) -> Any:
        if self.is_matrix:
            return sp.ImmutableMatrix.zeros(*self.shape)
        return sp.Integer(0)

    def coefficient(self, k: int) -> Any:
        if k > self.order:
            raise AlgebraError(f"insufficient jet data: order {k} requested, jet known to {self.order}")
        if k < self.low:
            return self.zero()
        return self.coefficients[k - self.low]

    def valuation(self) -> Optional[int]:
        for k in range(self.low, self.order + 1):
            if not _is_zero(self.coefficient(k)):
                return k
        return None

    def truncate(self, m: int) -> 'LaurentJet':
        if m > self.order:
            raise AlgebraError(f"insufficient jet data: cannot extend order {self.order} to {m}")
        low = min(self.low, m)
        return LaurentJet(self.base, low, m, tuple(self.coefficient(k) for k in range(low, m + 1)))

    def map(self, f) -> 'LaurentJet':
        """Applies f to every coefficient (e.g. block extraction)"""
        return LaurentJet(self.base, self.low, self.order, tuple(f(c) for c in self.coefficients))

    def shifted(self, s: int) -> 'LaurentJet':
        """Multiplies by (x - base)^s"""
        return LaurentJet(self.base, self.low + s, self.order + s, self.coefficients)

    def _check_base(self, other: 'LaurentJet'):
        if other.base != self.base:
            raise AlgebraError(f"jets at different points {self.base} and {other.base}")

    def __add__(self, other: 'LaurentJet') -> 'LaurentJet':
        self._check_base(other)
        low = min(self.low, other.low)
        order = min(self.order, other.order)
        return LaurentJet(self.base, low, order,
                          tuple(self.coefficient(k) + other.coefficient(k) for k in range(low, order + 1)))

    def __neg__(self) -> 'LaurentJet':
        return self.map(lambda c: -c)

    def __sub__(self, other: 'LaurentJet') -> 'LaurentJet':
        return self + (-other)

    def __mul__(self, other: Any) -> 'LaurentJet':
        if not isinstance(other, LaurentJet):
            return self.map(lambda c: c * other)
        self._check_base(other)
        low = self.low + other.low
        order = min(self.order + other.low, other.order + self.low)
        coeffs = []
        for k in range(low, order + 1):
            total = None
            for i in range(self.low, k - other.low + 1):
                term = self.coefficient(i) * other.coefficient(k - i)
                total = term if total is None else total + term
            coeffs.append(total)
        return LaurentJet(self.base, low, order, tuple(coeffs))

    def __rmul__(self, other: Any) -> 'LaurentJet':
        return self.map(lambda c: other * c)

    def left(self, g: Any) -> 'LaurentJet':
        """g * jet for a constant matrix g"""
        g = sp.ImmutableMatrix(g)
        return self.map(lambda c: g * c)

    def right(self, g: Any) -> 'LaurentJet':
        g = sp.ImmutableMatrix(g)
        return self.map(lambda c: c * g)

    @classmethod
    def constant(cls, base: Any, value: Any, order: int) -> 'LaurentJet':
        """Constant jet (e.g. an identity gauge) known to the given order"""
        value = _freeze(value)
        zero = sp.ImmutableMatrix.zeros(*value.shape) if isinstance(value, sp.MatrixBase) else sp.Integer(0)
        return cls(parse_rational(base), 0, order, tuple([value] + [zero] * order))

    @classmethod
    def monomial(cls, base: Any, value: Any, power: int, order: int) -> 'LaurentJet':
        """value * (x - base)^power, known to the given order"""
        value = _freeze(value)
        zero = sp.ImmutableMatrix.zeros(*value.shape) if isinstance(value, sp.MatrixBase) else sp.Integer(0)
        low = min(0, power)
        return cls(parse_rational(base), low, order,
                   tuple(value if k == power else zero for k in range(low, order + 1)))

    def inverse(self) -> 'LaurentJet':
        """Series inverse of a jet that is holomorphic and invertible at base"""
        for k in range(self.low, 0):
            if not _is_zero(self.coefficient(k)):
                raise AlgebraError("inverse needs a holomorphic jet")
        if self.order < 0:
            raise AlgebraError("insufficient jet data for an inverse")
        c0 = self.coefficient(0)
        if self.is_matrix:
            if c0.det() == 0:
                raise AlgebraError("leading coefficient is singular")
            c0_inv = c0.inv()
        else:
            if c0 == 0:
                raise AlgebraError("leading coefficient vanishes")
            c0_inv = 1 / c0
        inv = [c0_inv]
        for k in range(1, self.order + 1):
            acc = self.coefficient(1) * inv[k - 1]
            for l in range(2, k + 1):
                acc = acc + self.coefficient(l) * inv[k - l]
            inv.append(-(c0_inv * acc))
        return LaurentJet(self.base, 0, self.order, tuple(inv))

    def as_expr(self, var: sp.Symbol = X) -> Any:
        t = var - self.base
        total = None
        for k in range(self.low, self.order + 1):
            term = self.coefficient(k) * t ** k
            total = term if total is None else total + term
        return total

    def to_strings(self) -> Dict[str, Any]:
        def text(c):
            if isinstance(c, sp.MatrixBase):
                return [[rational_str(e) for e in c.row(i)] for i in range(c.rows)]
            return rational_str(c)
        return {str(k): text(self.coefficient(k)) for k in range(self.low, self.order + 1)}


def _laurent_scalar(r: RatFunc, p: sp.Rational, m: int, low: Optional[int] = None) -> LaurentJet:
    if r.is_zero:
        start = min(0, m) if low is None else low
        return LaurentJet(p, start, m, tuple(sp.Integer(0) for _ in range(start, m + 1)))
    n = ascending_coefficients(r.num.shift(p))
    d = ascending_coefficients(r.den.shift(p))
    j = next(i for i, c in enumerate(n) if c != 0)
    k = next(i for i, c in enumerate(d) if c != 0)
    n, d = n[j:], d[k:]
    val = j - k
    start = min(val, 0) if low is None else low
    if start > val:
        raise AlgebraError(f"requested lowest order {start} above the valuation {val}")
    if m < start:
        raise AlgebraError(f"truncation order {m} below the lowest order {start}")
    series: List[sp.Rational] = []
    for i in range(max(m - val + 1, 0)):
        s = n[i] if i < len(n) else sp.Integer(0)
        for l in range(1, min(i, len(d) - 1) + 1):
            s -= d[l] * series[i - l]
        series.append(s / d[0])
    coeffs = [series[o - val] if o >= val else sp.Integer(0) for o in range(start, m + 1)]
    return LaurentJet(p, start, m, tuple(coeffs))


def laurent_expand(r: Union[RatFunc, 'RationalFunctionMatrix', Any], p: Any, m: int) -> LaurentJet:
    """
    Truncated Laurent expansion of a rational function or matrix at p

    Args:
        r: RatFunc, RationalFunctionMatrix or anything RatFunc.lift accepts
        p: expansion point (exact rational)
        m: truncation order, at least minus the pole order

    Returns:
        LaurentJet with low = min(0, valuation) and order m
    """
    p = parse_rational(p)
    if isinstance(r, RationalFunctionMatrix):
        vals = [e.valuation(p) for row in r.entries for e in row]
        vals = [v for v in vals if v is not None]
        low = min([0] + vals)
        if m < low:
            raise AlgebraError(f"truncation order {m} below the lowest order {low}")
        jets = [[_laurent_scalar(e, p, m, low) for e in row] for row in r.entries]
        coeffs = []
        for o in range(low, m + 1):
            coeffs.append(sp.ImmutableMatrix([[jet.coefficient(o) for jet in row] for row in jets]))
        return LaurentJet(p, low, m, tuple(coeffs))
    return _laurent_scalar(RatFunc.lift(r), p, m)


# =============================================================================
# Residues
# =============================================================================

def residue(r: Any, p: Any) -> sp.Rational:
    """Coefficient of (x-p)^-1; zero when p is not a pole"""
    r = RatFunc.lift(r)
    p = parse_rational(p)
    if r.pole_order(p) == 0:
        return sp.Integer(0)
    return _laurent_scalar(r, p, -1).coefficient(-1)


def residue_matrix(M: 'RationalFunctionMatrix', p: Any) -> sp.ImmutableMatrix:
    return sp.ImmutableMatrix([[residue(e, p) for e in row] for row in M.entries])


def residue_at_infinity(r: Any) -> sp.Rational:
    """res_{x=oo} r dx = -res_{t=0} r(1/t) / t^2"""
    r = RatFunc.lift(r)
    at_infinity = r.compose(1 / X) * RatFunc.from_expr(-1 / X ** 2)
    return residue(at_infinity, 0)


def residue_sum_check(r: Any) -> sp.Rational:
    """
    Sum of all residues on P^1 (finite poles plus infinity); zero for any r

    Raises:
        AlgebraError: the denominator does not split over QQ
    """
    r = RatFunc.lift(r)
    poles = rational_roots(r.den)
    if sum(poles.values()) != r.den.degree():
        raise AlgebraError(f"denominator {r.den.as_expr()} does not split over QQ")
    return sum((residue(r, p) for p in poles), sp.Integer(0)) + residue_at_infinity(r)


# =============================================================================
# Matrices of rational functions
# =============================================================================

@dataclass(frozen=True, eq=False)
class RationalFunctionMatrix:
    """Square n x n matrix with RatFunc entries"""
    entries: Tuple[Tuple[RatFunc, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(RatFunc.lift(e) for e in row) for row in self.entries)
        n = len(rows)
        if n < 1 or any(len(row) != n for row in rows):
            raise AlgebraError("matrix must be square with n >= 1")
        object.__setattr__(self, 'entries', rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[Any]]) -> 'RationalFunctionMatrix':
        return cls(tuple(tuple(RatFunc.lift(e) for e in row) for row in rows))

    @classmethod
    def from_sympy(cls, M: sp.MatrixBase) -> 'RationalFunctionMatrix':
        return cls(tuple(tuple(RatFunc.from_expr(M[i, j]) for j in range(M.cols))
                         for i in range(M.rows)))

    @classmethod
    def identity(cls, n: int) -> 'RationalFunctionMatrix':
        return cls.from_sympy(sp.eye(n))

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: Tuple[int, int]) -> RatFunc:
        i, j = index
        return self.entries[i][j]

    def to_sympy(self) -> sp.Matrix:
        return sp.Matrix([[e.as_expr() for e in row] for row in self.entries])

    def trace(self) -> RatFunc:
        total = RatFunc.constant(0)
        for i in range(self.n):
            total = total + self.entries[i][i]
        return total

    def det(self) -> RatFunc:
        return RatFunc.from_expr(self.to_sympy().det(method='berkowitz'))

    def inverse(self) -> 'RationalFunctionMatrix':
        if self.det().is_zero:
            raise AlgebraError("matrix is not invertible")
        return RationalFunctionMatrix.from_sympy(self.to_sympy().inv(method='ADJ'))

    def _binary(self, other: Any, op) -> 'RationalFunctionMatrix':
        if isinstance(other, RationalFunctionMatrix):
            other = other.to_sympy()
        return RationalFunctionMatrix.from_sympy(op(self.to_sympy(), sp.Matrix(other)))

    def __add__(self, other: Any) -> 'RationalFunctionMatrix':
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other: Any) -> 'RationalFunctionMatrix':
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, other: Any) -> 'RationalFunctionMatrix':
        if isinstance(other, (RationalFunctionMatrix, sp.MatrixBase)):
            return self._binary(other, lambda a, b: a * b)
        scalar = RatFunc.lift(other).as_expr()
        return RationalFunctionMatrix.from_sympy(self.to_sympy() * scalar)

    def __rmul__(self, other: Any) -> 'RationalFunctionMatrix':
        return self * other

    def left_multiply(self, g: Any) -> 'RationalFunctionMatrix':
        """g * M for a constant sympy matrix g"""
        return RationalFunctionMatrix.from_sympy(sp.Matrix(g) * self.to_sympy())

    def conjugate(self, g: Any) -> 'RationalFunctionMatrix':
        """g M g^-1"""
        if not isinstance(g, RationalFunctionMatrix):
            g = RationalFunctionMatrix.from_sympy(sp.Matrix(g))
        return g * self * g.inverse()

    def add_scalar(self, s: Any) -> 'RationalFunctionMatrix':
        """M + s * Id"""
        s = RatFunc.lift(s)
        return RationalFunctionMatrix(tuple(
            tuple(e + s if i == j else e for j, e in enumerate(row))
            for i, row in enumerate(self.entries)))

    def map(self, f) -> 'RationalFunctionMatrix':
        return RationalFunctionMatrix(tuple(tuple(f(e) for e in row) for row in self.entries))

    def denominator_lcm(self) -> sp.Poly:
        total = _as_poly(1)
        for row in self.entries:
            for e in row:
                total = total.lcm(e.den)
        return total

    def evaluate(self, value: Any) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix([[e(value) for e in row] for row in self.entries])

    def evaluate_numeric(self, z: complex) -> np.ndarray:
        return np.array([[e.evaluate_numeric(z) for e in row] for row in self.entries], dtype=complex)

    def to_strings(self) -> List[List[str]]:
        return [[str(e) for e in row] for row in self.entries]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, RationalFunctionMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __str__(self) -> str:
        return '[' + ', '.join('[' + ', '.join(str(e) for e in row) + ']' for row in self.entries) + ']'


# =============================================================================
# Characteristic polynomials, discriminants, Sylvester
# =============================================================================

@dataclass(frozen=True)
class CharPoly:
    """det(M - eta I) as eta-polynomial with RatFunc coefficients (ascending)"""
    coefficients: Tuple[RatFunc, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def as_expr(self) -> sp.Expr:
        return sum((c.as_expr() * ETA ** k for k, c in enumerate(self.coefficients)), sp.Integer(0))

    def __str__(self) -> str:
        return str(sp.collect(sp.expand(self.as_expr()), ETA))


def char_poly(M: RationalFunctionMatrix) -> CharPoly:
    """det(M - eta*I); the eta^n coefficient is (-1)^n"""
    n = M.n
    expr = (M.to_sympy() - ETA * sp.eye(n)).det(method='berkowitz')
    num, den = sp.fraction(sp.cancel(sp.together(expr)))
    eta_poly = sp.Poly(num, ETA)
    coeffs = list(reversed(eta_poly.all_coeffs()))
    coeffs += [sp.Integer(0)] * (n + 1 - len(coeffs))
    result = tuple(RatFunc.from_expr(c / den) for c in coeffs)
    return CharPoly(result)


def discriminant_in_eta(P: BiPoly) -> sp.Poly:
    """
    Res_fiber(P, dP/dfiber) as a UniPoly in x

    Raises:
        AlgebraError: P has degree 0 in the fiber variable ("not a covering")
    """
    if P.degree_fiber <= 0:
        raise AlgebraError("not a covering: degree 0 in the fiber variable")
    f = P.as_expr()
    res = sp.resultant(f, sp.diff(f, P.fiber), P.fiber)
    return _as_poly(sp.expand(res))


def sylvester_solve(A: Any, B: Any, C: Any) -> sp.ImmutableMatrix:
    """
    Unique X with A X - X B = C

    Raises:
        ResonanceError: A and B share an eigenvalue (resultant of the
            characteristic polynomials vanishes)
    """
    A, B, C = sp.Matrix(A), sp.Matrix(B), sp.Matrix(C)
    p, q = A.rows, B.rows
    if A.cols != p or B.cols != q or C.shape != (p, q):
        raise AlgebraError(f"shape mismatch: A {A.shape}, B {B.shape}, C {C.shape}")
    # charpoly returns a PurePoly on a fresh generator; both are put on lam
    lam = sp.Dummy('lam')
    if sp.resultant(A.charpoly().as_expr(lam), B.charpoly().as_expr(lam), lam) == 0:
        raise ResonanceError()
    K = sp.zeros(p * q, p * q)
    for i in range(p):
        for j in range(q):
            row = i * q + j
            for k in range(p):
                K[row, k * q + j] += A[i, k]
            for k in range(q):
                K[row, i * q + k] -= B[k, j]
    rhs = sp.Matrix([C[i, j] for i in range(p) for j in range(q)])
    try:
        sol = K.LUsolve(rhs)
    except ValueError as e:
        # sympy signals a singular system with NonInvertibleMatrixError, a ValueError
        raise ResonanceError(f"resonant Sylvester operator ({e})")
    logger.debug("sylvester solve %dx%d done", p, q)
    return sp.ImmutableMatrix(p, q, list(sol))


def random_constant_gauge(n: int, rng: np.random.Generator, spread: int = 3) -> sp.ImmutableMatrix:
    """Random invertible integer matrix with entries in [-spread, spread]"""
    while True:
        g = sp.Matrix(n, n, [int(v) for v in rng.integers(-spread, spread + 1, size=n * n)])
        if g.det() != 0:
            return sp.ImmutableMatrix(g)
