"""
NORMAL FORM - Die Normalform am Pol
Jet-order gauge reduction of h near a simple rank-one pole

Gauge convention: N = G H G^-1, with H the Laurent jet of h at p and G a
holomorphic jet invertible at p. The gauge is carried to order m + 1 so
that N is known to order m.

Case1 (tr R != 0): N is block diagonal, a(t) in the (1,1) slot with
a_{-1} = tr R, a holomorphic block A(t) below.

Case2 (tr R = 0): N has the 2x2 polar block [[0, a(t)], [1/t, b(t)]],
block diagonal against a holomorphic A(t) when n >= 3.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import sympy as sp

from core.errors import AlgebraError, NormalFormError, ResonanceError
from core.exact_kernel import LaurentJet, laurent_expand, parse_rational, rational_str, sylvester_solve
from core.higgs_field import HiggsField, PolarData

logger = logging.getLogger(__name__)

CASE1 = 'Case1'
CASE2 = 'Case2'


@dataclass(frozen=True)
class NormalFormResult:
    case: str
    point: sp.Rational
    order: int
    gauge: LaurentJet
    normalized: LaurentJet
    leading: Dict[str, sp.Rational] = field(default_factory=dict)

    def block_jet(self, rows: slice, cols: slice, low: Optional[int] = None) -> List[Any]:
        start = self.normalized.low if low is None else low
        return [self.normalized.coefficient(k)[rows, cols] for k in range(start, self.order + 1)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'case': self.case,
            'point': rational_str(self.point),
            'order': self.order,
            'leading': {k: rational_str(v) for k, v in self.leading.items()},
            'normalized': self.normalized.to_strings(),
            'gauge': self.gauge.to_strings(),
        }


def detect_case(pd: PolarData) -> str:
    if pd.rank != 1:
        raise NormalFormError(f"residue at x={pd.point} has rank {pd.rank}; rank one required")
    return CASE1 if pd.trace_residue != 0 else CASE2


# -----------------------------------------------------------------------------
# jet helpers
# -----------------------------------------------------------------------------

def _conjugate(G: LaurentJet, H: LaurentJet) -> LaurentJet:
    return G * H * G.inverse()


def _elementary(p: sp.Rational, T: sp.Matrix, power: int, order: int) -> LaurentJet:
    """I + T t^power"""
    n = T.rows
    return LaurentJet.constant(p, sp.eye(n), order) + LaurentJet.monomial(p, T, power, order)


def _block_diag(p: sp.Rational, J: LaurentJet, n: int) -> LaurentJet:
    """diag(J, Id) for a 2x2 holomorphic jet J"""
    coeffs = []
    for k in range(0, J.order + 1):
        M = sp.zeros(n, n) if k else sp.eye(n)
        M[0:2, 0:2] = J.coefficient(k)
        coeffs.append(M)
    return LaurentJet(p, 0, J.order, tuple(coeffs))


def _image_vector(R: sp.Matrix) -> sp.Matrix:
    """First nonzero column of R, scaled so its first nonzero coordinate is 1"""
    for j in range(R.cols):
        col = R[:, j]
        if any(e != 0 for e in col):
            lead = next(e for e in col if e != 0)
            return col / lead
    raise NormalFormError("residue vanishes")


def _first_cyclic_vector(R: sp.Matrix) -> sp.Matrix:
    for i in range(R.cols):
        e = sp.eye(R.cols)[:, i]
        if any(v != 0 for v in R * e):
            return e
    raise NormalFormError("residue vanishes")


def _holomorphic_jet(psi: HiggsField, p: sp.Rational, m: int) -> LaurentJet:
    H = laurent_expand(psi.matrix, p, m)
    if H.low < -1:
        raise NormalFormError(f"pole of order {-H.low} at x={p}; simple poles only")
    return H


def _require_case(psi: HiggsField, p: sp.Rational, case: str) -> PolarData:
    pd = psi.polar_part(p)
    found = detect_case(pd)
    if found != case:
        raise NormalFormError(f"pole x={p} is {found}, not {case}")
    return pd


# -----------------------------------------------------------------------------
# Case1
# -----------------------------------------------------------------------------

def reduce_case1(psi: HiggsField, p: Any, m: int) -> NormalFormResult:
    """
    Block-diagonalizes H at a pole with tr R = r != 0

    The residue is diagonalized to diag(r, 0, ..., 0); the off-diagonal
    blocks at order k - 1 are then removed by I + T t^k, where T solves
    r b = M12 and -c r = M21.

    Raises:
        ResonanceError: a Sylvester step has no unique solution (with the order)
    """
    p = parse_rational(p)
    pd = _require_case(psi, p, CASE1)
    n, r = psi.rank, pd.trace_residue
    H = _holomorphic_jet(psi, p, m)

    R = sp.Matrix(pd.residue)
    P0 = sp.Matrix.hstack(_image_vector(R), *R.nullspace())
    G = LaurentJet.constant(p, P0.inv(), m + 1)
    N = _conjugate(G, H)

    if n > 1:
        rest = sp.zeros(n - 1, n - 1)
        for k in range(1, m + 2):
            M = N.coefficient(k - 1)
            try:
                b = sylvester_solve([[r]], rest, M[0:1, 1:])
                c = sylvester_solve(rest, [[r]], M[1:, 0:1])
            except ResonanceError:
                raise ResonanceError(order=k - 1)
            T = sp.zeros(n, n)
            T[0:1, 1:] = b
            T[1:, 0:1] = c
            E = _elementary(p, T, k, m + 1)
            G = E * G
            N = _conjugate(E, N)
            logger.debug("case1 x=%s: off-diagonal order %d removed", p, k - 1)

    leading = {'a_-1': N.coefficient(-1)[0, 0]}
    if m >= 0:
        leading['a_0'] = N.coefficient(0)[0, 0]
    result = NormalFormResult(CASE1, p, m, G, N, leading)
    logger.info("case1 normal form at x=%s to order %d (a_-1 = %s)", p, m, r)
    return result


# -----------------------------------------------------------------------------
# Case2
# -----------------------------------------------------------------------------

def _split_polar_block(N: LaurentJet, G: LaurentJet, p: sp.Rational, m: int) -> Tuple[LaurentJet, LaurentJet]:
    """
    Separates the 2x2 polar block from the rest when R = E21

    Gauges commuting with E21 clear row 1 of the upper-right block and
    column 2 of the lower-left block through a0 = N_0[0, 1]; gauges at the
    next power clear row 2 and column 1 through [T, E21].
    """
    n = N.shape[0]
    a0 = N.coefficient(0)[0, 1]
    if a0 == 0:
        raise NormalFormError("non-generic Case2 (branch degenerates): a_0 = 0")
    for j in range(0, m + 1):
        C = N.coefficient(j)
        T = sp.zeros(n, n)
        T[1, 2:] = C[0, 2:] / a0
        E = _elementary(p, T, j, m + 1)
        G, N = E * G, _conjugate(E, N)

        C = N.coefficient(j)
        T = sp.zeros(n, n)
        T[2:, 0] = -C[2:, 1] / a0
        E = _elementary(p, T, j, m + 1)
        G, N = E * G, _conjugate(E, N)

        C = N.coefficient(j)
        T = sp.zeros(n, n)
        T[0, 2:] = C[1, 2:]
        T[2:, 1] = -C[2:, 0]
        E = _elementary(p, T, j + 1, m + 1)
        G, N = E * G, _conjugate(E, N)
        logger.debug("case2 x=%s: polar block split at order %d", p, j)
    return G, N


def _cyclic_frame(B: LaurentJet, w0: sp.Matrix) -> LaurentJet:
    """Columns w0 and t*B*w0; invertible at p when R w0 != 0"""
    tB = B.shifted(1)
    coeffs = []
    for k in range(0, tB.order + 1):
        first = w0 if k == 0 else sp.zeros(2, 1)
        coeffs.append(sp.Matrix.hstack(first, tB.coefficient(k) * w0))
    return LaurentJet(B.base, 0, tB.order, tuple(coeffs))


def reduce_case2(psi: HiggsField, p: Any, m: int) -> NormalFormResult:
    """
    Brings H at a nilpotent rank-one pole to [[0, a], [1/t, b]] (+ A(t))

    Raises:
        NormalFormError: a_0 = 0 ("non-generic Case2 (branch degenerates)")
    """
    p = parse_rational(p)
    pd = _require_case(psi, p, CASE2)
    n = psi.rank
    if n < 2:
        raise NormalFormError("Case2 needs rank >= 2")
    H = _holomorphic_jet(psi, p, m)
    R = sp.Matrix(pd.residue)
    w0 = _first_cyclic_vector(R)

    if n == 2:
        G = LaurentJet.constant(p, sp.eye(2), m + 1)
        N = H
    else:
        v = R * w0
        basis = [w0, v]
        for k in R.nullspace():
            if sp.Matrix.hstack(*basis, k).rank() == len(basis) + 1:
                basis.append(k)
        P0 = sp.Matrix.hstack(*basis)
        G = LaurentJet.constant(p, P0.inv(), m + 1)
        N = _conjugate(G, H)
        G, N = _split_polar_block(N, G, p, m)
        w0 = sp.Matrix([1, 0])

    B = N.map(lambda c: c[0:2, 0:2])
    F = _cyclic_frame(B, w0)
    Finv = F.inverse()
    if n == 2:
        G, N = Finv * G, Finv * (N * F)
    else:
        full = _block_diag(p, Finv, n)
        G, N = full * G, _conjugate(full, N)

    a0 = N.coefficient(0)[0, 1]
    if a0 == 0:
        raise NormalFormError("non-generic Case2 (branch degenerates): a_0 = 0")
    leading = {'a_0': a0, 'b_0': N.coefficient(0)[1, 1]}
    logger.info("case2 normal form at x=%s to order %d (a_0 = %s)", p, m, a0)
    return NormalFormResult(CASE2, p, m, G, N, leading)


def reduce(psi: HiggsField, p: Any, m: int) -> NormalFormResult:
    p = parse_rational(p)
    if detect_case(psi.polar_part(p)) == CASE1:
        return reduce_case1(psi, p, m)
    return reduce_case2(psi, p, m)


# -----------------------------------------------------------------------------
# Verification and invariants
# -----------------------------------------------------------------------------

def _shape_ok(result: NormalFormResult, N: LaurentJet) -> bool:
    n = N.shape[0]
    split = 1 if result.case == CASE1 else 2
    for k in range(N.low, N.order + 1):
        C = N.coefficient(k)
        if any(e != 0 for e in C[0:split, split:]) or any(e != 0 for e in C[split:, 0:split]):
            return False
        if k < 0 and any(e != 0 for e in C[split:, split:]):
            return False
        if result.case == CASE2:
            if C[0, 0] != 0 or C[1, 0] != (1 if k == -1 else 0):
                return False
            if k < 0 and (C[0, 1] != 0 or C[1, 1] != 0):
                return False
    return True


def verify_normal_form(result: NormalFormResult, psi: HiggsField, p: Any, m: int) -> bool:
    """
    Re-conjugates the input jet by the stored gauge and compares

    Raises:
        NormalFormError: m exceeds the computed order ("insufficient jet data")
    """
    p = parse_rational(p)
    if m > result.order:
        raise NormalFormError(f"insufficient jet data: order {m} requested, reduction computed to {result.order}")
    if p != result.point:
        return False
    H = laurent_expand(psi.matrix, p, m)
    try:
        N = _conjugate(result.gauge.truncate(m + 1), H)
    except AlgebraError:
        return False
    expected = result.normalized.truncate(m)
    for k in range(min(N.low, expected.low), m + 1):
        if N.coefficient(k) != expected.coefficient(k):
            return False
    return _shape_ok(result, expected)


def _power_sum_jets(A: LaurentJet, count: int) -> List[List[sp.Rational]]:
    sums = []
    P = A
    for _ in range(count):
        sums.append([P.coefficient(k).trace() for k in range(0, P.order + 1)])
        P = P * A
    return sums


def gauge_invariants(result: NormalFormResult) -> Dict[str, Any]:
    """
    Jet data that does not depend on the chosen kernel basis

    Case1: the a-jet and the power sums tr A^k of the holomorphic block.
    Case2: the a- and b-jets, plus tr A^k when n >= 3.
    """
    N = result.normalized
    n = N.shape[0]
    split = 1 if result.case == CASE1 else 2
    out: Dict[str, Any] = {'case': result.case}
    if result.case == CASE1:
        out['a'] = [N.coefficient(k)[0, 0] for k in range(-1, result.order + 1)]
    else:
        out['a'] = [N.coefficient(k)[0, 1] for k in range(0, result.order + 1)]
        out['b'] = [N.coefficient(k)[1, 1] for k in range(0, result.order + 1)]
    if n > split:
        A = N.map(lambda c: c[split:, split:]).truncate(result.order)
        A = LaurentJet(A.base, 0, A.order, tuple(A.coefficient(k) for k in range(0, A.order + 1)))
        out['A_power_sums'] = _power_sum_jets(A, n - split)
    return out
