"""
POISSON DYNAMICS - Die Poisson-Dynamik
Residue phase space of a Higgs field in a fixed trivialization

Coordinates are the entries a{i}_{jk} of the residue matrices A_i at the
fixed poles p_i; h(x) = A_0 + sum_i A_i / (x - p_i) with A_0 the constant
term. Each A_i carries the gl(n) Lie-Poisson bracket

    {a_ab, a_cd} = delta_bc a_ad - delta_ad a_cb

so {F, G} = sum_i <[dF/dA_i, dG/dA_i], A_i> (entrywise pairing), and the
flow of H is dA_i/dt = [A_i, (dH/dA_i)^T]. The constant term is fixed or,
on request, symbolic with a trivial bracket.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from core.config import ToolkitConfig
from core.errors import DynamicsError, HiggsFieldError
from core.exact_kernel import ETA, X, RationalFunctionMatrix, parse_rational, rational_str, residue_matrix
from core.higgs_field import HiggsField
from core.spectral import SWAP, SpectralData, cokernel_divisor, spectral_curve

logger = logging.getLogger(__name__)

# Sign convention: {x_k, eta_k} = ORIENTATION under the bracket above.
# -1 is what the gl(n) bracket yields for the divisor coordinates; the
# opposite sign would need the bracket negated throughout.
ORIENTATION = -1
ROUNDOFF_FLOOR = 1e-13


# =============================================================================
# Phase points and the symbolic phase space
# =============================================================================

@dataclass(frozen=True)
class PhasePoint:
    """Exact chart data of h: poles, residues and the constant term"""
    poles: Tuple[sp.Rational, ...]
    residues: Tuple[sp.ImmutableMatrix, ...]
    constant: sp.ImmutableMatrix

    def __post_init__(self):
        if len(self.poles) != len(self.residues):
            raise DynamicsError(f"{len(self.poles)} poles but {len(self.residues)} residues")
        n = self.constant.rows
        for p, A in zip(self.poles, self.residues):
            if A.shape != (n, n):
                raise DynamicsError(f"residue at x={p} has shape {A.shape}, expected {(n, n)}")

    @classmethod
    def from_field(cls, psi: HiggsField) -> 'PhasePoint':
        """
        Raises:
            DynamicsError: invalid field, or h has a polynomial part of degree >= 1
        """
        try:
            psi.require_valid()
        except HiggsFieldError as e:
            raise DynamicsError(str(e))
        residues = tuple(residue_matrix(psi.matrix, p) for p in psi.poles)
        polar = sum((R / (X - p) for p, R in zip(psi.poles, residues)), sp.zeros(psi.rank, psi.rank))
        rest = psi.matrix - RationalFunctionMatrix.from_sympy(sp.Matrix(polar))
        for row in rest.entries:
            for e in row:
                if not e.is_constant:
                    raise DynamicsError(f"polynomial part {e} lies outside the phase-space model")
        constant = sp.ImmutableMatrix([[e.as_expr() for e in row] for row in rest.entries])
        return cls(psi.poles, residues, constant)

    @property
    def rank(self) -> int:
        return self.constant.rows

    @property
    def rank_one(self) -> Tuple[bool, ...]:
        return tuple(A.rank() == 1 for A in self.residues)

    def to_field(self) -> HiggsField:
        h = sp.Matrix(self.constant) + sum((R / (X - p) for p, R in zip(self.poles, self.residues)),
                                           sp.zeros(self.rank, self.rank))
        return HiggsField.from_rows(h.tolist(), poles=self.poles)

    def to_dict(self) -> Dict[str, Any]:
        def rows(M):
            return [[rational_str(e) for e in M.row(i)] for i in range(M.rows)]
        return {
            'poles': [rational_str(p) for p in self.poles],
            'residues': [rows(A) for A in self.residues],
            'constant': rows(self.constant),
            'rank_one': list(self.rank_one),
        }


class PhaseSpace:
    """
    Symbols for the residue coordinates at fixed poles and rank

    Symbol a{i}_{jk} is entry (j, k) of A_i, all indices from 1; the
    symbolic constant term (dynamic_constant=True) uses c_{jk}.
    """

    def __init__(self, poles: Sequence[Any], rank: int, constant: Any = None,
                 dynamic_constant: bool = False):
        if rank < 1:
            raise DynamicsError(f"rank must be positive, got {rank}")
        self.poles = tuple(parse_rational(p) for p in poles)
        if len(set(self.poles)) != len(self.poles):
            raise DynamicsError("poles must be distinct")
        self.rank = rank
        self.dynamic_constant = dynamic_constant
        self.residues = [sp.Matrix(rank, rank, lambda j, k, i=i: sp.Symbol(f"a{i + 1}_{j + 1}{k + 1}"))
                         for i in range(len(self.poles))]
        if dynamic_constant:
            self.constant = sp.Matrix(rank, rank, lambda j, k: sp.Symbol(f"c_{j + 1}{k + 1}"))
        elif constant is None:
            self.constant = sp.zeros(rank, rank)
        else:
            self.constant = sp.Matrix(constant)
        self.coordinates: List[sp.Symbol] = [s for A in self.residues for s in A]

    @classmethod
    def for_point(cls, pt: PhasePoint, dynamic_constant: bool = False) -> 'PhaseSpace':
        return cls(pt.poles, pt.rank, None if dynamic_constant else pt.constant, dynamic_constant)

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def symbol_table(self) -> Dict[str, Any]:
        table: Dict[str, Any] = {s.name: s for s in self.coordinates}
        if self.dynamic_constant:
            table.update({s.name: s for s in self.constant})
        for i, A in enumerate(self.residues, 1):
            table[f"tr{i}"] = A.trace()
            table[f"det{i}"] = A.det(method='berkowitz')
        return table

    def parse(self, text: str) -> sp.Expr:
        """Observable from text such as "a1_12" or "tr1 + 2*det2" """
        table = self.symbol_table()
        try:
            expr = sp.sympify(text, locals=table)
        except (sp.SympifyError, SyntaxError, TypeError) as e:
            raise DynamicsError(f"cannot parse observable {text!r}: {e}")
        known = set(s for s in table.values() if isinstance(s, sp.Symbol))
        unknown = expr.free_symbols - known
        if unknown:
            raise DynamicsError(f"unknown coordinate(s) in {text!r}: {sorted(map(str, unknown))}")
        return sp.expand(expr)

    def gradients(self, F: sp.Expr) -> List[sp.Matrix]:
        """dF/dA_i as matrices with entry (a, b) = dF/da_ab"""
        return [A.applyfunc(lambda s: sp.diff(F, s)) for A in self.residues]

    def substitution(self, pt: PhasePoint) -> Dict[sp.Symbol, sp.Rational]:
        sub = {}
        for A, R in zip(self.residues, pt.residues):
            sub.update({s: v for s, v in zip(A, R)})
        sub.update(self.constant_substitution(pt))
        return sub

    def constant_substitution(self, pt: PhasePoint) -> Dict[sp.Symbol, sp.Rational]:
        if not self.dynamic_constant:
            return {}
        return {s: v for s, v in zip(self.constant, pt.constant)}

    def vector(self, pt: PhasePoint) -> np.ndarray:
        return np.array([complex(v) for R in pt.residues for v in R], dtype=complex)

    def blocks(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(len(self.poles), self.rank, self.rank)


def _pairing(dF: Sequence[sp.Matrix], dG: Sequence[sp.Matrix], residues: Sequence[sp.Matrix]) -> sp.Expr:
    total = sp.Integer(0)
    for F, G, A in zip(dF, dG, residues):
        C = F * G - G * F
        total += sum((c * a for c, a in zip(C, A)), sp.Integer(0))
    return sp.expand(total)


def lie_poisson_bracket(F: sp.Expr, G: sp.Expr, space: PhaseSpace,
                        pt: Optional[PhasePoint] = None) -> sp.Expr:
    """
    {F, G} as an exact polynomial, or its value at pt

    Summands of different poles never interact; the constant term has a
    trivial bracket.
    """
    value = _pairing(space.gradients(F), space.gradients(G), space.residues)
    if pt is not None:
        return value.xreplace(space.substitution(pt))
    return value


# =============================================================================
# Spectral Hamiltonians
# =============================================================================

@dataclass
class HamiltonianSet:
    """
    Coefficients of the pole-cleared spectral polynomial as polynomials in
    the residue entries

    coefficients[(j, k)] multiplies x^j eta^k. The full clearing
    prod(x - p_i)^n det(h - eta) is divided by prod(x - p_i)^(n-1);
    `constraints` holds the remainder, which vanishes on rank-one residues.
    """
    space: PhaseSpace
    coefficients: Dict[Tuple[int, int], sp.Expr]
    members: Dict[str, sp.Expr]
    constraints: Dict[Tuple[int, int], sp.Expr] = field(default_factory=dict)

    def generic(self) -> sp.Expr:
        """Sum of all members (a Hamiltonian with every coefficient switched on)"""
        return sp.expand(sum(self.members.values(), sp.Integer(0)))

    def evaluate(self, pt: PhasePoint) -> Dict[Tuple[int, int], sp.Rational]:
        sub = self.space.substitution(pt)
        values = {key: sp.expand(expr.xreplace(sub)) for key, expr in self.coefficients.items()}
        return {key: v for key, v in values.items() if v != 0}

    def matches_curve(self, pt: PhasePoint) -> bool:
        """H(pt) reproduces the spectral_curve coefficients of the field at pt"""
        return self.evaluate(pt) == spectral_curve(pt.to_field()).P.coefficients

    def to_dict(self) -> Dict[str, Any]:
        return {
            'members': {name: str(expr) for name, expr in self.members.items()},
            'constraints': {f"{j},{k}": str(e) for (j, k), e in self.constraints.items()},
        }


def hamiltonians(space: PhaseSpace) -> HamiltonianSet:
    n, poles = space.rank, space.poles
    pole_product = sp.Mul(*[(X - p) for p in poles])
    partial = [sp.Mul(*[(X - q) for q in poles if q != p]) for p in poles]
    M = sp.Matrix(n, n, lambda j, k: sp.expand(
        pole_product * space.constant[j, k]
        + sum((A[j, k] * part for A, part in zip(space.residues, partial)), sp.Integer(0))
        - (ETA * pole_product if j == k else 0)))
    W = sp.Poly(M.det(method='berkowitz'), X, ETA)
    by_fiber: Dict[int, Dict[int, sp.Expr]] = {}
    for (i, k), c in W.as_dict().items():
        by_fiber.setdefault(k, {})[i] = c
    den = sp.Poly(pole_product ** (n - 1), X)

    coefficients: Dict[Tuple[int, int], sp.Expr] = {}
    constraints: Dict[Tuple[int, int], sp.Expr] = {}
    for k, column in sorted(by_fiber.items()):
        num = sp.Poly(sum((c * X ** i for i, c in column.items()), sp.Integer(0)), X)
        quot, rem = num.div(den, auto=False)
        for (j,), c in quot.terms():
            c = sp.expand(c)
            if c != 0:
                coefficients[(j, k)] = c
        for (j,), c in rem.terms():
            c = sp.expand(c)
            if c != 0:
                constraints[(j, k)] = c

    if n == 1:
        members = {f"r_{i + 1}": A[0, 0] for i, A in enumerate(space.residues)}
    else:
        members = {f"H_{j}_{k}": c for (j, k), c in sorted(coefficients.items())
                   if c.free_symbols & set(space.coordinates)}
    logger.info("%d spectral Hamiltonian(s) for rank %d with %d pole(s)", len(members), n, len(poles))
    return HamiltonianSet(space, coefficients, members, constraints)


def casimirs(space: PhaseSpace) -> Dict[str, sp.Expr]:
    """Trace residues r_i = tr A_i plus the orbit invariants tr A_i^k, 2 <= k <= n, and det A_i"""
    out: Dict[str, sp.Expr] = {}
    for i, A in enumerate(space.residues, 1):
        out[f"tr{i}"] = A.trace()
        power = A
        for k in range(2, space.rank + 1):
            power = power * A
            out[f"tr{i}^{k}"] = sp.expand(power.trace())
        if space.rank > 1:
            out[f"det{i}"] = sp.expand(A.det(method='berkowitz'))
    return out


# =============================================================================
# Bracket reports
# =============================================================================

@dataclass
class BracketEntry:
    left: str
    right: str
    value: Any
    expected: Any = 0

    def deviation(self) -> float:
        if isinstance(self.value, sp.Basic):
            return 0.0 if sp.expand(self.value - self.expected) == 0 else math.inf
        return float(abs(complex(self.value) - complex(self.expected)))


@dataclass
class BracketReport:
    kind: str
    entries: List[BracketEntry] = field(default_factory=list)
    tolerance: float = 0.0
    matrix: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)

    @property
    def failures(self) -> List[BracketEntry]:
        return [e for e in self.entries if e.deviation() > self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def max_deviation(self) -> float:
        return max((e.deviation() for e in self.entries), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        def text(v):
            if isinstance(v, sp.Basic):
                return str(v)
            z = complex(v)
            return z.real if abs(z.imag) < ROUNDOFF_FLOOR else [z.real, z.imag]
        data = {
            'kind': self.kind,
            'passed': self.passed,
            'pairs': len(self.entries),
            'failures': [{'left': e.left, 'right': e.right, 'value': text(e.value)} for e in self.failures],
            'notes': self.notes,
        }
        if self.matrix is not None:
            data['matrix'] = [[text(v) for v in row] for row in self.matrix]
            data['tolerance'] = self.tolerance
            data['max_deviation'] = self.max_deviation()
        return data


def _bracket_table(space: PhaseSpace, left: Dict[str, sp.Expr], right: Dict[str, sp.Expr],
                   symmetric: bool) -> List[BracketEntry]:
    grads = {name: space.gradients(expr) for name, expr in {**left, **right}.items()}
    entries = []
    names_l, names_r = list(left), list(right)
    for a, name_a in enumerate(names_l):
        start = a + 1 if symmetric else 0
        for name_b in names_r[start:]:
            value = _pairing(grads[name_a], grads[name_b], space.residues)
            logger.debug("{%s, %s} = %s", name_a, name_b, value)
            entries.append(BracketEntry(name_a, name_b, value))
    return entries


def involution_check(H: HamiltonianSet, extra: Optional[Dict[str, sp.Expr]] = None) -> BracketReport:
    """
    Every pairwise bracket of the members (plus injected observables),
    computed symbolically; nonzero pairs are reported as failures
    """
    observables = dict(H.members)
    observables.update(extra or {})
    report = BracketReport('involution', _bracket_table(H.space, observables, observables, symmetric=True))
    if len(observables) < 2:
        report.notes.append("fewer than two observables: involution holds vacuously")
    logger.info("involution: %d pair(s), %d failure(s)", len(report.entries), len(report.failures))
    return report


def leaf_and_casimir_check(H: HamiltonianSet,
                           extra_invariants: Optional[Dict[str, sp.Expr]] = None) -> BracketReport:
    """
    Brackets the trace residues and orbit invariants (plus candidate
    invariants) against every member

    A vanishing {r_i, H} for all members means the intersection data
    r_i * mu - (x - p_i) stays fixed along every spectral flow.
    """
    invariants = casimirs(H.space)
    invariants.update(extra_invariants or {})
    report = BracketReport('leaf', _bracket_table(H.space, invariants, H.members, symmetric=False))
    report.notes.append("trace residues r_i fix the first-order data at infinity")
    logger.info("leaf check: %d pair(s), %d failure(s)", len(report.entries), len(report.failures))
    return report


# =============================================================================
# Hamiltonian flows
# =============================================================================

@dataclass
class FlowResult:
    times: List[float]
    states: np.ndarray
    coefficient_drift: float
    residue_drift: float
    drift_by_name: Dict[str, float]
    rank_defect: float
    dt: float

    def isospectral(self, tol: float) -> bool:
        return self.coefficient_drift < tol and self.residue_drift < tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            'T': self.times[-1],
            'dt': self.dt,
            'samples': len(self.times),
            'coefficient_drift': self.coefficient_drift,
            'residue_drift': self.residue_drift,
            'rank_defect': self.rank_defect,
            'drift_by_name': self.drift_by_name,
        }


def _rank_defect(blocks: np.ndarray) -> float:
    if blocks.shape[1] < 2:
        return 0.0
    return max((float(np.linalg.svd(A, compute_uv=False)[1]) for A in blocks), default=0.0)


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], v: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(v)
    k2 = f(v + 0.5 * dt * k1)
    k3 = f(v + 0.5 * dt * k2)
    k4 = f(v + dt * k3)
    return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def hamiltonian_flow(H: HamiltonianSet, pt: PhasePoint, T: float, dt: float,
                     generator: Optional[sp.Expr] = None, rank_tol: float = 1e-6,
                     samples: int = 100) -> FlowResult:
    """
    Fixed-step RK4 for dA_i/dt = [A_i, (dG/dA_i)^T], monitoring the drift
    of every spectral coefficient and every trace residue

    Args:
        generator: Hamiltonian G driving the flow; defaults to H.generic()

    Raises:
        DynamicsError: nonpositive T or dt, or the rank-one constraint is lost
    """
    if T <= 0 or dt <= 0:
        raise DynamicsError(f"flow needs a positive duration and step (T={T}, dt={dt})")
    steps = int(round(T / dt))
    if steps < 1:
        raise DynamicsError(f"step dt={dt} exceeds duration T={T}")
    space = H.space
    fixed = space.constant_substitution(pt)
    G = H.generic() if generator is None else generator
    grad_fn = sp.lambdify(space.coordinates, [g.xreplace(fixed) for g in space.gradients(G)], 'numpy')

    monitored = {name: expr.xreplace(fixed) for name, expr in H.members.items()}
    residue_names = [f"r_{i + 1}" for i in range(len(space.poles))]
    for name, A in zip(residue_names, space.residues):
        monitored[name] = A.trace()
    names = list(monitored)
    monitor_fn = sp.lambdify(space.coordinates, [monitored[k] for k in names], 'numpy')
    N, n = len(space.poles), space.rank

    def vector_field(v: np.ndarray) -> np.ndarray:
        blocks = space.blocks(v)
        grads = grad_fn(*v)
        out = np.empty_like(blocks)
        for i in range(N):
            D = np.asarray(grads[i], dtype=complex).reshape(n, n).T
            out[i] = blocks[i] @ D - D @ blocks[i]
        return out.reshape(-1)

    def measure(v: np.ndarray) -> np.ndarray:
        return np.array(monitor_fn(*v), dtype=complex).reshape(-1)

    v = space.vector(pt)
    start_defect = _rank_defect(space.blocks(v))
    reference = measure(v)
    drift = np.zeros(len(names))
    stride = max(1, steps // samples)
    times, states = [0.0], [v.copy()]
    for step in range(1, steps + 1):
        v = _rk4_step(vector_field, v, dt)
        drift = np.maximum(drift, np.abs(measure(v) - reference))
        if step % stride == 0 or step == steps:
            times.append(step * dt)
            states.append(v.copy())
        if step % max(1, steps // 10) == 0:
            logger.debug("flow t=%.4f max drift %.3e", step * dt, float(drift.max(initial=0.0)))

    defect = _rank_defect(space.blocks(v))
    if defect - start_defect > rank_tol:
        raise DynamicsError(f"rank-one constraint lost along the flow (defect {defect:.3e})")
    by_name = {name: float(d) for name, d in zip(names, drift)}
    coefficient_drift = max((by_name[k] for k in H.members), default=0.0)
    residue_drift = max((by_name[k] for k in residue_names), default=0.0)
    logger.info("flow T=%s dt=%s: coefficient drift %.3e, residue drift %.3e",
                T, dt, coefficient_drift, residue_drift)
    return FlowResult(times, np.array(states), coefficient_drift, residue_drift, by_name, defect, dt)


def drift_order(H: HamiltonianSet, pt: PhasePoint, T: float = ToolkitConfig.flow_T,
                dt: float = ToolkitConfig.order_dt, generator: Optional[sp.Expr] = None) -> float:
    """
    log2 of the drift ratio between steps dt and dt/2 (about 4 for RK4)

    dt is the coarse step; it has to be large enough for the drift to
    stand clear of roundoff. Returns inf when the finer drift is already
    at roundoff.
    """
    # coarse steps leave the rank-one orbit at truncation level; only the drift counts here
    coarse = hamiltonian_flow(H, pt, T, dt, generator, rank_tol=math.inf)
    fine = hamiltonian_flow(H, pt, T, dt / 2, generator, rank_tol=math.inf)
    d1, d2 = coarse.coefficient_drift, fine.coefficient_drift
    if d2 < ROUNDOFF_FLOOR:
        logger.info("drift at roundoff (%.3e); order undefined", d2)
        return math.inf
    return math.log2(d1 / d2)


# =============================================================================
# Darboux coordinates from the cokernel divisor
# =============================================================================

@dataclass
class DarbouxConvergence:
    steps: List[float]
    errors: List[float]
    extrapolated_error: float

    def converged(self, tol: float) -> bool:
        """Errors below tol are roundoff and count as converged"""
        return self.errors[-1] <= max(self.errors[0], tol)

    def rate(self, tol: float) -> Optional[float]:
        """Observed order in the step, or None when the coarsest error is already below tol"""
        if self.errors[0] <= tol or self.errors[-1] <= 0:
            return None
        return math.log(self.errors[0] / self.errors[-1]) / math.log(self.steps[0] / self.steps[-1])

    def to_dict(self, tol: Optional[float] = None) -> Dict[str, Any]:
        data = {'steps': self.steps, 'errors': self.errors, 'extrapolated_error': self.extrapolated_error}
        if tol is not None:
            data['rate'] = self.rate(tol)
        return data


def _divisor_setup(psi: HiggsField) -> Tuple[PhasePoint, PhaseSpace, SpectralData]:
    if psi.rank != 2:
        raise DynamicsError("darboux_check needs a rank-two field")
    pt = PhasePoint.from_field(psi)
    data = cokernel_divisor(psi)
    if data.at_infinity:
        raise DynamicsError("divisor meets C; Darboux coordinates are undefined there")
    if not data.points:
        raise DynamicsError("empty divisor: no Darboux coordinates")
    if any(k > 1 for _, k in data.zeros):
        raise DynamicsError("non-generic divisor: coincident points")
    xs = [complex(x) for x, _ in data.points]
    for a in range(len(xs)):
        for b in range(a + 1, len(xs)):
            if abs(xs[a] - xs[b]) < ROUNDOFF_FLOOR:
                raise DynamicsError("non-generic divisor: coincident points")
    return pt, PhaseSpace.for_point(pt), data


def _divisor_function(space: PhaseSpace, pt: PhasePoint, data: SpectralData) -> Callable[[np.ndarray], np.ndarray]:
    """(x_1..x_g, eta_1..eta_g) as a numeric function of the residue vector"""
    poles = [float(p) for p in space.poles]
    C = np.array([[complex(e) for e in row] for row in pt.constant.tolist()], dtype=complex)
    S = np.array(SWAP.tolist(), dtype=complex)
    if data.swapped:
        C = S @ C @ S
    base = np.array([complex(x) for x, _ in data.points])
    pole_poly = np.poly(poles) if poles else np.array([1.0])
    partial = [np.poly([q for q in poles if q != p]) if len(poles) > 1 else np.array([1.0]) for p in poles]

    def divisor(v: np.ndarray) -> np.ndarray:
        blocks = space.blocks(v)
        if data.swapped:
            blocks = np.array([S @ A @ S for A in blocks])
        numerator = C[0, 1] * pole_poly
        for A, part in zip(blocks, partial):
            numerator = np.polyadd(numerator, A[0, 1] * part)
        roots = list(np.roots(numerator))
        xs = []
        for x0 in base:
            nearest = min(range(len(roots)), key=lambda r: abs(roots[r] - x0))
            xs.append(roots.pop(nearest))
        etas = [C[0, 0] + sum(A[0, 0] / (x - p) for A, p in zip(blocks, poles)) for x in xs]
        return np.array(xs + etas, dtype=complex)

    return divisor


def _darboux_matrix(psi: HiggsField, step: float) -> Tuple[np.ndarray, np.ndarray]:
    pt, space, data = _divisor_setup(psi)
    f = _divisor_function(space, pt, data)
    v0 = space.vector(pt)
    jac = np.empty((2 * len(data.points), space.dimension), dtype=complex)
    for m in range(space.dimension):
        e = np.zeros(space.dimension, dtype=complex)
        e[m] = step
        jac[:, m] = (f(v0 + e) - f(v0 - e)) / (2 * step)
    residues = space.blocks(v0)
    n, size = space.rank, jac.shape[0]
    B = np.zeros((size, size), dtype=complex)
    for a in range(size):
        for b in range(size):
            for i, A in enumerate(residues):
                Da = jac[a, i * n * n:(i + 1) * n * n].reshape(n, n)
                Db = jac[b, i * n * n:(i + 1) * n * n].reshape(n, n)
                B[a, b] += np.sum((Da @ Db - Db @ Da) * A)
    g = len(data.points)
    expected = np.zeros((size, size))
    expected[:g, g:] = ORIENTATION * np.eye(g)
    expected[g:, :g] = -ORIENTATION * np.eye(g)
    return B, expected


def darboux_check(psi: HiggsField, step: float = 1e-5, tol: float = 1e-6) -> BracketReport:
    """
    Brackets of the divisor coordinates (x_k, eta_k) by central differences
    through the Lie-Poisson bracket; expects {x_j, eta_k} = -delta_jk and
    zero otherwise

    Raises:
        DynamicsError: rank != 2, empty divisor, or coincident points ("non-generic divisor")
    """
    B, expected = _darboux_matrix(psi, step)
    g = B.shape[0] // 2
    names = [f"x{k + 1}" for k in range(g)] + [f"eta{k + 1}" for k in range(g)]
    report = BracketReport('darboux', tolerance=tol, matrix=B)
    for a in range(2 * g):
        for b in range(a + 1, 2 * g):
            report.entries.append(BracketEntry(names[a], names[b], complex(B[a, b]), float(expected[a, b])))
    report.notes.append(f"central differences with step {step}; orientation {ORIENTATION:+d}")
    logger.info("darboux: max deviation %.3e over %d pair(s)", report.max_deviation(), len(report.entries))
    return report


def darboux_convergence(psi: HiggsField, steps: Sequence[float] = (1e-2, 5e-3, 2.5e-3)) -> DarbouxConvergence:
    """Finite-difference errors per step and the Richardson-extrapolated error of the last two"""
    if len(steps) < 2:
        raise DynamicsError("darboux_convergence needs at least two steps")
    matrices, errors, expected = [], [], None
    for h in steps:
        B, expected = _darboux_matrix(psi, h)
        matrices.append(B)
        errors.append(float(np.max(np.abs(B - expected))))
    ratio = (steps[-2] / steps[-1]) ** 2
    extrapolated = (ratio * matrices[-1] - matrices[-2]) / (ratio - 1)
    return DarbouxConvergence(list(steps), errors, float(np.max(np.abs(extrapolated - expected))))
