"""
CLI - Kommandozeile
python -m core.cli <command> <scene.json> [options]

Every command reads one scene, runs its checks and prints a verdict per
check. Exit codes: 0 when every verdict passed, 1 when a verdict failed,
2 for malformed input or an error raised by a module.
"""

import argparse
import logging
import sys
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np
import sympy as sp
from colorama import Fore, Style, init

from core import __version__
from core.config import ToolkitConfig
from core.errors import DynamicsError, SceneError, SpectralError, ToolkitError
from core.exact_kernel import X, random_constant_gauge, rational_str
from core.normal_form import gauge_invariants, reduce, verify_normal_form
from core.poisson_dynamics import (PhasePoint, PhaseSpace, darboux_check, darboux_convergence, drift_order,
                                   hamiltonian_flow, hamiltonians, involution_check, leaf_and_casimir_check)
from core.scene import COMMANDS, Report, Scene, load_scene
from core.spectral import (branch_points, cokernel_divisor, genus, infinity_intersection, pushdown_lattices,
                           reconstruct, retrivialization_shift_check, sample_real_points, smoothness_check,
                           spectral_curve, verify_lattices)
from core.surface_geom import (LineBundleCocycle, build_torsor, classify_ruled_poisson, compactify,
                               curvature_form, global_section, torsor_class)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

MIN_DRIFT_ORDER = 3.5


# =============================================================================
# Commands
# =============================================================================

def cmd_torsor_class(scene: Scene, config: ToolkitConfig, report: Report):
    L = scene.line_bundle or LineBundleCocycle.of_degree(0, scene.base)
    T = build_torsor(L)
    cls = torsor_class(T)
    section = global_section(T)
    report.values.update({
        'degree': L.degree,
        'cech_degree': L.cech_degree(),
        'torsor_class': cls,
        'global_section': None if section is None else section.to_strings(),
    })
    report.check('class equals deg L', cls == L.cech_degree(), f"class {rational_str(cls)}")
    report.check('global section iff class vanishes', (section is not None) == (cls == 0))

    theta = curvature_form(T, 'U0')
    report.check('curvature is dx ^ d(eta)', theta.coefficient == 1)
    surface = compactify(T)
    factors = surface.finite_transition_factors()
    report.check('curvature glues across charts', all(sp.simplify(f - 1) == 0 for f in factors.values()))
    report.check('double zero along infinity', surface.double_zero_at_infinity())
    report.values['bivectors'] = {chart: str(b) for chart, b in sorted(surface.bivectors.items())}
    report.note(f"torsor class {rational_str(cls)}; global section "
                f"{'exists' if section is not None else 'does not exist'}")


def cmd_classify_surface(scene: Scene, config: ToolkitConfig, report: Report):
    block = scene.surface
    if not block:
        raise SceneError("scene has no surface block", location='surface')
    default_degree = scene.line_bundle.degree if scene.line_bundle is not None else 0
    result = classify_ruled_poisson(block.get('genus', scene.base.genus),
                                    block.get('kind', 'split'),
                                    block.get('degree', default_degree))
    report.values.update(result.to_dict())
    report.check('combination admitted', bool(result.divisor_shapes), result.case)
    for shape in result.divisor_shapes:
        report.note(f"divisor {shape}")
    for line in result.notes:
        report.note(line)


def cmd_spectral(scene: Scene, config: ToolkitConfig, report: Report):
    psi = scene.require_field()
    S = spectral_curve(psi)
    report.values['curve'] = S.to_dict()
    report.note(f"P = {S.P}")
    report.note(f"Q = {S.Q}")

    try:
        hits = infinity_intersection(S)
        report.values['infinity'] = [{'point': h.point, 'case': h.case, 'trace_residue': h.trace_residue,
                                      'fiber_multiplicity': h.fiber_multiplicity, 'local': h.local_equation}
                                     for h in hits]
        report.check('meets infinity over C', True, f"{len(hits)} point(s)")
    except SpectralError as e:
        report.check('meets infinity over C', False, str(e))

    smooth = smoothness_check(S)
    report.check('smooth', smooth.smooth, "; ".join(smooth.witnesses))
    total, at_infinity = psi.trace_residue_balance()
    report.check('trace residues balance', total + at_infinity == 0,
                 f"sum r_i = {rational_str(total)}, res_inf tr h = {rational_str(at_infinity)}")

    try:
        g = genus(S)
        report.values['genus'] = g
        report.check('genus', True, f"g = {g}")
        report.values['branch_points'] = branch_points(S, config.root_tol)
    except SpectralError as e:
        report.check('genus', False, str(e))

    if psi.rank == 2:
        try:
            report.values['divisor'] = cokernel_divisor(psi).to_dict()
        except SpectralError as e:
            report.note(f"no cokernel divisor: {e}")

    # any point off C works as the zero of the retrivialization
    center = max(psi.poles, default=sp.Integer(0)) + 1
    report.check('retrivialization shifts eta', retrivialization_shift_check(psi, X - center))

    low, high = config.sample_range
    report.csv_header = ['x', 'branch', 're_eta', 'im_eta']
    report.csv_rows = [[r['x'], r['branch'], r['re_eta'], r['im_eta']]
                       for r in sample_real_points(S, (low, high), config.sample_points, config.root_tol)]


def cmd_normal_form(scene: Scene, config: ToolkitConfig, report: Report):
    psi = scene.require_field().require_valid()
    rng = np.random.default_rng(config.seed)
    m = config.jet_order
    results = []
    for p in psi.poles:
        nf = reduce(psi, p, m)
        where = f"x={rational_str(p)}"
        report.check(f"{where}: re-conjugation", verify_normal_form(nf, psi, p, m))
        reference = gauge_invariants(nf)
        stable = all(gauge_invariants(reduce(psi.gauge_transform(random_constant_gauge(psi.rank, rng)), p, m))
                     == reference for _ in range(config.gauge_trials))
        report.check(f"{where}: leading data gauge independent", stable,
                     f"{config.gauge_trials} random constant gauges")
        results.append({**nf.to_dict(), 'invariants': reference})
        leading = ", ".join(f"{k}={rational_str(v)}" for k, v in sorted(nf.leading.items()))
        report.note(f"{where}: {nf.case} ({leading})")
    report.values['normal_forms'] = results


def _observables(space: PhaseSpace, block: Any, location: str) -> Dict[str, sp.Expr]:
    if not block:
        return {}
    if not isinstance(block, Mapping):
        raise SceneError("expected an object of name: expression", location=location)
    out = {}
    for name, text in block.items():
        try:
            out[str(name)] = space.parse(str(text))
        except DynamicsError as e:
            raise SceneError(str(e), location=f"{location}.{name}")
    return out


def _phase(scene: Scene):
    pt = PhasePoint.from_field(scene.require_field())
    space = PhaseSpace.for_point(pt, bool(scene.phase.get('dynamic_constant', False)))
    return pt, hamiltonians(space)


def cmd_involution(scene: Scene, config: ToolkitConfig, report: Report):
    pt, H = _phase(scene)
    report.values['hamiltonians'] = H.to_dict()
    report.check('hamiltonians reproduce the spectral curve', H.matches_curve(pt))
    base = involution_check(H)
    report.values['involution'] = base.to_dict()
    report.check('pairwise involution', base.passed, f"{len(base.entries)} pair(s)")

    extra = _observables(H.space, scene.phase.get('extra'), 'phase.extra')
    if extra:
        injected = involution_check(H, extra)
        flagged = {name for e in injected.failures for name in (e.left, e.right)}
        missed = sorted(set(extra) - flagged)
        report.values['injected'] = injected.to_dict()
        report.check('injected observables flagged', not missed,
                     f"missed: {', '.join(missed)}" if missed else f"{len(extra)} flagged")
    report.note(f"{len(H.members)} Hamiltonian(s) on a phase space of dimension {H.space.dimension}")


def cmd_leaf_check(scene: Scene, config: ToolkitConfig, report: Report):
    pt, H = _phase(scene)
    leaf = leaf_and_casimir_check(H)
    report.values['leaf'] = leaf.to_dict()
    report.check('invariants commute with every Hamiltonian', leaf.passed, f"{len(leaf.entries)} pair(s)")

    candidates = _observables(H.space, scene.phase.get('candidates'), 'phase.candidates')
    if candidates:
        screened = leaf_and_casimir_check(H, candidates)
        moving = sorted({e.left for e in screened.failures} & set(candidates))
        report.values['candidates'] = {name: name in moving for name in candidates}
        for name in moving:
            report.note(f"{name} is not invariant along the Hamiltonians")
        report.check('non-invariants detected', set(moving) == set(candidates),
                     f"{len(moving)}/{len(candidates)} candidate(s) move")


def cmd_flow(scene: Scene, config: ToolkitConfig, report: Report):
    pt, H = _phase(scene)
    text = scene.phase.get('generator')
    generator = _observables(H.space, {'generator': text}, 'phase')['generator'] if text else None
    result = hamiltonian_flow(H, pt, config.flow_T, config.flow_dt, generator, rank_tol=config.tol)
    report.values['flow'] = result.to_dict()

    if scene.phase.get('expect_drift'):
        report.check('generator breaks isospectrality', not result.isospectral(config.drift_tol),
                     f"coefficient drift {result.coefficient_drift:.3e}")
        report.check('trace residues stay fixed', result.residue_drift < config.drift_tol,
                     f"{result.residue_drift:.3e}")
    else:
        report.check('isospectral', result.isospectral(config.drift_tol),
                     f"coefficient drift {result.coefficient_drift:.3e}, residue drift {result.residue_drift:.3e}")
        order = drift_order(H, pt, config.flow_T, config.order_dt, generator)
        report.values['drift_order'] = order
        report.check('integrator drift order', order >= MIN_DRIFT_ORDER, f"{order:.2f}")

    names = [s.name for s in H.space.coordinates]
    report.csv_header = ['t'] + [f"{n}_{part}" for n in names for part in ('re', 'im')]
    report.csv_rows = [[t] + [float(getattr(z, part)) for z in state for part in ('real', 'imag')]
                       for t, state in zip(result.times, result.states)]


def cmd_darboux_check(scene: Scene, config: ToolkitConfig, report: Report):
    psi = scene.require_field()
    brackets = darboux_check(psi, config.fd_step, config.tol)
    report.values['darboux'] = brackets.to_dict()
    report.check('canonical brackets', brackets.passed, f"max deviation {brackets.max_deviation():.3e}")
    conv = darboux_convergence(psi)
    report.values['convergence'] = conv.to_dict(config.tol)
    rate = conv.rate(config.tol)
    report.check('step refinement converges', conv.converged(config.tol),
                 f"extrapolated error {conv.extrapolated_error:.3e}"
                 + (f", observed order {rate:.2f}" if rate is not None else ", errors at roundoff"))


def cmd_lattices(scene: Scene, config: ToolkitConfig, report: Report):
    psi = scene.require_field().require_valid()
    out = []
    for p in psi.poles:
        nf = reduce(psi, p, config.jet_order)
        lattices = pushdown_lattices(nf)
        where = f"x={rational_str(p)}"
        report.check(f"{where}: defining conditions hold", verify_lattices(lattices, nf, psi))
        out.append(lattices.to_dict())
        report.note(f"{where}: E_0 {lattices.E0.orders}, E_00 {lattices.E00.orders}, E_psi {lattices.Epsi.orders}")
        for constraint in lattices.constraints:
            report.note(f"{where}: {constraint}")
    report.values['lattices'] = out


def cmd_roundtrip(scene: Scene, config: ToolkitConfig, report: Report):
    psi = scene.require_field()
    data = cokernel_divisor(psi)
    report.values['divisor'] = data.to_dict()
    rebuilt = reconstruct(data.curve, data)
    report.values['reconstructed'] = rebuilt.to_dict()
    report.check('characteristic polynomial reproduced', spectral_curve(rebuilt).P == data.curve.P)
    report.check('divisor reproduced', cokernel_divisor(rebuilt).points == data.points,
                 f"degree {data.degree}")
    report.note(f"divisor of degree {data.degree}: "
                + (", ".join(f"({rational_str(x)}, {rational_str(e)})" for x, e in data.points) or "empty"))


HANDLERS: Dict[str, Callable[[Scene, ToolkitConfig, Report], None]] = {
    'torsor-class': cmd_torsor_class,
    'classify-surface': cmd_classify_surface,
    'spectral': cmd_spectral,
    'normal-form': cmd_normal_form,
    'involution': cmd_involution,
    'leaf-check': cmd_leaf_check,
    'flow': cmd_flow,
    'darboux-check': cmd_darboux_check,
    'lattices': cmd_lattices,
    'roundtrip': cmd_roundtrip,
}


# =============================================================================
# Entry point
# =============================================================================

def run(command: str, scene: Scene, config: ToolkitConfig) -> Report:
    """
    Runs one command; the report echoes the scene with the effective
    options, so feeding it back reproduces the report
    """
    if command not in HANDLERS:
        raise SceneError(f"unknown command '{command}'", location='command')
    echo = dict(scene.raw)
    echo['options'] = config.to_dict()
    report = Report(command, echo, config.to_dict())
    logger.info("running %s on scene %s", command, scene.name)
    HANDLERS[command](scene, config, report)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='jethiggs',
                                     description='Exact checks for Higgs fields with simple poles')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('scene', help='scene JSON file (or a report to re-run)')
    parser.add_argument('--jet-order', type=int, dest='jet_order', help='Laurent jet order m')
    parser.add_argument('--tol', type=float, help='numeric tolerance')
    parser.add_argument('--flow-T', type=float, dest='flow_T', help='flow duration')
    parser.add_argument('--flow-dt', type=float, dest='flow_dt', help='RK4 step')
    parser.add_argument('--seed', type=int, help='seed for random gauges')
    parser.add_argument('--csv', help='write sample rows to this CSV file')
    parser.add_argument('--json', help='write the report to this JSON file')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    return parser


def print_report(report: Report):
    print("\n" + "=" * 60)
    print(f"{Fore.CYAN}  {report.command.upper()}")
    print("=" * 60)
    for line in report.summary:
        print(f"  {line}")
    print()
    for v in report.verdicts:
        mark = f"{Fore.GREEN}✓" if v.passed else f"{Fore.RED}✗"
        detail = f" {Style.DIM}({v.detail})" if v.detail else ""
        print(f"  {mark} {v.name}{detail}")
    print("=" * 60)
    if report.passed:
        print(f"{Fore.GREEN}✅ PASS ({len(report.verdicts)} check(s))")
    else:
        failed = sum(not v.passed for v in report.verdicts)
        print(f"{Fore.RED}❌ FAIL ({failed} of {len(report.verdicts)} check(s))")


def main(argv: Optional[List[str]] = None) -> int:
    init(autoreset=True)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')

    overrides = {k: getattr(args, k) for k in ('jet_order', 'tol', 'flow_T', 'flow_dt', 'seed')
                 if getattr(args, k) is not None}
    try:
        scene = load_scene(args.scene)
        config = ToolkitConfig().merged(scene.options).merged(overrides)
        report = run(args.command, scene, config)
        if args.json:
            report.write_json(args.json)
        if args.csv:
            report.write_csv(args.csv)
    except ToolkitError as e:
        print(f"{Fore.RED}❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"{Fore.RED}❌ cannot write output: {e}", file=sys.stderr)
        return EXIT_INPUT

    print_report(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
