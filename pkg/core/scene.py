"""
SCENE - Szenendateien und Berichte
JSON scene files in, deterministic reports out

A scene names the base, the line bundle, the Higgs field and the options
of a run; rationals are quoted strings ("p/q") so no float ever enters
exact data. A report echoes its scene, so a report file can be fed back
to the CLI to reproduce itself.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import sympy as sp

from core.config import ToolkitConfig
from core.errors import AlgebraError, GeometryError, SceneError, ToolkitError
from core.exact_kernel import RatFunc, parse_rational, rational_str
from core.higgs_field import HiggsField
from core.surface_geom import BaseAtlas, LineBundleCocycle

logger = logging.getLogger(__name__)

COMMANDS = (
    'torsor-class', 'classify-surface', 'spectral', 'normal-form', 'involution',
    'leaf-check', 'flow', 'darboux-check', 'lattices', 'roundtrip',
)

SCENE_KEYS = {'name', 'description', 'base', 'line_bundle', 'rank', 'poles', 'matrix', 'unit',
              'surface', 'phase', 'options', 'commands'}
BASE_KEYS = {'genus', 'centers'}
BUNDLE_KEYS = {'degree', 'transition'}
SURFACE_KEYS = {'genus', 'kind', 'degree'}
SURFACE_KINDS = ('split', 'extension')
PHASE_KEYS = {'dynamic_constant', 'generator', 'extra', 'candidates', 'expect_drift'}


# =============================================================================
# Scene files
# =============================================================================

@dataclass
class Scene:
    name: str
    raw: Dict[str, Any]
    base: BaseAtlas
    line_bundle: Optional[LineBundleCocycle] = None
    higgs: Optional[HiggsField] = None
    surface: Dict[str, Any] = field(default_factory=dict)
    phase: Dict[str, Any] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    commands: List[str] = field(default_factory=list)

    def require_field(self) -> HiggsField:
        if self.higgs is None:
            raise SceneError("scene has no Higgs field", location="matrix")
        return self.higgs


def _reject_unknown(block: Mapping[str, Any], allowed: set, location: str):
    if not isinstance(block, Mapping):
        raise SceneError(f"expected an object, got {type(block).__name__}", location=location)
    for key in block:
        if key not in allowed:
            raise SceneError(f"unknown field '{key}'", location=f"{location}.{key}" if location else key)


def _rational(value: Any, location: str) -> sp.Rational:
    try:
        return parse_rational(value)
    except AlgebraError as e:
        raise SceneError(str(e), location=location)


def _integer(value: Any, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SceneError(f"expected an integer, got {value!r}", location=location)
    return value


def _entry(value: Any, location: str) -> RatFunc:
    if isinstance(value, (bool, float)) or not isinstance(value, (str, int)):
        raise SceneError(f"entries must be strings or integers, got {value!r}", location=location)
    try:
        return RatFunc.lift(value)
    except AlgebraError as e:
        raise SceneError(str(e), location=location)


def _parse_base(block: Mapping[str, Any]) -> BaseAtlas:
    _reject_unknown(block, BASE_KEYS, 'base')
    genus = _integer(block.get('genus', 0), 'base.genus')
    centers = [_rational(c, f"base.centers[{i}]") for i, c in enumerate(block.get('centers', []))]
    try:
        if genus == 0:
            return BaseAtlas.projective_line(centers)
        if centers:
            raise SceneError("chart centers need genus 0", location='base.centers')
        return BaseAtlas(genus)
    except GeometryError as e:
        raise SceneError(str(e), location='base')


def _parse_bundle(block: Mapping[str, Any], base: BaseAtlas) -> LineBundleCocycle:
    _reject_unknown(block, BUNDLE_KEYS, 'line_bundle')
    degree = block.get('degree')
    if degree is not None:
        degree = _integer(degree, 'line_bundle.degree')
    try:
        if 'transition' in block:
            g01 = _entry(block['transition'], 'line_bundle.transition')
            return LineBundleCocycle.from_transition(g01, degree)
        if degree is None:
            raise SceneError("needs 'degree' or 'transition'", location='line_bundle')
        return LineBundleCocycle.of_degree(degree, base)
    except GeometryError as e:
        raise SceneError(str(e), location='line_bundle')


def _parse_matrix(rows: Any, n: int, location: str, parse) -> List[List[Any]]:
    if not isinstance(rows, list) or len(rows) != n:
        raise SceneError(f"expected {n} rows", location=location)
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise SceneError(f"expected {n} entries", location=f"{location}[{i}]")
        out.append([parse(v, f"{location}[{i}][{j}]") for j, v in enumerate(row)])
    return out


def parse_scene(data: Mapping[str, Any], source: str = "<scene>") -> Scene:
    """
    Raises:
        SceneError: unknown field, malformed rational, wrong shape or bad option
    """
    _reject_unknown(data, SCENE_KEYS, '')
    name = str(data.get('name', Path(source).stem))
    base = _parse_base(data.get('base', {}))
    bundle = _parse_bundle(data['line_bundle'], base) if 'line_bundle' in data else None

    psi = None
    if 'matrix' in data:
        rows = data['matrix']
        n = _integer(data.get('rank', len(rows) if isinstance(rows, list) else 0), 'rank')
        if n < 1:
            raise SceneError("rank must be positive", location='rank')
        matrix = _parse_matrix(rows, n, 'matrix', _entry)
        poles = data.get('poles', [])
        if not isinstance(poles, list):
            raise SceneError("expected a list", location='poles')
        poles = [_rational(p, f"poles[{i}]") for i, p in enumerate(poles)]
        unit = _parse_matrix(data['unit'], n, 'unit', _rational) if 'unit' in data else None
        try:
            psi = HiggsField.from_rows(matrix, poles, unit, bundle)
        except ToolkitError as e:
            raise SceneError(str(e), location='matrix')

    surface = data.get('surface', {})
    _reject_unknown(surface, SURFACE_KEYS, 'surface')
    for key in ('genus', 'degree'):
        if key in surface:
            _integer(surface[key], f"surface.{key}")
    if surface.get('kind', 'split') not in SURFACE_KINDS:
        raise SceneError(f"kind must be one of {list(SURFACE_KINDS)}", location='surface.kind')
    phase = data.get('phase', {})
    _reject_unknown(phase, PHASE_KEYS, 'phase')
    options = data.get('options', {})
    _reject_unknown(options, set(options) if isinstance(options, Mapping) else set(), 'options')
    ToolkitConfig().merged(options)
    commands = list(data.get('commands', []))
    for i, c in enumerate(commands):
        if c not in COMMANDS:
            raise SceneError(f"unknown command '{c}'", location=f"commands[{i}]")

    logger.debug("parsed scene %s from %s", name, source)
    return Scene(name, dict(data), base, bundle, psi, dict(surface), dict(phase), dict(options), commands)


def load_scene(path: Union[str, Path]) -> Scene:
    """
    Reads a scene file, or the scene echoed inside a report file

    Raises:
        SceneError: unreadable file or invalid JSON (location carries line:column)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise SceneError(f"cannot read scene file: {e}", location=str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"invalid JSON: {e.msg}", location=f"{path}:{e.lineno}:{e.colno}")
    if isinstance(data, dict) and 'command' in data and 'scene' in data:
        data = data['scene']
    return parse_scene(data, str(path))


# =============================================================================
# Reports
# =============================================================================

def jsonable(value: Any) -> Any:
    """Exact values as "p/q" strings, complex numbers as [re, im]"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, sp.Rational):
        return rational_str(value)
    if isinstance(value, sp.Basic):
        return str(value)
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return [jsonable(z.real), jsonable(z.imag)]
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return str(value)


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class Report:
    command: str
    scene: Dict[str, Any]
    config: Dict[str, Any]
    verdicts: List[Verdict] = field(default_factory=list)
    values: Dict[str, Any] = field(default_factory=dict)
    summary: List[str] = field(default_factory=list)
    csv_header: Optional[List[str]] = None
    csv_rows: List[List[Any]] = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.verdicts.append(Verdict(name, bool(passed), detail))
        return bool(passed)

    def note(self, line: str):
        self.summary.append(line)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'passed': self.passed,
            'verdicts': [{'name': v.name, 'passed': v.passed, 'detail': v.detail} for v in self.verdicts],
            'summary': list(self.summary),
            'values': jsonable(self.values),
            'config': jsonable(self.config),
            'scene': self.scene,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def write_json(self, path: Union[str, Path]):
        Path(path).write_text(self.to_json(), encoding='utf-8')

    def write_csv(self, path: Union[str, Path]):
        if self.csv_header is None:
            raise SceneError(f"command {self.command} produces no CSV data", location=str(path))
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(self.csv_header)
            writer.writerows(self.csv_rows)
