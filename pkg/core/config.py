"""
CONFIG - Standardwerte
Default tolerances and step sizes for every command.

Precedence: dataclass defaults < scene "options" block < command-line flags.
"""

from dataclasses import dataclass, fields, replace, asdict
from typing import Any, Dict, Mapping, Optional, Tuple

from core.errors import SceneError


@dataclass(frozen=True)
class ToolkitConfig:
    """Immutable bundle of numeric settings"""
    jet_order: int = 6            # normal-form truncation m
    tol: float = 1e-6             # darboux tolerance
    fd_step: float = 1e-5         # central-difference step
    flow_T: float = 1.0
    flow_dt: float = 1e-3
    drift_tol: float = 1e-8       # isospectral drift bound
    order_dt: float = 0.1         # coarse step of the drift-order estimate
    root_tol: float = 1e-9        # complex branch-point isolation
    gauge_trials: int = 20
    seed: int = 0
    sample_range: Tuple[float, float] = (-3.0, 3.0)
    sample_points: int = 61

    def merged(self, options: Optional[Mapping[str, Any]]) -> "ToolkitConfig":
        """
        Returns a copy with the given options applied

        Args:
            options: mapping of field name to value (None values are skipped)

        Raises:
            SceneError: unknown option or value of the wrong kind
        """
        if not options:
            return self
        known = {f.name: f for f in fields(self)}
        updates: Dict[str, Any] = {}
        for name, value in options.items():
            if value is None:
                continue
            if name not in known:
                raise SceneError(f"unknown option '{name}'", location=f"options.{name}")
            current = getattr(self, name)
            try:
                if isinstance(current, bool):
                    updates[name] = bool(value)
                elif isinstance(current, int):
                    updates[name] = int(value)
                elif isinstance(current, float):
                    updates[name] = float(value)
                else:
                    low, high = value
                    updates[name] = (float(low), float(high))
            except (TypeError, ValueError) as e:
                raise SceneError(f"bad value {value!r} ({e})", location=f"options.{name}")
        return replace(self, **updates)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['sample_range'] = list(self.sample_range)
        return data
