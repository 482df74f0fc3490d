"""
config.py — Run configuration and the optional .fractaldrumrc file.

Merge order: CLI arguments > .fractaldrumrc > built-in defaults.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from fractaldrum import __version__
from fractaldrum.errors import InvalidConfigError
from fractaldrum.fem import BOUNDARY_CONDITIONS, DEFAULT_TOL
from fractaldrum.julia import DEFAULT_PIXEL_BUDGET
from fractaldrum.meshing import DEFAULT_TRIANGLE_BUDGET
from fractaldrum.spectral import REFERENCE_LENGTH_SCALE

RC_NAME = ".fractaldrumrc"

# Keys an rc file may set, with their built-in defaults.
DEFAULTS: Dict[str, Any] = {
    "output_dir": "fractaldrum-out",
    "k": 20,
    "tol": DEFAULT_TOL,
    "seed": 0,
    "resolution": 128.0,
    "iterations": 100,
    "escape_radius": 2.0,
    "pixel_budget": DEFAULT_PIXEL_BUDGET,
    "triangle_budget": DEFAULT_TRIANGLE_BUDGET,
    "workers": 1,
    "length_scale": 1.0,
}


def load_rc(project_root: str) -> Dict:
    """
    Load .fractaldrumrc JSON configuration, with fallback chain:

        1. <project_root>/.fractaldrumrc
        2. ~/.fractaldrumrc
        3. Empty dict (no config found)

    Unknown keys are ignored by ``merge``.
    """
    candidates = [
        Path(project_root) / RC_NAME,
        Path.home() / RC_NAME,
    ]

    for candidate in candidates:
        if candidate.is_file():
            try:
                with open(str(candidate), "r", encoding="utf-8", errors="ignore") as fh:
                    data = json.load(fh)
                if isinstance(data, dict):
                    return data
            except (OSError, json.JSONDecodeError):
                # Corrupt or unreadable config → try next candidate
                pass

    return {}


@dataclass
class RunConfig:
    """Everything one command needs; serialised as run.json next to its outputs."""

    command: str
    output_dir: str = DEFAULTS["output_dir"]
    bc: str = "dirichlet"
    k: int = DEFAULTS["k"]
    tol: float = DEFAULTS["tol"]
    seed: int = DEFAULTS["seed"]
    resolution: float = DEFAULTS["resolution"]
    iterations: int = DEFAULTS["iterations"]
    escape_radius: float = DEFAULTS["escape_radius"]
    pixel_budget: int = DEFAULTS["pixel_budget"]
    triangle_budget: int = DEFAULTS["triangle_budget"]
    workers: int = DEFAULTS["workers"]
    length_scale: float = DEFAULTS["length_scale"]
    # command-specific options (domain parameters, flags)
    options: Dict[str, Any] = field(default_factory=dict)
    argv: List[str] = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if self.bc not in BOUNDARY_CONDITIONS:
            raise InvalidConfigError(f"unknown boundary condition '{self.bc}' (dirichlet | neumann)")
        if self.k < 1:
            raise InvalidConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.tol < 1.0:
            raise InvalidConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if not self.resolution > 0:
            raise InvalidConfigError(f"resolution must be > 0, got {self.resolution}")
        if self.iterations < 1:
            raise InvalidConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.escape_radius < 2.0:
            raise InvalidConfigError(f"escape radius must be >= 2, got {self.escape_radius}")
        if self.pixel_budget < 1 or self.triangle_budget < 1:
            raise InvalidConfigError("budgets must be positive")
        if self.workers < 1:
            raise InvalidConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.length_scale > 0:
            raise InvalidConfigError(f"length scale must be > 0, got {self.length_scale}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["version"] = __version__
        return data


def merge(cli: Dict[str, Any], rc: Dict[str, Any]) -> Dict[str, Any]:
    """CLI values that are not None win, then rc values, then DEFAULTS."""
    merged = dict(DEFAULTS)
    for key in DEFAULTS:
        if key in rc and rc[key] is not None:
            merged[key] = rc[key]
        if cli.get(key) is not None:
            merged[key] = cli[key]
    return merged


def parse_length_scale(value: Any) -> float:
    """A positive number, or ``reference`` for the scale of the reference eigenvalue tables."""
    if str(value).strip().lower() == "reference":
        return REFERENCE_LENGTH_SCALE
    return float(value)


def build_config(command: str, cli: Dict[str, Any], rc: Dict[str, Any],
                 options: Dict[str, Any], argv: List[str]) -> RunConfig:
    values = merge(cli, rc)
    try:
        config = RunConfig(
            command=command,
            output_dir=str(values["output_dir"]),
            bc=str(cli.get("bc") or "dirichlet").lower(),
            k=int(values["k"]),
            tol=float(values["tol"]),
            seed=int(values["seed"]),
            resolution=float(values["resolution"]),
            iterations=int(values["iterations"]),
            escape_radius=float(values["escape_radius"]),
            pixel_budget=int(values["pixel_budget"]),
            triangle_budget=int(values["triangle_budget"]),
            workers=int(values["workers"]),
            length_scale=parse_length_scale(values["length_scale"]),
            options=options,
            argv=list(argv),
        )
    except (TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad configuration value: {exc}") from exc
    return config.validate()
