"""Run configuration: defaults, JSON config files, and override precedence.

A run is described by one nested mapping.  Defaults live here; a JSON
config file overrides defaults; command-line flags override the file.
The FMLSLAB_OUTPUT_DIR environment variable slots between flags and the
file, and overrides the output directory only.  Unknown keys anywhere
are rejected, and the fully resolved mapping (defaults included) is what
gets written to the run manifest, so every artifact records the complete
parameter set that produced it.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError, DomainError
from .exercise import MAX_LEVEL, ExerciseGrid
from .mc import MCConfig
from .model import ModelParams, OptionSpec

__all__ = ["RunConfig", "load_json_config", "resolve_config", "DEFAULTS"]

ENV_OUTPUT_DIR = "FMLSLAB_OUTPUT_DIR"

DEFAULTS = {
    "model": {
        "alpha": 1.4,
        "sigma": 0.25,
        "rate": 0.05,
    },
    "option": {
        "strike": 100.0,
        "expiry": 1.0,
    },
    "grid": {
        "width": None,       # log-price half-width; None = auto from the model
        "step": 0.005,       # log-price node spacing
        "level": 8,          # dyadic exercise-date level for surface verbs
        "tol": 1e-4,         # relative convergence tolerance for american_price
        "max_level": 10,     # refinement cap for american_price
        "n_max": 10,         # largest N in convergence tables
    },
    "scan": {
        "alphas": [1.4, 1.6, 1.8, 2.0],
        "spots": [100.0, 110.0, 120.0, 140.0],
        "kind": "both",      # european | american | both
        "times": [0.0, 0.25, 0.5, 0.75, 0.9],
        "s_min": 50.0,
        "s_max": 150.0,
        "s_points": 41,
    },
    "mc": {
        "n_paths": 1_000_000,
        "seed": 12345,
        "antithetic": False,
    },
    "output": {
        "directory": "fmlslab-out",
        "format": "csv",     # csv | json for data artifacts
        "figures": True,
    },
    "tolerances": {
        "convexity": 1e-6,       # x strike: floor on second differences
        "monotonicity": 1e-6,    # x strike: slack for the alpha sweep
        "bs_endpoint": 1e-4,     # x strike: alpha=2 European vs Black-Scholes
        "binomial_rel": 5e-3,    # relative: alpha=2 American vs binomial
        "residual_order": 0.9,   # minimum observed refinement order
    },
}

_KIND_CHOICES = ("european", "american", "both")
_FORMAT_CHOICES = ("csv", "json")


def load_json_config(path) -> dict:
    """Parse a JSON config file; any parse failure is a configuration error."""
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(
            f"config file {path} must hold a JSON object, got {type(raw).__name__}")
    return raw


def _merge(base: dict, override: dict, trail: str) -> None:
    """Recursively fold ``override`` into ``base``, rejecting unknown keys."""
    for key, value in override.items():
        where = f"{trail}.{key}" if trail else key
        if key not in base:
            known = ", ".join(sorted(base))
            raise ConfigurationError(
                f"unknown config key {where!r}; known keys here: {known}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(
                    f"config key {where!r} must be an object, got {value!r}")
            _merge(base[key], value, where)
        else:
            base[key] = value


def _require_number(raw: dict, section: str, key: str, *, optional=False):
    value = raw[section][key]
    if optional and value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _require_int(raw: dict, section: str, key: str) -> int:
    value = raw[section][key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{section}.{key} must be an integer, got {value!r}")
    return value


def _require_number_list(raw: dict, section: str, key: str) -> tuple:
    value = raw[section][key]
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigurationError(
            f"{section}.{key} must be a non-empty list of numbers, got {value!r}")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigurationError(
                f"{section}.{key} must contain only numbers, got {item!r}")
        out.append(float(item))
    return tuple(out)


def _require_choice(raw: dict, section: str, key: str, choices) -> str:
    value = raw[section][key]
    if value not in choices:
        raise ConfigurationError(
            f"{section}.{key} must be one of {', '.join(choices)}, got {value!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run parameters plus their raw resolved mapping."""

    model: ModelParams
    option: OptionSpec
    grid: ExerciseGrid
    level: int
    tol: float
    max_level: int
    n_max: int
    scan_alphas: tuple
    scan_spots: tuple
    scan_kind: str
    scan_times: tuple
    s_min: float
    s_max: float
    s_points: int
    mc: MCConfig
    output_dir: str
    output_format: str
    figures: bool
    tolerances: dict = field(repr=False)
    resolved: dict = field(repr=False)

    def with_model(self, **changes) -> "RunConfig":
        """A copy with model fields replaced (used for parameter sweeps)."""
        raw = copy.deepcopy(self.resolved)
        raw["model"].update(changes)
        return _build(raw)


def _build(raw: dict) -> RunConfig:
    # domain violations (alpha out of range, negative strike, ...) surface
    # as configuration errors here: the number came from a config document
    try:
        model = ModelParams(
            alpha=_require_number(raw, "model", "alpha"),
            sigma=_require_number(raw, "model", "sigma"),
            rate=_require_number(raw, "model", "rate"),
        )
        option = OptionSpec(
            strike=_require_number(raw, "option", "strike"),
            expiry=_require_number(raw, "option", "expiry"),
        )
        grid = ExerciseGrid(
            width=_require_number(raw, "grid", "width", optional=True),
            step=_require_number(raw, "grid", "step"),
        )
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from exc
    level = _require_int(raw, "grid", "level")
    if not (0 <= level <= MAX_LEVEL):
        raise ConfigurationError(
            f"grid.level must lie in [0, {MAX_LEVEL}], got {level}")
    max_level = _require_int(raw, "grid", "max_level")
    n_max = _require_int(raw, "grid", "n_max")
    if not (0 <= n_max <= MAX_LEVEL):
        raise ConfigurationError(
            f"grid.n_max must lie in [0, {MAX_LEVEL}], got {n_max}")
    tol = _require_number(raw, "grid", "tol")
    if tol <= 0.0:
        raise ConfigurationError(f"grid.tol must be positive, got {tol}")

    alphas = _require_number_list(raw, "scan", "alphas")
    if list(alphas) != sorted(alphas):
        raise ConfigurationError(f"scan.alphas must be ascending, got {alphas}")
    spots = _require_number_list(raw, "scan", "spots")
    kind = _require_choice(raw, "scan", "kind", _KIND_CHOICES)
    times = _require_number_list(raw, "scan", "times")
    s_min = _require_number(raw, "scan", "s_min")
    s_max = _require_number(raw, "scan", "s_max")
    s_points = _require_int(raw, "scan", "s_points")
    if not (0.0 < s_min < s_max):
        raise ConfigurationError(
            f"scan window must satisfy 0 < s_min < s_max, got [{s_min}, {s_max}]")

    mc = MCConfig(
        n_paths=_require_int(raw, "mc", "n_paths"),
        seed=_require_int(raw, "mc", "seed"),
        antithetic=bool(raw["mc"]["antithetic"]),
    )

    directory = raw["output"]["directory"]
    if not isinstance(directory, str) or not directory:
        raise ConfigurationError(
            f"output.directory must be a non-empty string, got {directory!r}")
    fmt = _require_choice(raw, "output", "format", _FORMAT_CHOICES)
    figures = bool(raw["output"]["figures"])

    tolerances = {}
    for key in DEFAULTS["tolerances"]:
        value = _require_number(raw, "tolerances", key)
        if value <= 0.0:
            raise ConfigurationError(f"tolerances.{key} must be positive")
        tolerances[key] = value

    return RunConfig(
        model=model, option=option, grid=grid, level=level, tol=tol,
        max_level=max_level, n_max=n_max,
        scan_alphas=alphas, scan_spots=spots, scan_kind=kind,
        scan_times=times, s_min=s_min, s_max=s_max, s_points=s_points,
        mc=mc, output_dir=directory, output_format=fmt, figures=figures,
        tolerances=tolerances, resolved=raw,
    )


def resolve_config(file_config: dict | None = None,
                   flag_overrides: dict | None = None,
                   env: dict | None = None) -> RunConfig:
    """Merge defaults <- config file <- environment <- flags, then validate.

    ``flag_overrides`` uses the same nested shape as the config file and
    must contain only keys the caller actually set.  ``env`` defaults to
    ``os.environ``; only FMLSLAB_OUTPUT_DIR is consulted.
    """
    raw = copy.deepcopy(DEFAULTS)
    if file_config:
        _merge(raw, file_config, "")
    env = os.environ if env is None else env
    env_dir = env.get(ENV_OUTPUT_DIR)
    if env_dir:
        raw["output"]["directory"] = env_dir
    if flag_overrides:
        _merge(raw, flag_overrides, "")
    return _build(raw)
