"""Flat ``key = value`` configuration files for :class:`ExperimentConfig`.

One assignment per line, ``#`` starts a comment. Lists are comma
separated. Every key of :class:`~advtwostage.simlab.ExperimentConfig` is
accepted; see :data:`SCHEMA` for the types.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Dict, Iterable, Optional

from .errors import ConfigError
from .simlab import ExperimentConfig, default_config

#: key -> (kind, description)
SCHEMA: Dict[str, tuple] = {
    "experiment": ("str", "fig-compare | fig-theory | fig-ridge | fig-lambda | table-cv"),
    "n1": ("int", "labelled sample size"),
    "gamma_grid": ("floats", "aspect ratios d/n1; d = round(gamma * n1)"),
    "eps_list": ("floats", "attack radii"),
    "lambda_policy": ("str", "zero | fixed | best | cv"),
    "lam": ("float", "penalty for lambda_policy = fixed"),
    "lambda_grid": ("floats", "candidate penalties for best / cv and the sweeps"),
    "sigma2": ("float", "noise variance"),
    "theta0_mode": ("str", "spherical | ones_over_sqrt_d"),
    "repeats": ("int", "Monte Carlo repeats"),
    "master_seed": ("int", "root of every random stream"),
    "methods": ("strs", "subset of clean, vanilla, two_stage"),
    "exact_cv": ("bool", "also run brute-force CV in table-cv"),
}

assert set(SCHEMA) == {f.name for f in dataclasses.fields(ExperimentConfig)}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key: str, raw: str):
    kind = SCHEMA[key][0]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "strs":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}", key=key) from None


def parse_assignments(lines: Iterable[str], source: str = "<overrides>") -> Dict[str, object]:
    """Typed values from ``key = value`` lines."""
    out = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}", key=key)
        out[key] = _convert(key, raw)
    return out


def parse_config(
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    experiment: Optional[str] = None,
) -> ExperimentConfig:
    """Build a config from defaults, an optional file, then overrides.

    Defaults are the reference settings for ``experiment`` (or for the
    file's ``experiment`` key). A file naming a different experiment than
    the one requested is an error.
    """
    values: Dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_assignments(p.read_text(encoding="utf-8").splitlines(), str(p)))
    values.update(parse_assignments(overrides))
    exp = values.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for {exp!r}, not {experiment!r}", key="experiment")
    if exp is None:
        raise ConfigError("missing required key 'experiment'", key="experiment")
    base = default_config(str(exp))
    try:
        return dataclasses.replace(base, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    return str(value)


def format_config(cfg: ExperimentConfig) -> str:
    """Text that :func:`parse_config` reads back to an equal config."""
    lines = []
    for f in dataclasses.fields(cfg):
        lines.append(f"# {SCHEMA[f.name][1]}")
        lines.append(f"{f.name} = {_render(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
