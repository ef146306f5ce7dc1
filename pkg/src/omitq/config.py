"""Flat ``key = value`` experiment configuration.

Lines hold one assignment each; ``#`` starts a comment.  Frequencies are in
units of the mechanical frequency.  Unknown keys, duplicate keys and values
that fail validation are reported with their line number.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, fields
from pathlib import Path

from .fock import ModeSpace
from .model import SystemParams

EXPERIMENTS = {
    "main_dip": ("Fig. 2(b)", "probe transmission across the red-sideband OMIT dip"),
    "transistor": ("Fig. 3", "control switched on and off; time-resolved transmission and polaron populations"),
    "crossover_sideband1": ("Fig. 4(a)", "first-sideband OMIT signal versus g0/kappa at fixed g0*eps_c"),
    "crossover_sideband2": ("Fig. 4(b)", "second-sideband OMIT signal versus g0/kappa at fixed g0*eps_c"),
    "temperature_sweep": ("Fig. 4(c)", "second-sideband Fano amplitude versus bath occupation"),
    "custom_spectrum": ("-", "OMIT spectrum on a user-defined probe grid"),
}

METHODS = ("linear-response", "time-domain")
PARAM_KEYS = ("kappa", "gamma_m", "g0", "eps_c", "eps_p", "delta_c", "delta_p", "n_th", "kappa_out")


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _bool(text):
    low = text.lower()
    if low not in ("true", "false"):
        raise ValueError(f"expected true or false, got {text!r}")
    return low == "true"


def _float_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _method(text):
    if text not in METHODS:
        raise ValueError(f"expected one of {', '.join(METHODS)}")
    return text


def _experiment(text):
    if text not in EXPERIMENTS:
        raise ValueError(f"unknown experiment; choose from {', '.join(EXPERIMENTS)}")
    return text


def _ramp(text):
    if text not in ("power", "amplitude"):
        raise ValueError("expected power or amplitude")
    return text


@dataclass
class ExperimentConfig:
    experiment: str
    params: SystemParams
    method: str = "linear-response"
    output: str | None = None
    ceiling: int = 4096
    tol: float = 1e-4
    threads: int = 1
    n_photon: int | None = None
    n_phonon: int | None = None
    grid_start: float | None = None
    grid_stop: float | None = None
    grid_points: int | None = None
    ratios: tuple = (1.0, 0.5, 0.25, 0.1)
    n_th_values: tuple = (0.0, 0.5, 1.0, 2.0)
    ratio: float = 0.5
    dt: float | None = None
    relax: float | None = None
    window: int = 5
    t_switch: float = 100.0
    t_hold: float = 1.0e4
    settle: float | None = None
    tail: float | None = None
    ramp: str = "power"
    figures: bool = False

    @property
    def space(self) -> ModeSpace | None:
        if self.n_photon is None and self.n_phonon is None:
            return None
        if self.n_photon is None or self.n_phonon is None:
            raise ConfigError("n_photon and n_phonon must be given together")
        return ModeSpace(self.n_photon, self.n_phonon)

    def to_text(self) -> str:
        """Config text that parses back to this configuration."""
        lines = [f"experiment = {self.experiment}"]
        p = self.params
        for key in PARAM_KEYS:
            lines.append(f"{key} = {getattr(p, key)!r}")
        for f in fields(self):
            if f.name in ("experiment", "params", "output"):
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ", ".join(repr(float(v)) for v in value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


_OPTION_PARSERS = {
    "experiment": _experiment,
    "method": _method,
    "output": str,
    "ceiling": _int,
    "tol": _float,
    "threads": _int,
    "n_photon": _int,
    "n_phonon": _int,
    "grid_start": _float,
    "grid_stop": _float,
    "grid_points": _int,
    "ratios": _float_list,
    "n_th_values": _float_list,
    "ratio": _float,
    "dt": _float,
    "relax": _float,
    "window": _int,
    "t_switch": _float,
    "t_hold": _float,
    "settle": _float,
    "tail": _float,
    "ramp": _ramp,
    "figures": _bool,
}


def _param_value(text):
    if text.lower() == "none":
        return None
    return float(text)


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    """Parse configuration text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown or repeated keys, bad values, or physical
        parameters rejected by :class:`SystemParams`.
    """
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", lineno, source)
        if key not in _OPTION_PARSERS and key not in PARAM_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"key {key!r} repeated (first set on line {where[key]})", lineno, source)
        if not value:
            raise ConfigError(f"key {key!r} has no value", lineno, source)
        parser = _param_value if key in PARAM_KEYS else _OPTION_PARSERS[key]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None
        where[key] = lineno

    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'", None, source)
    for required in ("kappa", "gamma_m", "g0"):
        if values.get(required) is None:
            raise ConfigError(f"missing required parameter {required!r}", None, source)
    param_kwargs = {k: values.pop(k) for k in PARAM_KEYS if k in values}
    param_kwargs = {k: v for k, v in param_kwargs.items() if v is not None or k == "kappa_out"}
    try:
        params = SystemParams(**param_kwargs)
    except (ValueError, TypeError) as exc:
        # point at the first parameter the message names
        hits = [(m.start(), k) for k in param_kwargs if k in where
                for m in [re.search(rf"\b{k}\b", str(exc))] if m]
        if hits:
            line = where[min(hits)[1]]
        else:
            line = min((where[k] for k in param_kwargs if k in where), default=None)
        raise ConfigError(f"invalid physical parameters: {exc}", line, source) from None

    cfg = ExperimentConfig(experiment=values.pop("experiment"), params=params, **values)
    _validate(cfg, where, source)
    return cfg


def _validate(cfg: ExperimentConfig, where: dict, source):
    def fail(key, msg):
        raise ConfigError(msg, where.get(key), source)

    for key in ("ceiling", "threads", "window", "grid_points"):
        value = getattr(cfg, key)
        if value is not None and value < 1:
            fail(key, f"{key} must be a positive integer")
    if cfg.tol <= 0:
        fail("tol", "tol must be positive")
    try:
        cfg.space
    except (ConfigError, ValueError) as exc:
        fail("n_photon" if "n_photon" in where else "n_phonon", str(exc))
    grid_keys = [k for k in ("grid_start", "grid_stop", "grid_points") if getattr(cfg, k) is not None]
    if grid_keys and len(grid_keys) != 3:
        fail(grid_keys[0], "grid_start, grid_stop and grid_points must be given together")
    if cfg.experiment == "custom_spectrum" and not grid_keys:
        raise ConfigError("custom_spectrum needs grid_start, grid_stop and grid_points", None, source)
    if grid_keys and cfg.grid_stop <= cfg.grid_start:
        fail("grid_stop", "grid_stop must exceed grid_start")
    if any(r <= 0 for r in cfg.ratios):
        fail("ratios", "ratios must be positive")
    if cfg.ratio <= 0:
        fail("ratio", "ratio must be positive")
    if any(n < 0 for n in cfg.n_th_values):
        fail("n_th_values", "occupations must be non-negative")
    for key in ("dt", "relax", "t_switch", "t_hold", "settle", "tail"):
        value = getattr(cfg, key)
        if value is not None and value <= 0:
            fail(key, f"{key} must be positive")
    if cfg.experiment == "transistor" and cfg.params.eps_c <= 0:
        fail("eps_c", "the transistor experiment needs eps_c > 0")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
    return parse_config(text, source=str(path))
