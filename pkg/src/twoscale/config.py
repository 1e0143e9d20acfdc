"""Run configuration: strict flat key-value format with one dotted level.

A configuration is a plain-text file of ``section.key = value`` lines (the
bare key ``mode`` lives outside any section). Parsing is strict: unknown
keys, bad types, and constraint violations are errors naming the offending
key, so typos never silently fall back to defaults. A serialized config
parses back to an identical object, which also makes configs diffable line
by line.
"""

from __future__ import annotations

import dataclasses
import difflib
from dataclasses import dataclass

from .errors import ConfigError

MODES = ("cells-only", "simulate", "convergence", "sweep")
VARIANTS = ("mixed", "pure-dirichlet")
H_PROFILES = ("auto", "constant-front", "parabola")
C0_CHOICES = ("auto", "zero", "one")
SWEEP_PARAMETERS = ("amplitude", "frequency")


def _opt(key: str, default, kind=None, choices=None):
    """Dataclass field carrying its external dotted key and value kind."""
    return dataclasses.field(default=default, metadata={
        "key": key,
        "kind": kind if kind is not None else type(default),
        "choices": choices,
    })


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run, flat, with model-problem defaults.

    The defaults encode the reference configuration: unit square domain,
    unit Lame parameters, isotropic reference diffusivity 0.5, lateral
    amplitude 0.25 at frequency 1, Crank-Nicolson stepping with dt = 0.05.
    `h_profile` and `c0` default to "auto", which resolves them from the
    boundary-condition variant (mixed: constant front, zero initial state;
    pure Dirichlet: parabolic profile, unit initial state).
    """

    mode: str = _opt("mode", "simulate", choices=MODES)

    macro_lower_x: float = _opt("geometry.macro_lower_x", -0.5)
    macro_lower_y: float = _opt("geometry.macro_lower_y", -0.5)
    macro_upper_x: float = _opt("geometry.macro_upper_x", 0.5)
    macro_upper_y: float = _opt("geometry.macro_upper_y", 0.5)
    macro_refinement: int = _opt("geometry.macro_refinement", 4)
    cell_refinement: int = _opt("geometry.cell_refinement", 5)

    lam: float = _opt("physics.lambda", 1.0)
    mu: float = _opt("physics.mu", 1.0)
    d_hat_11: float = _opt("physics.d_hat_11", 0.5)
    d_hat_12: float = _opt("physics.d_hat_12", 0.0)
    d_hat_22: float = _opt("physics.d_hat_22", 0.5)
    amplitude: float = _opt("physics.amplitude", 0.25)
    frequency: float = _opt("physics.frequency", 1.0)
    variant: str = _opt("physics.variant", "mixed", choices=VARIANTS)
    h_profile: str = _opt("physics.h_profile", "auto", choices=H_PROFILES)
    c0: str = _opt("physics.c0", "auto", choices=C0_CHOICES)
    theta: float = _opt("physics.theta", 0.5)
    dt: float = _opt("physics.dt", 0.05)
    t_end: float = _opt("physics.t_end", 1.5)
    j_min: float = _opt("physics.j_min", 1e-8)
    ys_area: float = _opt("physics.ys_area", 0.0)

    out_dir: str = _opt("outputs.directory", "out")
    vtk_stride: int = _opt("outputs.vtk_stride", 0)

    workers: int = _opt("parallel.workers", 1)

    cache_enabled: bool = _opt("cache.enabled", True)
    quantization: float = _opt("cache.quantization", 0.0)

    max_cycle: int = _opt("convergence.max_cycle", 6)
    t_eval: float = _opt("convergence.t_eval", 1.5)

    sweep_parameter: str = _opt("sweep.parameter", "amplitude",
                                choices=SWEEP_PARAMETERS)
    sweep_values: tuple = _opt("sweep.values", (-0.125, 0.0, 0.125, 0.25),
                               kind="floats")
    sweep_t_end: float = _opt("sweep.t_end", 10.0)


_FIELDS = dataclasses.fields(RunConfig)
KEY_TO_FIELD = {f.metadata["key"]: f for f in _FIELDS}


def _parse_value(key: str, field: dataclasses.Field, text: str):
    kind = field.metadata["kind"]
    text = text.strip()
    try:
        if kind is bool:
            if text not in ("true", "false"):
                raise ValueError
            value = text == "true"
        elif kind is int:
            value = int(text)
        elif kind is float:
            value = float(text)
        elif kind == "floats":
            parts = [p for p in text.split(",") if p.strip()]
            if not parts:
                raise ValueError
            value = tuple(float(p) for p in parts)
        else:
            value = text
    except ValueError:
        expected = kind if isinstance(kind, str) else kind.__name__
        raise ConfigError(
            f"{key}: expected {expected} value, got {text!r}") from None
    choices = field.metadata["choices"]
    if choices is not None and value not in choices:
        raise ConfigError(
            f"{key}: {value!r} is not one of {', '.join(choices)}")
    return value


def _format_value(field: dataclasses.Field, value) -> str:
    kind = field.metadata["kind"]
    if kind is bool:
        return "true" if value else "false"
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind is float:
        return repr(float(value))
    return str(value)


def _unknown_key(key: str) -> ConfigError:
    close = difflib.get_close_matches(key, KEY_TO_FIELD, n=1)
    hint = f" (did you mean {close[0]!r}?)" if close else ""
    return ConfigError(f"unknown configuration key {key!r}{hint}")


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check cross-field constraints; error messages carry the dotted keys."""
    def require(ok: bool, key: str, message: str):
        if not ok:
            raise ConfigError(f"{key}: {message}")

    require(cfg.macro_lower_x < cfg.macro_upper_x, "geometry.macro_upper_x",
            "macro bounds must satisfy lower < upper in x")
    require(cfg.macro_lower_y < cfg.macro_upper_y, "geometry.macro_upper_y",
            "macro bounds must satisfy lower < upper in y")
    require(cfg.macro_refinement >= 0, "geometry.macro_refinement",
            "must be >= 0")
    require(cfg.cell_refinement >= 0, "geometry.cell_refinement",
            "must be >= 0")
    require(cfg.mu > 0.0, "physics.mu", "must be positive")
    require(cfg.lam + cfg.mu > 0.0, "physics.lambda",
            "lambda + mu must be positive")
    det = cfg.d_hat_11 * cfg.d_hat_22 - cfg.d_hat_12 ** 2
    require(cfg.d_hat_11 > 0.0 and det > 0.0, "physics.d_hat_11",
            "reference diffusivity must be symmetric positive definite")
    require(cfg.frequency > 0.0, "physics.frequency", "must be positive")
    require(0.0 <= cfg.theta <= 1.0, "physics.theta", "must lie in [0, 1]")
    require(cfg.dt > 0.0, "physics.dt", "must be positive")
    require(cfg.t_end >= 0.0, "physics.t_end", "must be nonnegative")
    require(cfg.j_min > 0.0, "physics.j_min", "must be positive")
    require(cfg.ys_area >= 0.0, "physics.ys_area",
            "must be nonnegative (0 selects the solid-cell area)")
    require(cfg.vtk_stride >= 0, "outputs.vtk_stride", "must be >= 0")
    require(cfg.workers >= 1, "parallel.workers", "must be >= 1")
    require(cfg.quantization >= 0.0, "cache.quantization",
            "must be nonnegative")
    require(cfg.max_cycle >= 2, "convergence.max_cycle", "must be >= 2")
    require(cfg.t_eval > 0.0, "convergence.t_eval", "must be positive")
    require(len(cfg.sweep_values) > 0, "sweep.values",
            "needs at least one value")
    require(cfg.sweep_t_end > 0.0, "sweep.t_end", "must be positive")
    return cfg


def config_from_mapping(pairs: dict, base: RunConfig | None = None) -> RunConfig:
    """Build a config from {dotted key: raw string}, over `base` or defaults."""
    updates = {}
    for key, text in pairs.items():
        field = KEY_TO_FIELD.get(key)
        if field is None:
            raise _unknown_key(key)
        updates[field.name] = _parse_value(key, field, text)
    cfg = dataclasses.replace(base, **updates) if base is not None \
        else RunConfig(**updates)
    return validate_config(cfg)


def parse_config_text(text: str, base: RunConfig | None = None,
                      source: str = "<config>") -> RunConfig:
    """Parse `key = value` lines; '#' starts a comment, blanks are skipped."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return config_from_mapping(pairs, base)


def parse_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, base, source=str(path))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply `key=value` strings (highest precedence, e.g. from --set)."""
    pairs = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value
    return config_from_mapping(pairs, base=cfg)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parsing it back yields an identical config."""
    lines = [f"{f.metadata['key']} = "
             f"{_format_value(f, getattr(cfg, f.name))}" for f in _FIELDS]
    return "\n".join(lines) + "\n"


def config_mapping(cfg: RunConfig) -> dict:
    """{dotted key: formatted value}, useful for diffing two configs."""
    return {f.metadata["key"]: _format_value(f, getattr(cfg, f.name))
            for f in _FIELDS}
