"""Run configuration: INI-style ``key = value`` text with bracketed sections."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

PROBLEM_NAMES = ("taylor_green", "sedov", "noh", "triple_point", "uniform")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _meta(section: str, **kw):
    return {"section": section, **kw}


@dataclass
class RunConfig:
    # [problem]
    problem: str = field(default="taylor_green", metadata=_meta("problem", choices=PROBLEM_NAMES))
    dimension: int = field(default=2, metadata=_meta("problem", choices=(2, 3)))
    resolution: tuple = field(default=(8,), metadata=_meta("problem"))
    t_end: float | None = field(default=None, metadata=_meta("problem", positive=True))
    e0: float | None = field(default=None, metadata=_meta("problem", positive=True))
    distortion: float = field(default=0.0, metadata=_meta("problem", range=(0.0, 0.45)))
    # [solver]
    cfl: float = field(default=0.25, metadata=_meta("solver", range=(0.0, 1.0), open_low=True))
    riemann_iterations: int = field(default=2, metadata=_meta("solver", range=(1, 100)))
    shock_coefficient: float | None = field(default=None, metadata=_meta("solver", range=(0.0, 100.0)))
    surface_rule: str = field(default="galerkin", metadata=_meta("solver", choices=("galerkin", "centroid", "vertex")))
    volume_quadrature: int = field(default=2, metadata=_meta("solver", range=(2, 5)))
    mass_quadrature: int = field(default=3, metadata=_meta("solver", range=(2, 5)))
    max_steps: int = field(default=1_000_000, metadata=_meta("solver", range=(1, 10**9)))
    # [limiter]
    fct: bool = field(default=True, metadata=_meta("limiter"))
    slope: bool = field(default=True, metadata=_meta("limiter"))
    beta_c: float = field(default=1.0, metadata=_meta("limiter", range=(0.0, 1.0), open_low=True))
    beta_mode: str = field(default="conservative", metadata=_meta("limiter", choices=("conservative", "literal")))
    # [output]
    output_dir: str = field(default="output", metadata=_meta("output"))
    cadence: float = field(default=0.0, metadata=_meta("output", range=(0.0, float("inf"))))
    subcells: bool = field(default=False, metadata=_meta("output"))
    vtk: bool = field(default=True, metadata=_meta("output"))
    seed: int = field(default=0, metadata=_meta("output", range=(0, 2**63 - 1)))
    gates: bool = field(default=True, metadata=_meta("output"))

    @property
    def literal_beta_warning(self) -> bool:
        """True when the non-conservative literal beta scaling is active."""
        return self.beta_mode == "literal" and self.beta_c != 1.0

    def shape(self) -> tuple:
        """Resolution expanded to one element count per dimension."""
        if len(self.resolution) == 1:
            return tuple(self.resolution) * self.dimension
        return tuple(self.resolution)


SECTIONS = ("problem", "solver", "limiter", "output")
_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to the line it appears on."""
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines.setdefault((section, None), no)
        elif "=" in s:
            lines.setdefault((section, s.split("=", 1)[0].strip().lower()), no)
    return lines


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _convert(name: str, value: str):
    f = _FIELDS[name]
    kind = f.type.split("|")[0].strip()
    if value.strip().lower() == "none" and "None" in f.type:
        return None
    if name == "resolution":
        parts = value.lower().replace("x", " ").replace(",", " ").split()
        if not parts:
            raise ValueError("empty resolution")
        return tuple(int(p) for p in parts)
    if kind == "bool":
        return _parse_bool(value)
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value.strip()


def _check(name: str, value, cfg: RunConfig | None = None) -> None:
    meta = _FIELDS[name].metadata
    if value is None:
        return
    if "choices" in meta and value not in meta["choices"]:
        raise ValueError(f"{name} must be one of {list(meta['choices'])}, got {value!r}")
    if "range" in meta:
        lo, hi = meta["range"]
        bad_low = value <= lo if meta.get("open_low") else value < lo
        if bad_low or value > hi:
            bracket = "(" if meta.get("open_low") else "["
            raise ValueError(f"{name} = {value} outside {bracket}{lo}, {hi}]")
    if meta.get("positive") and not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if name == "resolution" and (len(value) not in (1, 2, 3) or min(value) < 1):
        raise ValueError(f"resolution must be 1 to 3 positive integers, got {value}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; defaults fill missing keys.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, type mismatches and
        out-of-range values, with the offending line number.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of a [section]", exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    lines = _key_lines(text)
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in _FIELDS:
                raise ConfigError(f"unknown key {key!r}", line)
            if _FIELDS[key].metadata["section"] != section:
                raise ConfigError(f"key {key!r} belongs in [{_FIELDS[key].metadata['section']}]", line)
            try:
                val = _convert(key, raw)
                _check(key, val)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}", line) from None
            values[key] = val
    cfg = RunConfig(**values)
    try:
        validate(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def validate(cfg: RunConfig) -> None:
    """Cross-field checks that no single key can express."""
    for name in _FIELDS:
        _check(name, getattr(cfg, name))
    res = cfg.resolution
    if len(res) not in (1, cfg.dimension):
        raise ValueError(f"resolution {res} does not match dimension {cfg.dimension}")
    if cfg.problem in ("taylor_green", "triple_point") and cfg.dimension != 2:
        raise ValueError(f"{cfg.problem} is two-dimensional")
    if cfg.problem != "triple_point" and len(set(cfg.shape())) != 1:
        raise ValueError(f"{cfg.problem} needs the same element count in every direction")
    if cfg.e0 is not None and cfg.problem != "sedov":
        raise ValueError("e0 applies to the sedov problem only")
    if cfg.distortion > 0.0 and cfg.problem != "uniform":
        raise ValueError("distortion applies to the uniform problem only")
    if cfg.problem == "triple_point":
        nx, ny = cfg.shape()
        if nx % 7 or ny % 2:
            raise ValueError("triple point resolution must be a multiple of 7 by an even number")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "x".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Render a config that ``parse_config`` maps back to an equal object."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for f in dataclasses.fields(RunConfig):
            if f.metadata["section"] != section:
                continue
            value = getattr(cfg, f.name)
            if value is None:
                continue
            out.append(f"{f.name} = {_format_value(value)}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
