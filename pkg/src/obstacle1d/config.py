"""Scenario configuration files (INI sections, quoted expressions).

Example::

    [grid]
    x_min = -1
    x_max = 1
    t_min = -1
    t_max = 1
    nx = 201
    nt = 801

    [coefficients]
    a = "1"
    f = "1"

    [initial]
    u = "max(0, -t)"

    [analysis]
    classify = auto

Every key must be known; unknown keys and sections are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ExprError
from .expr import Node, parse_expression

PROBLEMS = ("obstacle", "american_put", "family_portrait")

SECTIONS = {
    "grid": {"x_min", "x_max", "t_min", "t_max", "nx", "nt", "h", "tau"},
    "coefficients": {"a", "b", "c", "f", "delta"},
    "initial": {"u"},
    "boundary": {"left", "right"},
    "solver": {"theta", "omega", "tol", "max_iter"},
    "analysis": {
        "problem", "classify", "max_points", "energy_points", "energy_times", "phi_m",
        "blowup_points", "blowup_eps", "blowup_factor", "smoothfit", "portrait_m", "profiles",
        "put_k", "put_r", "put_sigma", "put_t", "put_s_min", "put_margin", "put_ref_factor",
    },
    "output": {"dir", "field"},
}

# sections a problem type may use
ALLOWED = {
    "obstacle": {"grid", "coefficients", "initial", "boundary", "solver", "analysis", "output"},
    "american_put": {"grid", "solver", "analysis", "output"},
    "family_portrait": {"grid", "analysis", "output"},
}


def _unquote(raw: str) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    return raw


@dataclass
class ScenarioConfig:
    name: str
    text: str
    problem: str
    values: dict = field(default_factory=dict)

    def has(self, section: str, key: str) -> bool:
        return key in self.values.get(section, {})

    def raw(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def _where(self, section: str, key: str) -> str:
        return f"[{section}] {key}"

    def number(self, section: str, key: str, default=None, kind=float):
        raw = self.raw(section, key)
        if raw is None:
            if default is None:
                raise ConfigError(f"{self._where(section, key)} is required")
            return default
        try:
            return kind(_unquote(raw)) if kind is not int else int(float(_unquote(raw)))
        except ValueError as exc:
            raise ConfigError(f"{self._where(section, key)}: expected a number, got {raw!r}") from exc

    def flag(self, section: str, key: str, default: bool = False) -> bool:
        raw = self.raw(section, key)
        if raw is None:
            return default
        v = _unquote(raw).lower()
        if v in ("1", "yes", "true", "on"):
            return True
        if v in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"{self._where(section, key)}: expected yes/no, got {raw!r}")

    def text_value(self, section: str, key: str, default: str | None = None) -> str | None:
        raw = self.raw(section, key)
        return default if raw is None else _unquote(raw)

    def expression(self, section: str, key: str, default: str | None = None) -> Node:
        src = self.text_value(section, key, default)
        if src is None:
            raise ConfigError(f"{self._where(section, key)} is required")
        try:
            return parse_expression(src)
        except ExprError as exc:
            raise ConfigError(f"{self._where(section, key)}: {exc}") from exc

    def floats(self, section: str, key: str, default: str | None = None) -> list:
        src = self.text_value(section, key, default)
        if src is None or not src.strip():
            return []
        try:
            return [float(v) for v in src.replace(";", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"{self._where(section, key)}: expected a comma-separated list of numbers") from exc

    def points(self, section: str, key: str) -> list:
        """``"x, t; x, t"`` as a list of pairs."""
        src = self.text_value(section, key)
        if src is None or not src.strip():
            return []
        out = []
        for chunk in src.split(";"):
            if not chunk.strip():
                continue
            parts = [p for p in chunk.split(",") if p.strip()]
            try:
                x, t = (float(p) for p in parts)
            except ValueError as exc:
                raise ConfigError(f"{self._where(section, key)}: points are written 'x, t; x, t'") from exc
            out.append((x, t))
        return out


def parse_config(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse and check config text; raises :class:`ConfigError` naming the offending key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   default_section="__unused__")
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    values = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in cp.items(sec):
            if key not in SECTIONS[sec]:
                raise ConfigError(f"[{sec}] {key}: unknown key")
        values[sec] = dict(cp.items(sec))
    problem = _unquote(values.get("analysis", {}).get("problem", "obstacle"))
    if problem not in PROBLEMS:
        raise ConfigError(f"[analysis] problem: unknown problem {problem!r}; choose one of {', '.join(PROBLEMS)}")
    for sec in values:
        if sec not in ALLOWED[problem]:
            raise ConfigError(f"section [{sec}] is not used by problem {problem!r}")
    cfg = ScenarioConfig(name, text, problem, values)
    _check(cfg)
    return cfg


def _check(cfg: ScenarioConfig) -> None:
    """Parse every expression and number once so errors surface before any work."""
    for sec, keys in cfg.values.items():
        for key in keys:
            if sec in ("coefficients", "initial", "boundary") and key != "delta":
                cfg.expression(sec, key)
            elif sec in ("grid", "solver") or key == "delta":
                cfg.number(sec, key)
    g = cfg.values.get("grid", {})
    if cfg.problem == "american_put":
        extra = set(g) - {"h", "tau"}
        if extra:
            raise ConfigError(f"[grid] {sorted(extra)[0]}: the put box is derived from the scenario; "
                              "only h and tau may be set")
    else:
        for key in ("x_min", "x_max", "t_min", "t_max"):
            if key not in g:
                raise ConfigError(f"[grid] {key} is required")
        if ("nx" in g) == ("h" in g):
            raise ConfigError("[grid] give exactly one of nx and h")
        if ("nt" in g) == ("tau" in g):
            raise ConfigError("[grid] give exactly one of nt and tau")
    if cfg.problem == "obstacle" and not cfg.has("initial", "u"):
        raise ConfigError("[initial] u is required")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError:
        raise
    return parse_config(text, path.stem)
