"""Key-value configuration files for bounds, initial state and run settings.

The format is INI::

    [bounds]
    r0 = 2.0, 5.0
    c1 = 0.5, 2.0
    ...

    [initial_state]
    population = 67886004
    exposed_ratio = 2.0

Every section is optional; missing entries keep their defaults.  Bounds, if
given, must list all nine search coordinates.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .errors import ParseError
from .fitting import SEARCH_NAMES, FitConfig, InitialStateSpec, ParamBounds

# populations used when no configuration overrides them
POPULATIONS = {
    "United Kingdom": 67_886_004.0,
    "US": 331_002_647.0,
}

_PRESETS = {"United Kingdom": ParamBounds.uk, "US": ParamBounds.us}


def preset_bounds(country: str | None) -> ParamBounds:
    """US boxes for ``US``, the UK boxes otherwise."""
    if country is not None and country in _PRESETS:
        return _PRESETS[country]()
    return ParamBounds.uk()


@dataclass
class RunConfig:
    bounds: ParamBounds = field(default_factory=ParamBounds.uk)
    population: float | None = None
    exposed_ratio: float = 2.0
    group1_fraction: float = 0.5
    infection_scale: float = 1.0
    fit: FitConfig = field(default_factory=FitConfig)
    delta: int = 30
    c_factor: float = 1.0
    k_slack: float = 0.5

    def initial_state(self, population: float | None = None) -> InitialStateSpec:
        pop = population if population is not None else self.population
        if pop is None:
            raise ParseError("population is not configured; pass --population or set it in [initial_state]")
        return InitialStateSpec(
            population=pop,
            exposed_ratio=self.exposed_ratio,
            group1_fraction=self.group1_fraction,
            infection_scale=self.infection_scale,
        )


def _pair(section: str, key: str, raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ParseError(f"[{section}] {key}: expected 'lower, upper', got {raw!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ParseError(f"[{section}] {key}: {exc}") from exc


def _number(parser, section, key, kind=float):
    raw = parser.get(section, key)
    try:
        return kind(raw)
    except ValueError as exc:
        raise ParseError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}") from exc


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0]) from exc
    cfg = replace(base) if base is not None else RunConfig()

    known = {"bounds", "initial_state", "fit", "detection"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ParseError(f"unknown section(s) {sorted(unknown)}")

    if parser.has_section("bounds"):
        keys = set(parser.options("bounds"))
        extra = keys - set(SEARCH_NAMES)
        if extra:
            raise ParseError(f"[bounds] unknown parameter(s) {sorted(extra)}")
        missing = [name for name in SEARCH_NAMES if name not in keys]
        if missing:
            raise ParseError(f"[bounds] missing parameter(s) {missing}")
        ranges = {k: _pair("bounds", k, parser.get("bounds", k)) for k in SEARCH_NAMES}
        try:
            cfg.bounds = ParamBounds.from_dict(ranges)
        except ValueError as exc:
            raise ParseError(f"[bounds] {exc}") from exc

    if parser.has_section("initial_state"):
        for key in parser.options("initial_state"):
            if key not in {"population", "exposed_ratio", "group1_fraction", "infection_scale"}:
                raise ParseError(f"[initial_state] unknown key {key!r}")
            setattr(cfg, key, _number(parser, "initial_state", key))

    if parser.has_section("fit"):
        names = {f.name: f.type for f in fields(FitConfig)}
        updates = {}
        for key in parser.options("fit"):
            if key not in names:
                raise ParseError(f"[fit] unknown key {key!r}")
            if key == "polish":
                updates[key] = parser.get("fit", key).strip()
            elif key == "tol":
                updates[key] = _number(parser, "fit", key)
            else:
                updates[key] = _number(parser, "fit", key, int)
        try:
            cfg.fit = replace(cfg.fit, **updates)
        except ValueError as exc:
            raise ParseError(f"[fit] {exc}") from exc

    if parser.has_section("detection"):
        for key in parser.options("detection"):
            if key == "delta":
                cfg.delta = _number(parser, "detection", key, int)
            elif key in {"c_factor", "k_slack"}:
                setattr(cfg, key, _number(parser, "detection", key))
            else:
                raise ParseError(f"[detection] unknown key {key!r}")
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, base)


def format_bounds(bounds: ParamBounds) -> str:
    lines = ["[bounds]"]
    for name, (lo, hi) in bounds.as_dict().items():
        lines.append(f"{name} = {lo!r}, {hi!r}")
    return "\n".join(lines) + "\n"



# reference parameter sets used by ``simulate --preset`` and the examples
REFERENCE_THETA = {
    "United Kingdom": dict(beta=1.485, c1=0.704, c2=0.124, sigma=0.0517, m21=0.305,
                           n21=0.439, d=0.01604, r=0.283, alpha=0.1999),
    "US": dict(beta=1.027, c1=0.993, c2=0.199, sigma=0.0321, m21=0.3000,
               n21=0.989, d=0.00483, r=0.250, alpha=0.0899),
}
