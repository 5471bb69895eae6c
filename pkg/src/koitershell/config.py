"""Run configuration: a flat ``section.key = value`` text format.

Grammar
-------
One assignment per line, ``key = value``.  Blank lines and lines starting
with ``#`` are ignored, as is anything after an unquoted ``#``.  Keys are
unique; unknown keys are an error.  Lists are comma separated.  Numbers may
be written as multiples of ``pi`` (``4pi``, ``-2pi``).  ``preset = figure3``
loads the preset values first, whatever its position; explicit keys then
override them.

Keys and defaults (the empty file gives a deterministic flat-plate run)::

    equation          = shell            # sde | shell
    chart             = flat             # chart id, see koitershell.charts
    master_seed       = 0
    output_dir        = out
    grid.n1, grid.n2  = 64, 64
    grid.ly1, grid.ly2 = 2pi, 2pi        # periods
    grid.origin1, grid.origin2 = 0, 0
    params.eps0 = 1    params.rho_s = 1   params.lambda_e = 1   params.mu_e = 1
    params.nu_e = 0    params.alpha = 1   params.beta = 0
    params.g_vec = 0,0,0                  params.g_scal = zero
    params.disp_bound_L = 1
    noise.fields      = none             # noise ids, see koitershell.stochastic
    time.dt           = 0.001
    time.t_end        = 1
    time.snapshots    = 1                # comma separated times in [0, t_end]
    time.diag_every   = 10               # steps between diagnostics rows
    initial.eta       = sin:1,0,0.1      # field ids, see koitershell.fields
    initial.eta_dot   = zero
    ensemble.n_paths  = 1
    ensemble.thresholds = 1
    ensemble.workers  = 1

The ``figure3`` preset sets ``equation = sde``, a 128 x 128 grid on
``[-2pi, 2pi]^2``, ``noise.fields = figure3``,
``initial.eta = gaussian:pi,pi``, ``time.t_end = 1`` and
``time.snapshots = 0.25,0.5,1``.
"""
import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .charts import get_chart
from .elasticity import ShellParams
from .errors import KoiterError, ParseError, ValidationError
from .fields import parse_number, resolve_scalar_field
from .spectral import build_grid


@dataclass(frozen=True)
class GridConfig:
    n1: int = 64
    n2: int = 64
    ly1: float = 2 * np.pi
    ly2: float = 2 * np.pi
    origin1: float = 0.0
    origin2: float = 0.0

    def build(self):
        return build_grid(self.n1, self.n2, (self.ly1, self.ly2), (self.origin1, self.origin2))


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    snapshots: tuple = (1.0,)
    diag_every: int = 10

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class InitialConfig:
    eta: str = "sin:1,0,0.1"
    eta_dot: str = "zero"


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int = 1
    thresholds: tuple = (1.0,)
    workers: int = 1


@dataclass(frozen=True)
class Config:
    equation: str = "shell"
    chart: str = "flat"
    grid: GridConfig = field(default_factory=GridConfig)
    params: ShellParams = field(default_factory=ShellParams)
    noise: str = "none"
    time: TimeConfig = field(default_factory=TimeConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    output_dir: str = "out"
    master_seed: int = 0


PRESETS = {
    "figure3": {
        "equation": "sde",
        "grid.n1": "128",
        "grid.n2": "128",
        "grid.ly1": "4pi",
        "grid.ly2": "4pi",
        "grid.origin1": "-2pi",
        "grid.origin2": "-2pi",
        "noise.fields": "figure3",
        "initial.eta": "gaussian:pi,pi",
        "initial.eta_dot": "zero",
        "time.dt": "0.001",
        "time.t_end": "1",
        "time.snapshots": "0.25,0.5,1",
        "time.diag_every": "10",
    },
}

_SECTIONS = {
    "grid": GridConfig,
    "params": ShellParams,
    "time": TimeConfig,
    "initial": InitialConfig,
    "ensemble": EnsembleConfig,
}
_TOP = {"equation": str, "chart": str, "output_dir": str, "master_seed": int}
_ALIASES = {"noise.fields": "noise"}


def _field_types(cls):
    return {f.name: f.default for f in fields(cls)}


def _known_keys():
    keys = set(_TOP) | set(_ALIASES)
    for sec, cls in _SECTIONS.items():
        keys |= {f"{sec}.{name}" for name in _field_types(cls)}
    return keys


def _convert(key, raw, default):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            v = parse_number(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if isinstance(default, float):
            return parse_number(raw)
        if isinstance(default, tuple):
            items = [x for x in raw.split(",") if x.strip()]
            return tuple(parse_number(x) for x in items)
        return raw
    except (ValueError, KoiterError):
        raise ValueError(f"bad value {raw!r} for {key}") from None


def _lex(text):
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {line.strip()!r}", lineno)
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if key != "preset" and key not in _known_keys():
            raise ParseError(f"unknown key {key!r}", lineno)
        entries[key] = (value, lineno)
    return entries


def parse_config(text):
    entries = _lex(text)
    if "preset" in entries:
        name, lineno = entries.pop("preset")
        if name not in PRESETS:
            raise ParseError(f"unknown preset {name!r}", lineno)
        merged = {k: (v, None) for k, v in PRESETS[name].items()}
        merged.update(entries)
        entries = merged

    top = {}
    sections = {sec: {} for sec in _SECTIONS}
    for key, (raw, lineno) in entries.items():
        key = _ALIASES.get(key, key)
        try:
            if "." in key:
                sec, name = key.split(".", 1)
                default = _field_types(_SECTIONS[sec])[name]
                sections[sec][name] = _convert(key, raw, default)
            elif key == "noise":
                top["noise"] = raw
            else:
                top[key] = _convert(key, raw, _TOP[key]())
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    try:
        params = ShellParams(**sections.pop("params"))
    except ValidationError as exc:
        raise ValidationError(f"params: {exc}") from None
    built = {sec: cls(**sections[sec]) for sec, cls in _SECTIONS.items() if sec != "params"}
    cfg = Config(params=params, **built, **top)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    from .stochastic import make_noise_model

    problems = []
    if cfg.equation not in ("sde", "shell"):
        problems.append(f"equation must be 'sde' or 'shell', got {cfg.equation!r}")
    t = cfg.time
    if not t.dt > 0:
        problems.append(f"time.dt must be > 0 (got {t.dt})")
    elif not t.t_end >= t.dt:
        problems.append(f"time.t_end must be >= time.dt (got {t.t_end} < {t.dt})")
    if any(not 0 <= s <= t.t_end for s in t.snapshots):
        problems.append(f"time.snapshots must lie in [0, t_end]: {t.snapshots}")
    if t.diag_every < 1:
        problems.append("time.diag_every must be >= 1")
    if cfg.ensemble.n_paths < 1:
        problems.append("ensemble.n_paths must be >= 1")
    if cfg.ensemble.workers < 1:
        problems.append("ensemble.workers must be >= 1")
    if cfg.master_seed < 0:
        problems.append("master_seed must be non-negative")
    try:
        get_chart(cfg.chart)
    except KoiterError as exc:
        problems.append(f"chart: {exc}")
    if cfg.chart != "flat":
        problems.append("the evolution model is posed on the flat torus; use chart = flat "
                        "(other charts are available to the geometry command)")
    try:
        grid = cfg.grid.build()
    except KoiterError as exc:
        problems.append(f"grid: {exc}")
        grid = None
    if grid is not None:
        for label, spec in (("initial.eta", cfg.initial.eta),
                            ("initial.eta_dot", cfg.initial.eta_dot),
                            ("params.g_scal", cfg.params.g_scal)):
            try:
                resolve_scalar_field(spec, grid)
            except KoiterError as exc:
                problems.append(f"{label}: {exc}")
        try:
            make_noise_model(cfg.noise, grid)
        except KoiterError as exc:
            problems.append(f"noise.fields: {exc}")
    if problems:
        raise ValidationError("; ".join(problems))
    return cfg


def _fmt(v):
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg):
    """Serialise every key explicitly; ``parse_config(dump_config(c)) == c``."""
    lines = [f"equation = {cfg.equation}", f"chart = {cfg.chart}",
             f"master_seed = {cfg.master_seed}", f"output_dir = {cfg.output_dir}",
             f"noise.fields = {cfg.noise}"]
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        for f in fields(obj):
            lines.append(f"{sec}.{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def with_overrides(cfg, **changes):
    """``replace`` that accepts dotted section keys, e.g. ``{'time.dt': 1e-4}``."""
    top = {}
    nested = {}
    for key, value in changes.items():
        if "." in key:
            sec, name = key.split(".", 1)
            nested.setdefault(sec, {})[name] = value
        else:
            top[key] = value
    for sec, vals in nested.items():
        top[sec] = replace(getattr(cfg, sec), **vals)
    return replace(cfg, **top)
