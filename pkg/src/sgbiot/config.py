"""Run configurations: INI parsing, serialisation, overrides and built-in presets.

A configuration file has flat sections ``[mesh] [boundary] [loads] [stochastic]
[young] [conductivity] [physics] [solver] [output]``. Segments are written as
``x0 y0 x1 y1`` and separated by ``;``. Overrides use ``section.key=value``.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace

from .assembly import ScalarField
from .kl import kl_modes
from .mesh import BoundarySpec, RectDomain, Segment, Traction
from .stochastic import RandomFieldExpansion
from .system import PhysicalParams

SQRT3 = math.sqrt(3.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FieldModel:
    """Young modulus or conductivity model.

    ``constant``: spatially uniform modes ``relative_amplitudes[k] * mean``.
    ``kl``: ``modes`` exponential-kernel KL modes with standard deviation
    ``relative_sigma * mean``.
    """

    model: str = "constant"
    mean: float = 1.0
    relative_amplitudes: tuple = (0.1,)
    relative_sigma: float = 0.1
    modes: int = 1
    correlation_length: float = 2.0
    half_width: float = 1.0

    @property
    def M(self) -> int:
        return len(self.relative_amplitudes) if self.model == "constant" else self.modes

    def validate(self, name):
        if self.model not in ("constant", "kl"):
            raise ConfigError(f"[{name}] model must be 'constant' or 'kl', got {self.model!r}")
        if not self.mean > 0:
            raise ConfigError(f"[{name}] mean must be positive")
        if not self.half_width > 0:
            raise ConfigError(f"[{name}] half_width must be positive")
        if self.model == "kl" and (self.modes < 1 or self.correlation_length <= 0):
            raise ConfigError(f"[{name}] KL model needs modes >= 1 and a positive correlation length")

    def expansion(self, domain: RectDomain) -> RandomFieldExpansion:
        if self.model == "constant":
            modes = [ScalarField.constant(r * self.mean) for r in self.relative_amplitudes]
        else:
            modes = kl_modes(self.correlation_length, self.relative_sigma * self.mean,
                             domain, self.modes)
        return RandomFieldExpansion(ScalarField.constant(self.mean), modes,
                                    [self.half_width] * len(modes))


@dataclass(frozen=True)
class RunConfig:
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    level: int = 5
    u_dirichlet: tuple = ()
    p_dirichlet: tuple = ()
    traction_segments: tuple = ()
    traction_value: tuple = (0.0, 0.0)
    body_force: tuple = (0.0, 0.0)
    source: float = 0.0
    degree: int = 3
    young: FieldModel = field(default_factory=FieldModel)
    conductivity: FieldModel = field(default_factory=FieldModel)
    nu: float = 0.4
    alpha: float = 1.0
    storage: object = "alpha2_over_lambda"
    tol: float = 1e-6
    maxit: int = 500
    out_dir: str = ""
    out_fields: tuple = ()
    out_format: str = "csv"
    name: str = "custom"

    # --- derived objects ---------------------------------------------------
    def rect(self) -> RectDomain:
        return RectDomain(*self.domain)

    def boundary(self) -> BoundarySpec:
        traction = None
        if self.traction_segments:
            traction = Traction.constant([Segment(*s) for s in self.traction_segments],
                                         self.traction_value)
        return BoundarySpec(
            tuple(Segment(*s) for s in self.u_dirichlet),
            tuple(Segment(*s) for s in self.p_dirichlet),
            traction,
        )

    def physics(self) -> PhysicalParams:
        return PhysicalParams(self.nu, self.alpha, self.storage)

    def validate(self) -> None:
        if self.level < 1:
            raise ConfigError("mesh level must be positive")
        if self.degree < 0:
            raise ConfigError("stochastic degree must be non-negative")
        if not self.tol > 0 or self.maxit < 1:
            raise ConfigError("solver tol must be positive and maxit at least 1")
        if self.out_format not in ("csv", "vtk"):
            raise ConfigError("output format must be csv or vtk")
        self.young.validate("young")
        self.conductivity.validate("conductivity")
        try:
            self.physics()
            self.rect()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def parameter_echo(self) -> dict:
        par = self.physics()
        return {
            "nu": self.nu, "alpha": self.alpha, "s0": par.s0,
            "kappa0": self.conductivity.mean, "e0": self.young.mean,
            "level": self.level, "degree": self.degree,
            "M1": self.young.M, "M2": self.conductivity.M,
        }


# --- text conversion ---------------------------------------------------------

def _floats(text) -> tuple:
    text = str(text).replace(",", " ")
    return tuple(float(v) for v in text.split())


def _segments(text) -> tuple:
    text = str(text).strip()
    if not text:
        return ()
    segs = []
    for part in text.split(";"):
        vals = _floats(part)
        if len(vals) != 4:
            raise ConfigError(f"segment {part.strip()!r} needs four numbers")
        segs.append(vals)
    return tuple(segs)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_fmt(v) for v in value)
        return " ".join(_fmt(float(v)) if isinstance(v, (int, float)) else str(v) for v in value)
    return str(value)


_FIELD_KEYS = {
    "model": str, "mean": float, "relative_amplitudes": _floats,
    "relative_sigma": float, "modes": int, "correlation_length": float,
    "half_width": float,
}

# (section, key) -> (RunConfig attribute, parser)
_LAYOUT = {
    ("run", "name"): ("name", str),
    ("mesh", "domain"): ("domain", _floats),
    ("mesh", "level"): ("level", int),
    ("boundary", "u_dirichlet"): ("u_dirichlet", _segments),
    ("boundary", "p_dirichlet"): ("p_dirichlet", _segments),
    ("boundary", "traction_segments"): ("traction_segments", _segments),
    ("boundary", "traction_value"): ("traction_value", _floats),
    ("loads", "body_force"): ("body_force", _floats),
    ("loads", "source"): ("source", float),
    ("stochastic", "degree"): ("degree", int),
    ("physics", "nu"): ("nu", float),
    ("physics", "alpha"): ("alpha", float),
    ("physics", "storage"): ("storage", None),
    ("solver", "tol"): ("tol", float),
    ("solver", "maxit"): ("maxit", int),
    ("output", "dir"): ("out_dir", str),
    ("output", "fields"): ("out_fields", lambda s: tuple(str(s).replace(",", " ").split())),
    ("output", "format"): ("out_format", str),
}


def _storage(text):
    text = str(text).strip()
    if text == "alpha2_over_lambda":
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"storage must be 'alpha2_over_lambda' or a number, got {text!r}") from exc


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Return a copy with ``section.key=value`` strings applied in order."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, value = item.split("=", 1)
        cfg = set_value(cfg, key.strip(), value.strip())
    return cfg


def set_value(cfg: RunConfig, dotted: str, value) -> RunConfig:
    if "." not in dotted:
        raise ConfigError(f"key {dotted!r} must be written section.key")
    section, key = dotted.split(".", 1)
    if section in ("young", "conductivity"):
        if key not in _FIELD_KEYS:
            raise ConfigError(f"unknown key {dotted!r}")
        try:
            fm = replace(getattr(cfg, section), **{key: _FIELD_KEYS[key](value)})
        except ValueError as exc:
            raise ConfigError(f"bad value for {dotted}: {value!r}") from exc
        return replace(cfg, **{section: fm})
    if (section, key) not in _LAYOUT:
        raise ConfigError(f"unknown key {dotted!r}")
    attr, parse = _LAYOUT[(section, key)]
    try:
        parsed = _storage(value) if attr == "storage" else parse(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {dotted}: {value!r}") from exc
    return replace(cfg, **{attr: parsed})


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    base = preset(parser.get("run", "preset")) if parser.has_option("run", "preset") else RunConfig()
    items = []
    for section in parser.sections():
        for key, value in parser.items(section):
            if (section, key) == ("run", "preset"):
                continue
            items.append(f"{section}.{key}={value}")
    return apply_overrides(base, items)


def load(path) -> RunConfig:
    with open(path) as fh:
        return loads(fh.read())


def dumps(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for (section, key), (attr, _) in _LAYOUT.items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, _fmt(getattr(cfg, attr)))
    for section in ("young", "conductivity"):
        parser.add_section(section)
        fm = getattr(cfg, section)
        for f in fields(FieldModel):
            parser.set(section, f.name, _fmt(getattr(fm, f.name)))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# --- presets -----------------------------------------------------------------

def _square_segments(lo, hi):
    u = ((lo, lo, hi, lo), (lo, lo, lo, hi))
    p = ((lo, hi, hi, hi), (hi, lo, hi, hi))
    return u, p


def example1() -> RunConfig:
    u, p = _square_segments(0.0, 1.0)
    return RunConfig(
        name="example1", domain=(0.0, 1.0, 0.0, 1.0), level=5, u_dirichlet=u, p_dirichlet=p,
        body_force=(1.0, 1.0), degree=3,
        young=FieldModel("constant", 1e5, (0.1,)),
        conductivity=FieldModel("constant", 1.0, (0.1,)),
        nu=0.4, alpha=1.0,
    )


def example2() -> RunConfig:
    u, p = _square_segments(-1.0, 1.0)
    return RunConfig(
        name="example2", domain=(-1.0, 1.0, -1.0, 1.0), level=5, u_dirichlet=u, p_dirichlet=p,
        body_force=(1.0, 1.0), degree=3,
        young=FieldModel("kl", 1e5, relative_sigma=0.1, modes=3, correlation_length=2.0,
                         half_width=SQRT3),
        conductivity=FieldModel("kl", 1.0, relative_sigma=0.1, modes=3,
                                correlation_length=2.0, half_width=SQRT3),
        nu=0.4, alpha=1.0,
    )


def example3() -> RunConfig:
    left = (-5.0, 0.0, -5.0, 10.0)
    bottom = (-5.0, 0.0, 5.0, 0.0)
    right = (5.0, 0.0, 5.0, 10.0)
    top = (-5.0, 10.0, 5.0, 10.0)
    return RunConfig(
        name="example3", domain=(-5.0, 5.0, 0.0, 10.0), level=5,
        u_dirichlet=(left, bottom, right),
        p_dirichlet=(left, bottom, right, top),
        traction_segments=((-2.0, 10.0, 2.0, 10.0),), traction_value=(0.0, -1.5e4),
        body_force=(0.0, 0.0), degree=4,
        young=FieldModel("constant", 3e4, (0.5,)),
        conductivity=FieldModel("constant", 1e-4, (0.5,)),
        nu=0.4995, alpha=0.1, storage=30.0,
        out_fields=("u1", "u2", "pF"),
    )


PRESETS = {"example1": example1, "example2": example2, "example3": example3}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def check_positivity(cfg: RunConfig, mesh) -> dict:
    """Positivity margins of both expansions at the quadrature points of ``mesh``."""
    from .assembly import _element_data

    ed = _element_data(mesh)
    dom = cfg.rect()
    out = {}
    for name in ("young", "conductivity"):
        exp = getattr(cfg, name).expansion(dom)
        margin = exp.positivity_margin(ed.x, ed.y)
        if not margin > 0:
            raise ConfigError(
                f"{name} field can become non-positive (margin {margin:.3g}); reduce the mode amplitudes"
            )
        out[name] = margin
    return out

