"""Line-oriented run configuration: ``section.key = value``.

Blank lines and ``#`` comments are ignored.  Parsing validates the whole
document and reports every problem at once, each with its line number,
rather than stopping at the first.  The schema is small on purpose: it maps
one to one onto the solver knobs and diffs cleanly in experiment logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .adaptive import DEFAULT_RATIO_CAP


class ConfigError(ValueError):
    """Carries every validation message of one parse."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class DomainConfig:
    L: float = 1.0
    M: int = 128
    eps: float = 0.01
    origin: float = 0.0


@dataclass
class TimeConfig:
    T: float = 1.0
    scheme: str = "uniform"  # uniform | adaptive | random-mesh
    tau: float = 1e-2
    n: int = 100  # step count of the random-mesh scheme
    seed: int = 0


@dataclass
class AdaptiveSection:
    rho: float = 0.6
    tol: float = 1e-4
    tau_max: float = 0.1
    tau_min: float = 1e-3
    ratio_cap: float | None = DEFAULT_RATIO_CAP
    max_rejects: int = 20
    norm: str = "l2"


@dataclass
class InitConfig:
    kind: str = "coarsening"  # four_bubble | coarsening | mms | file
    base: float = 0.0
    amp: float = 0.05
    seed: int = 0
    path: str = ""


@dataclass
class NewtonSection:
    tol: float = 1e-12
    max_iter: int = 50
    lin_rtol: float = 1e-13


@dataclass
class ConstraintPolicy:
    s0: str = "warn"
    s1: str = "warn"
    energy_law: str = "warn"
    max_principle: str = "warn"


@dataclass
class OutputConfig:
    dir: str = "out"
    snapshots: list[float] = field(default_factory=list)
    csv: bool = True
    snapshot_text: bool = False


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    adaptive: AdaptiveSection = field(default_factory=AdaptiveSection)
    init: InitConfig = field(default_factory=InitConfig)
    newton: NewtonSection = field(default_factory=NewtonSection)
    constraints: ConstraintPolicy = field(default_factory=ConstraintPolicy)
    output: OutputConfig = field(default_factory=OutputConfig)
    explicit_keys: set[str] = field(default_factory=set, repr=False, compare=False)


def _parse_float(raw: str) -> float:
    val = float(raw)
    if not math.isfinite(val):
        raise ValueError
    return val


def _parse_int(raw: str) -> int:
    if raw.strip().lstrip("+-").isdigit():
        return int(raw)
    raise ValueError


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ValueError


def _parse_float_list(raw: str) -> list[float]:
    raw = raw.strip()
    if not raw:
        return []
    return [_parse_float(part) for part in raw.split(",")]


def _parse_cap(raw: str) -> float | None:
    if raw.strip().lower() in ("off", "none"):
        return None
    return _parse_float(raw)


# key -> (section attr, field attr, parser, human-readable type)
_SCHEMA: dict[str, tuple[str, str, object, str]] = {
    "domain.L": ("domain", "L", _parse_float, "float"),
    "domain.M": ("domain", "M", _parse_int, "int"),
    "domain.eps": ("domain", "eps", _parse_float, "float"),
    "domain.origin": ("domain", "origin", _parse_float, "float"),
    "time.T": ("time", "T", _parse_float, "float"),
    "time.scheme": ("time", "scheme", str.strip, "string"),
    "time.tau": ("time", "tau", _parse_float, "float"),
    "time.n": ("time", "n", _parse_int, "int"),
    "time.seed": ("time", "seed", _parse_int, "int"),
    "adaptive.rho": ("adaptive", "rho", _parse_float, "float"),
    "adaptive.tol": ("adaptive", "tol", _parse_float, "float"),
    "adaptive.tau_max": ("adaptive", "tau_max", _parse_float, "float"),
    "adaptive.tau_min": ("adaptive", "tau_min", _parse_float, "float"),
    "adaptive.ratio_cap": ("adaptive", "ratio_cap", _parse_cap, "float or 'off'"),
    "adaptive.max_rejects": ("adaptive", "max_rejects", _parse_int, "int"),
    "adaptive.norm": ("adaptive", "norm", str.strip, "string"),
    "init.kind": ("init", "kind", str.strip, "string"),
    "init.base": ("init", "base", _parse_float, "float"),
    "init.amp": ("init", "amp", _parse_float, "float"),
    "init.seed": ("init", "seed", _parse_int, "int"),
    "init.path": ("init", "path", str.strip, "string"),
    "newton.tol": ("newton", "tol", _parse_float, "float"),
    "newton.max_iter": ("newton", "max_iter", _parse_int, "int"),
    "newton.lin_rtol": ("newton", "lin_rtol", _parse_float, "float"),
    "constraints.s0": ("constraints", "s0", str.strip, "string"),
    "constraints.s1": ("constraints", "s1", str.strip, "string"),
    "constraints.energy_law": ("constraints", "energy_law", str.strip, "string"),
    "constraints.max_principle": ("constraints", "max_principle", str.strip, "string"),
    "output.dir": ("output", "dir", str.strip, "string"),
    "output.snapshots": ("output", "snapshots", _parse_float_list, "float list"),
    "output.csv": ("output", "csv", _parse_bool, "on/off"),
    "output.snapshot_text": ("output", "snapshot_text", _parse_bool, "on/off"),
}

_SCHEMES = ("uniform", "adaptive", "random-mesh")
_INIT_KINDS = ("four_bubble", "coarsening", "mms", "file")
_POLICIES = ("enforce", "warn", "off")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config document; collect every error."""
    cfg = RunConfig()
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'section.key = value'")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        entry = _SCHEMA.get(key)
        if entry is None:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        section, attr, parser, typename = entry
        try:
            parsed = parser(value)
        except ValueError:
            errors.append(
                f"line {lineno}: value '{value}' for '{key}' is not {typename}"
            )
            continue
        setattr(getattr(cfg, section), attr, parsed)
        cfg.explicit_keys.add(key)
    errors.extend(_validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg: RunConfig) -> list[str]:
    errs: list[str] = []
    if cfg.domain.L <= 0.0:
        errs.append("domain.L must be positive")
    if cfg.domain.M < 2:
        errs.append("domain.M must be at least 2")
    if cfg.domain.eps <= 0.0:
        errs.append("domain.eps must be positive")
    if cfg.time.T <= 0.0:
        errs.append("time.T must be positive")
    if cfg.time.scheme not in _SCHEMES:
        errs.append(f"time.scheme must be one of {', '.join(_SCHEMES)}")
    if cfg.time.tau <= 0.0:
        errs.append("time.tau must be positive")
    if cfg.time.n < 1:
        errs.append("time.n must be at least 1")
    if not 0.0 < cfg.adaptive.rho <= 1.0:
        errs.append("adaptive.rho must lie in (0, 1]")
    if cfg.adaptive.tol <= 0.0:
        errs.append("adaptive.tol must be positive")
    if cfg.adaptive.tau_min <= 0.0 or cfg.adaptive.tau_max <= 0.0:
        errs.append("adaptive step window must be positive")
    elif cfg.adaptive.tau_min > cfg.adaptive.tau_max:
        errs.append("adaptive.tau_min exceeds adaptive.tau_max")
    if cfg.adaptive.ratio_cap is not None and cfg.adaptive.ratio_cap <= 0.0:
        errs.append("adaptive.ratio_cap must be positive or 'off'")
    if cfg.adaptive.max_rejects < 1:
        errs.append("adaptive.max_rejects must be at least 1")
    if cfg.adaptive.norm not in ("l2", "max"):
        errs.append("adaptive.norm must be 'l2' or 'max'")
    if cfg.init.kind not in _INIT_KINDS:
        errs.append(f"init.kind must be one of {', '.join(_INIT_KINDS)}")
    if cfg.init.amp < 0.0:
        errs.append("init.amp cannot be negative")
    if cfg.init.kind == "file" and not cfg.init.path:
        errs.append("init.kind = file needs init.path")
    if cfg.init.kind == "mms":
        from .experiments import MMS_EPS2

        if cfg.domain.L != 1.0 or cfg.domain.origin != 0.0:
            errs.append("init.kind = mms requires the unit square at origin 0")
        if "domain.eps" not in cfg.explicit_keys:
            cfg.domain.eps = math.sqrt(MMS_EPS2)
        elif abs(cfg.domain.eps**2 - MMS_EPS2) > 1e-12:
            errs.append(
                "init.kind = mms fixes domain.eps to 1/sqrt(8 pi^2) "
                f"(= {math.sqrt(MMS_EPS2):.17g})"
            )
    if cfg.newton.tol <= 0.0:
        errs.append("newton.tol must be positive")
    if cfg.newton.max_iter < 1:
        errs.append("newton.max_iter must be at least 1")
    if not 0.0 < cfg.newton.lin_rtol < 1.0:
        errs.append("newton.lin_rtol must lie in (0, 1)")
    for name in ("s0", "s1", "energy_law", "max_principle"):
        if getattr(cfg.constraints, name) not in _POLICIES:
            errs.append(f"constraints.{name} must be one of {', '.join(_POLICIES)}")
    for t in cfg.output.snapshots:
        if not 0.0 <= t <= cfg.time.T:
            errs.append(f"snapshot time {t:g} outside [0, {cfg.time.T:g}]")
    return errs
