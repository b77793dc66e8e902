"""Experiment configuration: a TOML file, validated into dataclasses.

Schema (every key optional except ``seed``)::

    seed = 7
    out = "runs/example1"
    workers = 1

    [field]
    preset = "example1"          # example1 | example2 | example3 | constant
    resolution = 0.5
    xmin = -5.0                  # likewise xmax, ymin, ymax
    a = 2.0                      # a, b, gamma: constant preset only
    form = "standard"               # or "rotation"

    [simulation]
    observations = 100
    replicates = 5
    nu = 5.0
    alpha = 1.0
    method = "exact"             # or "spectral"
    accuracy = 1e-3
    transform = false            # rank-transform before estimation

    [regionalize]
    clusters = 5
    linkage = "average"
    algorithm = "both"           # edc | lec | both
    epsilon = "auto"             # or a distance
    smoothing_radius = "auto"    # 1.5 * epsilon
    min_neighbors = 4

    [fit]
    globals = [[5.0, 1.0]]       # (nu, alpha) pairs used for fitting
    pair_threshold = "auto"      # or a distance, or "none"
"""
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field

from .errors import ConfigError
from .simulate import PRESETS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

DESK_RESOLUTION = 0.5
DESK_OBSERVATIONS = 100
DESK_REPLICATES = 5


@dataclass
class FieldConfig:
    preset: str = "example1"
    resolution: float = DESK_RESOLUTION
    xmin: float = -5.0
    xmax: float = 5.0
    ymin: float = -5.0
    ymax: float = 5.0
    a: float = None
    b: float = None
    gamma: float = None
    form: str = "standard"

    def validate(self):
        if self.preset not in PRESETS:
            raise ConfigError("field.preset", f"unknown preset {self.preset!r}; "
                              f"choose from {', '.join(PRESETS)}")
        _positive("field.resolution", self.resolution)
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise ConfigError("field", "grid bounds are empty")
        if self.form not in ("standard", "rotation"):
            raise ConfigError("field.form", "expected 'standard' or 'rotation'")
        for key in ("a", "b", "gamma"):
            if getattr(self, key) is not None and self.preset != "constant":
                raise ConfigError(f"field.{key}", "overrides apply to the constant preset only")

    def overrides(self):
        return {k: getattr(self, k) for k in ("a", "b", "gamma") if getattr(self, k) is not None}


@dataclass
class SimulationConfig:
    observations: int = DESK_OBSERVATIONS
    replicates: int = DESK_REPLICATES
    nu: float = 5.0
    alpha: float = 1.0
    method: str = "exact"
    accuracy: float = 1e-3
    transform: bool = False

    def validate(self):
        _integer("simulation.observations", self.observations, 2)
        _integer("simulation.replicates", self.replicates, 1)
        if not self.nu >= 1:
            raise ConfigError("simulation.nu", "must be >= 1")
        if not 0 < self.alpha <= 2:
            raise ConfigError("simulation.alpha", "must lie in (0, 2]")
        if self.method not in ("exact", "spectral"):
            raise ConfigError("simulation.method", "expected 'exact' or 'spectral'")
        _positive("simulation.accuracy", self.accuracy)


@dataclass
class RegionConfig:
    clusters: int = 5
    linkage: str = "average"
    algorithm: str = "both"
    epsilon: object = "auto"
    smoothing_radius: object = "auto"
    min_neighbors: int = 4

    def validate(self):
        _integer("regionalize.clusters", self.clusters, 1)
        if self.linkage not in ("average", "single", "complete"):
            raise ConfigError("regionalize.linkage", "expected average, single or complete")
        if self.algorithm not in ("edc", "lec", "both"):
            raise ConfigError("regionalize.algorithm", "expected edc, lec or both")
        for key in ("epsilon", "smoothing_radius"):
            v = getattr(self, key)
            if v != "auto":
                _positive(f"regionalize.{key}", v)
        _integer("regionalize.min_neighbors", self.min_neighbors, 1)


@dataclass
class FitConfig:
    globals: list = dc_field(default_factory=lambda: [[5.0, 1.0]])
    pair_threshold: object = "auto"

    def validate(self):
        if not self.globals:
            raise ConfigError("fit.globals", "at least one (nu, alpha) pair is required")
        for k, pair in enumerate(self.globals):
            if len(pair) != 2:
                raise ConfigError(f"fit.globals[{k}]", "expected [nu, alpha]")
            nu, alpha = pair
            if not nu >= 1 or not 0 < alpha <= 2:
                raise ConfigError(f"fit.globals[{k}]", "need nu >= 1 and 0 < alpha <= 2")
        if self.pair_threshold not in ("auto", "none"):
            _positive("fit.pair_threshold", self.pair_threshold)

    def max_distance(self):
        if self.pair_threshold == "none":
            return None
        return self.pair_threshold


@dataclass
class ExperimentConfig:
    seed: int
    out: str = "runs/experiment"
    workers: int = 1
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    simulation: SimulationConfig = dc_field(default_factory=SimulationConfig)
    regionalize: RegionConfig = dc_field(default_factory=RegionConfig)
    fit: FitConfig = dc_field(default_factory=FitConfig)

    def validate(self):
        _integer("seed", self.seed, 0)
        _integer("workers", self.workers, 1)
        for sec in (self.field, self.simulation, self.regionalize, self.fit):
            sec.validate()
        return self

    def is_long_running(self):
        return (self.field.resolution < DESK_RESOLUTION
                or self.simulation.observations > 2 * DESK_OBSERVATIONS
                or self.simulation.replicates > 2 * DESK_REPLICATES
                or len(self.fit.globals) > 3)

    def to_dict(self):
        return asdict(self)


_SECTIONS = {"field": FieldConfig, "simulation": SimulationConfig,
             "regionalize": RegionConfig, "fit": FitConfig}
_TOP = ("seed", "out", "workers")


def _positive(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or math.isinf(v):
        raise ConfigError(key, f"expected a positive number, got {v!r}")


def _integer(key, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(key, f"expected an integer >= {lo}, got {v!r}")


def _coerce(key, cls, name, value):
    ftype = {f.name: f.type for f in fields(cls)}[name]
    if ftype in (float, "float") and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if ftype in (bool, "bool") and not isinstance(value, bool):
        raise ConfigError(key, f"expected true or false, got {value!r}")
    return value


def config_from_dict(d):
    """Build and validate a config; unknown keys raise with their key path."""
    if "seed" not in d:
        raise ConfigError("seed", "a master seed is required")
    top = {}
    sections = {}
    for key, value in d.items():
        if key in _TOP:
            top[key] = value
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "expected a table")
            cls = _SECTIONS[key]
            names = {f.name for f in fields(cls)}
            kwargs = {}
            for k, v in value.items():
                if k not in names:
                    raise ConfigError(f"{key}.{k}", "unknown key")
                kwargs[k] = _coerce(f"{key}.{k}", cls, k, v)
            sections[key] = cls(**kwargs)
        else:
            raise ConfigError(key, "unknown key")
    if "out" in top:
        top["out"] = str(top["out"])
    return ExperimentConfig(**top, **sections).validate()


def load_config(path):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"not valid TOML: {exc}") from None
    return config_from_dict(data)


def apply_overrides(cfg, overrides):
    """Return a new config with dotted-path overrides applied (flags win)."""
    d = cfg.to_dict()
    for path, value in overrides.items():
        if value is None:
            continue
        node = d
        parts = path.split(".")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
    return config_from_dict(d)
