"""Run configuration: defaults, INI parsing, and problem assembly.

The default configuration is the benchmark setting used throughout the
tests: a 335-step horizon over a 0..100 MWh lattice in 5 MWh steps,
eleven trading margins, trigonometric seasonal price coefficients with
a 48-step period, and an AR(1) price deviation discretized into 10000
quantile points.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .battery import (
    ActionSet,
    BatteryLattice,
    BatteryModel,
    DemandModel,
    GridPrices,
    build_battery_model,
)
from .pwc import Grid, segment_grid
from .stochastic import (
    Ar1Params,
    DisturbanceSampling,
    SeasonalPrice,
    build_disturbance_sampling,
    make_case_study_price,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "Problem",
    "load_config",
    "build_problem",
    "describe_config",
    "PRESETS",
]


class ConfigError(Exception):
    """A configuration file could not be read or validated."""


def _default_margins() -> tuple:
    return tuple(float(5 * a) for a in range(11))


@dataclass(frozen=True)
class RunConfig:
    """Fully specified run; every field has a benchmark default."""

    horizon: int = 335
    # battery lattice
    p_min: float = 0.0
    p_max: float = 100.0
    p_step: float = 5.0
    # trading margins (MWh bought above demand)
    margins: tuple = field(default_factory=_default_margins)
    # demand noise and imbalance prices
    varsigma: float = 10.0
    pi_low: float = 0.0
    pi_high: float = 20.0
    # price deviation dynamics
    mu: float = 0.0
    sigma: float = 0.5
    phi: float = 0.9
    # seasonal coefficients: trigonometric or explicit arrays
    seasonal_mode: str = "trig"
    u_base: float = 10.0
    u_amp: float = 1.0
    v_base: float = 1.0
    v_amp: float = 0.5
    period: float = 48.0
    phase: float = 1.5 * math.pi
    seasonal_u: Optional[tuple] = None
    seasonal_v: Optional[tuple] = None
    # value function grid
    grid_count: int = 501
    z2_min: float = -15.0
    z2_max: float = 15.0
    # disturbance discretization
    n_samples: int = 10000
    # diagnostics simulation
    n_paths: int = 100
    n_subsims: int = 100
    seed: int = 42
    # terminal treatment and start state
    scrap_mode: str = "sell"
    x0: float = 0.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.seasonal_mode not in ("trig", "explicit"):
            raise ConfigError(f"unknown seasonal mode {self.seasonal_mode!r}")
        if self.seasonal_mode == "explicit":
            if self.seasonal_u is None or self.seasonal_v is None:
                raise ConfigError("explicit seasonal mode requires u and v arrays")
            if len(self.seasonal_u) != self.horizon + 1 or len(self.seasonal_v) != self.horizon + 1:
                raise ConfigError(
                    f"explicit seasonal arrays need horizon+1 = {self.horizon + 1} entries"
                )
        if self.scrap_mode not in ("sell", "zero"):
            raise ConfigError(f"unknown scrap mode {self.scrap_mode!r}")
        if self.n_paths < 1 or self.n_subsims < 1:
            raise ConfigError("path and subsimulation counts must be positive")
        if self.n_samples < 2:
            raise ConfigError("disturbance sample count must be at least 2")
        if self.grid_count < 2:
            raise ConfigError("grid count must be at least 2")

    def to_dict(self) -> dict:
        """Plain JSON-safe dict; inverse of from_dict."""
        d = dataclasses.asdict(self)
        for key in ("margins", "seasonal_u", "seasonal_v"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("margins", "seasonal_u", "seasonal_v"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(float(x) for x in kwargs[key])
        return RunConfig(**kwargs)


PRESETS = {"paper": RunConfig()}


def _parse_float_list(text: str) -> tuple:
    items = [s.strip() for s in text.replace("\n", ",").split(",")]
    return tuple(float(s) for s in items if s)


# (section, key) -> (field name, converter)
_SCHEMA = {
    ("run", "horizon"): ("horizon", int),
    ("run", "seed"): ("seed", int),
    ("battery", "p_min"): ("p_min", float),
    ("battery", "p_max"): ("p_max", float),
    ("battery", "step"): ("p_step", float),
    ("actions", "margins"): ("margins", _parse_float_list),
    ("demand", "varsigma"): ("varsigma", float),
    ("prices", "pi_low"): ("pi_low", float),
    ("prices", "pi_high"): ("pi_high", float),
    ("dynamics", "mu"): ("mu", float),
    ("dynamics", "sigma"): ("sigma", float),
    ("dynamics", "phi"): ("phi", float),
    ("seasonal", "mode"): ("seasonal_mode", str),
    ("seasonal", "u_base"): ("u_base", float),
    ("seasonal", "u_amp"): ("u_amp", float),
    ("seasonal", "v_base"): ("v_base", float),
    ("seasonal", "v_amp"): ("v_amp", float),
    ("seasonal", "period"): ("period", float),
    ("seasonal", "phase"): ("phase", float),
    ("seasonal", "u"): ("seasonal_u", _parse_float_list),
    ("seasonal", "v"): ("seasonal_v", _parse_float_list),
    ("grid", "count"): ("grid_count", int),
    ("grid", "z2_min"): ("z2_min", float),
    ("grid", "z2_max"): ("z2_max", float),
    ("sampling", "count"): ("n_samples", int),
    ("diagnostics", "paths"): ("n_paths", int),
    ("diagnostics", "subsims"): ("n_subsims", int),
    ("model", "scrap"): ("scrap_mode", str),
    ("state", "x0"): ("x0", float),
}


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Parse an INI file, overriding fields of base (default preset).

    Unknown sections or keys, unparseable values, and failed validation
    all raise ConfigError naming the offending entry.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, "r") as fh:
            parser.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"malformed config file {path}: {e}") from e

    overrides = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                field_name, conv = _SCHEMA[(section, key)]
            except KeyError:
                raise ConfigError(f"unknown configuration key [{section}] {key}") from None
            try:
                overrides[field_name] = conv(raw)
            except ValueError as e:
                raise ConfigError(
                    f"invalid value for [{section}] {key}: {raw!r} ({e})"
                ) from e
    base = RunConfig() if base is None else base
    try:
        return dataclasses.replace(base, **overrides)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class Problem:
    """Assembled model objects for one configuration."""

    model: BatteryModel
    sp: SeasonalPrice
    sampling: DisturbanceSampling
    grid: Grid
    params: Ar1Params
    z0: np.ndarray
    T: int
    K: int
    I: int
    seed: int


def build_problem(cfg: RunConfig) -> Problem:
    """Instantiate every model object the solver and diagnostics need."""
    try:
        lattice = BatteryLattice(cfg.p_min, cfg.p_max, cfg.p_step)
        actions = ActionSet(cfg.margins)
        demand = DemandModel(cfg.varsigma)
        prices = GridPrices(cfg.pi_low, cfg.pi_high)
        model = build_battery_model(lattice, actions, demand, prices, cfg.scrap_mode)
        if cfg.seasonal_mode == "trig":
            sp = make_case_study_price(
                cfg.horizon,
                u_base=cfg.u_base,
                u_amp=cfg.u_amp,
                v_base=cfg.v_base,
                v_amp=cfg.v_amp,
                period=cfg.period,
                phase=cfg.phase,
            )
        else:
            sp = SeasonalPrice(np.asarray(cfg.seasonal_u), np.asarray(cfg.seasonal_v))
        params = Ar1Params(cfg.mu, cfg.sigma, cfg.phi)
        sampling = build_disturbance_sampling(params, cfg.n_samples)
        grid = segment_grid(cfg.grid_count, cfg.z2_min, cfg.z2_max)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    z0 = np.array([1.0, cfg.x0])
    return Problem(
        model=model,
        sp=sp,
        sampling=sampling,
        grid=grid,
        params=params,
        z0=z0,
        T=cfg.horizon,
        K=cfg.n_paths,
        I=cfg.n_subsims,
        seed=cfg.seed,
    )


def describe_config(cfg: RunConfig) -> str:
    """Short human-readable summary: fields that differ from the defaults."""
    default = RunConfig()
    parts = []
    for f in dataclasses.fields(RunConfig):
        val = getattr(cfg, f.name)
        if val != getattr(default, f.name):
            parts.append(f"{f.name}={val}")
    return ", ".join(parts) if parts else "defaults"
