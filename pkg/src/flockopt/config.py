"""Experiment configuration, TOML (de)serialization and the preset library.

Config files are TOML. Top-level scalars describe the run; nested tables
describe the objective, potential, topology, noise, timing and init box::

    name = "quad-bounds"
    mode = "flocking"            # flocking | centralized | independent
    engine = "event"             # event | parallel | sde
    N = 10
    m = 2
    step = 0.02                  # flocking step size
    step_policy = "equal"        # explicit | equal | proportional
    horizon = 10.0               # simulated seconds
    replicates = 200
    seed = 1

    [objective]
    name = "quadratic"
    kappa = 1.0

    [potential]
    a = 1.0
    repulsion = "none"           # or: repulsion = { gaussian = 800.0 }

    [topology]
    kind = "complete"            # complete | ring | random_k_neighbors (k, seed)

    [noise]
    sigma = 21.213203435596427

    [timing]
    kind = "constant"            # constant | exponential | lognormal
    mean = 0.02

    [init]
    low = [2.0, 2.0]
    high = [4.0, 4.0]

Optional top-level keys: ``step_central`` (required when ``step_policy`` is
``explicit``), ``beta`` (overhead exponent of the centralized scheme),
``record_interval``, ``time_scale`` (parallel engine), ``sde_substeps``,
``sequential`` (event engine: tied completions read each other's updates).
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .objectives import OBJECTIVE_PARAMS, Objective, make_objective
from .potentials import Potential, make_potential
from .streams import NoiseModel, SamplingTimeModel, overhead_sampling_time
from .topology import Graph, laplacian, make_topology

MODES = ("flocking", "centralized", "independent")
ENGINES = ("event", "parallel", "sde")
STEP_POLICIES = ("explicit", "equal", "proportional")


class ConfigError(ValueError):
    """Raised with every validation problem found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    objective: dict = field(default_factory=lambda: {"name": "quadratic", "kappa": 1.0})
    potential: dict = field(default_factory=lambda: {"a": 1.0, "repulsion": "none"})
    topology: dict = field(default_factory=lambda: {"kind": "complete"})
    noise: dict = field(default_factory=lambda: {"sigma": 1.0})
    timing: dict = field(default_factory=lambda: {"kind": "constant", "mean": 0.02})
    init: dict = field(default_factory=lambda: {"low": [-1.0, -1.0], "high": [1.0, 1.0]})
    name: str = "custom"
    mode: str = "flocking"
    engine: str = "event"
    N: int = 10
    m: int = 2
    step: float = 0.02
    step_central: float | None = None
    step_policy: str = "equal"
    beta: float | None = None
    horizon: float = 10.0
    record_interval: float | None = None
    replicates: int = 1
    seed: int = 0
    time_scale: float = 20.0
    sde_substeps: int = 10
    sequential: bool = False

    # -- derived quantities -------------------------------------------------

    @property
    def sampling(self) -> SamplingTimeModel:
        t = self.timing
        return SamplingTimeModel(t.get("kind", "constant"), float(t["mean"]),
                                 float(t.get("dispersion", 0.5)))

    @property
    def sampling_central(self) -> SamplingTimeModel:
        if self.beta is None:
            return self.sampling
        return overhead_sampling_time(self.sampling, self.N, self.beta)

    @property
    def gamma_central(self) -> float:
        """Step size of the centralized scheme under the configured policy."""
        if self.step_policy == "explicit":
            return float(self.step_central)
        if self.step_policy == "equal":
            return self.step
        return self.step * self.sampling_central.mean / self.sampling.mean

    @property
    def sigma(self) -> float:
        return float(self.noise["sigma"])

    @property
    def record_dt(self) -> float:
        if self.record_interval is not None:
            return self.record_interval
        return min(self.sampling.mean, self.sampling_central.mean)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Setup:
    """Concrete objects built from a validated config."""

    config: ExperimentConfig
    objective: Objective
    potential: Potential
    graph: Graph
    noise: NoiseModel
    init_low: object
    init_high: object

    @property
    def lap(self):
        return laplacian(self.graph)

    @property
    def lambda2(self) -> float:
        return self.lap.lambda2


def build(config: ExperimentConfig) -> Setup:
    validate(config)
    obj = make_objective(config.objective, config.m)
    topo = dict(config.topology)
    graph = make_topology(topo["kind"], config.N, topo.get("k"), topo.get("seed")) \
        if config.N >= 2 else Graph([[0.0]])
    lo = np.broadcast_to(np.asarray(config.init["low"], dtype=float), (config.m,)).copy()
    hi = np.broadcast_to(np.asarray(config.init["high"], dtype=float), (config.m,)).copy()
    return Setup(config, obj, make_potential(config.potential), graph,
                 NoiseModel(config.sigma), lo, hi)


# -- validation ---------------------------------------------------------------

_TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_TABLE_KEYS = {
    "potential": {"a", "repulsion"},
    "topology": {"kind", "k", "seed"},
    "noise": {"sigma"},
    "timing": {"kind", "mean", "dispersion"},
    "init": {"low", "high"},
}


def validate(config: ExperimentConfig) -> None:
    errors = []

    def check(cond, msg):
        if not cond:
            errors.append(msg)

    check(config.mode in MODES, f"mode: must be one of {MODES}, got {config.mode!r}")
    check(config.engine in ENGINES, f"engine: must be one of {ENGINES}, got {config.engine!r}")
    if config.engine == "parallel":
        check(config.mode != "centralized",
              "engine: the parallel engine runs flocking or independent threads only")
    check(isinstance(config.N, int) and config.N >= 1, f"N: must be a positive integer, got {config.N!r}")
    check(isinstance(config.m, int) and config.m >= 1, f"m: must be a positive integer, got {config.m!r}")
    check(_num(config.step) and config.step > 0, f"step: must be > 0, got {config.step!r}")
    check(config.step_policy in STEP_POLICIES,
          f"step_policy: must be one of {STEP_POLICIES}, got {config.step_policy!r}")
    if config.step_policy == "explicit":
        check(_num(config.step_central) and config.step_central > 0,
              f"step_central: must be > 0 under the explicit policy, got {config.step_central!r}")
    elif config.step_central is not None:
        check(False, "step_central: only allowed with step_policy = 'explicit'")
    if config.beta is not None:
        check(_num(config.beta) and config.beta > 1, f"beta: must be > 1, got {config.beta!r}")
    check(_num(config.horizon) and config.horizon >= 0, f"horizon: must be >= 0, got {config.horizon!r}")
    if config.record_interval is not None:
        check(_num(config.record_interval) and config.record_interval > 0,
              f"record_interval: must be > 0, got {config.record_interval!r}")
    check(isinstance(config.replicates, int) and config.replicates >= 0,
          f"replicates: must be a nonnegative integer, got {config.replicates!r}")
    check(isinstance(config.seed, int) and 0 <= config.seed < 2**64,
          f"seed: must be an unsigned 64-bit integer, got {config.seed!r}")
    check(_num(config.time_scale) and config.time_scale > 0, "time_scale: must be > 0")
    check(isinstance(config.sde_substeps, int) and config.sde_substeps >= 1, "sde_substeps: must be >= 1")
    check(isinstance(config.sequential, bool), "sequential: must be a boolean")

    for table, allowed in _TABLE_KEYS.items():
        extra = set(getattr(config, table)) - allowed
        check(not extra, f"{table}: unknown keys {sorted(extra)}")

    obj = config.objective
    name = obj.get("name")
    if name not in OBJECTIVE_PARAMS:
        errors.append(f"objective.name: unknown objective {name!r}")
    else:
        extra = set(obj) - {"name"} - OBJECTIVE_PARAMS[name]
        check(not extra, f"objective: unknown keys {sorted(extra)}")
        if name == "ackley":
            check(config.m == 2, "m: ackley objective requires m = 2")
        if name == "quadratic":
            check(_num(obj.get("kappa", 1.0)) and obj.get("kappa", 1.0) > 0, "objective.kappa: must be > 0")
            if obj.get("center") is not None:
                check(len(obj["center"]) == config.m, "objective.center: length must equal m")

    try:
        make_potential(config.potential)
    except ValueError as exc:
        errors.append(f"potential: {exc}")

    sigma = config.noise.get("sigma")
    check(_num(sigma) and sigma >= 0, f"noise.sigma: must be >= 0, got {sigma!r}")

    t = config.timing
    mean = t.get("mean")
    check(t.get("kind", "constant") in ("constant", "exponential", "lognormal"),
          f"timing.kind: unknown kind {t.get('kind')!r}")
    check(_num(mean) and mean > 0, f"timing.mean: must be > 0, got {mean!r}")

    kind = config.topology.get("kind")
    check(kind in ("complete", "ring", "random_k_neighbors"), f"topology.kind: unknown kind {kind!r}")
    if kind == "random_k_neighbors":
        k = config.topology.get("k")
        check(isinstance(k, int) and 0 < k < config.N, f"topology.k: need 0 < k < N, got {k!r}")

    for side in ("low", "high"):
        v = config.init.get(side)
        ok = v is not None and (_num(v) or (isinstance(v, (list, tuple)) and len(v) == config.m
                                            and all(_num(x) for x in v)))
        check(ok, f"init.{side}: must be a number or a list of m numbers")

    if errors:
        raise ConfigError(errors)


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


# -- serialization --------------------------------------------------------------

def config_to_dict(config: ExperimentConfig) -> dict:
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(config, f.name)
        if v is None:
            continue
        out[f.name] = dict(v) if isinstance(v, dict) else v
    # scalars first, then tables, so the TOML layout is stable
    scalars = {k: v for k, v in out.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in out.items() if isinstance(v, dict)}
    return {**scalars, **tables}


_FLOAT_KEYS = {"step", "step_central", "beta", "horizon", "record_interval", "time_scale"}


def config_from_dict(d: dict) -> ExperimentConfig:
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in sorted(unknown)])
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in d.items()}
    for k in _FLOAT_KEYS & set(d):
        if _num(d[k]):
            d[k] = float(d[k])
    cfg = ExperimentConfig(**d)
    validate(cfg)
    return cfg


def to_toml(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def from_toml(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from exc
    return config_from_dict(data)


def config_parse(path) -> ExperimentConfig:
    return from_toml(Path(path).read_text(encoding="utf-8"))


# -- presets --------------------------------------------------------------------

_FIG1 = dict(
    objective={"name": "lognorm"},
    potential={"a": 1.0, "repulsion": "none"},
    topology={"kind": "complete"},
    noise={"sigma": math.sqrt(450.0)},
    timing={"kind": "constant", "mean": 0.02},
    init={"low": [3.0, 3.0], "high": [5.0, 5.0]},
    N=10, m=2, step=0.02, step_policy="equal", horizon=200.0, replicates=100, seed=7,
)

_ACKLEY1 = dict(
    objective={"name": "ackley"},
    potential={"a": 4.0, "repulsion": {"gaussian": 800.0}},
    topology={"kind": "random_k_neighbors", "k": 8, "seed": 1},
    noise={"sigma": 5.0},
    timing={"kind": "constant", "mean": 0.01},
    init={"low": [10.0, 10.0], "high": [15.0, 15.0]},
    N=20, m=2, step=0.01, step_central=0.018, step_policy="explicit", beta=5.0,
    horizon=60.0, replicates=10, seed=11,
)

_ACKLEY2 = dict(
    objective={"name": "ackley"},
    potential={"a": 3.0, "repulsion": {"gaussian": 0.01}},
    topology={"kind": "random_k_neighbors", "k": 8, "seed": 53},
    noise={"sigma": 35.0},
    timing={"kind": "constant", "mean": 0.04},
    init={"low": [10.0, 10.0], "high": [12.0, 12.0]},
    # beta reproduces the stated centralized step duration 0.184 for N = 30
    N=30, m=2, step=0.04, step_central=0.184, step_policy="explicit", beta=math.log(30) / math.log(4.6),
    horizon=36.0, replicates=10, seed=12,
)

_QUAD = dict(
    objective={"name": "quadratic", "kappa": 1.0, "center": [0.0, 0.0]},
    potential={"a": 1.0, "repulsion": "none"},
    topology={"kind": "complete"},
    noise={"sigma": math.sqrt(450.0)},
    timing={"kind": "constant", "mean": 0.02},
    init={"low": [2.0, 2.0], "high": [4.0, 4.0]},
    N=10, m=2, step=0.02, step_policy="equal", horizon=10.0, replicates=200, seed=1,
)

_PRESETS = {
    "fig1-centralized": (_FIG1, "centralized"),
    "fig1-flocking": (_FIG1, "flocking"),
    "ackley-case1-centralized": (_ACKLEY1, "centralized"),
    "ackley-case1-flocking": (_ACKLEY1, "flocking"),
    "ackley-case2-centralized": (_ACKLEY2, "centralized"),
    "ackley-case2-flocking": (_ACKLEY2, "flocking"),
    "quad-bounds": (_QUAD, "flocking"),
}
PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ExperimentConfig:
    """Return a named preset. A bare family name (``"ackley-case1"``) gives its flocking variant."""
    if name not in _PRESETS and f"{name}-flocking" in _PRESETS:
        name = f"{name}-flocking"
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    base, mode = _PRESETS[name]
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    return config_from_dict({**d, "name": name, "mode": mode})
