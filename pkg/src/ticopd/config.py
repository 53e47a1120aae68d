"""Experiment configuration: schema, strict validation, presets.

Configs are nested key-value files (YAML; JSON parses too).  Unknown keys
are rejected with field-level messages so typos never silently fall back
to defaults.  The effective config (after defaults) is embedded in every
summary JSON and reproduces the run when fed back in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import yaml

from .errors import InvalidConfigError

ALGORITHMS = ("ticopd", "choco_sgd", "dsgd")


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    if not isinstance(data, dict):
        raise InvalidConfigError(f"config section {section!r} must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise InvalidConfigError(
            f"unknown field(s) {sorted(unknown)} in config section {section!r}; "
            f"allowed: {sorted(allowed)}")


@dataclass
class ProblemConfig:
    kind: str = "sigmoid"            # linreg | sigmoid | tiny_quadratic
    n: int = 10
    samples_per_agent: int = 100
    dim: int = 100                   # feature dim (model dim for linreg/quadratic)
    classes: int = 10                # sigmoid only
    reg: float = 1e-4                # sigmoid only
    seed: int = 0                    # dataset seed, independent of run seeds
    batch: int | str = 1             # minibatch size or "full"

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        _check_keys("problem", data, {f.name for f in _fields(cls)})
        cfg = cls(**data)
        if cfg.kind not in ("linreg", "sigmoid", "tiny_quadratic"):
            raise InvalidConfigError(f"problem.kind: unknown kind {cfg.kind!r}")
        if cfg.batch != "full" and (not isinstance(cfg.batch, int) or cfg.batch < 1):
            raise InvalidConfigError("problem.batch: must be a positive int or 'full'")
        return cfg


@dataclass
class GraphConfig:
    n: int = 10
    p: float = 0.5
    seed: int = 3
    edges: str | None = None         # explicit 'i j' lines override the ER draw

    @classmethod
    def from_dict(cls, data: dict) -> "GraphConfig":
        _check_keys("graph", data, {f.name for f in _fields(cls)})
        return cls(**data)


@dataclass
class ActivationConfig:
    kind: str = "single_edge"        # full | single_edge | broadcast_star | bernoulli
    edge_prob: float | list | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ActivationConfig":
        _check_keys("activation", data, {f.name for f in _fields(cls)})
        return cls(**data)


@dataclass
class TheoremConfig:
    """Derive (eta, theta, alpha) from the step-size rule instead of
    explicit values."""
    gamma: float = 1.0
    a: float = 1.0
    theta_multiplier: float = 1.0
    alpha_fraction: float = 1.0      # alpha = fraction * alpha_ub

    @classmethod
    def from_dict(cls, data: dict) -> "TheoremConfig":
        _check_keys("params.from_theorem", data, {f.name for f in _fields(cls)})
        return cls(**data)


@dataclass
class ParamsConfig:
    alpha: float | None = None
    eta: float | None = None
    theta: float | None = None
    gamma: float | None = None
    surrogate_mode: str = "edge_local"
    message_timing: str = "algorithm1"
    schedule: str = "constant"
    warmup: int = 0
    from_theorem: TheoremConfig | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ParamsConfig":
        _check_keys("params", data, {f.name for f in _fields(cls)})
        data = dict(data)
        thm = data.pop("from_theorem", None)
        cfg = cls(**data)
        if thm is not None:
            cfg.from_theorem = TheoremConfig.from_dict(thm)
        return cfg


@dataclass
class CompressorConfig:
    kind: str = "identity"           # identity | qsgd | top_k | rand_k
    s: int | None = None
    k: int | None = None
    r: float = 1.0

    @classmethod
    def from_dict(cls, data: dict) -> "CompressorConfig":
        _check_keys("compressor", data, {f.name for f in _fields(cls)})
        return cls(**data)


@dataclass
class ChannelConfig:
    sigma_xi: float = 0.0
    mode: str = "per_vector"         # per_vector | per_coordinate

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelConfig":
        _check_keys("channel", data, {f.name for f in _fields(cls)})
        return cls(**data)


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    algorithm: str = "ticopd"
    params: ParamsConfig = field(default_factory=ParamsConfig)
    compressor: CompressorConfig = field(default_factory=CompressorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    T: int = 10000
    max_bits: int | None = None      # optional early stop on the bit budget
    seeds: list[int] = field(default_factory=lambda: [1])
    stride: int = 10
    out: str = "runs"
    timing: bool = False             # measured wall_ns breaks byte-reproducibility

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _check_keys("<root>", data, {f.name for f in _fields(cls)})
        data = dict(data)
        cfg = cls(
            problem=ProblemConfig.from_dict(data.pop("problem", {})),
            graph=GraphConfig.from_dict(data.pop("graph", {})),
            activation=ActivationConfig.from_dict(data.pop("activation", {})),
            params=ParamsConfig.from_dict(data.pop("params", {})),
            compressor=CompressorConfig.from_dict(data.pop("compressor", {})),
            channel=ChannelConfig.from_dict(data.pop("channel", {})),
            **data,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfigError(
                f"algorithm: {self.algorithm!r} is not one of {ALGORITHMS}")
        if self.T < 1:
            raise InvalidConfigError("T: must be >= 1")
        if self.stride < 1:
            raise InvalidConfigError("stride: must be >= 1")
        if not self.seeds:
            raise InvalidConfigError("seeds: need at least one seed")
        if self.problem.n != self.graph.n:
            raise InvalidConfigError(
                f"problem.n ({self.problem.n}) and graph.n ({self.graph.n}) differ")
        p = self.params
        if self.algorithm == "ticopd" and p.from_theorem is None:
            for name in ("alpha", "eta", "theta", "gamma"):
                if getattr(p, name) is None:
                    raise InvalidConfigError(
                        f"params.{name}: required for ticopd unless from_theorem is set")
        if self.algorithm == "choco_sgd" and (p.eta is None or p.gamma is None):
            raise InvalidConfigError("params.eta and params.gamma: required for choco_sgd")
        if self.algorithm == "dsgd" and p.alpha is None:
            raise InvalidConfigError("params.alpha: required for dsgd")

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def _fields(cls):
    from dataclasses import fields
    return fields(cls)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    # a summary JSON embeds the effective config under "config"
    if isinstance(data, dict) and "config" in data and "avg_grad_norm_sq" in data:
        data = data["config"]
    return ExperimentConfig.from_dict(data)


def load_preset(name: str) -> ExperimentConfig:
    ref = resources.files("ticopd").joinpath(f"presets/{name}.yaml")
    if not ref.is_file():
        available = sorted(
            p.name.removesuffix(".yaml")
            for p in resources.files("ticopd").joinpath("presets").iterdir())
        raise InvalidConfigError(f"unknown preset {name!r}; available: {available}")
    data = yaml.safe_load(ref.read_text())
    return ExperimentConfig.from_dict(data)


def list_presets() -> list[str]:
    return sorted(p.name.removesuffix(".yaml")
                  for p in resources.files("ticopd").joinpath("presets").iterdir()
                  if p.name.endswith(".yaml"))
