"""Experiment configuration: a flat key/value text format.

Grammar (one assignment per line):

    key = value        # '#' starts a comment; blank lines ignored

Keys use dotted sections (e.g. ``channel.sigma_c``).  Unknown keys are
rejected, duplicate keys are a parse error, and every key has a typed schema
entry with a default.  ``SIM_SEED`` in the environment overrides the seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError

_MISSING = object()


def _as_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _as_class_pair(raw: str) -> tuple[int, int]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'a,b', got {raw!r}")
    return int(parts[0]), int(parts[1])


def _choice(*options):
    def conv(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {options}, got {raw!r}")
        return raw
    return conv


def _opt_float(raw: str) -> float | None:
    if raw.lower() == "none":
        return None
    return float(raw)


# key -> (attribute, converter, default)
SCHEMA: dict[str, tuple[str, object, object]] = {
    "topology": ("topology", _choice("ring", "star", "complete", "erdos_renyi"), "ring"),
    "topology.er_prob": ("er_prob", float, 0.5),
    "n": ("n", int, 10),
    "T": ("T", int, 1000),
    "seed": ("seed", int, 0),
    "algorithm": ("algorithm", _choice("icgt", "gt", "dgd", "extra", "near_dgd"), "icgt"),
    "alpha": ("alpha", float, 0.05),
    "alpha.mode": ("alpha_mode", _choice("fixed", "theoretical", "grid"), "fixed"),
    "gamma": ("gamma", _opt_float, None),
    "gamma.mode": ("gamma_mode", _choice("fixed", "schedule"), "schedule"),
    "gamma.override": ("gamma_override", _as_bool, False),
    "near_dgd.t": ("near_dgd_t", int, 1),
    "shared_noise": ("shared_noise", _as_bool, False),
    "log_noise": ("log_noise", _as_bool, False),
    "channel.type": ("channel_type", _choice("exact", "awgn", "quant"), "exact"),
    "channel.sigma_c": ("channel_sigma_c", float, 0.1),
    "channel.h": ("channel_h", float, 1.0),
    "channel.delta_p": ("channel_delta_p", int, 10),
    "objective.type": ("objective_type", _choice("quadratic", "logistic"), "quadratic"),
    "objective.lambda": ("reg_lambda", float, 0.1),
    "objective.dim": ("dim", int, 10),
    "objective.mu": ("quad_mu", float, 1.0),
    "objective.l_max": ("quad_l_max", float, 10.0),
    "objective.hetero": ("quad_hetero", float, 1.0),
    "dataset.source": ("dataset_source", _choice("synthetic", "mnist"), "synthetic"),
    "dataset.per_node": ("per_node", int, 200),
    "dataset.class_pair": ("class_pair", _as_class_pair, (0, 1)),
    "dataset.separation": ("separation", float, 3.0),
    "dataset.mnist_images": ("mnist_images", str, ""),
    "dataset.mnist_labels": ("mnist_labels", str, ""),
    "oracle.mode": ("oracle_mode", _choice("exact", "minibatch", "additive_gaussian"), "exact"),
    "oracle.batch_size": ("batch_size", int, 32),
    "oracle.sigma_g": ("sigma_g", float, 0.0),
    "metrics.every": ("metrics_every", int, 10),
    "init.mode": ("init_mode", _choice("zeros", "gaussian"), "zeros"),
    "init.scale": ("init_scale", float, 1.0),
    "stop.opt_err": ("stop_opt_err", _opt_float, None),
    "out": ("out", str, ""),
}


@dataclass
class ExperimentConfig:
    topology: str = "ring"
    er_prob: float = 0.5
    n: int = 10
    T: int = 1000
    seed: int = 0
    algorithm: str = "icgt"
    alpha: float = 0.05
    alpha_mode: str = "fixed"
    gamma: float | None = None
    gamma_mode: str = "schedule"
    gamma_override: bool = False
    near_dgd_t: int = 1
    shared_noise: bool = False
    log_noise: bool = False
    channel_type: str = "exact"
    channel_sigma_c: float = 0.1
    channel_h: float = 1.0
    channel_delta_p: int = 10
    objective_type: str = "quadratic"
    reg_lambda: float = 0.1
    dim: int = 10
    quad_mu: float = 1.0
    quad_l_max: float = 10.0
    quad_hetero: float = 1.0
    dataset_source: str = "synthetic"
    per_node: int = 200
    class_pair: tuple[int, int] = (0, 1)
    separation: float = 3.0
    mnist_images: str = ""
    mnist_labels: str = ""
    oracle_mode: str = "exact"
    batch_size: int = 32
    sigma_g: float = 0.0
    metrics_every: int = 10
    init_mode: str = "zeros"
    init_scale: float = 1.0
    stop_opt_err: float | None = None
    out: str = ""
    explicit_keys: frozenset = field(default_factory=frozenset, compare=False)

    def replace(self, **kwargs) -> "ExperimentConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kwargs)
        return ExperimentConfig(**data)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Semantic validation beyond per-key typing."""
    if cfg.n < 1:
        raise ConfigError("n must be >= 1")
    if cfg.T < 1:
        raise ConfigError("T must be >= 1")
    if cfg.alpha <= 0:
        raise ConfigError("alpha must be positive")
    if not (0.0 < cfg.er_prob <= 1.0):
        raise ConfigError("topology.er_prob must lie in (0, 1]")
    if cfg.metrics_every < 1:
        raise ConfigError("metrics.every must be >= 1")
    if cfg.algorithm == "icgt" and cfg.gamma_mode == "fixed":
        if cfg.gamma is None:
            raise ConfigError("gamma.mode=fixed requires an explicit gamma")
        if not (0.0 < cfg.gamma < 0.25) and not cfg.gamma_override:
            raise ConfigError(
                f"gamma={cfg.gamma} outside the admissible attenuation domain (0, 0.25); "
                "set gamma.override=true to bypass"
            )
    if cfg.alpha_mode == "theoretical" and cfg.gamma_mode != "fixed":
        raise ConfigError(
            "alpha.mode=theoretical requires gamma.mode=fixed "
            "(the schedule would make alpha and gamma mutually dependent)"
        )
    if cfg.channel_type == "awgn" and cfg.channel_sigma_c < 0:
        raise ConfigError("channel.sigma_c must be nonnegative for awgn")
    if cfg.channel_type == "awgn" and cfg.channel_h == 0:
        raise ConfigError("channel.h must be nonzero")
    if cfg.channel_type == "quant" and cfg.channel_delta_p < 1:
        raise ConfigError("channel.delta_p must be a positive integer")
    if cfg.objective_type == "logistic" and cfg.reg_lambda <= 0:
        raise ConfigError("objective.lambda must be positive")
    if cfg.oracle_mode == "minibatch" and cfg.objective_type != "logistic":
        raise ConfigError("oracle.mode=minibatch requires objective.type=logistic")
    if cfg.dataset_source == "mnist" and not (cfg.mnist_images and cfg.mnist_labels):
        raise ConfigError("dataset.source=mnist requires dataset.mnist_images and dataset.mnist_labels")
    if cfg.near_dgd_t < 0:
        raise ConfigError("near_dgd.t must be >= 0")
    if cfg.stop_opt_err is not None and cfg.stop_opt_err <= 0:
        raise ConfigError("stop.opt_err must be positive")
    return cfg


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key {key!r} (first set on line {seen[key]})"
            )
        seen[key] = lineno
        attr, conv, _default = SCHEMA[key]
        try:
            values[attr] = conv(raw_value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    cfg = ExperimentConfig(**values, explicit_keys=frozenset(seen))
    env_seed = os.environ.get("SIM_SEED")
    if env_seed is not None:
        cfg = cfg.replace(seed=int(env_seed))
    return validate(cfg)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))
