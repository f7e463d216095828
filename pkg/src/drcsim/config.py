"""Experiment configuration: flat ``dotted.key = value`` files.

Every key has a default; a file only lists overrides. Unknown keys and
out-of-range values are rejected with the offending key named.

Example::

    # rewards
    env.rewards.r4 = 50
    agent = dqn
    experiment.seeds = [0, 1, 2]
"""

import ast
import json
import numbers
from dataclasses import dataclass, field

from ._validation import ConfigError, check_int, check_positive
from .env import FACTORS, EnvConfig, FactorProbabilities, RewardParams

AGENT_KINDS = ("roundrobin", "qlearning", "dqn")

_FACTOR_DEFAULTS = FactorProbabilities()

DEFAULTS = {
    "agent": "dqn",
    "env.queue_capacity": 10,
    "env.arrival_rate": 1.0,
    "env.tx_good": 4,
    "env.tx_bad": 2,
    "env.p_bad_channel": 0.1,
    "env.rewards.r1": 2.0,
    "env.rewards.r2": 1.0,
    "env.rewards.r3": 50.0,
    "env.rewards.r4": 5.0,
    **{f"env.factors.p0.{k}": x for k, x in zip(FACTORS, _FACTOR_DEFAULTS.p0)},
    **{f"env.factors.p1.{k}": x for k, x in zip(FACTORS, _FACTOR_DEFAULTS.p1)},
    **{f"env.factors.tau.{k}": x for k, x in zip(FACTORS, _FACTOR_DEFAULTS.tau)},
    "qlearning.alpha": 0.1,
    "qlearning.gamma": 0.99,
    "qlearning.eps0": 1.0,
    "qlearning.eps_min": 0.01,
    "qlearning.decay": 0.99,
    "dqn.alpha": 0.001,
    "dqn.gamma": 0.99,
    "dqn.eps0": 1.0,
    "dqn.eps_min": 0.01,
    "dqn.decay": 0.99,
    "dqn.memory_capacity": 10_000,
    "dqn.batch_size": 32,
    "dqn.target_sync_interval": 100,
    "dqn.hidden_sizes": [64, 64],
    "dqn.warmup": 500,
    "experiment.episodes": 500,
    "experiment.steps_per_episode": 200,
    "experiment.seeds": [0, 1, 2, 3, 4],
    "experiment.eval_episodes": 100,
    "experiment.metrics_window": 50,
    "experiment.convergence_window": 100,
    "experiment.convergence_tolerance": 0.1,
    "experiment.n_jobs": 1,
    "sweep.parameter": "env.factors.p1.v",
    "sweep.values": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "sweep.agents": list(AGENT_KINDS),
}

# symbols used in error messages so "p_c" and friends are searchable
SYMBOLS = {
    "env.queue_capacity": "D",
    "env.arrival_rate": "lambda_d",
    "env.tx_good": "nu_1",
    "env.tx_bad": "nu_2",
    "env.p_bad_channel": "p_c",
    **{f"env.rewards.r{i}": f"r_{i}" for i in range(1, 5)},
}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str = "env.factors.p1.v"
    values: tuple = tuple(DEFAULTS["sweep.values"])
    agents: tuple = AGENT_KINDS


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: str = "dqn"
    qlearning: dict = field(default_factory=lambda: _section(DEFAULTS, "qlearning"))
    dqn: dict = field(default_factory=lambda: _section(DEFAULTS, "dqn"))
    episodes: int = 500
    steps_per_episode: int = 200
    seeds: tuple = (0, 1, 2, 3, 4)
    eval_episodes: int = 100
    metrics_window: int = 50
    convergence_window: int = 100
    convergence_tolerance: float = 0.1
    n_jobs: int = 1
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def agent_params(self, kind=None):
        kind = kind or self.agent
        if kind == "roundrobin":
            return {}
        params = dict(getattr(self, kind))
        if kind == "dqn":
            params["hidden_sizes"] = tuple(params["hidden_sizes"])
        return params


def _section(flat, prefix):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in flat.items() if k.startswith(prefix + ".")}


def _label(key):
    sym = SYMBOLS.get(key)
    return f"{key} ({sym})" if sym else key


def _check_type(key, value):
    default = DEFAULTS[key]
    if isinstance(default, bool) or isinstance(default, str):
        ok = isinstance(value, type(default))
    elif isinstance(default, int):
        ok = isinstance(value, numbers.Integral) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool)
    else:
        ok = isinstance(value, (list, tuple))
    if not ok:
        raise ConfigError(f"{_label(key)}: expected {type(default).__name__}, got {value!r}")


def from_flat(overrides, check_sweep=True):
    """Build and validate an :class:`ExperimentConfig` from a flat key mapping."""
    unknown = sorted(set(overrides) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    flat = dict(DEFAULTS)
    for key, value in overrides.items():
        _check_type(key, value)
        flat[key] = value

    try:
        factors = FactorProbabilities(
            p0=tuple(flat[f"env.factors.p0.{k}"] for k in FACTORS),
            p1=tuple(flat[f"env.factors.p1.{k}"] for k in FACTORS),
            tau=tuple(flat[f"env.factors.tau.{k}"] for k in FACTORS),
        )
        rewards = RewardParams(*(flat[f"env.rewards.r{i}"] for i in range(1, 5)))
    except ConfigError as exc:
        raise ConfigError(f"env.{exc}") from None
    try:
        env = EnvConfig(
            factors=factors,
            queue_capacity=flat["env.queue_capacity"],
            arrival_rate=flat["env.arrival_rate"],
            tx_good=flat["env.tx_good"],
            tx_bad=flat["env.tx_bad"],
            p_bad_channel=flat["env.p_bad_channel"],
            rewards=rewards,
        )
    except ConfigError as exc:
        key = "env." + str(exc).split("=", 1)[0]
        raise ConfigError(str(exc).replace(key[4:], _label(key), 1)) from None

    if flat["agent"] not in AGENT_KINDS:
        raise ConfigError(f"agent={flat['agent']!r}; legal values are {AGENT_KINDS}")
    seeds = tuple(flat["experiment.seeds"])
    if not seeds:
        raise ConfigError("experiment.seeds must be non-empty")
    for s in seeds:
        check_int("experiment.seeds", s)
    sweep = SweepSpec(
        parameter=flat["sweep.parameter"],
        values=tuple(flat["sweep.values"]),
        agents=tuple(flat["sweep.agents"]),
    )
    cfg = ExperimentConfig(
        env=env,
        agent=flat["agent"],
        qlearning=_section(flat, "qlearning"),
        dqn=_section(flat, "dqn"),
        episodes=check_int("experiment.episodes", flat["experiment.episodes"], low=0),
        steps_per_episode=check_int("experiment.steps_per_episode",
                                    flat["experiment.steps_per_episode"], low=1),
        seeds=seeds,
        eval_episodes=check_int("experiment.eval_episodes", flat["experiment.eval_episodes"]),
        metrics_window=check_int("experiment.metrics_window",
                                 flat["experiment.metrics_window"], low=1),
        convergence_window=check_int("experiment.convergence_window",
                                     flat["experiment.convergence_window"], low=1),
        convergence_tolerance=check_positive("experiment.convergence_tolerance",
                                             flat["experiment.convergence_tolerance"]),
        n_jobs=check_int("experiment.n_jobs", flat["experiment.n_jobs"], low=1),
        sweep=sweep,
    )
    _validate_agents(cfg)
    if check_sweep:
        _validate_sweep(cfg, flat)
    return cfg


def _validate_agents(cfg):
    from .agents import EpsilonSchedule
    from .dqn import DQNConfig
    from ._validation import check_open_unit

    for kind in ("qlearning", "dqn"):
        p = getattr(cfg, kind)
        try:
            schedule = EpsilonSchedule(p["eps0"], p["eps_min"], p["decay"])
        except ConfigError as exc:
            raise ConfigError(f"{kind}.{exc}") from None
        if kind == "qlearning":
            check_open_unit("qlearning.alpha", p["alpha"], closed_right=True)
            check_open_unit("qlearning.gamma", p["gamma"])
        else:
            DQNConfig(alpha=p["alpha"], gamma=p["gamma"], schedule=schedule,
                      memory_capacity=p["memory_capacity"], batch_size=p["batch_size"],
                      target_sync_interval=p["target_sync_interval"],
                      hidden_sizes=tuple(p["hidden_sizes"]), warmup=p["warmup"])


def _validate_sweep(cfg, flat):
    spec = cfg.sweep
    if spec.parameter not in DEFAULTS or not isinstance(DEFAULTS[spec.parameter], numbers.Real) \
            or spec.parameter.startswith(("sweep.", "experiment.seeds", "agent")):
        raise ConfigError(f"sweep.parameter={spec.parameter!r} is not a numeric config key")
    if not spec.values:
        raise ConfigError("sweep.values must be non-empty")
    for kind in spec.agents:
        if kind not in AGENT_KINDS:
            raise ConfigError(f"sweep.agents entry {kind!r}; legal values are {AGENT_KINDS}")
    for value in spec.values:
        trial = dict(flat)
        trial[spec.parameter] = value
        try:
            from_flat(trial, check_sweep=False)
        except ConfigError as exc:
            raise ConfigError(f"sweep.values entry {value!r}: {exc}") from None


def to_flat(cfg):
    """Inverse of :func:`from_flat`: every key materialized."""
    env = cfg.env
    flat = {
        "agent": cfg.agent,
        "env.queue_capacity": env.queue_capacity,
        "env.arrival_rate": env.arrival_rate,
        "env.tx_good": env.tx_good,
        "env.tx_bad": env.tx_bad,
        "env.p_bad_channel": env.p_bad_channel,
    }
    for i in range(1, 5):
        flat[f"env.rewards.r{i}"] = getattr(env.rewards, f"r{i}")
    for name in ("p0", "p1", "tau"):
        for k, x in zip(FACTORS, getattr(env.factors, name)):
            flat[f"env.factors.{name}.{k}"] = x
    for kind in ("qlearning", "dqn"):
        for k, v in getattr(cfg, kind).items():
            flat[f"{kind}.{k}"] = list(v) if isinstance(v, tuple) else v
    flat.update({
        "experiment.episodes": cfg.episodes,
        "experiment.steps_per_episode": cfg.steps_per_episode,
        "experiment.seeds": list(cfg.seeds),
        "experiment.eval_episodes": cfg.eval_episodes,
        "experiment.metrics_window": cfg.metrics_window,
        "experiment.convergence_window": cfg.convergence_window,
        "experiment.convergence_tolerance": cfg.convergence_tolerance,
        "experiment.n_jobs": cfg.n_jobs,
        "sweep.parameter": cfg.sweep.parameter,
        "sweep.values": list(cfg.sweep.values),
        "sweep.agents": list(cfg.sweep.agents),
    })
    return flat


def with_overrides(cfg, **overrides):
    """Copy of ``cfg`` with the given dotted keys replaced, revalidated.

    ``with_overrides(cfg, **{"env.rewards.r4": 50.0})``
    """
    flat = to_flat(cfg)
    flat.update(overrides)
    return from_flat(flat)


def parse_value(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text, source="<string>"):
    """Parse config text into a flat ``{key: value}`` mapping (no validation)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        value = parse_value(value)
        try:
            _check_type(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        out[key] = value
    return out


def parse_config(path):
    """Load a config file, or the resolved config stored in a run manifest (JSON)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            manifest = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid manifest JSON: {exc.msg}") from None
        if "config" not in manifest:
            raise ConfigError(f"{path}: manifest has no 'config' entry")
        return from_flat(manifest["config"])
    return from_flat(parse_text(text, source=str(path)))


def format_config(cfg):
    """Render ``cfg`` in the key-value file format (all keys)."""
    return "".join(f"{k} = {v!r}\n" for k, v in to_flat(cfg).items())

