"""Stochastic radar/communication mode-selection environment.

Each step the vehicle either transmits queued packets (mode 0) or runs its
radar (mode 1). Four binary risk factors (road, weather, speed, nearby moving
object) set the chance of an unexpected event; the channel state sets how many
packets a transmission can move.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import (
    ConfigError,
    check_int,
    check_nonnegative,
    check_positive,
    check_probability,
    check_random_state,
)

FACTORS = ("r", "w", "v", "m")
COMMUNICATE = 0
RADAR = 1
N_ACTIONS = 2
N_FEATURES = 6


class State(NamedTuple):
    d: int  # packets in the queue, 0..D
    c: int  # channel, 0 good / 1 bad
    r: int
    w: int
    v: int
    m: int

    @property
    def factors(self):
        return (self.r, self.w, self.v, self.m)

    @property
    def n_unfavorable(self):
        return self.r + self.w + self.v + self.m


def _factor_tuple(name, values):
    if isinstance(values, dict):
        missing = set(FACTORS) - set(values)
        extra = set(values) - set(FACTORS)
        if missing or extra:
            raise ConfigError(f"{name} needs exactly the keys {FACTORS}")
        values = tuple(values[k] for k in FACTORS)
    values = tuple(values)
    if len(values) != len(FACTORS):
        raise ConfigError(f"{name} needs {len(FACTORS)} entries, got {len(values)}")
    return tuple(check_probability(f"{name}.{k}", x) for k, x in zip(FACTORS, values))


@dataclass(frozen=True)
class FactorProbabilities:
    """Per-factor event probabilities and factor marginals, ordered (r, w, v, m).

    ``p0[i]``/``p1[i]`` is the event probability when factor ``i`` is
    favorable/unfavorable; ``tau[i]`` is the probability factor ``i`` is favorable.
    """

    p0: tuple = (0.005, 0.005, 0.005, 0.005)
    p1: tuple = (0.05, 0.046, 0.1, 0.05)
    tau: tuple = (0.8, 0.8, 0.8, 0.8)

    def __post_init__(self):
        object.__setattr__(self, "p0", _factor_tuple("factors.p0", self.p0))
        object.__setattr__(self, "p1", _factor_tuple("factors.p1", self.p1))
        object.__setattr__(self, "tau", _factor_tuple("factors.tau", self.tau))
        for k, lo, hi in zip(FACTORS, self.p0, self.p1):
            if lo > hi:
                raise ConfigError(
                    f"factors.p0.{k}={lo} exceeds factors.p1.{k}={hi}; need p0 <= p1")


@dataclass(frozen=True)
class RewardParams:
    r1: float = 2.0
    r2: float = 1.0
    r3: float = 50.0
    r4: float = 5.0

    def __post_init__(self):
        for name in ("r1", "r2", "r3", "r4"):
            object.__setattr__(
                self, name, float(check_nonnegative(f"rewards.{name}", getattr(self, name))))


@dataclass(frozen=True)
class EnvConfig:
    factors: FactorProbabilities = field(default_factory=FactorProbabilities)
    queue_capacity: int = 10
    arrival_rate: float = 1.0
    tx_good: int = 4
    tx_bad: int = 2
    p_bad_channel: float = 0.1
    rewards: RewardParams = field(default_factory=RewardParams)

    def __post_init__(self):
        check_int("queue_capacity", self.queue_capacity, low=1)
        check_positive("arrival_rate", self.arrival_rate)
        check_int("tx_bad", self.tx_bad, low=0)
        check_int("tx_good", self.tx_good, low=self.tx_bad)
        check_probability("p_bad_channel", self.p_bad_channel)
        if not isinstance(self.factors, FactorProbabilities):
            raise ConfigError("factors must be a FactorProbabilities")
        if not isinstance(self.rewards, RewardParams):
            raise ConfigError("rewards must be a RewardParams")

    @property
    def n_states(self):
        return (self.queue_capacity + 1) * 32


class Transition(NamedTuple):
    s: State
    a: int
    r: float
    s_next: State


class StepOutcome(NamedTuple):
    next_state: State
    reward: float
    event_occurred: bool
    event_detected: bool
    packets_sent: int
    packets_dropped: int


def event_probability(factors, s):
    """Chance of an unexpected event this step, given the realized factor states."""
    total = 0.0
    for j, lo, hi in zip(s.factors, factors.p0, factors.p1):
        total += hi if j else lo
    return min(max(total, 0.0), 1.0)


def mean_event_probability(factors):
    """Event probability averaged over the factor marginals ``tau``.

    Reporting quantity only; per-step sampling uses :func:`event_probability`.
    """
    total = sum(t * lo + (1.0 - t) * hi
                for t, lo, hi in zip(factors.tau, factors.p0, factors.p1))
    return min(max(total, 0.0), 1.0)


def immediate_reward(params, a, c, event, b):
    if a == COMMUNICATE:
        if event:
            return -params.r3
        return params.r1 if c == 0 else params.r2
    if event:
        return params.r4 * (b + 1)
    return 0.0


def queue_step(d, a, c, arrivals, cfg):
    """Serve the queue, then admit arrivals; overflow beyond capacity is dropped.

    Returns ``(new_d, packets_sent, packets_dropped)``.
    """
    if a == COMMUNICATE:
        sent = min(d, cfg.tx_good if c == 0 else cfg.tx_bad)
    else:
        sent = 0
    interim = d - sent + arrivals
    new_d = min(interim, cfg.queue_capacity)
    return new_d, sent, interim - new_d


def sample_exogenous(cfg, rng):
    """Draw ``(c, r, w, v, m, arrivals, event_draw)`` for one step."""
    u = rng.random(6)
    tau = cfg.factors.tau
    c = int(u[0] < cfg.p_bad_channel)
    r = int(u[1] >= tau[0])
    w = int(u[2] >= tau[1])
    v = int(u[3] >= tau[2])
    m = int(u[4] >= tau[3])
    arrivals = int(rng.poisson(cfg.arrival_rate))
    return c, r, w, v, m, arrivals, float(u[5])


def env_reset(cfg, rng):
    c, r, w, v, m, _, _ = sample_exogenous(cfg, rng)
    return State(0, c, r, w, v, m)


def env_step(state, a, cfg, rng):
    c, r, w, v, m, arrivals, draw = sample_exogenous(cfg, rng)
    event = draw < event_probability(cfg.factors, state)
    reward = immediate_reward(cfg.rewards, a, state.c, event, state.n_unfavorable)
    new_d, sent, dropped = queue_step(state.d, a, state.c, arrivals, cfg)
    return StepOutcome(
        next_state=State(new_d, c, r, w, v, m),
        reward=reward,
        event_occurred=event,
        event_detected=event and a == RADAR,
        packets_sent=sent,
        packets_dropped=dropped,
    )


def encode_state(s, cfg):
    return np.array([s.d / cfg.queue_capacity, s.c, s.r, s.w, s.v, s.m], dtype=float)


def state_index(s, cfg):
    """Mixed-radix index: queue level major, then (c, r, w, v, m) as a 5-bit number."""
    return s.d * 32 + (s.c << 4 | s.r << 3 | s.w << 2 | s.v << 1 | s.m)


def decode_state_index(index, cfg):
    if not 0 <= index < cfg.n_states:
        raise IndexError(f"state index {index} outside [0, {cfg.n_states})")
    d, bits = divmod(int(index), 32)
    return State(d, bits >> 4 & 1, bits >> 3 & 1, bits >> 2 & 1, bits >> 1 & 1, bits & 1)


def all_states(cfg):
    return [decode_state_index(i, cfg) for i in range(cfg.n_states)]


class RadarCommEnv:
    """Stateful wrapper around :func:`env_reset` / :func:`env_step`.

    Owns its random generator; two instances built with equal seeds replay the
    same trajectory under the same action sequence.
    """

    def __init__(self, config=None, random_state=None):
        self.config = config if config is not None else EnvConfig()
        self.rng = check_random_state(random_state)
        self.state = None

    def reset(self):
        self.state = env_reset(self.config, self.rng)
        return self.state

    def step(self, action):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if action not in (COMMUNICATE, RADAR):
            raise ValueError(f"action must be 0 or 1, got {action!r}")
        out = env_step(self.state, action, self.config, self.rng)
        self.state = out.next_state
        return out
