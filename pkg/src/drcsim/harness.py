"""Episode runner, training/evaluation orchestration, metrics and sweeps.

Seeding: every random stream of a run derives from the run seed through
``numpy.random.SeedSequence(seed, spawn_key=(stream_id,))`` with the stream ids
below. The environment streams do not depend on the agent kind, so agents
trained with the same seed face identical exogenous sequences.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .agents import QLearningAgent, RoundRobinAgent
from .config import with_overrides
from .dqn import DQNAgent
from .env import RadarCommEnv, Transition

logger = logging.getLogger(__name__)

STREAM_ENV_TRAIN = 0
STREAM_ENV_EVAL = 1
STREAM_AGENT = 2

AGENTS = {
    "roundrobin": RoundRobinAgent,
    "qlearning": QLearningAgent,
    "dqn": DQNAgent,
}


def stream(seed, stream_id):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream_id,)))


@dataclass
class EpisodeRecord:
    episode: int
    total_reward: float
    packets_sent: int
    events_total: int
    events_missed: int
    steps: int
    phase: str = "train"


@dataclass(frozen=True)
class Metrics:
    throughput: float
    miss_detection_probability: float  # nan when no event occurred
    average_reward: float

    @property
    def miss_detection_defined(self):
        return not np.isnan(self.miss_detection_probability)


@dataclass
class TrainResult:
    agent: object
    train: list = field(default_factory=list)
    eval: list = field(default_factory=list)
    seed: int = None
    elapsed: float = 0.0


def make_agent(kind, params=None, random_state=None):
    try:
        cls = AGENTS[kind]
    except KeyError:
        raise ValueError(f"unknown agent kind {kind!r}; choose from {sorted(AGENTS)}") from None
    if cls is RoundRobinAgent:
        return cls()
    return cls(**(params or {}), random_state=random_state)


def run_episode(env, agent, steps, train=True, episode=0, on_step=None):
    """Reset ``env`` and play ``steps`` steps with ``agent``.

    With ``train`` the agent explores and learns from every transition; otherwise
    it acts greedily and nothing is updated. ``on_step(state, action, outcome)``
    is called after every step when given.
    """
    state = env.reset()
    total = 0.0
    sent = events = missed = 0
    for _ in range(steps):
        a = agent.act(state, explore=train)
        out = env.step(a)
        if train:
            agent.observe(Transition(state, a, out.reward, out.next_state))
        else:
            agent.advance()
        if on_step is not None:
            on_step(state, a, out)
        total += out.reward
        sent += out.packets_sent
        if out.event_occurred:
            events += 1
            if not out.event_detected:
                missed += 1
        state = out.next_state
    agent.end_episode(train=train)
    return EpisodeRecord(episode, total, sent, events, missed, steps,
                         "train" if train else "eval")


def discounted_return(rewards, gamma):
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total


def compute_metrics(records, window=None):
    """Throughput, miss-detection probability and mean episode reward over the
    last ``window`` records (all of them when ``window`` is None)."""
    if window is None:
        window = len(records)
    if not 1 <= window <= len(records):
        raise ValueError(f"window={window} must be in [1, {len(records)}]")
    tail = records[-window:]
    steps = sum(r.steps for r in tail)
    events = sum(r.events_total for r in tail)
    missed = sum(r.events_missed for r in tail)
    return Metrics(
        throughput=sum(r.packets_sent for r in tail) / steps,
        miss_detection_probability=missed / events if events else float("nan"),
        average_reward=float(np.mean([r.total_reward for r in tail])),
    )


def train_agent(cfg, seed, kind=None):
    """Train a fresh agent for ``cfg.episodes`` episodes, then evaluate it greedily
    for ``cfg.eval_episodes`` episodes on a separate environment stream."""
    kind = kind or cfg.agent
    t0 = time.perf_counter()
    agent = make_agent(kind, cfg.agent_params(kind), stream(seed, STREAM_AGENT))
    train_env = RadarCommEnv(cfg.env, stream(seed, STREAM_ENV_TRAIN))
    agent.initialize(cfg.env)
    result = TrainResult(agent, seed=seed)
    for e in range(cfg.episodes):
        result.train.append(run_episode(train_env, agent, cfg.steps_per_episode,
                                        train=True, episode=e))
    agent.train_records_ = list(result.train)
    result.eval = evaluate_agent(agent, cfg, seed)
    result.elapsed = time.perf_counter() - t0
    logger.debug("trained %s seed=%s in %.1fs", kind, seed, result.elapsed)
    return result


def evaluate_agent(agent, cfg, seed):
    env = RadarCommEnv(cfg.env, stream(seed, STREAM_ENV_EVAL))
    return [run_episode(env, agent, cfg.steps_per_episode, train=False, episode=e)
            for e in range(cfg.eval_episodes)]


def eval_metrics(result, cfg):
    """Metrics of the evaluation phase, or of the last training window when no
    evaluation episodes were run."""
    if result.eval:
        return compute_metrics(result.eval)
    return compute_metrics(result.train, min(cfg.metrics_window, len(result.train)))


def moving_average(values, window):
    values = np.asarray(values, dtype=float)
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def convergence_episode(records, window, tolerance):
    """First episode from which every ``window``-episode moving average stays
    within ``tolerance * |plateau|`` of the plateau (mean of the final window).

    The stable stretch must cover at least the last ``2 * window`` episodes;
    returns None when the series never settles.
    """
    rewards = [r.total_reward if isinstance(r, EpisodeRecord) else r for r in records]
    n = len(rewards)
    if n < 2 * window:
        raise ValueError(f"need at least {2 * window} episodes, got {n}")
    ma = moving_average(rewards, window)
    plateau = ma[-1]
    inside = np.abs(ma - plateau) <= tolerance * abs(plateau)
    outside = np.flatnonzero(~inside)
    e = int(outside[-1]) + 1 if outside.size else 0
    if e > n - 2 * window:
        return None
    return e


def aggregate_seeds(values):
    """(median, min, max) of per-seed values, ignoring undefined (nan) entries."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("aggregate_seeds needs at least one value")
    defined = values[~np.isnan(values)]
    if defined.size == 0:
        return (float("nan"),) * 3
    return float(np.median(defined)), float(defined.min()), float(defined.max())


METRIC_NAMES = ("average_reward", "throughput", "miss_detection_probability")


@dataclass
class SweepRow:
    parameter: str
    value: float
    agent: str
    stats: dict  # metric name -> (median, min, max)
    per_seed: list = field(default_factory=list)
    runs: list = field(default_factory=list)


def _sweep_job(cfg, kind, seed, keep_runs):
    result = train_agent(cfg, seed, kind)
    metrics = eval_metrics(result, cfg)
    if not keep_runs:
        result = None
    return metrics, result


def run_sweep(cfg, spec=None, n_jobs=None, keep_runs=False):
    """Train and evaluate every agent of the sweep at every parameter value and
    seed; aggregate eval metrics over seeds.

    With ``keep_runs`` each row also carries the per-seed :class:`TrainResult`.
    """
    spec = spec or cfg.sweep
    n_jobs = n_jobs or cfg.n_jobs
    jobs = []
    for value in spec.values:
        point = with_overrides(cfg, **{spec.parameter: value})
        for kind in spec.agents:
            for seed in point.seeds:
                jobs.append((value, kind, seed, point))
    outputs = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_job)(point, kind, seed, keep_runs) for _, kind, seed, point in jobs)

    rows = []
    for value in spec.values:
        for kind in spec.agents:
            mine = [out for (v, k, _, _), out in zip(jobs, outputs) if v == value and k == kind]
            per_seed = [m for m, _ in mine]
            stats = {name: aggregate_seeds(getattr(m, name) for m in per_seed)
                     for name in METRIC_NAMES}
            runs = [r for _, r in mine] if keep_runs else []
            rows.append(SweepRow(spec.parameter, value, kind, stats, per_seed, runs))
    return rows


def run_seeds(cfg, kind=None, seeds=None, n_jobs=None):
    """``train_agent`` for every seed; returns the list of TrainResult."""
    seeds = cfg.seeds if seeds is None else seeds
    return Parallel(n_jobs=n_jobs or cfg.n_jobs)(
        delayed(train_agent)(cfg, seed, kind) for seed in seeds)

