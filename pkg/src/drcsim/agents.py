"""Baseline mode-selection policies: Round-robin and tabular Q-learning.

Agents follow the scikit-learn estimator conventions: constructor arguments are
hyperparameters only, ``fit`` trains against an environment and sets the
trailing-underscore attributes, ``predict`` maps encoded states to actions.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigError, check_open_unit, check_probability, check_random_state
from .env import COMMUNICATE, N_ACTIONS, N_FEATURES, RADAR, state_index


@dataclass(frozen=True)
class EpsilonSchedule:
    eps0: float = 1.0
    eps_min: float = 0.01
    decay: float = 0.99

    def __post_init__(self):
        check_probability("eps0", self.eps0)
        check_probability("eps_min", self.eps_min)
        check_open_unit("decay", self.decay, closed_right=True)
        if self.eps_min > self.eps0:
            raise ConfigError(f"eps_min={self.eps_min} exceeds eps0={self.eps0}")


def epsilon_at(schedule, episode):
    return max(schedule.eps_min, schedule.eps0 * schedule.decay ** episode)


def greedy(q_values):
    # ties go to communication mode
    return RADAR if q_values[1] > q_values[0] else COMMUNICATE


def epsilon_greedy(q_values, eps, rng):
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(N_ACTIONS))
    return greedy(q_values)


def round_robin_act(step_counter):
    return step_counter % 2


def q_update(table, s, a, r, s_next, alpha, gamma):
    """One Watkins Q-learning update of cell ``(s, a)`` in place; returns ``table``."""
    target = r + gamma * max(table[s_next, 0], table[s_next, 1])
    table[s, a] += alpha * (target - table[s, a])
    return table


def save_q_table(path, table):
    np.savetxt(path, table, fmt="%.17g", delimiter=",")


def load_q_table(path):
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    if table.shape[1] != N_ACTIONS or table.shape[0] % 32:
        raise ValueError(f"{path}: expected (n*32, 2) Q-table, got {table.shape}")
    return table


def _decode_rows(X, queue_capacity):
    """Encoded feature rows -> (d, c, r, w, v, m) integer rows."""
    X = check_array(X, ensure_2d=True)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} features per state, got {X.shape[1]}")
    out = np.rint(X).astype(int)
    out[:, 0] = np.rint(X[:, 0] * queue_capacity).astype(int)
    return out


class BaseAgent(BaseEstimator):
    """Common policy interface: ``act``, ``observe``, ``end_episode``.

    Subclasses implement ``_setup(env_config)`` which allocates the learned
    state. ``fit`` drives whole training episodes through
    :func:`drcsim.harness.run_episode`.
    """

    def _setup(self, env_config):
        raise NotImplementedError

    def initialize(self, env_config):
        self.env_config_ = env_config
        self.episode_ = 0
        self.step_ = 0
        self._setup(env_config)
        return self

    def fit(self, env, n_episodes=1, steps_per_episode=200):
        """Train for ``n_episodes`` episodes on ``env`` (a ``RadarCommEnv``)."""
        from .harness import run_episode

        if not hasattr(self, "env_config_") or self.env_config_ is not env.config:
            self.initialize(env.config)
        records = [run_episode(env, self, steps_per_episode, train=True)
                   for _ in range(n_episodes)]
        self.train_records_ = getattr(self, "train_records_", []) + records
        return self

    def act(self, state, explore=False):
        raise NotImplementedError

    def advance(self):
        self.step_ += 1

    def observe(self, transition):
        self.advance()

    def end_episode(self, train=True):
        self.step_ = 0
        if train:
            self.episode_ += 1

    def decision_function(self, X):
        raise NotImplementedError

    def predict(self, X):
        """Greedy actions for encoded states ``X`` of shape (n, 6)."""
        q = self.decision_function(X)
        return np.where(q[:, 1] > q[:, 0], RADAR, COMMUNICATE)


class RoundRobinAgent(BaseAgent):
    """Alternate communication / radar every step, starting with communication."""

    def _setup(self, env_config):
        pass

    def act(self, state, explore=False):
        return round_robin_act(self.step_)

    def end_episode(self, train=True):
        self.step_ = 0

    def decision_function(self, X):
        check_is_fitted(self, "env_config_")
        X = check_array(X)
        n = X.shape[0]
        q = np.zeros((n, N_ACTIONS))
        q[np.arange(n), np.arange(n) % 2] = 1.0
        return q

    def predict(self, X):
        X = check_array(X)
        return np.arange(X.shape[0]) % 2


class FixedActionAgent(BaseAgent):
    """Always take ``action``; a reference policy for metric checks."""

    def __init__(self, action=RADAR):
        self.action = action

    def _setup(self, env_config):
        if self.action not in (COMMUNICATE, RADAR):
            raise ValueError(f"action must be 0 or 1, got {self.action!r}")

    def act(self, state, explore=False):
        return self.action

    def decision_function(self, X):
        X = check_array(X)
        q = np.zeros((X.shape[0], N_ACTIONS))
        q[:, self.action] = 1.0
        return q


class QLearningAgent(BaseAgent):
    """Tabular Q-learning over the ``(D+1)*32`` discrete states."""

    def __init__(self, alpha=0.1, gamma=0.99, eps0=1.0, eps_min=0.01, decay=0.99,
                 random_state=None):
        self.alpha = alpha
        self.gamma = gamma
        self.eps0 = eps0
        self.eps_min = eps_min
        self.decay = decay
        self.random_state = random_state

    @property
    def schedule(self):
        return EpsilonSchedule(self.eps0, self.eps_min, self.decay)

    def _setup(self, env_config):
        check_open_unit("qlearning.alpha", self.alpha, closed_right=True)
        check_open_unit("qlearning.gamma", self.gamma)
        self.schedule_ = self.schedule
        self.rng_ = check_random_state(self.random_state)
        self.q_table_ = np.zeros((env_config.n_states, N_ACTIONS))
        self.epsilon_ = epsilon_at(self.schedule_, 0)

    def act(self, state, explore=False):
        q = self.q_table_[state_index(state, self.env_config_)]
        return epsilon_greedy(q, self.epsilon_ if explore else 0.0, self.rng_)

    def observe(self, transition):
        cfg = self.env_config_
        q_update(self.q_table_, state_index(transition.s, cfg), transition.a,
                 transition.r, state_index(transition.s_next, cfg), self.alpha, self.gamma)
        self.advance()

    def end_episode(self, train=True):
        super().end_episode(train)
        self.epsilon_ = epsilon_at(self.schedule_, self.episode_)

    def decision_function(self, X):
        check_is_fitted(self, "q_table_")
        rows = _decode_rows(X, self.env_config_.queue_capacity)
        idx = rows[:, 0] * 32 + (rows[:, 1] << 4 | rows[:, 2] << 3 | rows[:, 3] << 2
                                 | rows[:, 4] << 1 | rows[:, 5])
        return self.q_table_[idx]

    def save(self, path):
        check_is_fitted(self, "q_table_")
        save_q_table(path, self.q_table_)

    def load(self, path, env_config):
        table = load_q_table(path)
        if table.shape[0] != env_config.n_states:
            raise ValueError(f"{path}: table has {table.shape[0]} rows, "
                             f"config needs {env_config.n_states}")
        self.initialize(env_config)
        self.q_table_ = table
        return self
