"""Deep Q-network written directly in numpy.

The Q-network is a ReLU multilayer perceptron ``6 -> H1 -> H2 -> 2`` with an
identity output layer. Forward and backward passes are hand-written; training
uses plain SGD on the half-squared TD error with a replay memory and a
periodically synchronized target network.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigError, check_int, check_open_unit, check_positive, check_random_state
from .agents import BaseAgent, EpsilonSchedule, epsilon_at, epsilon_greedy
from .env import N_ACTIONS, N_FEATURES, encode_state

MLP_MAGIC = "drcsim-mlp 1"


@dataclass
class MLPParams:
    """Weights ``W[k]`` of shape (fan_in, fan_out) and biases ``b[k]`` per layer.

    Layers act on row vectors: ``h = relu(x @ W + b)``.
    """

    weights: list
    biases: list

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self):
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def zeros_like(self):
        return MLPParams([np.zeros_like(w) for w in self.weights],
                         [np.zeros_like(b) for b in self.biases])


def init_params(sizes, rng):
    """Glorot-uniform weights, zero biases."""
    rng = check_random_state(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPParams(weights, biases)


def _forward_all(params, X):
    """Return pre-activations and activations of every layer for batch ``X``."""
    acts = [X]
    pres = []
    h = X
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pres.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return pres, acts


def forward(params, x):
    h = np.asarray(x, dtype=float)
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k != last:
            h = np.maximum(h, 0.0)
    return h


def batch_gradient(params, X, A, Y):
    """Mean gradient of ``0.5 * (Y - Q(X, A))**2`` over the batch, and the mean loss.

    Only the output unit of the chosen action carries error back.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.atleast_1d(np.asarray(A, dtype=np.intp))
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    n = X.shape[0]
    pres, acts = _forward_all(params, X)
    rows = np.arange(n)
    residual = acts[-1][rows, A] - Y
    loss = 0.5 * float(residual @ residual) / n

    delta = np.zeros(acts[-1].shape)
    delta[rows, A] = residual / n
    weights = params.weights
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k].T) * (pres[k - 1] > 0.0)
    return MLPParams(gw, gb), loss


def gradient(params, x, a, y):
    grad, _ = batch_gradient(params, x, [a], [y])
    return grad


def sgd_step(params, grad, alpha):
    """In-place ``theta <- theta - alpha * grad``; returns ``params``."""
    for p, g in zip(params.weights + params.biases, grad.weights + grad.biases):
        p -= alpha * g
    return params


def save_params(path, params):
    """Text format: magic line, layer count, then per layer a ``W fan_in fan_out``
    header, the weights row-major, a ``b fan_out`` header and the biases."""
    lines = [MLP_MAGIC, f"layers {len(params.weights)}"]
    for w, b in zip(params.weights, params.biases):
        lines.append(f"W {w.shape[0]} {w.shape[1]}")
        lines.extend(repr(float(x)) for x in w.ravel())
        lines.append(f"b {b.shape[0]}")
        lines.extend(repr(float(x)) for x in b)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path):
    with open(path) as fh:
        tokens = [ln.strip() for ln in fh if ln.strip()]
    if not tokens or tokens[0] != MLP_MAGIC:
        raise ValueError(f"{path}: not a {MLP_MAGIC!r} file")
    pos = 1
    n_layers = int(tokens[pos].split()[1])
    pos += 1
    weights, biases = [], []
    for _ in range(n_layers):
        _, rows, cols = tokens[pos].split()
        rows, cols = int(rows), int(cols)
        pos += 1
        weights.append(np.array([float(t) for t in tokens[pos:pos + rows * cols]])
                       .reshape(rows, cols))
        pos += rows * cols
        (size,) = map(int, tokens[pos].split()[1:])
        pos += 1
        biases.append(np.array([float(t) for t in tokens[pos:pos + size]]))
        pos += size
    return MLPParams(weights, biases)


class ReplayMemory:
    """Fixed-capacity FIFO of transitions with encoded copies for batch sampling."""

    def __init__(self, capacity, queue_capacity):
        self.capacity = check_int("memory_capacity", capacity, low=1)
        self.queue_capacity = queue_capacity
        self.states = np.zeros((capacity, N_FEATURES))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, N_FEATURES))
        self._items = [None] * capacity
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def remember(self, t):
        i = self.inserted % self.capacity
        d = self.queue_capacity
        self.states[i] = (t.s.d / d, t.s.c, t.s.r, t.s.w, t.s.v, t.s.m)
        self.next_states[i] = (t.s_next.d / d, t.s_next.c, t.s_next.r, t.s_next.w,
                               t.s_next.v, t.s_next.m)
        self.actions[i] = t.a
        self.rewards[i] = t.r
        self._items[i] = t
        self.inserted += 1

    def transitions(self):
        """Stored transitions, oldest first."""
        n = len(self)
        start = self.inserted - n
        return [self._items[(start + k) % self.capacity] for k in range(n)]

    def sample(self, batch_size, rng):
        idx = rng.integers(0, len(self), size=batch_size)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


@dataclass
class OnlineTargetPair:
    theta: MLPParams
    theta_minus: MLPParams = None
    updates: int = 0

    def __post_init__(self):
        if self.theta_minus is None:
            self.theta_minus = self.theta.copy()


@dataclass(frozen=True)
class DQNConfig:
    alpha: float = 0.001
    gamma: float = 0.99
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    memory_capacity: int = 10_000
    batch_size: int = 32
    target_sync_interval: int = 100
    hidden_sizes: tuple = (64, 64)
    warmup: int = 500

    def __post_init__(self):
        check_positive("dqn.alpha", self.alpha)
        check_open_unit("dqn.gamma", self.gamma)
        check_int("dqn.memory_capacity", self.memory_capacity, low=1)
        check_int("dqn.batch_size", self.batch_size, low=1)
        check_int("dqn.target_sync_interval", self.target_sync_interval, low=1)
        check_int("dqn.warmup", self.warmup, low=0)
        if self.batch_size > self.memory_capacity:
            raise ConfigError(f"dqn.batch_size={self.batch_size} exceeds "
                              f"dqn.memory_capacity={self.memory_capacity}")
        if len(self.hidden_sizes) != 2:
            raise ConfigError(f"dqn.hidden_sizes needs two widths, got {self.hidden_sizes!r}")
        for h in self.hidden_sizes:
            check_int("dqn.hidden_sizes", h, low=1)


def td_target(t, pair, gamma, env_config):
    q_next = forward(pair.theta_minus, encode_state(t.s_next, env_config))
    return t.r + gamma * float(np.max(q_next))


def target_sync(pair):
    pair.theta_minus = pair.theta.copy()


def train_step(pair, memory, cfg, rng):
    """One minibatch SGD step; returns the mean half-squared TD error before the
    update, or None (no change) while the memory holds fewer than ``cfg.warmup``."""
    if len(memory) < max(cfg.warmup, 1):
        return None
    X, A, R, X_next = memory.sample(cfg.batch_size, rng)
    Y = R + cfg.gamma * forward(pair.theta_minus, X_next).max(axis=1)
    grad, loss = batch_gradient(pair.theta, X, A, Y)
    sgd_step(pair.theta, grad, cfg.alpha)
    pair.updates += 1
    if pair.updates % cfg.target_sync_interval == 0:
        target_sync(pair)
    return loss


class DQNAgent(BaseAgent):
    """Epsilon-greedy agent backed by a numpy Q-network.

    One minibatch update per observed transition once ``warmup`` transitions
    are stored. ``predict(X)`` returns greedy actions for encoded states.
    """

    def __init__(self, alpha=0.001, gamma=0.99, eps0=1.0, eps_min=0.01, decay=0.99,
                 memory_capacity=10_000, batch_size=32, target_sync_interval=100,
                 hidden_sizes=(64, 64), warmup=500, random_state=None):
        self.alpha = alpha
        self.gamma = gamma
        self.eps0 = eps0
        self.eps_min = eps_min
        self.decay = decay
        self.memory_capacity = memory_capacity
        self.batch_size = batch_size
        self.target_sync_interval = target_sync_interval
        self.hidden_sizes = hidden_sizes
        self.warmup = warmup
        self.random_state = random_state

    @property
    def config(self):
        return DQNConfig(
            alpha=self.alpha, gamma=self.gamma,
            schedule=EpsilonSchedule(self.eps0, self.eps_min, self.decay),
            memory_capacity=self.memory_capacity, batch_size=self.batch_size,
            target_sync_interval=self.target_sync_interval,
            hidden_sizes=tuple(self.hidden_sizes), warmup=self.warmup)

    def _setup(self, env_config):
        self.config_ = self.config
        rng = check_random_state(self.random_state)
        # separate streams for weight init and for exploration / minibatches
        init_seed, run_seed = rng.integers(0, 2**63, size=2)
        self.rng_ = np.random.default_rng(run_seed)
        sizes = [N_FEATURES, *self.config_.hidden_sizes, N_ACTIONS]
        self.pair_ = OnlineTargetPair(init_params(sizes, np.random.default_rng(init_seed)))
        self.memory_ = ReplayMemory(self.config_.memory_capacity, env_config.queue_capacity)
        self.epsilon_ = epsilon_at(self.config_.schedule, 0)
        self.losses_ = []

    def act(self, state, explore=False):
        q = forward(self.pair_.theta, encode_state(state, self.env_config_))
        return epsilon_greedy(q, self.epsilon_ if explore else 0.0, self.rng_)

    def observe(self, transition):
        self.memory_.remember(transition)
        loss = train_step(self.pair_, self.memory_, self.config_, self.rng_)
        if loss is not None:
            self.losses_.append(loss)
        self.advance()

    def end_episode(self, train=True):
        super().end_episode(train)
        self.epsilon_ = epsilon_at(self.config_.schedule, self.episode_)

    def decision_function(self, X):
        check_is_fitted(self, "pair_")
        X = check_array(X)
        if X.shape[1] != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features per state, got {X.shape[1]}")
        return forward(self.pair_.theta, X)

    def save(self, path):
        check_is_fitted(self, "pair_")
        save_params(path, self.pair_.theta)

    def load(self, path, env_config):
        params = load_params(path)
        self.initialize(env_config)
        if params.sizes != [N_FEATURES, *self.config_.hidden_sizes, N_ACTIONS]:
            raise ValueError(f"{path}: layer sizes {params.sizes} do not match hidden_sizes")
        self.pair_ = OnlineTargetPair(params)
        return self
