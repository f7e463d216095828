"""A deterministic two-state, two-action MDP with a value-iteration solution.

Used as an environment-independent check that :func:`drcsim.agents.q_update`
converges to the optimal action values.
"""

import numpy as np

from ._validation import check_random_state
from .agents import q_update

# NEXT_STATE[s, a], REWARD[s, a]
NEXT_STATE = np.array([[0, 1],
                       [0, 1]])
REWARD = np.array([[0.0, 1.0],
                   [2.0, 0.5]])
GAMMA = 0.9


def value_iteration(next_state=NEXT_STATE, reward=REWARD, gamma=GAMMA, tol=1e-13):
    """Optimal Q-values by repeated Bellman backups until changes fall below ``tol``."""
    q = np.zeros_like(reward, dtype=float)
    while True:
        q_new = reward + gamma * q.max(axis=1)[next_state]
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new


def toy_q_learning(n_updates=100_000, gamma=GAMMA, random_state=0, alpha_scale=1000.0):
    """Q-learning on the toy MDP with uniformly sampled (state, action) pairs.

    The step size for a cell's ``k``-th update is ``1 / (1 + k / alpha_scale)``.
    """
    rng = check_random_state(random_state)
    q = np.zeros_like(REWARD, dtype=float)
    visits = np.zeros_like(REWARD, dtype=int)
    states = rng.integers(0, 2, size=n_updates)
    actions = rng.integers(0, 2, size=n_updates)
    for s, a in zip(states, actions):
        alpha = 1.0 / (1.0 + visits[s, a] / alpha_scale)
        visits[s, a] += 1
        q_update(q, s, a, REWARD[s, a], NEXT_STATE[s, a], alpha, gamma)
    return q
