"""Radar/communication mode selection for an autonomous vehicle.

A discrete-time environment plus Round-robin, tabular Q-learning and numpy DQN
agents, with a harness for training, evaluation and parameter sweeps.
"""

__version__ = "0.1.0"

from .agents import FixedActionAgent, QLearningAgent, RoundRobinAgent
from .config import ExperimentConfig, SweepSpec, from_flat, parse_config
from .dqn import DQNAgent
from .env import EnvConfig, FactorProbabilities, RadarCommEnv, RewardParams, State
from .harness import compute_metrics, run_episode, run_sweep, train_agent

__all__ = [
    "DQNAgent",
    "EnvConfig",
    "ExperimentConfig",
    "FactorProbabilities",
    "FixedActionAgent",
    "QLearningAgent",
    "RadarCommEnv",
    "RewardParams",
    "RoundRobinAgent",
    "State",
    "SweepSpec",
    "compute_metrics",
    "from_flat",
    "parse_config",
    "run_episode",
    "run_sweep",
    "train_agent",
]
