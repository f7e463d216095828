"""Fast invariant checks run by ``drcsim selftest``."""

import itertools
import time

import numpy as np

from . import dqn
from .env import (
    COMMUNICATE,
    RADAR,
    EnvConfig,
    RewardParams,
    all_states,
    decode_state_index,
    immediate_reward,
    queue_step,
    state_index,
)
from .toy import toy_q_learning, value_iteration


def check_reward_table():
    params = RewardParams(2, 1, 50, 5)
    for a, c, event, b in itertools.product((0, 1), (0, 1), (False, True), range(5)):
        if a == COMMUNICATE:
            expected = -50 if event else (2 if c == 0 else 1)
        else:
            expected = 5 * (b + 1) if event else 0
        got = immediate_reward(params, a, c, event, b)
        if got != expected:
            return False, f"a={a} c={c} event={event} b={b}: {got} != {expected}"
    return True, "80 combinations"


def central_difference(params, x, a, y, eps=1e-5):
    """Numerical gradient of 0.5 * (y - Q(x, a))**2 for every parameter."""
    num = params.zeros_like()
    for p, g in zip(params.arrays(), num.arrays()):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps
            up = 0.5 * (y - dqn.forward(params, x)[a]) ** 2
            flat_p[i] = orig - eps
            down = 0.5 * (y - dqn.forward(params, x)[a]) ** 2
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2 * eps)
    return num


def gradient_relative_error(analytic, numeric):
    a = np.concatenate([g.ravel() for g in analytic.arrays()])
    n = np.concatenate([g.ravel() for g in numeric.arrays()])
    return float(np.max(np.abs(a - n)) / max(np.max(np.abs(a) + np.abs(n)), 1e-12))


def check_gradient(n_probes=100, sizes=(6, 5, 4, 2), seed=0, tol=1e-4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        params = dqn.init_params(list(sizes), rng)
        for b in params.biases:
            b += rng.normal(scale=0.1, size=b.shape)
        x = rng.random(sizes[0])
        a = int(rng.integers(sizes[-1]))
        y = float(rng.normal(scale=3.0))
        analytic = dqn.gradient(params, x, a, y)
        numeric = central_difference(params, x, a, y)
        worst = max(worst, gradient_relative_error(analytic, numeric))
    return worst < tol, f"max relative error {worst:.2e} over {n_probes} probes"


def check_queue_conservation(n_steps=100_000, seed=0):
    rng = np.random.default_rng(seed)
    cfg = EnvConfig()
    D = cfg.queue_capacity
    d = rng.integers(0, D + 1, size=n_steps)
    a = rng.integers(0, 2, size=n_steps)
    c = rng.integers(0, 2, size=n_steps)
    arrivals = rng.poisson(3.0, size=n_steps)
    for di, ai, ci, ni in zip(d.tolist(), a.tolist(), c.tolist(), arrivals.tolist()):
        new_d, sent, dropped = queue_step(di, ai, ci, ni, cfg)
        if new_d != di - sent + ni - dropped or not 0 <= new_d <= D or dropped < 0:
            return False, f"violated at d={di} a={ai} c={ci} arrivals={ni}"
        if ai == RADAR and sent:
            return False, "radar step transmitted packets"
    return True, f"{n_steps} random steps"


def check_state_index():
    cfg = EnvConfig()
    states = all_states(cfg)
    indices = [state_index(s, cfg) for s in states]
    ok = indices == list(range(cfg.n_states)) and all(
        decode_state_index(state_index(s, cfg), cfg) == s for s in states)
    return ok, f"{len(states)} states"


def check_toy_q_learning(tol=1e-3):
    err = float(np.max(np.abs(toy_q_learning() - value_iteration())))
    return err < tol, f"max |Q - Q*| = {err:.2e}"


CHECKS = {
    "reward_table": check_reward_table,
    "gradient": check_gradient,
    "queue_conservation": check_queue_conservation,
    "state_index_roundtrip": check_state_index,
    "toy_q_learning": check_toy_q_learning,
}


def run_selftest(out=print):
    """Run every check, report one line each; returns the list of failed names."""
    failed = []
    for name, check in CHECKS.items():
        t0 = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.2f}s)")
        if not ok:
            failed.append(name)
    return failed
