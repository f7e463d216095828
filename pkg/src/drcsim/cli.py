"""Command-line entry point.

    drcsim train    [--config PATH] [--seed N] [--out DIR] [--agent NAME]
    drcsim eval     [--config PATH] [--seed N] [--out DIR] [--agent NAME] [--policy PATH]
    drcsim sweep    [--config PATH] [--seed N] [--out DIR]
    drcsim selftest

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
``DRCSIM_OUT`` is used when ``--out`` is absent.
"""

import argparse
import csv
import datetime
import io
import json
import logging
import os
import sys
import tempfile

from . import __version__
from .config import AGENT_KINDS, ConfigError, from_flat, parse_config, to_flat
from .harness import (
    METRIC_NAMES,
    compute_metrics,
    convergence_episode,
    evaluate_agent,
    eval_metrics,
    make_agent,
    run_seeds,
    run_sweep,
)

logger = logging.getLogger("drcsim")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

EPISODE_COLUMNS = ("seed", "phase", "episode", "total_reward", "packets_sent",
                   "events_total", "events_missed")
SUMMARY_COLUMNS = ("seed", "agent", "phase", "throughput", "miss_detection_probability",
                   "average_reward", "convergence_episode")
SWEEP_COLUMNS = ("parameter", "value", "agent") + tuple(
    f"{m}_{s}" for m in METRIC_NAMES for s in ("median", "min", "max"))

POLICY_SUFFIX = {"qlearning": ".csv", "dqn": ".mlp"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="drcsim", description="Radar/communication mode-selection experiments")
    parser.add_argument("subcommand", choices=("train", "eval", "sweep", "selftest"))
    parser.add_argument("--config", help="key-value config file or a run manifest (JSON)")
    parser.add_argument("--seed", type=int, help="run this single seed instead of the config list")
    parser.add_argument("--out", help="output directory (default: $DRCSIM_OUT or ./runs)")
    parser.add_argument("--agent", choices=AGENT_KINDS, help="override the configured agent")
    parser.add_argument("--policy", help="eval: serialized policy to load")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    write_atomic(path, buf.getvalue())


def resolve_config(args):
    cfg = parse_config(args.config) if args.config else from_flat({})
    overrides = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed={args.seed} out of range; legal range is integers >= 0")
        overrides["experiment.seeds"] = [args.seed]
    if args.agent:
        overrides["agent"] = args.agent
    if overrides:
        flat = to_flat(cfg)
        flat.update(overrides)
        cfg = from_flat(flat)
    return cfg


def output_dir(args):
    out = args.out or os.environ.get("DRCSIM_OUT") or "runs"
    os.makedirs(out, exist_ok=True)
    return out


def write_manifest(out, command, cfg):
    manifest = {
        "tool": "drcsim",
        "version": __version__,
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seeds": list(cfg.seeds),
        "config": to_flat(cfg),
    }
    path = os.path.join(out, f"{command}_manifest.json")
    write_atomic(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _episode_rows(seed, records):
    for r in records:
        yield {"seed": seed, "phase": r.phase, "episode": r.episode,
               "total_reward": float(r.total_reward), "packets_sent": r.packets_sent,
               "events_total": r.events_total, "events_missed": r.events_missed}


def _summary_row(seed, agent, phase, metrics, conv=None):
    return {"seed": seed, "agent": agent, "phase": phase,
            "throughput": metrics.throughput,
            "miss_detection_probability": metrics.miss_detection_probability,
            "average_reward": metrics.average_reward,
            "convergence_episode": conv}


def _try_plot(fn, *args):
    try:
        fn(*args)
    except Exception as exc:  # plots are optional; CSVs are the contract
        logger.warning("plot skipped: %s", exc)


def cmd_train(args, cfg, out):
    write_manifest(out, "train", cfg)
    results = run_seeds(cfg)
    episodes, summary, curves = [], [], {}
    for res in results:
        episodes.extend(_episode_rows(res.seed, res.train))
        episodes.extend(_episode_rows(res.seed, res.eval))
        conv = None
        if len(res.train) >= 2 * cfg.convergence_window:
            conv = convergence_episode(res.train, cfg.convergence_window,
                                       cfg.convergence_tolerance)
        if res.train:
            tail = compute_metrics(res.train, min(cfg.metrics_window, len(res.train)))
            summary.append(_summary_row(res.seed, cfg.agent, "train", tail, conv))
        if res.eval:
            summary.append(_summary_row(res.seed, cfg.agent, "eval", eval_metrics(res, cfg)))
        curves[f"{cfg.agent} seed {res.seed}"] = [r.total_reward for r in res.train]
    write_csv(os.path.join(out, "episodes.csv"), EPISODE_COLUMNS, episodes)
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS, summary)
    for res in results:
        suffix = POLICY_SUFFIX.get(cfg.agent)
        if suffix:
            path = os.path.join(out, f"policy_seed{res.seed}{suffix}")
            tmp = path + ".tmp"
            res.agent.save(tmp)
            os.replace(tmp, path)
    if any(curves.values()):
        from .plotting import plot_reward_curves

        _try_plot(plot_reward_curves, curves, os.path.join(out, "reward_vs_episode.svg"))
    for row in summary:
        print(f"seed={row['seed']} {row['phase']}: reward={row['average_reward']:.2f} "
              f"throughput={row['throughput']:.4f} "
              f"miss={row['miss_detection_probability']:.4f}")
    return EXIT_OK


def cmd_eval(args, cfg, out):
    write_manifest(out, "eval", cfg)
    episodes, summary = [], []
    for seed in cfg.seeds:
        agent = make_agent(cfg.agent, cfg.agent_params())
        suffix = POLICY_SUFFIX.get(cfg.agent)
        if suffix:
            path = args.policy or os.path.join(out, f"policy_seed{seed}{suffix}")
            agent.load(path, cfg.env)
        else:
            agent.initialize(cfg.env)
        records = evaluate_agent(agent, cfg, seed)
        episodes.extend(_episode_rows(seed, records))
        if records:
            summary.append(_summary_row(seed, cfg.agent, "eval", compute_metrics(records)))
    write_csv(os.path.join(out, "eval_episodes.csv"), EPISODE_COLUMNS, episodes)
    write_csv(os.path.join(out, "eval_summary.csv"), SUMMARY_COLUMNS, summary)
    for row in summary:
        print(f"seed={row['seed']} eval: reward={row['average_reward']:.2f} "
              f"throughput={row['throughput']:.4f} "
              f"miss={row['miss_detection_probability']:.4f}")
    return EXIT_OK


def sweep_table(rows):
    table = []
    for r in rows:
        row = {"parameter": r.parameter, "value": float(r.value), "agent": r.agent}
        for m in METRIC_NAMES:
            for name, x in zip(("median", "min", "max"), r.stats[m]):
                row[f"{m}_{name}"] = x
        table.append(row)
    return table


def cmd_sweep(args, cfg, out):
    write_manifest(out, "sweep", cfg)
    rows = run_sweep(cfg)
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, sweep_table(rows))
    from .plotting import plot_sweep

    _try_plot(plot_sweep, rows, out)
    for r in rows:
        print(f"{r.parameter}={r.value} {r.agent}: "
              f"reward={r.stats['average_reward'][0]:.2f} "
              f"throughput={r.stats['throughput'][0]:.4f} "
              f"miss={r.stats['miss_detection_probability'][0]:.4f}")
    return EXIT_OK


def cmd_selftest(args, cfg, out):
    from .selftest import run_selftest

    failed = run_selftest()
    if failed:
        print(f"selftest FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_RUNTIME
    print("selftest passed")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"drcsim: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.subcommand == "selftest":
        return cmd_selftest(args, None, None)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"drcsim: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        out = output_dir(args)
        return COMMANDS[args.subcommand](args, cfg, out)
    except (OSError, ValueError) as exc:
        print(f"drcsim: {args.subcommand} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
