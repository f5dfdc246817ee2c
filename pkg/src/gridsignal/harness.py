"""Experiment driver: training runs, fluctuation sweeps, histograms.

All outputs are CSV/JSON with a format_version field; plotting is left to
external tools. Seeds for every episode derive from the master seed through
counter-keyed SeedSequences, so adding repeats or ratios never reshuffles the
seeds of earlier ones.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .agents import FeedbackAgent, FixedTimeAgent, TDAgent, TDHyperparams
from .demand import ODMatrix, od_matrix_from_csv
from .env import EPISODE_STEPS, RewardParams, TrafficEnv, scenario_one_weights
from .network import NetworkTopology, build_grid

FORMAT_VERSION = 1
HISTOGRAM_BIN_WIDTH = 5
AGENT_KINDS = ("fixed", "feedback", "td")


class HarnessError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    network: NetworkTopology
    od: ODMatrix
    reward_params: RewardParams
    agent: str = "fixed"
    episodes: int = 1
    fluctuation_ratios: list[float] = field(default_factory=lambda: [0.0, 0.10, 0.20, 0.30])
    repeats: int = 5
    master_seed: int = 0
    td_hyperparams: TDHyperparams = field(default_factory=TDHyperparams)

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise HarnessError(f"unknown agent kind {self.agent!r}")
        if self.repeats < 1:
            raise HarnessError("repeats must be >= 1")


def load_config(path: str) -> ExperimentConfig:
    """Read an experiment config JSON; relative paths resolve next to it."""
    with open(path) as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    net = raw.get("network", {})
    topology = build_grid(
        rows=int(net.get("grid_rows", 3)),
        cols=int(net.get("grid_cols", 3)),
        link_length=float(net.get("link_length_m", 300.0)),
        free_flow_speed=float(net.get("free_flow_speed_mps", 13.89)),
    )
    od_path = raw["od_file"]
    if not os.path.isabs(od_path):
        od_path = os.path.join(base, od_path)
    od = od_matrix_from_csv(od_path)
    reward_raw = dict(raw.get("reward", {}))
    use_scenario_one = reward_raw.pop("scenario_one_weights", False)
    weights = scenario_one_weights(topology) if use_scenario_one else {}
    params = RewardParams(link_weights=weights, **reward_raw)
    return ExperimentConfig(
        network=topology,
        od=od,
        reward_params=params,
        agent=raw.get("agent", "fixed"),
        episodes=int(raw.get("episodes", 1)),
        fluctuation_ratios=[float(r) for r in raw.get("fluctuation_ratios", [0.0, 0.1, 0.2, 0.3])],
        repeats=int(raw.get("repeats", 5)),
        master_seed=int(raw.get("master_seed", 0)),
        td_hyperparams=TDHyperparams(**raw.get("td", {})),
    )


def episode_seed(master: int, purpose: int, counter_a: int, counter_b: int = 0) -> int:
    """Counter-based seed split: stable under added repeats/ratios."""
    return int(np.random.SeedSequence([master, purpose, counter_a, counter_b]).generate_state(1)[0])


def make_agent(config: ExperimentConfig, checkpoint: Optional[str] = None, seed: int = 0):
    if config.agent == "fixed":
        return FixedTimeAgent()
    if config.agent == "feedback":
        return FeedbackAgent(config.network, q_lc=config.reward_params.q_lc)
    if checkpoint is None:
        raise HarnessError("td agent needs a checkpoint for evaluation")
    return TDAgent.load(checkpoint)


def run_episode(env: TrafficEnv, agent, seed: int, greedy: bool, train: bool = False):
    """One full episode; returns (total reward, per-step queue rows, losses)."""
    state = env.reset(seed)
    total_reward = 0.0
    queue_rows = []  # (step, link_id, q)
    losses = []
    truncated = False
    while not truncated:
        if greedy and isinstance(agent, TDAgent):
            action = agent.act(state, epsilon=0.0)
        else:
            action = agent.act(state)
        result = env.step(action)
        agent.observe(state, action, result.reward, result.state, result.truncated)
        if train and isinstance(agent, TDAgent) and len(agent.buffer) >= agent.hp.batch_size:
            losses.append(agent.train_step())
        total_reward += result.reward
        for link_id in sorted(result.info["queues"]):
            queue_rows.append((result.info["step"], link_id, result.info["queues"][link_id]))
        state = result.state
        truncated = result.truncated
    return total_reward, queue_rows, losses


# -- train -------------------------------------------------------------------


def cmd_train(config: ExperimentConfig, out_dir: str) -> dict:
    """Train on the fixed (unfluctuated) OD matrix; emit curve + checkpoint."""
    os.makedirs(out_dir, exist_ok=True)
    env = TrafficEnv(config.network, config.od, config.reward_params)
    if config.agent == "td":
        agent = TDAgent(
            config.network.num_intersections,
            config.td_hyperparams,
            seed=episode_seed(config.master_seed, 1, 0),
        )
    else:
        agent = make_agent(config)

    curve_path = os.path.join(out_dir, "learning_curve.csv")
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "total_reward", "mean_loss"])
        for episode in range(config.episodes):
            seed = episode_seed(config.master_seed, 2, episode)
            reward, _, losses = run_episode(env, agent, seed, greedy=False, train=True)
            mean_loss = float(np.mean(losses)) if losses else ""
            writer.writerow([episode, repr(reward), mean_loss])

    outputs = {"learning_curve": curve_path}
    if config.agent == "td":
        ckpt = os.path.join(out_dir, "checkpoint.npz")
        agent.save(ckpt)
        outputs["checkpoint"] = ckpt
    return outputs


# -- eval --------------------------------------------------------------------


def _queue_stats(queues: np.ndarray, q_hc: int) -> dict:
    return {
        "observations": int(queues.size),
        "mean_queue": float(np.mean(queues)),
        "median_queue": float(np.median(queues)),
        "p95_queue": float(np.percentile(queues, 95)),
        "frac_heavy": float(np.mean(queues >= q_hc)),
    }


def _eval_agent(config: ExperimentConfig, agent, agent_name: str):
    """Sweep ratios x repeats for one agent; returns (rows, per-ratio results)."""
    rows = []  # (agent, ratio, repeat, step, link_id, q)
    per_ratio = {}
    for ratio_idx, ratio in enumerate(config.fluctuation_ratios):
        env = TrafficEnv(
            config.network,
            config.od,
            config.reward_params,
            fluctuation_ratio=ratio if ratio > 0 else None,
        )
        queues = []
        rewards = []
        for repeat in range(config.repeats):
            seed = episode_seed(config.master_seed, 3, ratio_idx, repeat)
            reward, queue_rows, _ = run_episode(env, agent, seed, greedy=True)
            rewards.append(reward)
            for step, link_id, q in queue_rows:
                rows.append((agent_name, ratio, repeat, step, link_id, q))
                queues.append(q)
        stats = _queue_stats(np.array(queues), config.reward_params.q_hc)
        stats["episode_rewards"] = rewards
        per_ratio[f"{ratio:.2f}"] = stats
    return rows, per_ratio


def cmd_eval(config: ExperimentConfig, out_dir: str, checkpoint: Optional[str] = None) -> dict:
    """Fluctuation-sweep evaluation, always paired with the fixed-time baseline."""
    os.makedirs(out_dir, exist_ok=True)
    agent = make_agent(config, checkpoint=checkpoint)
    rows, per_ratio = _eval_agent(config, agent, config.agent)
    if config.agent == "fixed":
        baseline_rows, baseline_per_ratio = rows, per_ratio
    else:
        baseline_rows, baseline_per_ratio = _eval_agent(config, FixedTimeAgent(), "fixed")
        rows = rows + baseline_rows

    queues_path = os.path.join(out_dir, "queues.csv")
    with open(queues_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "ratio", "repeat", "step", "link_id", "q"])
        for row in sorted(rows):
            writer.writerow(row)

    hist_path = os.path.join(out_dir, "histogram.csv")
    write_histogram(rows, hist_path)

    comparison = []
    for key in sorted(per_ratio):
        comparison.append(
            {
                "ratio": key,
                "agent_mean_queue": per_ratio[key]["mean_queue"],
                "baseline_mean_queue": baseline_per_ratio[key]["mean_queue"],
            }
        )

    summary = {
        "format_version": FORMAT_VERSION,
        "agent": config.agent,
        "master_seed": config.master_seed,
        "repeats": config.repeats,
        "per_ratio": per_ratio,
        "baseline_per_ratio": baseline_per_ratio,
        "comparison": comparison,
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return {"queues": queues_path, "histogram": hist_path, "summary": summary_path}


# -- histogram ---------------------------------------------------------------


def histogram_counts(values, q_ub: int = 50) -> list[tuple[int, int, int]]:
    """Counts per bin [0,5), [5,10), ..., [45,50]; the last bin is closed."""
    bins = []
    values = np.asarray(list(values))
    for start in range(0, q_ub, HISTOGRAM_BIN_WIDTH):
        end = start + HISTOGRAM_BIN_WIDTH
        if end >= q_ub:
            count = int(np.sum((values >= start) & (values <= q_ub)))
        else:
            count = int(np.sum((values >= start) & (values < end)))
        bins.append((start, end, count))
    return bins


def write_histogram(rows, path: str) -> None:
    """Bin a queue table into per-agent, per-ratio frequency counts."""
    if not rows:
        raise HarnessError("empty queue table")
    grouped: dict[tuple, list] = {}
    for agent_name, ratio, _repeat, _step, _link, q in rows:
        grouped.setdefault((agent_name, ratio), []).append(q)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "ratio", "bin_start", "bin_end", "count"])
        for (agent_name, ratio) in sorted(grouped):
            for start, end, count in histogram_counts(grouped[(agent_name, ratio)]):
                writer.writerow([agent_name, ratio, start, end, count])


def cmd_histogram(in_csv: str, out_csv: str) -> dict:
    rows = []
    with open(in_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                (
                    row["agent"],
                    float(row["ratio"]),
                    int(row["repeat"]),
                    int(row["step"]),
                    row["link_id"],
                    float(row["q"]),
                )
            )
    write_histogram(rows, out_csv)
    return {"histogram": out_csv}
