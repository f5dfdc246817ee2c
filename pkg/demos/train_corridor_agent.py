"""Train a small TD agent on a persistently congested corridor.

Two intersections, one heavy one-directional eastbound flow: the fixed 50/50
split wastes green time on the empty north-south axis, so there is a clear
policy to learn.  Twenty episodes are enough to see the learning curve move;
the full acceptance-grade run uses 200 (see tests/test_acceptance.py).

Run:  python3 demos/train_corridor_agent.py
Takes a minute or two.
"""

import numpy as np

from gridsignal.agents import FixedTimeAgent, TDAgent
from gridsignal.demand import ODEntry, ODMatrix
from gridsignal.env import RewardParams, TrafficEnv
from gridsignal.harness import episode_seed, run_episode
from gridsignal.network import build_grid

EPISODES = 20


def main():
    topo = build_grid(1, 2)
    od = ODMatrix(
        entries=(
            ODEntry("T0W", "T1E", 6480, 0, 16200),
            ODEntry("T0S", "T1E", 2430, 0, 16200),
        )
    )
    env = TrafficEnv(topo, od, RewardParams())
    agent = TDAgent(topo.num_intersections, seed=episode_seed(0, 1, 0))

    print("episode  epsilon  total reward  mean loss")
    for episode in range(EPISODES):
        seed = episode_seed(0, 2, episode)
        reward, _, losses = run_episode(env, agent, seed, greedy=False, train=True)
        loss = np.mean(losses) if losses else float("nan")
        print(f"{episode:7d}  {agent.epsilon():7.2f}  {reward:12.0f}  {loss:9.1f}")

    seed = episode_seed(0, 3, 0)
    greedy, _, _ = run_episode(env, agent, seed, greedy=True)
    fixed, _, _ = run_episode(env, FixedTimeAgent(), seed, greedy=True)
    print(f"\nheld-out seed: greedy policy {greedy:.0f} vs fixed-time {fixed:.0f}")
    print("(exploration is still high this early; the gap widens with more episodes)")


if __name__ == "__main__":
    main()
