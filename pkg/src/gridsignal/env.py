"""Single-agent signal-control environment over the mesoscopic simulator.

The observation is an M x M matrix: normalized splits on the diagonal,
normalized straight-queue estimates on cells of physically connected links,
zeros elsewhere. Actions pick one intersection and nudge its split by
-2, 0, or +2 s; the episode is a 1,800 s warm-up plus 144 control steps of
100 s each (16,200 simulated seconds total).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .demand import FluctuationSpec, ODMatrix, fluctuate, generate
from .network import NetworkTopology, matrix_cell
from .queues import QUEUE_UPPER_BOUND, estimate_queue, sim_link_rows
from .signals import SPLIT_LOWER, SPLIT_STEP, SPLIT_UPPER, SignalPlan, apply_delta
from .simulation import Simulation

WARMUP_S = 1800
CONTROL_INTERVAL_S = 100
EPISODE_STEPS = 144


class EnvError(RuntimeError):
    pass


@dataclass(frozen=True)
class RewardParams:
    q_lc: int = 10
    q_hc: int = 25
    w_cp: float = 10.0
    w_t: float = 0.0
    q_ub: int = QUEUE_UPPER_BOUND
    # link id -> importance weight; links absent from the map default to 1.
    link_weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.q_lc < self.q_hc < self.q_ub:
            raise EnvError("need 0 < q_lc < q_hc < q_ub")
        if self.w_cp < 1 or self.w_t < 0:
            raise EnvError("need w_cp >= 1 and w_t >= 0")

    def weight(self, link_id: str) -> float:
        return self.link_weights.get(link_id, 1.0)


@dataclass
class StepResult:
    state: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


def decode_action(action: int, num_intersections: int) -> tuple[int, int]:
    """Action index -> (intersection index, split delta)."""
    if not 0 <= action < 3 * num_intersections:
        raise EnvError(f"action {action} outside [0, {3 * num_intersections})")
    return action // 3, (-SPLIT_STEP, 0, SPLIT_STEP)[action % 3]


def link_reward(q: float, w_l: float, params: RewardParams) -> float:
    """Piecewise link penalty: free flow, light congestion, heavy congestion."""
    if q < 0:
        raise EnvError("queue length must be non-negative")
    if q < params.q_lc:
        return 0.0
    if q < params.q_hc:
        return -(w_l * q)
    return -(params.w_cp * w_l * q)


def regional_reward(
    queues: dict[str, float], params: RewardParams, interval_travel_time: float = 0.0
) -> float:
    """Sum of link rewards minus the optional travel-time penalty."""
    total = sum(link_reward(q, params.weight(link_id), params) for link_id, q in queues.items())
    return total - params.w_t * interval_travel_time


def encode_state(
    splits: list[int], queues_by_cell: dict[tuple[int, int], float], num_intersections: int
) -> np.ndarray:
    """Build the normalized M x M observation matrix."""
    state = np.zeros((num_intersections, num_intersections))
    for i, split in enumerate(splits):
        state[i, i] = (split - SPLIT_LOWER) / (SPLIT_UPPER - SPLIT_LOWER)
    for (row, col), q in queues_by_cell.items():
        state[row, col] = min(q, QUEUE_UPPER_BOUND) / QUEUE_UPPER_BOUND
    return state


def scenario_one_weights(topology: NetworkTopology) -> dict[str, float]:
    """Main-flow weighting: zero out links running against the west-east flow."""
    return {link.id: 0.0 for link in topology.inter_links if link.orientation == "westbound"}


class TrafficEnv:
    """Stateful environment instance; one per concurrent episode."""

    def __init__(
        self,
        topology: NetworkTopology,
        od: ODMatrix,
        reward_params: Optional[RewardParams] = None,
        fluctuation_ratio: Optional[float] = None,
        initial_plan: Optional[SignalPlan] = None,
        warmup: int = WARMUP_S,
        control_interval: int = CONTROL_INTERVAL_S,
        episode_steps: int = EPISODE_STEPS,
    ):
        self.topology = topology
        self.od = od
        self.reward_params = reward_params or RewardParams()
        self.fluctuation_ratio = fluctuation_ratio
        self.initial_plan = initial_plan or SignalPlan()
        self.warmup = warmup
        self.control_interval = control_interval
        self.episode_steps = episode_steps
        self.sim: Optional[Simulation] = None
        self.step_count = 0
        self._done = True
        self._cells = {
            link.id: matrix_cell(link) for link in topology.inter_links
        }

    def spaces(self) -> dict:
        m = self.topology.num_intersections
        return {"state_shape": [m, m], "action_count": 3 * m}

    def reset(self, seed: int) -> np.ndarray:
        ss = np.random.SeedSequence(seed)
        demand_seed, fluct_seed = (int(s) for s in ss.generate_state(2))
        vehicles = generate(self.od, self.topology, demand_seed)
        if self.fluctuation_ratio:
            spec = FluctuationSpec(ratio=self.fluctuation_ratio, seed=fluct_seed)
            vehicles = fluctuate(vehicles, spec, od_pairs=self.od.pairs())
        plans = {inter.id: self.initial_plan for inter in self.topology.intersections}
        self.sim = Simulation(self.topology, signal_plans=plans, demand=vehicles)
        self.sim.run_until(self.warmup)
        self.step_count = 0
        self._done = False
        return self._observe()[0]

    def step(self, action: int) -> StepResult:
        if self.sim is None:
            raise EnvError("reset must be called before step")
        if self._done:
            raise EnvError("episode already finished; call reset")
        inter_idx, delta = decode_action(action, self.topology.num_intersections)
        inter = self.topology.intersections[inter_idx]
        timeline = self.sim.timelines[inter.id]
        self.sim.schedule_split_change(inter.id, apply_delta(timeline.current_plan, delta))

        t_prev = self.sim.time
        self.sim.run_until(t_prev + self.control_interval)
        self.step_count += 1
        truncated = self.step_count >= self.episode_steps
        self._done = truncated

        state, queues = self._observe()
        travel_time = self._interval_travel_time(t_prev, self.sim.time)
        reward = regional_reward(queues, self.reward_params, travel_time)
        info = {
            "queues": queues,
            "link_rewards": {
                link_id: link_reward(q, self.reward_params.weight(link_id), self.reward_params)
                for link_id, q in queues.items()
            },
            "splits": self.splits(),
            "step": self.step_count,
            "interval_travel_time": travel_time,
        }
        return StepResult(state=state, reward=reward, terminated=False, truncated=truncated, info=info)

    def splits(self) -> list[int]:
        return [
            self.sim.timelines[inter.id].current_plan.split
            for inter in self.topology.intersections
        ]

    def _observe(self) -> tuple[np.ndarray, dict[str, int]]:
        t = self.sim.time
        queues: dict[str, int] = {}
        by_cell: dict[tuple[int, int], float] = {}
        for link in self.topology.inter_links:
            record = estimate_queue(
                link,
                t,
                sim_link_rows(self.sim, link.id),
                self.sim.timelines[link.from_node],
                self.sim.timelines[link.to_node],
                q_ub=self.reward_params.q_ub,
            )
            queues[link.id] = record.q
            by_cell[self._cells[link.id]] = record.q
        state = encode_state(self.splits(), by_cell, self.topology.num_intersections)
        return state, queues

    def _interval_travel_time(self, t0: int, t1: int) -> float:
        """Vehicle-hours spent on the network during (t0, t1]."""
        seconds = 0.0
        for veh in self.sim.vehicles:
            if veh.entries[0] is None:
                continue
            start = max(veh.entries[0], t0)
            last_exit = veh.exits[-1]
            end = t1 if last_exit is None else min(last_exit, t1)
            if end > start:
                seconds += end - start
        return seconds / 3600.0
