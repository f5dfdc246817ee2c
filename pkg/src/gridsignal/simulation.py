"""Fixed-step mesoscopic traffic simulation.

Vehicles traverse each link at free-flow speed, join a per-movement FIFO queue
at the downstream end, and discharge at the saturation rate while their
movement is green. Links have a hard storage cap (jam spacing 7.5 m over
3 lanes), so a full downstream link blocks upstream discharge (spillback).
The step length is 1 s; all signal timings are whole seconds, so nothing is
lost to the fixed grid.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .network import LinkSpec, NetworkTopology
from .signals import SignalPlan, SignalTimeline, derive_schedule, phase_for

JAM_SPACING_M = 7.5
LANES_PER_LINK = 3
SATURATION_RATE_PER_LANE = 0.5  # veh/s; 2 s discharge headway

# Per-movement saturation rates from the fixed 2/1/1 lane layout.
MOVEMENT_RATES = {"straight": 1.0, "left": 0.5, "right": 0.5}
MOVEMENT_ORDER = ("straight", "left", "right")


class SimulationError(RuntimeError):
    pass


@dataclass
class VehicleRecord:
    id: str
    origin: str
    destination: str
    departure_time: float
    route: list[LinkSpec]
    movements: list[str]
    entries: list[Optional[int]] = field(default_factory=list)
    exits: list[Optional[int]] = field(default_factory=list)
    status: str = "pending"  # pending | on_network | arrived
    route_pos: int = -1

    def __post_init__(self):
        if not self.entries:
            self.entries = [None] * len(self.route)
        if not self.exits:
            self.exits = [None] * len(self.route)

    @property
    def current_link(self) -> Optional[LinkSpec]:
        if self.status != "on_network":
            return None
        return self.route[self.route_pos]


class LinkState:
    """Runtime occupancy of one link."""

    __slots__ = ("spec", "storage_capacity", "traveling", "queues", "count")

    def __init__(self, spec: LinkSpec):
        self.spec = spec
        self.storage_capacity = int(spec.length * LANES_PER_LINK / JAM_SPACING_M)
        self.traveling: list[tuple[float, int, VehicleRecord]] = []  # heap by queue-arrival time
        self.queues: dict[str, list[VehicleRecord]] = {m: [] for m in MOVEMENT_ORDER}
        self.count = 0

    def queued(self, movement: str) -> int:
        return len(self.queues[movement])


@lru_cache(maxsize=256)
def _phase_windows(plan: SignalPlan) -> dict:
    return derive_schedule(plan).windows


def active_phase(timeline: SignalTimeline, t: float) -> Optional[str]:
    """Phase currently green at time t, or None during clearance."""
    plan = timeline.plan_at(t)
    tau = (t - plan.offset) % plan.cycle
    for phase, (start, end) in _phase_windows(plan).items():
        if start <= tau < end:
            return phase
    return None


class Simulation:
    """Single-threaded mutable simulation instance."""

    def __init__(
        self,
        topology: NetworkTopology,
        signal_plans: Optional[dict[str, SignalPlan]] = None,
        demand: Optional[list[VehicleRecord]] = None,
        audit_conservation: bool = False,
    ):
        self.topology = topology
        plans = signal_plans or {}
        self.timelines: dict[str, SignalTimeline] = {
            inter.id: SignalTimeline(plans.get(inter.id, SignalPlan()))
            for inter in topology.intersections
        }
        self.links: dict[str, LinkState] = {link.id: LinkState(link) for link in topology.links}
        self.time = 0
        self.audit_conservation = audit_conservation
        self._seq = 0
        self.vehicles: list[VehicleRecord] = []
        # Pending vehicles per entry link, ordered by (departure, insertion seq).
        self._pending: dict[str, list[tuple[float, int, VehicleRecord]]] = {}
        self._credit: dict[tuple[str, str], float] = {}
        # Per-link (vehicle, route position) log in entry order; entry/exit
        # timestamps live on the vehicle records themselves.
        self.link_log: dict[str, list[tuple[VehicleRecord, int]]] = {
            link.id: [] for link in topology.links
        }
        self._counts = {"pending": 0, "on_network": 0, "arrived": 0}
        # Incoming inter/TAZ-approach links per intersection, in a fixed order.
        self._incoming: list[tuple[str, LinkState]] = []
        for inter in topology.intersections:
            for link in sorted(topology.links, key=lambda l: l.id):
                if link.to_node == inter.id:
                    self._incoming.append((inter.id, self.links[link.id]))
        if demand:
            self.add_demand(demand)

    # -- setup ---------------------------------------------------------------

    def add_demand(self, vehicles: list[VehicleRecord]) -> None:
        for veh in vehicles:
            if not veh.route:
                raise SimulationError(f"vehicle {veh.id} has an empty route")
            self.vehicles.append(veh)
            veh.status = "pending"
            entry = veh.route[0].id
            heapq.heappush(
                self._pending.setdefault(entry, []), (veh.departure_time, self._seq, veh)
            )
            self._seq += 1
            self._counts["pending"] += 1

    def schedule_split_change(self, intersection_id: str, plan: SignalPlan) -> None:
        """Apply a new plan at the next cycle start at or after the current time."""
        timeline = self.timelines[intersection_id]
        cycle_start = timeline.cycle_start(self.time)
        if cycle_start < self.time:
            cycle_start += timeline.cycle
        timeline.schedule_change(plan, at=cycle_start)

    # -- core step -----------------------------------------------------------

    def step(self) -> None:
        now = self.time
        self._inject(now)
        self._advance_traveling(now)
        self._discharge(now)
        if self.audit_conservation:
            counts = self.snapshot_counts()
            if sum(counts.values()) != len(self.vehicles):
                raise SimulationError(f"conservation violated at t={now}: {counts}")
        self.time = now + 1

    def run_until(self, t: int) -> None:
        if t < self.time:
            raise SimulationError(f"cannot run backwards to t={t} from t={self.time}")
        while self.time < t:
            self.step()

    def _inject(self, now: int) -> None:
        for entry_id in sorted(self._pending):
            heap = self._pending[entry_id]
            state = self.links[entry_id]
            while heap and heap[0][0] <= now and state.count < state.storage_capacity:
                _, _, veh = heapq.heappop(heap)
                veh.status = "on_network"
                veh.route_pos = 0
                veh.entries[0] = now
                self.link_log[entry_id].append((veh, 0))
                state.count += 1
                heapq.heappush(
                    state.traveling, (now + state.spec.free_flow_time, self._seq, veh)
                )
                self._seq += 1
                self._counts["pending"] -= 1
                self._counts["on_network"] += 1

    def _advance_traveling(self, now: int) -> None:
        for state in self.links.values():
            heap = state.traveling
            while heap and heap[0][0] <= now:
                _, _, veh = heapq.heappop(heap)
                movement = veh.movements[veh.route_pos]
                if movement == "exit":
                    # Downstream end is a TAZ sink: leave the network.
                    veh.exits[veh.route_pos] = now
                    veh.status = "arrived"
                    veh.route_pos = -1
                    state.count -= 1
                    self._counts["on_network"] -= 1
                    self._counts["arrived"] += 1
                else:
                    state.queues[movement].append(veh)

    def _discharge(self, now: int) -> None:
        active: dict[str, Optional[str]] = {
            inter_id: active_phase(self.timelines[inter_id], now)
            for inter_id in self.timelines
        }
        for inter_id, state in self._incoming:
            phase = active[inter_id]
            for movement in MOVEMENT_ORDER:
                key = (state.spec.id, movement)
                queue = state.queues[movement]
                if phase is None or phase_for(state.spec.orientation, movement) != phase:
                    if key in self._credit:
                        self._credit[key] = 0.0
                    continue
                if not queue:
                    self._credit[key] = 0.0
                    continue
                credit = self._credit.get(key, 0.0) + MOVEMENT_RATES[movement]
                n = int(credit + 1e-9)
                moved = 0
                while moved < n and queue:
                    veh = queue[0]
                    next_state = self.links[veh.route[veh.route_pos + 1].id]
                    if next_state.count >= next_state.storage_capacity:
                        break  # spillback: FIFO head blocked
                    queue.pop(0)
                    veh.exits[veh.route_pos] = now
                    state.count -= 1
                    veh.route_pos += 1
                    veh.entries[veh.route_pos] = now
                    self.link_log[next_state.spec.id].append((veh, veh.route_pos))
                    next_state.count += 1
                    heapq.heappush(
                        next_state.traveling,
                        (now + next_state.spec.free_flow_time, self._seq, veh),
                    )
                    self._seq += 1
                    moved += 1
                # Bank at most one vehicle of unused credit across seconds.
                self._credit[key] = min(credit - moved, 1.0)

    # -- observation ---------------------------------------------------------

    def snapshot_counts(self) -> dict[str, int]:
        return dict(self._counts)

    def link_state(self, link_id: str) -> LinkState:
        return self.links[link_id]

    def straight_queue_length(self, link_id: str) -> int:
        """Ground-truth count of vehicles waiting in the straight queue."""
        return self.links[link_id].queued("straight")

    def trajectory_rows(self) -> list[tuple]:
        """Flat (vehicle_id, link_id, entry_time_s, exit_time_s, movement) rows."""
        rows = []
        for veh in self.vehicles:
            for pos, link in enumerate(veh.route):
                if veh.entries[pos] is None:
                    break
                rows.append(
                    (veh.id, link.id, veh.entries[pos], veh.exits[pos], veh.movements[pos])
                )
        return rows

    def export_trajectories(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["vehicle_id", "link_id", "entry_time_s", "exit_time_s", "movement"])
            for row in self.trajectory_rows():
                vid, link_id, entry, exit_t, movement = row
                writer.writerow([vid, link_id, entry, "" if exit_t is None else exit_t, movement])
