"""Four-phase signal plans with one adjustable split per intersection.

Phase order within the 100 s cycle: P1 (north-south straight/right), P2
(north-south left), P3 (east-west straight/right), P4 (east-west left), each
followed by a yellow + all-red clearance. The adjustable split is the summed
green of the two north-south phases (P1 + P2), excluding clearances.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

SPLIT_LOWER = 30
SPLIT_UPPER = 70
SPLIT_STEP = 2

PHASES = ("P1", "P2", "P3", "P4")

# Phase serving each (orientation axis, movement) pair.
MOVEMENT_PHASE = {
    ("ns", "straight"): "P1",
    ("ns", "right"): "P1",
    ("ns", "left"): "P2",
    ("ew", "straight"): "P3",
    ("ew", "right"): "P3",
    ("ew", "left"): "P4",
}


class ScheduleError(ValueError):
    pass


def orientation_axis(orientation: str) -> str:
    return "ns" if orientation in ("northbound", "southbound") else "ew"


def phase_for(orientation: str, movement: str) -> str:
    """Phase serving a vehicle approaching on `orientation` doing `movement`."""
    key = (orientation_axis(orientation), movement)
    if key not in MOVEMENT_PHASE:
        raise ScheduleError(f"no phase for {orientation}/{movement}")
    return MOVEMENT_PHASE[key]


@dataclass(frozen=True)
class SignalPlan:
    cycle: int = 100
    left_phase: int = 8
    yellow: int = 2
    all_red: int = 2
    offset: int = 0
    split: int = 50
    split_lower: int = SPLIT_LOWER
    split_upper: int = SPLIT_UPPER
    delta_step: int = SPLIT_STEP

    def __post_init__(self):
        if not (self.split_lower <= self.split <= self.split_upper):
            raise ScheduleError(f"split {self.split} outside [{self.split_lower}, {self.split_upper}]")
        if self.split - self.left_phase <= 0:
            raise ScheduleError("P1 green would be non-positive")
        clearance = 4 * (self.yellow + self.all_red)
        if self.cycle - clearance - self.split - self.left_phase <= 0:
            raise ScheduleError("P3 green would be non-positive")


@dataclass(frozen=True)
class PhaseSchedule:
    """Green windows as [start, end) offsets within one cycle."""

    cycle: int
    windows: dict  # phase -> (start, end)

    def green_window(self, phase: str) -> tuple[int, int]:
        return self.windows[phase]

    def is_green(self, phase: str, t: float, offset: int = 0) -> bool:
        start, end = self.windows[phase]
        tau = (t - offset) % self.cycle
        return start <= tau < end


def derive_schedule(plan: SignalPlan) -> PhaseSchedule:
    """Tile the cycle: P1, clearance, P2, clearance, P3, clearance, P4, clearance."""
    clearance = plan.yellow + plan.all_red
    p1 = plan.split - plan.left_phase
    p2 = plan.left_phase
    p3 = plan.cycle - 4 * clearance - plan.split - plan.left_phase
    p4 = plan.left_phase
    windows = {}
    cursor = 0
    for phase, green in (("P1", p1), ("P2", p2), ("P3", p3), ("P4", p4)):
        windows[phase] = (cursor, cursor + green)
        cursor += green + clearance
    if cursor != plan.cycle:
        raise ScheduleError(f"schedule does not tile the cycle ({cursor} != {plan.cycle})")
    return PhaseSchedule(cycle=plan.cycle, windows=windows)


def apply_delta(plan: SignalPlan, delta: int) -> SignalPlan:
    """Shift the split by delta, clamped to the configured bounds."""
    if delta not in (-plan.delta_step, 0, plan.delta_step):
        raise ScheduleError(f"delta must be one of -{plan.delta_step}, 0, +{plan.delta_step}")
    new_split = min(max(plan.split + delta, plan.split_lower), plan.split_upper)
    return replace(plan, split=new_split)


def green_starts(plan: SignalPlan, movement_phase: str, window: tuple[float, float]) -> list[int]:
    """Absolute times in [t0, t1) where the phase's green window opens."""
    t0, t1 = window
    if t1 <= t0:
        raise ScheduleError("window must be non-empty")
    if movement_phase not in PHASES:
        raise ScheduleError(f"unknown phase {movement_phase!r}")
    schedule = derive_schedule(plan)
    start_in_cycle = schedule.green_window(movement_phase)[0]
    base = (start_in_cycle + plan.offset) % plan.cycle
    first = base + plan.cycle * ((t0 - base) // plan.cycle)
    if first < t0:
        first += plan.cycle
    starts = []
    t = first
    while t < t1:
        starts.append(int(t))
        t += plan.cycle
    return starts


class SignalTimeline:
    """Piecewise-constant signal plan history for one intersection.

    Split changes only take effect at cycle starts, so every cycle is governed
    by a single plan and green windows never get truncated mid-phase.
    """

    def __init__(self, initial_plan: SignalPlan):
        self._changes: list[tuple[int, SignalPlan]] = [(0, initial_plan)]

    @property
    def current_plan(self) -> SignalPlan:
        return self._changes[-1][1]

    @property
    def offset(self) -> int:
        return self._changes[-1][1].offset

    @property
    def cycle(self) -> int:
        return self._changes[-1][1].cycle

    def cycle_start(self, t: float) -> int:
        plan = self.current_plan
        return int(plan.offset + plan.cycle * ((t - plan.offset) // plan.cycle))

    def schedule_change(self, plan: SignalPlan, at: int) -> None:
        """Activate `plan` at time `at`, which must be a cycle start."""
        if at < self._changes[-1][0]:
            raise ScheduleError("signal changes must be scheduled in order")
        if (at - plan.offset) % plan.cycle != 0:
            raise ScheduleError("signal changes must land on a cycle start")
        if at == self._changes[-1][0]:
            self._changes[-1] = (at, plan)
        else:
            self._changes.append((at, plan))

    def plan_at(self, t: float) -> SignalPlan:
        plan = self._changes[0][1]
        for when, candidate in self._changes:
            if when <= t:
                plan = candidate
            else:
                break
        return plan

    def is_green(self, phase: str, t: float) -> bool:
        plan = self.plan_at(t)
        return derive_schedule(plan).is_green(phase, t, offset=plan.offset)

    def latest_green_start(self, phase: str, t: float) -> int:
        """Most recent green start of `phase` at or before t (cycle-accurate)."""
        c0 = self.cycle_start(t)
        while c0 >= -self.cycle:
            plan = self.plan_at(max(c0, 0))
            start = c0 + derive_schedule(plan).green_window(phase)[0]
            if start <= t:
                return start
            c0 -= self.cycle
        raise ScheduleError("no green start found")

    def next_green_start(self, phase: str, t: float) -> int:
        c0 = self.cycle_start(t)
        while True:
            plan = self.plan_at(max(c0, 0))
            start = c0 + derive_schedule(plan).green_window(phase)[0]
            if start > t:
                return start
            c0 += self.cycle


def latest_green_start(plan: SignalPlan, movement_phase: str, t: float) -> int:
    """Most recent green start of the phase at or before time t."""
    schedule = derive_schedule(plan)
    start_in_cycle = schedule.green_window(movement_phase)[0]
    base = (start_in_cycle + plan.offset) % plan.cycle
    k = (t - base) // plan.cycle
    return int(base + plan.cycle * k)


def next_green_start(plan: SignalPlan, movement_phase: str, t: float) -> int:
    """Earliest green start of the phase strictly after time t."""
    latest = latest_green_start(plan, movement_phase, t)
    if latest > t:
        return latest
    return latest + plan.cycle
