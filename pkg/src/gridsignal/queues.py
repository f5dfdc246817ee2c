"""Queue length from trajectory records: the two-group definition.

At a control time t, the queue on a link counts straight-bound vehicles that
entered before the most recent upstream through-green start (t_gs_u) and
either (group 1) left the link after the next downstream through-green start
(t_gs_d) but no later than t, or (group 2) are still on the link at t. All
interval boundaries are open on the "before"/"after" side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .network import LinkSpec
from .signals import SignalTimeline, phase_for
from .simulation import Simulation

QUEUE_UPPER_BOUND = 50


class QueueEstimationError(ValueError):
    pass


@dataclass(frozen=True)
class QueueRecord:
    link_id: str
    control_time: int
    q: int
    insufficient_history: bool = False


def estimate_queue(
    link: LinkSpec,
    t: int,
    rows: Iterable[tuple[Optional[int], Optional[int], str]],
    upstream: SignalTimeline,
    downstream: SignalTimeline,
    q_ub: int = QUEUE_UPPER_BOUND,
    penetration: float = 1.0,
) -> QueueRecord:
    """Two-group queue estimate from (entry, exit, movement) rows of one link.

    `rows` must contain only events observed up to t; exits later than t are
    ignored so a full log can be passed without leaking future information.
    With probe subsampling the estimate is scaled by 1/penetration and rounded.
    """
    if not link.is_inter:
        raise QueueEstimationError(f"link {link.id} lacks two signalized endpoints")
    if not 0 < penetration <= 1:
        raise QueueEstimationError("penetration must be in (0, 1]")
    if t < upstream.cycle:
        return QueueRecord(link_id=link.id, control_time=t, q=0, insufficient_history=True)

    through_phase = phase_for(link.orientation, "straight")
    t_gs_u = upstream.latest_green_start(through_phase, t)
    t_gs_d = downstream.next_green_start(through_phase, t_gs_u)

    count = 0
    for entry, exit_t, movement in rows:
        if movement != "straight" or entry is None or entry >= t_gs_u:
            continue
        on_link = exit_t is None or exit_t > t
        if on_link:
            count += 1  # group 2: still on the link at t
        elif t_gs_d < exit_t <= t:
            count += 1  # group 1: crossed after the downstream green opened
    q = int(np.round(count / penetration))
    return QueueRecord(link_id=link.id, control_time=t, q=min(q, q_ub))


def oracle_queue(link: LinkSpec, t: int, sim: Simulation) -> int:
    """Ground truth: vehicles currently waiting in the straight queue."""
    if sim.time != t:
        raise QueueEstimationError(f"simulation is at t={sim.time}, not {t}")
    return sim.straight_queue_length(link.id)


def probe_sample(vehicle_ids: Iterable[str], penetration: float, seed: int) -> set[str]:
    """Seeded probe-vehicle subsample of a trajectory log's vehicle ids."""
    if not 0 < penetration <= 1:
        raise QueueEstimationError("penetration must be in (0, 1]")
    rng = np.random.default_rng(seed)
    ids = sorted(set(vehicle_ids))
    keep = rng.random(len(ids)) < penetration
    return {vid for vid, k in zip(ids, keep) if k}


def load_trajectories(path: str) -> dict[str, list[tuple[Optional[int], Optional[int], str]]]:
    """Group an exported trajectory CSV into per-link (entry, exit, movement) rows."""
    per_link: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entry = int(float(row["entry_time_s"]))
            exit_t = row["exit_time_s"]
            per_link.setdefault(row["link_id"], []).append(
                (entry, int(float(exit_t)) if exit_t else None, row["movement"])
            )
    return per_link


def sim_link_rows(sim: Simulation, link_id: str):
    """Live (entry, exit, movement) rows for one link, in entry order."""
    return [
        (veh.entries[pos], veh.exits[pos], veh.movements[pos])
        for veh, pos in sim.link_log[link_id]
    ]
