"""OD-matrix demand generation and multi-level demand fluctuation.

Fluctuation works per OD pair: a uniform draw in 1..100 picks the direction
(>50 grows the pair by duplicating sampled vehicles with suffixed ids and a
departure nudge within 1 s; <=50 shrinks it by deleting uniformly at random,
which preserves the original departure-time distribution).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkTopology, route_movements, shortest_route
from .simulation import VehicleRecord


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class ODEntry:
    origin: str
    destination: str
    count: int
    window_start: float
    window_end: float

    def __post_init__(self):
        if self.count < 0:
            raise DemandError("demand count must be non-negative")
        if self.window_end <= self.window_start or self.window_start < 0:
            raise DemandError(f"bad time window [{self.window_start}, {self.window_end})")


@dataclass(frozen=True)
class ODMatrix:
    entries: tuple[ODEntry, ...]

    def pairs(self) -> list[tuple[str, str]]:
        seen = []
        for entry in self.entries:
            key = (entry.origin, entry.destination)
            if key not in seen:
                seen.append(key)
        return seen


@dataclass(frozen=True)
class FluctuationSpec:
    ratio: float
    seed: int

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise DemandError("fluctuation ratio must be in (0, 1)")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate(od: ODMatrix, topology: NetworkTopology, seed: int) -> list[VehicleRecord]:
    """Expand an OD matrix into pending vehicles with seeded departure times."""
    rng = np.random.default_rng(seed)
    route_cache: dict[tuple[str, str], tuple] = {}
    vehicles = []
    for entry in od.entries:
        key = (entry.origin, entry.destination)
        if key not in route_cache:
            route = shortest_route(topology, entry.origin, entry.destination)
            route_cache[key] = (route, route_movements(route))
        route, movements = route_cache[key]
        departures = rng.uniform(entry.window_start, entry.window_end, size=entry.count)
        for k, dep in enumerate(sorted(departures.tolist())):
            vehicles.append(
                VehicleRecord(
                    id=f"{entry.origin}-{entry.destination}-{k}",
                    origin=entry.origin,
                    destination=entry.destination,
                    departure_time=dep,
                    route=list(route),
                    movements=list(movements),
                )
            )
    return vehicles


def _duplicate(veh: VehicleRecord, shift: int, taken_ids: set[str]) -> VehicleRecord:
    new_id = veh.id + "A"
    while new_id in taken_ids:
        new_id += "A"
    taken_ids.add(new_id)
    return VehicleRecord(
        id=new_id,
        origin=veh.origin,
        destination=veh.destination,
        departure_time=max(0.0, veh.departure_time + shift),
        route=list(veh.route),
        movements=list(veh.movements),
    )


def fluctuate(
    vehicles: list[VehicleRecord],
    spec: FluctuationSpec,
    od_pairs: list[tuple[str, str]] | None = None,
) -> list[VehicleRecord]:
    """Apply one fluctuation draw to every OD pair's vehicle group.

    Group sizes change to exactly n + round(n*ratio) (increase) or
    round(n*(1-ratio)) (decrease); untouched groups pass through unchanged.
    """
    rng = np.random.default_rng(spec.seed)
    groups: dict[tuple[str, str], list[VehicleRecord]] = {}
    for veh in vehicles:
        groups.setdefault((veh.origin, veh.destination), []).append(veh)
    if od_pairs is None:
        od_pairs = sorted(groups)
    taken_ids = {veh.id for veh in vehicles}

    out: list[VehicleRecord] = []
    for pair in od_pairs:
        group = groups.pop(pair, [])
        direction = int(rng.integers(1, 101))  # draw consumed even for empty groups
        n = len(group)
        if n == 0:
            continue
        if direction > 50:
            k = _round_half_up(n * spec.ratio)
            picked = rng.choice(n, size=k, replace=False) if k else np.array([], dtype=int)
            out.extend(group)
            for idx in sorted(picked.tolist()):
                shift = int(np.round(rng.uniform(-1.0, 1.0)))
                out.append(_duplicate(group[idx], shift, taken_ids))
        else:
            m = _round_half_up(n * (1.0 - spec.ratio))
            kept = rng.choice(n, size=m, replace=False) if m else np.array([], dtype=int)
            out.extend(group[idx] for idx in sorted(kept.tolist()))
    # Vehicles whose OD pair was not listed pass through untouched.
    for pair in sorted(groups):
        out.extend(groups[pair])
    return out


def od_matrix_from_csv(path: str) -> ODMatrix:
    """Read (origin, destination, count, window_start_s, window_end_s) rows."""
    entries = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entries.append(
                ODEntry(
                    origin=row["origin"],
                    destination=row["destination"],
                    count=int(row["count"]),
                    window_start=float(row["window_start_s"]),
                    window_end=float(row["window_end_s"]),
                )
            )
    return ODMatrix(entries=tuple(entries))


def od_matrix_to_csv(od: ODMatrix, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin", "destination", "count", "window_start_s", "window_end_s"])
        for entry in od.entries:
            writer.writerow(
                [entry.origin, entry.destination, entry.count, entry.window_start, entry.window_end]
            )


def export_departures(vehicles: list[VehicleRecord], path: str) -> None:
    """Audit dump of a (possibly fluctuated) departure list."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "origin", "destination", "departure_time_s"])
        for veh in vehicles:
            writer.writerow([veh.id, veh.origin, veh.destination, veh.departure_time])
