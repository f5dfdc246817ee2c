"""Grid road network: intersections, directed links, boundary zones.

The network is a rows x cols lattice of signalized intersections connected by
bidirectional link pairs, with traffic assignment zones (TAZs) attached to
every perimeter approach. Intersection indices are row-major; row 0 is the
northern edge and column 0 the western edge.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Optional

ORIENTATIONS = ("eastbound", "westbound", "northbound", "southbound")

# Compass heading per orientation, degrees counterclockwise from east.
_HEADING = {"eastbound": 0, "northbound": 90, "westbound": 180, "southbound": 270}

DEFAULT_LINK_LENGTH_M = 300.0
DEFAULT_FREE_FLOW_SPEED_MPS = 13.89

# Fixed approach layout: two straight lanes, one left-turn lane, one right-turn lane.
APPROACH_LANES = {"straight": 2, "left": 1, "right": 1}


class NetworkError(ValueError):
    pass


class RoutingError(NetworkError):
    pass


@dataclass(frozen=True)
class IntersectionSpec:
    id: str
    index: int
    row: int
    col: int


@dataclass(frozen=True)
class TazSpec:
    id: str
    attached_node: str
    role: str = "both"  # source, sink, or both


@dataclass(frozen=True)
class LinkSpec:
    id: str
    from_node: str
    to_node: str
    length: float
    free_flow_speed: float
    orientation: str
    # Intersection indices, None when the endpoint is a TAZ.
    from_index: Optional[int] = None
    to_index: Optional[int] = None

    def __post_init__(self):
        if self.length <= 0 or self.free_flow_speed <= 0:
            raise NetworkError(f"link {self.id}: length and speed must be positive")
        if self.orientation not in ORIENTATIONS:
            raise NetworkError(f"link {self.id}: bad orientation {self.orientation!r}")

    @property
    def free_flow_time(self) -> float:
        return self.length / self.free_flow_speed

    @property
    def is_inter(self) -> bool:
        """True for links connecting two intersections."""
        return self.from_index is not None and self.to_index is not None


@dataclass(frozen=True)
class NetworkTopology:
    grid_rows: int
    grid_cols: int
    intersections: tuple[IntersectionSpec, ...]
    links: tuple[LinkSpec, ...]
    tazs: tuple[TazSpec, ...]
    _links_by_id: dict = field(repr=False, default_factory=dict)
    _out_links: dict = field(repr=False, default_factory=dict)
    _by_endpoints: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        for link in self.links:
            self._links_by_id[link.id] = link
            self._out_links.setdefault(link.from_node, []).append(link)
            key = (link.from_node, link.to_node)
            if key in self._by_endpoints:
                raise NetworkError(f"duplicate link {key}")
            self._by_endpoints[key] = link

    @property
    def num_intersections(self) -> int:
        return len(self.intersections)

    @property
    def inter_links(self) -> list[LinkSpec]:
        return [link for link in self.links if link.is_inter]

    def link(self, link_id: str) -> LinkSpec:
        return self._links_by_id[link_id]

    def link_between(self, from_node: str, to_node: str) -> LinkSpec:
        return self._by_endpoints[(from_node, to_node)]

    def out_links(self, node: str) -> list[LinkSpec]:
        return list(self._out_links.get(node, []))

    def taz(self, taz_id: str) -> TazSpec:
        for taz in self.tazs:
            if taz.id == taz_id:
                return taz
        raise NetworkError(f"unknown TAZ {taz_id!r}")


def _heading_delta(in_orientation: str, out_orientation: str) -> int:
    return (_HEADING[out_orientation] - _HEADING[in_orientation]) % 360


def movement_between(in_orientation: str, out_orientation: str) -> str:
    """Turn movement implied by consecutive link orientations."""
    delta = _heading_delta(in_orientation, out_orientation)
    if delta == 0:
        return "straight"
    if delta == 90:
        return "left"
    if delta == 270:
        return "right"
    raise NetworkError(f"u-turn from {in_orientation} to {out_orientation}")


def build_grid(
    rows: int,
    cols: int,
    link_length: float = DEFAULT_LINK_LENGTH_M,
    free_flow_speed: float = DEFAULT_FREE_FLOW_SPEED_MPS,
) -> NetworkTopology:
    """Build a rows x cols signalized grid with boundary TAZs.

    Every grid edge carries a bidirectional pair of inter-intersection links;
    every perimeter approach direction gets one TAZ with an inbound approach
    link and an outbound exit link.
    """
    if rows < 1 or cols < 1:
        raise NetworkError("grid dimensions must be positive")
    if link_length <= 0 or free_flow_speed <= 0:
        raise NetworkError("link length and free-flow speed must be positive")

    intersections = []
    for r in range(rows):
        for c in range(cols):
            idx = r * cols + c
            intersections.append(IntersectionSpec(id=f"I{idx}", index=idx, row=r, col=c))

    def node_id(r: int, c: int) -> str:
        return f"I{r * cols + c}"

    links: list[LinkSpec] = []
    tazs: list[TazSpec] = []

    def add_link(from_node, to_node, orientation, from_index=None, to_index=None):
        links.append(
            LinkSpec(
                id=f"{from_node}->{to_node}",
                from_node=from_node,
                to_node=to_node,
                length=link_length,
                free_flow_speed=free_flow_speed,
                orientation=orientation,
                from_index=from_index,
                to_index=to_index,
            )
        )

    # Inter-intersection links on every lattice edge, both directions.
    for r in range(rows):
        for c in range(cols):
            idx = r * cols + c
            if c + 1 < cols:
                add_link(node_id(r, c), node_id(r, c + 1), "eastbound", idx, idx + 1)
                add_link(node_id(r, c + 1), node_id(r, c), "westbound", idx + 1, idx)
            if r + 1 < rows:
                south = (r + 1) * cols + c
                add_link(node_id(r, c), node_id(r + 1, c), "southbound", idx, south)
                add_link(node_id(r + 1, c), node_id(r, c), "northbound", south, idx)

    # One TAZ per perimeter approach direction. The approach link's
    # orientation is the direction of travel into the grid.
    perimeter_dirs = {
        "N": ("southbound", "northbound"),  # TAZ north of node: enter heading south
        "S": ("northbound", "southbound"),
        "W": ("eastbound", "westbound"),
        "E": ("westbound", "eastbound"),
    }
    for inter in intersections:
        missing = []
        if inter.row == 0:
            missing.append("N")
        if inter.row == rows - 1:
            missing.append("S")
        if inter.col == 0:
            missing.append("W")
        if inter.col == cols - 1:
            missing.append("E")
        for side in missing:
            taz_id = f"T{inter.index}{side}"
            tazs.append(TazSpec(id=taz_id, attached_node=inter.id, role="both"))
            in_orient, out_orient = perimeter_dirs[side]
            add_link(taz_id, inter.id, in_orient, None, inter.index)
            add_link(inter.id, taz_id, out_orient, inter.index, None)

    return NetworkTopology(
        grid_rows=rows,
        grid_cols=cols,
        intersections=tuple(intersections),
        links=tuple(links),
        tazs=tuple(tazs),
    )


def matrix_cell(link: LinkSpec) -> Optional[tuple[int, int]]:
    """State-matrix cell for an inter-intersection link, None for TAZ links.

    Row is the upstream intersection index, column the downstream one.
    """
    if not link.is_inter:
        return None
    return (link.from_index, link.to_index)


def shortest_route(topology: NetworkTopology, origin_taz: str, destination_taz: str) -> list[LinkSpec]:
    """Minimum free-flow-time route between two TAZs.

    Ties are broken by the lexicographically smallest node-id sequence, so
    routing is fully deterministic.
    """
    if origin_taz == destination_taz:
        raise RoutingError("origin and destination TAZ must differ")
    topology.taz(origin_taz)
    topology.taz(destination_taz)

    # Dijkstra over (cost, node-id sequence); tuple comparison gives the
    # lexicographic tie-break for free.
    heap = [(0.0, (origin_taz,))]
    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in best and best[node] <= (cost, path):
            continue
        best[node] = (cost, path)
        if node == destination_taz:
            break
        for link in topology.out_links(node):
            nxt = link.to_node
            if nxt in path:
                continue
            # Intermediate TAZs are not traversable.
            if nxt != destination_taz and nxt.startswith("T"):
                continue
            heapq.heappush(heap, (cost + link.free_flow_time, path + (nxt,)))

    if destination_taz not in best:
        raise RoutingError(f"no route {origin_taz} -> {destination_taz}")
    _, path = best[destination_taz]
    return [topology.link_between(a, b) for a, b in zip(path, path[1:])]


def route_movements(route: list[LinkSpec]) -> list[str]:
    """Per-link movement at each link's downstream node.

    The last link ends at the destination TAZ; its movement is "exit".
    """
    moves = []
    for link, nxt in zip(route, route[1:]):
        moves.append(movement_between(link.orientation, nxt.orientation))
    moves.append("exit")
    return moves


def load_network_config(path: str) -> NetworkTopology:
    """Build a topology from a JSON config file.

    Schema: {"grid_rows": int, "grid_cols": int, "link_length_m": float,
    "free_flow_speed_mps": float}.
    """
    with open(path) as fh:
        cfg = json.load(fh)
    return build_grid(
        rows=int(cfg["grid_rows"]),
        cols=int(cfg["grid_cols"]),
        link_length=float(cfg.get("link_length_m", DEFAULT_LINK_LENGTH_M)),
        free_flow_speed=float(cfg.get("free_flow_speed_mps", DEFAULT_FREE_FLOW_SPEED_MPS)),
    )
