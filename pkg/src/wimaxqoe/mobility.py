"""Manhattan-grid mobility: two-lane lattice streets, probabilistic turns at
intersections, temporally correlated speed with front-vehicle coupling, and
waypoint export in NS2 setdest / CSV form.

Geometry conventions (right-hand traffic, y grows north):
  horizontal street j lies on y = j * block_len, j in 0..blocks_y;
  vertical street i lies on x = i * block_len, i in 0..blocks_x.
  A node's coordinate along its street axis is `along`; the reported position
  adds the directed lane's lateral offset from the centerline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .engine import RngStream


class Direction(Enum):
    NORTH = "north"
    EAST = "east"
    SOUTH = "south"
    WEST = "west"


class Turn(Enum):
    LEFT = "left"
    RIGHT = "right"
    STRAIGHT = "straight"


LEFT_OF = {
    Direction.EAST: Direction.NORTH,
    Direction.NORTH: Direction.WEST,
    Direction.WEST: Direction.SOUTH,
    Direction.SOUTH: Direction.EAST,
}
RIGHT_OF = {
    Direction.EAST: Direction.SOUTH,
    Direction.SOUTH: Direction.WEST,
    Direction.WEST: Direction.NORTH,
    Direction.NORTH: Direction.EAST,
}

# weight ratio among available exits is fixed at left:right:straight = 1:1:2
TURN_WEIGHTS = {Turn.LEFT: 1.0, Turn.RIGHT: 1.0, Turn.STRAIGHT: 2.0}
TURN_ORDER = (Turn.LEFT, Turn.RIGHT, Turn.STRAIGHT)


@dataclass(frozen=True, slots=True)
class GridMap:
    blocks_x: int
    blocks_y: int
    block_len: float
    lane_offset: float = 2.5

    def __post_init__(self) -> None:
        if self.blocks_x < 1 or self.blocks_y < 1:
            raise ValueError("grid needs at least one block per axis")
        if self.block_len <= 0:
            raise ValueError("block_len must be positive")

    @property
    def width(self) -> float:
        return self.blocks_x * self.block_len

    @property
    def height(self) -> float:
        return self.blocks_y * self.block_len


@dataclass(frozen=True, slots=True)
class SpeedParams:
    v_min: float
    v_max: float
    a_max: float = 2.0
    safety_dist: float = 10.0


@dataclass(frozen=True, slots=True)
class MobState:
    """Kinematic state of one node, pinned to a directed lane."""

    node_id: int
    street_index: int  # horizontal: index j of y = j*L; vertical: index i of x = i*L
    along: float  # coordinate along the street axis (x if horizontal, y if vertical)
    direction: Direction
    speed: float
    dist_to_next: float  # remaining meters to the next intersection

    @property
    def horizontal(self) -> bool:
        return self.direction in (Direction.EAST, Direction.WEST)

    @property
    def lane_id(self) -> tuple[str, int, str]:
        return ("h" if self.horizontal else "v", self.street_index, self.direction.value)

    def position(self, grid: GridMap) -> tuple[float, float]:
        center = self.street_index * grid.block_len
        off = grid.lane_offset
        if self.direction is Direction.EAST:
            return (self.along, center - off)
        if self.direction is Direction.WEST:
            return (self.along, center + off)
        if self.direction is Direction.NORTH:
            return (center + off, self.along)
        return (center - off, self.along)


class TurnTally:
    """Counts turn decisions, split by interior vs boundary intersections."""

    def __init__(self) -> None:
        self.interior: dict[Turn, int] = {t: 0 for t in Turn}
        self.boundary: dict[Turn, int] = {t: 0 for t in Turn}

    def record(self, turn: Turn, is_interior: bool) -> None:
        (self.interior if is_interior else self.boundary)[turn] += 1

    @property
    def interior_total(self) -> int:
        return sum(self.interior.values())


def choose_turn(rng: RngStream) -> Turn:
    """One uniform draw mapped as [0,0.25)->left, [0.25,0.5)->right, [0.5,1)->straight."""
    u = rng.uniform()
    if u < 0.25:
        return Turn.LEFT
    if u < 0.5:
        return Turn.RIGHT
    return Turn.STRAIGHT


def choose_exit(rng: RngStream, available: list[Turn]) -> Turn:
    """Renormalized turn choice over the available exits, keeping the 1:1:2 ratio.

    With all three exits available this reduces exactly to choose_turn's mapping.
    """
    if not available:
        raise RuntimeError("intersection with no exit (grid invariant broken)")
    total = sum(TURN_WEIGHTS[t] for t in available)
    u = rng.uniform() * total
    acc = 0.0
    for t in TURN_ORDER:
        if t not in available:
            continue
        acc += TURN_WEIGHTS[t]
        if u < acc:
            return t
    return available[-1]


def _direction_available(grid: GridMap, ix: int, iy: int, d: Direction) -> bool:
    if d is Direction.EAST:
        return ix < grid.blocks_x
    if d is Direction.WEST:
        return ix > 0
    if d is Direction.NORTH:
        return iy < grid.blocks_y
    return iy > 0


def available_turns(grid: GridMap, ix: int, iy: int, heading: Direction) -> list[Turn]:
    """Exits from intersection (ix, iy) for a node arriving with `heading` (no U-turns)."""
    options = {
        Turn.LEFT: LEFT_OF[heading],
        Turn.RIGHT: RIGHT_OF[heading],
        Turn.STRAIGHT: heading,
    }
    return [t for t in TURN_ORDER if _direction_available(grid, ix, iy, options[t])]


def front_node_info(
    state: MobState, same_lane_neighbors: list[MobState]
) -> tuple[float, float] | tuple[None, None]:
    """(gap, speed) of the nearest node ahead on the same directed lane, if any."""
    best_gap = None
    best_speed = None
    for other in same_lane_neighbors:
        if other.node_id == state.node_id or other.lane_id != state.lane_id:
            continue
        if state.direction in (Direction.EAST, Direction.NORTH):
            gap = other.along - state.along
        else:
            gap = state.along - other.along
        if gap > 0 and (best_gap is None or gap < best_gap):
            best_gap = gap
            best_speed = other.speed
    if best_gap is None:
        return (None, None)
    return (best_gap, best_speed)


def update_speed(
    state: MobState,
    front_gap: float | None,
    front_speed: float | None,
    rng: RngStream,
    params: SpeedParams,
    dt: float,
) -> float:
    """Temporally correlated candidate speed, capped by the front node when close."""
    u = 2.0 * rng.uniform() - 1.0
    v = state.speed + params.a_max * u * dt
    v = min(max(v, params.v_min), params.v_max)
    if front_gap is not None and front_gap < params.safety_dist:
        v = min(v, front_speed)
    return v


def step(
    state: MobState,
    dt: float,
    grid: GridMap,
    same_lane_neighbors: list[MobState],
    rng: RngStream,
    params: SpeedParams,
    tally: TurnTally | None = None,
) -> MobState:
    """Advance one node by dt: speed update, travel, and any intersection turns.

    Distance overshooting an intersection is spent on the outgoing street within
    the same step, so speed is preserved exactly regardless of dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    front_gap, front_speed = front_node_info(state, same_lane_neighbors)
    speed = update_speed(state, front_gap, front_speed, rng, params, dt)

    L = grid.block_len
    street = state.street_index
    along = state.along
    direction = state.direction
    dist = state.dist_to_next
    remaining = speed * dt

    while remaining >= dist and remaining > 0.0:
        remaining -= dist
        # land exactly on the intersection lattice point
        sign = 1.0 if direction in (Direction.EAST, Direction.NORTH) else -1.0
        cross = round((along + sign * dist) / L)
        if direction in (Direction.EAST, Direction.WEST):
            ix, iy = cross, street
        else:
            ix, iy = street, cross
        turns = available_turns(grid, ix, iy, direction)
        choice = choose_exit(rng, turns)
        if tally is not None:
            tally.record(choice, is_interior=len(turns) == len(TURN_ORDER))
        if choice is Turn.LEFT:
            direction = LEFT_OF[direction]
        elif choice is Turn.RIGHT:
            direction = RIGHT_OF[direction]
        if direction in (Direction.EAST, Direction.WEST):
            street, along = iy, ix * L
        else:
            street, along = ix, iy * L
        dist = L

    if direction in (Direction.EAST, Direction.NORTH):
        along += remaining
    else:
        along -= remaining
    dist -= remaining
    return replace(
        state,
        street_index=street,
        along=along,
        direction=direction,
        speed=speed,
        dist_to_next=dist,
    )


def init_placement(
    grid: GridMap, n: int, rng: RngStream, params: SpeedParams
) -> list[MobState]:
    """Place n nodes uniformly over the total directed-lane length."""
    if n < 1:
        raise ValueError("need at least one node")
    # directed lanes: (horizontal?, street_index, direction, length)
    lanes: list[tuple[bool, int, Direction, float]] = []
    for j in range(grid.blocks_y + 1):
        for d in (Direction.EAST, Direction.WEST):
            lanes.append((True, j, d, grid.width))
    for i in range(grid.blocks_x + 1):
        for d in (Direction.NORTH, Direction.SOUTH):
            lanes.append((False, i, d, grid.height))
    total_len = sum(l[3] for l in lanes)

    states = []
    for node_id in range(n):
        pick = rng.uniform() * total_len
        acc = 0.0
        lane = lanes[-1]
        for cand in lanes:
            acc += cand[3]
            if pick < acc:
                lane = cand
                break
        _, street, direction, length = lane
        along = rng.uniform() * length
        frac = math.fmod(along, grid.block_len)
        if direction in (Direction.EAST, Direction.NORTH):
            dist = grid.block_len - frac
        else:
            dist = frac
        speed = rng.uniform_in(params.v_min, params.v_max)
        states.append(
            MobState(
                node_id=node_id,
                street_index=street,
                along=along,
                direction=direction,
                speed=speed,
                dist_to_next=dist,
            )
        )
    return states


class MobilityField:
    """Drives all nodes through fixed-dt steps and records their waypoints."""

    def __init__(
        self,
        grid: GridMap,
        params: SpeedParams,
        n_nodes: int,
        rng: RngStream,
        dt: float,
        record_trajectory: bool = True,
    ):
        self.grid = grid
        self.params = params
        self.rng = rng
        self.dt = dt
        self.tally = TurnTally()
        self.states = init_placement(grid, n_nodes, rng, params)
        self.record_trajectory = record_trajectory
        # waypoints: (time, node_id, x, y, speed)
        self.trajectory: list[tuple[float, int, float, float, float]] = []
        if record_trajectory:
            self._record(0.0)

    def _record(self, now: float) -> None:
        for s in self.states:
            x, y = s.position(self.grid)
            self.trajectory.append((now, s.node_id, x, y, s.speed))

    def advance(self, now: float) -> None:
        """One dt step for every node, front gaps taken against the old snapshot."""
        snapshot = self.states
        self.states = [
            step(s, self.dt, self.grid, snapshot, self.rng, self.params, self.tally)
            for s in snapshot
        ]
        if self.record_trajectory:
            self._record(now)

    def positions(self) -> dict[int, tuple[float, float]]:
        return {s.node_id: s.position(self.grid) for s in self.states}


def export_trace_ns2(trajectory: list[tuple[float, int, float, float, float]]) -> str:
    """NS2 setdest text: one initial-position block, one movement line per waypoint."""
    _check_trajectory(trajectory)
    first_seen: dict[int, tuple[float, float]] = {}
    for _, node_id, x, y, _ in trajectory:
        if node_id not in first_seen:
            first_seen[node_id] = (x, y)
    lines = []
    for node_id in sorted(first_seen):
        x, y = first_seen[node_id]
        lines.append(f"$node_({node_id}) set X_ {x:.2f}")
        lines.append(f"$node_({node_id}) set Y_ {y:.2f}")
        lines.append(f"$node_({node_id}) set Z_ 0.00")
    for t, node_id, x, y, speed in trajectory:
        lines.append(f'$ns_ at {t!r} "$node_({node_id}) setdest {x:.2f} {y:.2f} {speed:.2f}"')
    return "\n".join(lines) + "\n"


def export_trace_csv(trajectory: list[tuple[float, int, float, float, float]]) -> str:
    _check_trajectory(trajectory)
    lines = ["time,node_id,x,y,speed"]
    for t, node_id, x, y, speed in trajectory:
        lines.append(f"{t:.6f},{node_id},{x:.2f},{y:.2f},{speed:.2f}")
    return "\n".join(lines) + "\n"


def _check_trajectory(trajectory: list[tuple[float, int, float, float, float]]) -> None:
    if not trajectory:
        raise ValueError("trajectory is empty")
    times = [w[0] for w in trajectory]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("trajectory is not time-sorted")
