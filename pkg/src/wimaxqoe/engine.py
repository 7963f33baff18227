"""Deterministic discrete-event engine: virtual clock, event queue, seeded RNG streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

RNG_ALGORITHM = "MT19937"  # CPython random.Random, stable across platforms


class EventKind(Enum):
    PACKET_ARRIVAL = "packet-arrival"
    FRAME_BOUNDARY = "frame-boundary"
    MOBILITY_STEP = "mobility-step"
    LOSS_NOTIFICATION = "loss-notification"
    RECOVERY_TICK = "recovery-tick"
    SIM_END = "sim-end"


@dataclass(order=True, slots=True)
class SimEvent:
    """One scheduled event; (fire_time, sequence_no) is a strict total order."""

    fire_time: float
    sequence_no: int = field(default=-1)  # assigned by the simulator
    kind: EventKind = field(compare=False, default=EventKind.SIM_END)
    payload: Any = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)


@dataclass(slots=True)
class RunSummary:
    events_processed: int
    queue_depth: int
    end_time: float


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past (a logic bug, not recoverable)."""


def derive_stream_seed(seed: int, stream_id: str) -> int:
    """Stable 64-bit sub-seed for a named stream; independent of PYTHONHASHSEED."""
    digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream:
    """Named, counted uniform stream. Identical (seed, stream_id) reproduce exactly."""

    def __init__(self, seed: int, stream_id: str):
        self.stream_id = stream_id
        self.seed = seed
        self.draw_count = 0
        self._random = random.Random(derive_stream_seed(seed, stream_id)).random

    def uniform(self) -> float:
        """Next variate in [0, 1); increments draw_count by exactly 1."""
        self.draw_count += 1
        return self._random()

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def uniform_int(self, n: int) -> int:
        """Integer in [0, n) from a single draw."""
        return min(int(self.uniform() * n), n - 1)


class Simulator:
    """Single-threaded event loop. One instance per run; no shared mutable state."""

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[SimEvent] = []
        self._next_seq = 0
        self._handlers: dict[EventKind, Callable[[SimEvent], None]] = {}
        self.scheduled_counts: dict[EventKind, int] = {}
        self.processed_counts: dict[EventKind, int] = {}

    def on(self, kind: EventKind, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: SimEvent) -> SimEvent:
        """Queue an event; returns a handle usable with cancel()."""
        if event.fire_time < self.now:
            raise SchedulingError(
                f"event {event.kind.value} at t={event.fire_time} is before now={self.now}"
            )
        event.sequence_no = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, event)
        self.scheduled_counts[event.kind] = self.scheduled_counts.get(event.kind, 0) + 1
        return event

    def schedule_at(self, fire_time: float, kind: EventKind, payload: Any = None) -> SimEvent:
        return self.schedule(SimEvent(fire_time=fire_time, kind=kind, payload=payload))

    def cancel(self, handle: SimEvent) -> None:
        """Cancelled handles are never fired; the entry is dropped lazily on pop."""
        handle.cancelled = True

    def queue_depth(self) -> int:
        return sum(1 for e in self._heap if not e.cancelled)

    def run_until(self, t_end: float) -> RunSummary:
        """Process every pending event with fire_time <= t_end, then set clock to t_end."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before now={self.now}")
        heap = self._heap
        handlers = self._handlers
        processed = 0
        while heap and heap[0].fire_time <= t_end:
            event = heapq.heappop(heap)
            if event.cancelled:
                continue
            self.now = event.fire_time
            self.processed_counts[event.kind] = self.processed_counts.get(event.kind, 0) + 1
            processed += 1
            handler = handlers.get(event.kind)
            if handler is not None:
                handler(event)
        self.now = t_end
        return RunSummary(events_processed=processed, queue_depth=self.queue_depth(), end_time=t_end)
