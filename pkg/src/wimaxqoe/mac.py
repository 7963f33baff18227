"""Simplified 802.16 PMP cell mechanics: per-SS FIFO queues, frame-based
round-robin grants for Best-Effort connections, CBR emission timing, and a
deterministic two-ray coverage channel."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum


class ServiceClass(Enum):
    UGS = "UGS"
    RTPS = "rtPS"
    ERTPS = "ertPS"
    NRTPS = "nrtPS"
    BE = "BE"


class DropReason(Enum):
    QUEUE_OVERFLOW = "queue_overflow"
    CHANNEL_OUTAGE = "channel_outage"


@dataclass(frozen=True, slots=True)
class Connection:
    cid: int
    ss_id: int
    service_class: ServiceClass
    traffic_priority: int
    max_sustained_rate: float  # bytes/s

    def schedulable(self) -> bool:
        return self.service_class is ServiceClass.BE


@dataclass(slots=True)
class Packet:
    flow_id: int
    seq: int
    size: int
    t_created: float
    t_dequeued: float | None = None
    t_delivered: float | None = None
    drop_reason: DropReason | None = None


@dataclass(frozen=True, slots=True)
class Frame:
    index: int
    start: float
    duration: float
    ul_capacity: float  # bytes grantable to BE connections this frame

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True, slots=True)
class LossNotification:
    flow_id: int
    time: float
    reason: DropReason


class ChannelModel:
    """Deterministic two-ray ground coverage: received power Pt*Gt*Gr*ht^2*hr^2/d^4,
    lossless inside the radius where it reaches the receive threshold, total loss
    outside. The carrier-sense threshold is kept for fidelity but unused (the PMP
    uplink here is contention-free)."""

    def __init__(
        self,
        rx_power_threshold: float = 2.025e-12,
        frequency: float = 3.486e9,
        tx_power: float = 0.28183815,
        tx_gain: float = 1.0,
        rx_gain: float = 1.0,
        tx_height: float = 1.5,
        rx_height: float = 1.5,
    ):
        if rx_power_threshold <= 0:
            raise ValueError("rx_power_threshold must be positive")
        self.rx_power_threshold = rx_power_threshold
        self.cs_power_threshold = 0.9 * rx_power_threshold
        self.frequency = frequency
        self.tx_power = tx_power
        self.tx_gain = tx_gain
        self.rx_gain = rx_gain
        self.tx_height = tx_height
        self.rx_height = rx_height
        gain = tx_power * tx_gain * rx_gain * tx_height**2 * rx_height**2
        self.coverage_radius = (gain / rx_power_threshold) ** 0.25

    def rx_power(self, distance: float) -> float:
        if distance <= 0:
            return math.inf
        gain = self.tx_power * self.tx_gain * self.rx_gain
        return gain * self.tx_height**2 * self.rx_height**2 / distance**4

    def in_coverage(self, ss_position: tuple[float, float], bs_position: tuple[float, float]) -> bool:
        dx = ss_position[0] - bs_position[0]
        dy = ss_position[1] - bs_position[1]
        return math.hypot(dx, dy) <= self.coverage_radius


def channel_deliver(
    pkt: Packet,
    ss_position: tuple[float, float],
    bs_position: tuple[float, float],
    model: ChannelModel,
    frame: Frame,
) -> bool:
    """Resolve a granted packet: delivered at frame end inside coverage, dropped
    with channel_outage otherwise. Returns True when delivered."""
    if model.in_coverage(ss_position, bs_position):
        pkt.t_delivered = frame.end
        return True
    pkt.drop_reason = DropReason.CHANNEL_OUTAGE
    return False


def emission_interval(packet_size: int, base_interval: float, rate_max: float, rate_current: float) -> float:
    """CBR inter-packet gap packet_size / rate_current, computed so the configured
    base interval is reproduced bit-exactly while the rate sits at its maximum."""
    if rate_current <= 0:
        raise ValueError("rate must be positive")
    if rate_current == rate_max:
        return base_interval
    return base_interval * (rate_max / rate_current)


class SsQueue:
    """FIFO uplink queue of one connection, bounded at q_max packets."""

    def __init__(self, cid: int, q_max: int):
        if q_max < 1:
            raise ValueError("q_max must be at least 1")
        self.cid = cid
        self.q_max = q_max
        self._packets: deque[Packet] = deque()

    def __len__(self) -> int:
        return len(self._packets)

    def head(self) -> Packet | None:
        return self._packets[0] if self._packets else None

    def pop(self) -> Packet:
        return self._packets.popleft()

    def enqueue(self, pkt: Packet) -> bool:
        """Append if there is room; on overflow marks the packet dropped and
        returns False (the caller emits the loss notification)."""
        if len(self._packets) >= self.q_max:
            pkt.drop_reason = DropReason.QUEUE_OVERFLOW
            return False
        self._packets.append(pkt)
        return True


class BsScheduler:
    """Round-robin BE grant allocator; the start pointer rotates to the connection
    after the last one served, so backlogged connections differ by at most one
    grant over any window."""

    def __init__(self, connections: list[Connection]):
        bad = [c for c in connections if not c.schedulable()]
        if bad:
            raise ValueError(
                f"connection {bad[0].cid} has service class {bad[0].service_class.value}; only BE is schedulable"
            )
        self.order = [c.cid for c in connections]
        self.pointer = 0

    def schedule_frame(self, queues: dict[int, SsQueue], frame: Frame) -> list[tuple[int, Packet]]:
        """Grant whole packets until capacity or queues run out; work-conserving.
        Returns the granted packets in grant order, dequeued and stamped."""
        n = len(self.order)
        remaining = frame.ul_capacity
        grants: list[tuple[int, Packet]] = []
        idx = self.pointer
        last_granted = None
        idle_visits = 0
        while idle_visits < n:
            cid = self.order[idx % n]
            queue = queues[cid]
            head = queue.head()
            if head is not None and head.size <= remaining:
                pkt = queue.pop()
                pkt.t_dequeued = frame.start
                remaining -= pkt.size
                grants.append((cid, pkt))
                last_granted = idx % n
                idle_visits = 0
            else:
                idle_visits += 1
            idx += 1
        if last_granted is not None:
            self.pointer = (last_granted + 1) % n
        return grants


def grant_summary(grants: list[tuple[int, Packet]]) -> list[tuple[int, int]]:
    """Collapse per-packet grants into (cid, granted_bytes) in first-grant order."""
    totals: dict[int, int] = {}
    for cid, pkt in grants:
        totals[cid] = totals.get(cid, 0) + pkt.size
    return list(totals.items())
