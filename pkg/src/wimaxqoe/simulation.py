"""One simulation run: wires the event engine, mobility field, MAC cell, and
rate controller together and writes the packet-lifecycle trace."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .engine import EventKind, RngStream, RunSummary, SimEvent, Simulator
from .mac import (
    BsScheduler,
    ChannelModel,
    Connection,
    Frame,
    Packet,
    SsQueue,
    emission_interval,
)
from .mobility import GridMap, MobilityField, SpeedParams, export_trace_csv
from .ratecontrol import RateController, attach
from .scenario import ScenarioConfig


class SimulationInvariantError(Exception):
    """Packet conservation or another run invariant failed; the run is invalid."""


@dataclass(slots=True)
class FlowCounts:
    created: int = 0
    delivered: int = 0
    dropped_overflow: int = 0
    dropped_outage: int = 0
    residual: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_overflow + self.dropped_outage


@dataclass(slots=True)
class SimulationResult:
    mode: str
    summary: RunSummary
    counts: dict[int, FlowCounts]
    final_rates: list
    trajectory: list[tuple[float, int, float, float, float]]
    trajectory_digest: str
    turn_tally: object
    loss_notifications: int = 0
    rate_changes: int = 0
    first_intervals: dict[int, float] = field(default_factory=dict)


def build_grid(config: ScenarioConfig) -> GridMap:
    return GridMap(
        blocks_x=config.grid.blocks_x,
        blocks_y=config.grid.blocks_y,
        block_len=config.grid.block_len_m,
        lane_offset=config.grid.lane_offset_m,
    )


def build_speed_params(config: ScenarioConfig) -> SpeedParams:
    return SpeedParams(
        v_min=config.speed.v_min_mps,
        v_max=config.speed.v_max_mps,
        a_max=config.speed.a_max_mps2,
        safety_dist=config.speed.safety_dist_m,
    )


def build_mobility_field(config: ScenarioConfig, rng: RngStream) -> MobilityField:
    return MobilityField(
        build_grid(config),
        build_speed_params(config),
        n_nodes=len(config.flows),
        rng=rng,
        dt=config.mobility_step_s,
    )


def run_mobility_only(config: ScenarioConfig) -> MobilityField:
    """Step the mobility field exactly as a full run would, without traffic."""
    field = build_mobility_field(config, RngStream(config.seed, "mobility"))
    k = 1
    t = round(config.mobility_step_s, 9)
    while t < config.sim_time_s:
        field.advance(t)
        k += 1
        t = round(k * config.mobility_step_s, 9)
    return field


class TraceWriter:
    """Buffered line sink for the trace file."""

    def __init__(self, path: str):
        self._fh = open(path, "w", encoding="ascii")
        self._buf: list[str] = []
        self.line = self._buf.append

    def _flush(self) -> None:
        if self._buf:
            self._fh.write("".join(self._buf))
            self._buf.clear()

    def maybe_flush(self) -> None:
        if len(self._buf) >= 65536:
            self._flush()

    def close(self) -> None:
        self._flush()
        self._fh.close()


def trajectory_digest(trajectory: list[tuple[float, int, float, float, float]]) -> str:
    return hashlib.sha256(export_trace_csv(trajectory).encode()).hexdigest()


class Simulation:
    """A single deterministic run in `baseline` or `qoe` mode.

    The three RNG streams are derived from (seed, stream name) so the mobility
    draw sequence is identical across modes; toggling the controller cannot
    perturb trajectories.
    """

    def __init__(self, config: ScenarioConfig, mode: str, trace_path: str):
        if mode not in ("baseline", "qoe"):
            raise ValueError(f"mode must be baseline or qoe, not {mode!r}")
        self.config = config
        self.mode = mode
        self.sim = Simulator()
        self.rng_mobility = RngStream(config.seed, "mobility")
        self.rng_channel = RngStream(config.seed, "channel")
        self.rng_traffic = RngStream(config.seed, "traffic")

        self.field = build_mobility_field(config, self.rng_mobility)
        self.positions = self.field.positions()

        connections = [
            Connection(
                cid=i,
                ss_id=i,
                service_class=f.service_class,
                traffic_priority=f.priority,
                max_sustained_rate=f.initial_rate_Bps,
            )
            for i, f in enumerate(config.flows)
        ]
        self.scheduler = BsScheduler(connections)
        self.queues = {i: SsQueue(i, config.mac.queue_limit_pkts) for i in range(len(config.flows))}
        self.controller = RateController(
            attach([(i, f.initial_rate_Bps, f.min_rate_Bps) for i, f in enumerate(config.flows)]),
            config.qoe,
            enabled=(mode == "qoe"),
        )
        self.channel = ChannelModel(
            rx_power_threshold=config.channel.rx_power_threshold_W,
            frequency=config.channel.frequency_Hz,
            tx_power=config.channel.tx_power_W,
            tx_gain=config.channel.tx_gain,
            rx_gain=config.channel.rx_gain,
            tx_height=config.channel.tx_height_m,
            rx_height=config.channel.rx_height_m,
        )
        self.bs_position = config.bs_position()
        self.notify_delay = config.mac.frame_duration_s

        n = len(config.flows)
        self.counts = {i: FlowCounts() for i in range(n)}
        self.next_seq = [0] * n
        self.rate_change_seq = [0] * n
        self.loss_notifications = 0
        self.rate_changes = 0
        self.first_intervals: dict[int, float] = {}
        # packets granted in the running frame, resolved at the next boundary:
        # (flow_id, packet, delivered?)
        self.in_flight: list[tuple[int, Packet, bool]] = []

        self.trace = TraceWriter(trace_path)
        self._register_handlers()

    def _register_handlers(self) -> None:
        self.sim.on(EventKind.PACKET_ARRIVAL, self._on_packet_arrival)
        self.sim.on(EventKind.FRAME_BOUNDARY, self._on_frame_boundary)
        self.sim.on(EventKind.MOBILITY_STEP, self._on_mobility_step)
        self.sim.on(EventKind.LOSS_NOTIFICATION, self._on_loss_notification)
        self.sim.on(EventKind.RECOVERY_TICK, self._on_recovery_tick)

    # --- event handlers ---

    def _on_packet_arrival(self, event: SimEvent) -> None:
        flow_id = event.payload
        flow = self.config.flows[flow_id]
        now = self.sim.now
        seq = self.next_seq[flow_id]
        self.next_seq[flow_id] = seq + 1
        counts = self.counts[flow_id]
        counts.created += 1
        size = flow.packet_size_B
        w = self.trace.line
        w(f"{now:.6f} create {flow_id} {seq} {size}\n")
        pkt = Packet(flow_id=flow_id, seq=seq, size=size, t_created=now)
        if self.queues[flow_id].enqueue(pkt):
            w(f"{now:.6f} enqueue {flow_id} {seq} {size}\n")
        else:
            counts.dropped_overflow += 1
            w(f"{now:.6f} drop {flow_id} {seq} {size} queue_overflow\n")
            self._notify_loss_later(flow_id, now)
        self.trace.maybe_flush()
        interval = emission_interval(
            size, flow.interval_s, flow.initial_rate_Bps, self.controller.rate(flow_id)
        )
        if seq == 0:
            self.first_intervals[flow_id] = interval
        t_next = now + interval
        if t_next < self.config.sim_time_s:
            self.sim.schedule_at(t_next, EventKind.PACKET_ARRIVAL, flow_id)

    def _on_frame_boundary(self, event: SimEvent) -> None:
        k = event.payload
        now = self.sim.now
        w = self.trace.line
        if self.in_flight:
            for flow_id, pkt, delivered in self.in_flight:
                counts = self.counts[flow_id]
                if delivered:
                    pkt.t_delivered = now
                    counts.delivered += 1
                    w(f"{now:.6f} recv {flow_id} {pkt.seq} {pkt.size}\n")
                else:
                    counts.dropped_outage += 1
                    w(f"{now:.6f} drop {flow_id} {pkt.seq} {pkt.size} channel_outage\n")
                    self._notify_loss_later(flow_id, now)
            self.in_flight.clear()

        duration = self.config.mac.frame_duration_s
        t_next = (k + 1) * duration
        if t_next <= self.config.sim_time_s:
            frame = Frame(index=k, start=now, duration=duration, ul_capacity=self.config.mac.ul_capacity_B)
            grants = self.scheduler.schedule_frame(self.queues, frame)
            if grants:
                bs = self.bs_position
                positions = self.positions
                in_cov = self.channel.in_coverage
                append = self.in_flight.append
                for cid, pkt in grants:
                    w(f"{now:.6f} send {cid} {pkt.seq} {pkt.size}\n")
                    append((cid, pkt, in_cov(positions[cid], bs)))
            self.sim.schedule_at(t_next, EventKind.FRAME_BOUNDARY, k + 1)
        self.trace.maybe_flush()

    def _on_mobility_step(self, event: SimEvent) -> None:
        k = event.payload
        self.field.advance(self.sim.now)
        self.positions = self.field.positions()
        t_next = round((k + 1) * self.config.mobility_step_s, 9)
        if t_next < self.config.sim_time_s:
            self.sim.schedule_at(t_next, EventKind.MOBILITY_STEP, k + 1)

    def _notify_loss_later(self, flow_id: int, now: float) -> None:
        self.sim.schedule_at(now + self.notify_delay, EventKind.LOSS_NOTIFICATION, flow_id)

    def _on_loss_notification(self, event: SimEvent) -> None:
        self.loss_notifications += 1
        flow_id = event.payload
        new_rate = self.controller.notify_loss(flow_id, self.sim.now)
        if new_rate is not None:
            self._emit_rate_change(flow_id, new_rate)

    def _on_recovery_tick(self, event: SimEvent) -> None:
        k = event.payload
        for flow_id, new_rate in self.controller.recovery_tick(self.sim.now):
            self._emit_rate_change(flow_id, new_rate)
        t_next = (k + 1) * self.config.qoe.recovery_period
        if t_next <= self.config.sim_time_s:
            self.sim.schedule_at(t_next, EventKind.RECOVERY_TICK, k + 1)

    def _emit_rate_change(self, flow_id: int, new_rate: float) -> None:
        seq = self.rate_change_seq[flow_id]
        self.rate_change_seq[flow_id] = seq + 1
        self.rate_changes += 1
        self.trace.line(f"{self.sim.now:.6f} rate_change {flow_id} {seq} 0 {new_rate!r}\n")

    # --- run ---

    def run(self) -> SimulationResult:
        cfg = self.config
        for flow_id in range(len(cfg.flows)):
            self.sim.schedule_at(0.0, EventKind.PACKET_ARRIVAL, flow_id)
        self.sim.schedule_at(0.0, EventKind.FRAME_BOUNDARY, 0)
        if cfg.mobility_step_s < cfg.sim_time_s:
            self.sim.schedule_at(round(cfg.mobility_step_s, 9), EventKind.MOBILITY_STEP, 1)
        if self.controller.enabled and cfg.qoe.recovery_period <= cfg.sim_time_s:
            self.sim.schedule_at(cfg.qoe.recovery_period, EventKind.RECOVERY_TICK, 1)
        self.sim.schedule_at(cfg.sim_time_s, EventKind.SIM_END)

        try:
            summary = self.sim.run_until(cfg.sim_time_s)
        finally:
            self.trace.close()

        if self.in_flight:
            raise SimulationInvariantError("granted packets left unresolved at simulation end")
        for flow_id, queue in self.queues.items():
            self.counts[flow_id].residual = len(queue)
        for flow_id, c in self.counts.items():
            if c.created != c.delivered + c.dropped + c.residual:
                raise SimulationInvariantError(
                    f"flow {flow_id}: created {c.created} != delivered {c.delivered}"
                    f" + dropped {c.dropped} + residual {c.residual}"
                )
        return SimulationResult(
            mode=self.mode,
            summary=summary,
            counts=self.counts,
            final_rates=self.controller.states(),
            trajectory=self.field.trajectory,
            trajectory_digest=trajectory_digest(self.field.trajectory),
            turn_tally=self.field.tally,
            loss_notifications=self.loss_notifications,
            rate_changes=self.rate_changes,
            first_intervals=self.first_intervals,
        )
