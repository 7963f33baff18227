"""Scenario configuration: JSON schema, validation, defaults, and the built-in
`golden` preset (5 subscriber stations, 200-byte CBR packets at 0.0015/0.001 s
intervals, per-user minimum rates, fixed 15 m/s, 200 s)."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .mac import ServiceClass
from .ratecontrol import QoeParams

MODES = ("baseline", "qoe", "both")


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _check_keys(d: dict, allowed: set[str], path: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown field")


@dataclass(frozen=True, slots=True)
class GridConfig:
    blocks_x: int = 3
    blocks_y: int = 3
    block_len_m: float = 200.0
    lane_offset_m: float = 2.5


@dataclass(frozen=True, slots=True)
class SpeedConfig:
    v_min_mps: float = 15.0
    v_max_mps: float = 15.0
    a_max_mps2: float = 2.0
    safety_dist_m: float = 10.0


@dataclass(frozen=True, slots=True)
class ChannelConfig:
    rx_power_threshold_W: float = 2.025e-12
    frequency_Hz: float = 3.486e9
    bandwidth_Hz: float = 5e6  # carried for scenario fidelity; unused by the coverage model
    tx_power_W: float = 0.28183815
    tx_gain: float = 1.0
    rx_gain: float = 1.0
    tx_height_m: float = 1.5
    rx_height_m: float = 1.5


@dataclass(frozen=True, slots=True)
class MacConfig:
    frame_duration_s: float = 0.005
    phy_rate_Bps: float = 1.5e6
    queue_limit_pkts: int = 50

    @property
    def ul_capacity_B(self) -> float:
        return self.phy_rate_Bps * self.frame_duration_s


@dataclass(frozen=True, slots=True)
class FlowConfig:
    """One CBR uplink flow. Exactly one of interval_s / initial_rate_Bps is
    given in the scenario file; the other is derived (rate = size / interval)."""

    packet_size_B: int
    min_rate_Bps: float
    interval_s: float
    initial_rate_Bps: float
    priority: int = 0
    service_class: ServiceClass = ServiceClass.BE


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    seed: int = 1
    sim_time_s: float = 200.0
    mode: str = "both"
    grid: GridConfig = field(default_factory=GridConfig)
    speed: SpeedConfig = field(default_factory=SpeedConfig)
    mobility_step_s: float = 0.1
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    bs_position_m: tuple[float, float] | None = None  # None = grid center
    flows: tuple[FlowConfig, ...] = ()
    qoe: QoeParams = field(default_factory=QoeParams)

    def bs_position(self) -> tuple[float, float]:
        if self.bs_position_m is not None:
            return self.bs_position_m
        return (self.grid.blocks_x * self.grid.block_len_m / 2.0,
                self.grid.blocks_y * self.grid.block_len_m / 2.0)

    def canonical_dict(self, include_mode: bool = True) -> dict:
        d = {
            "schema_version": 1,
            "seed": self.seed,
            "sim_time_s": self.sim_time_s,
            "grid": {
                "blocks_x": self.grid.blocks_x,
                "blocks_y": self.grid.blocks_y,
                "block_len_m": self.grid.block_len_m,
                "lane_offset_m": self.grid.lane_offset_m,
            },
            "speed": {
                "v_min_mps": self.speed.v_min_mps,
                "v_max_mps": self.speed.v_max_mps,
                "a_max_mps2": self.speed.a_max_mps2,
                "safety_dist_m": self.speed.safety_dist_m,
            },
            "mobility_step_s": self.mobility_step_s,
            "channel": {
                "rx_power_threshold_W": self.channel.rx_power_threshold_W,
                "frequency_Hz": self.channel.frequency_Hz,
                "bandwidth_Hz": self.channel.bandwidth_Hz,
                "tx_power_W": self.channel.tx_power_W,
                "tx_gain": self.channel.tx_gain,
                "rx_gain": self.channel.rx_gain,
                "tx_height_m": self.channel.tx_height_m,
                "rx_height_m": self.channel.rx_height_m,
            },
            "mac": {
                "frame_duration_s": self.mac.frame_duration_s,
                "phy_rate_Bps": self.mac.phy_rate_Bps,
                "queue_limit_pkts": self.mac.queue_limit_pkts,
            },
            "bs_position_m": list(self.bs_position()),
            "flows": [
                {
                    "packet_size_B": f.packet_size_B,
                    "interval_s": f.interval_s,
                    "initial_rate_Bps": f.initial_rate_Bps,
                    "min_rate_Bps": f.min_rate_Bps,
                    "priority": f.priority,
                    "service_class": f.service_class.value,
                }
                for f in self.flows
            ],
            "qoe": {
                "loss_reduction": self.qoe.loss_reduction,
                "recovery_fraction": self.qoe.recovery_fraction,
                "recovery_period_s": self.qoe.recovery_period,
                "quiet_threshold_s": self.qoe.quiet_threshold,
                "coalesce_window_s": self.qoe.coalesce_window,
            },
        }
        if include_mode:
            d["mode"] = self.mode
        return d

    def config_digest(self) -> str:
        """Digest over the resolved scenario (mode excluded: baseline and qoe
        runs of one scenario must share the digest to be comparable)."""
        blob = json.dumps(self.canonical_dict(include_mode=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _flow_from_dict(d: dict, path: str) -> FlowConfig:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    _check_keys(d, {"packet_size_B", "interval_s", "initial_rate_Bps", "min_rate_Bps", "priority", "service_class"}, path)
    size = _integer(_require(d, "packet_size_B", path), f"{path}.packet_size_B")
    if size <= 0:
        raise ConfigError(f"{path}.packet_size_B", "must be positive")
    min_rate = _number(_require(d, "min_rate_Bps", path), f"{path}.min_rate_Bps")
    if min_rate <= 0:
        raise ConfigError(f"{path}.min_rate_Bps", "must be positive")
    has_interval = "interval_s" in d
    has_rate = "initial_rate_Bps" in d
    if has_interval == has_rate:
        raise ConfigError(path, "give exactly one of interval_s or initial_rate_Bps")
    if has_interval:
        interval = _number(d["interval_s"], f"{path}.interval_s")
        if interval <= 0:
            raise ConfigError(f"{path}.interval_s", "must be positive")
        rate = size / interval
    else:
        rate = _number(d["initial_rate_Bps"], f"{path}.initial_rate_Bps")
        if rate <= 0:
            raise ConfigError(f"{path}.initial_rate_Bps", "must be positive")
        interval = size / rate
    if min_rate > rate:
        raise ConfigError(path, f"min_rate_Bps {min_rate} exceeds the initial rate {rate}")
    priority = _integer(d.get("priority", 0), f"{path}.priority")
    sc_name = d.get("service_class", "BE")
    try:
        service_class = ServiceClass(sc_name)
    except ValueError:
        raise ConfigError(f"{path}.service_class", f"unknown service class {sc_name!r}") from None
    return FlowConfig(
        packet_size_B=size,
        min_rate_Bps=min_rate,
        interval_s=interval,
        initial_rate_Bps=rate,
        priority=priority,
        service_class=service_class,
    )


def from_dict(d: dict) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("", "scenario must be a JSON object")
    _check_keys(d, {"schema_version", "seed", "sim_time_s", "mode", "grid", "speed",
                    "mobility_step_s", "channel", "mac", "bs_position_m", "flows", "qoe"}, "")
    version = d.get("schema_version", 1)
    if version != 1:
        raise ConfigError("schema_version", f"unsupported version {version}")

    seed = _integer(d.get("seed", 1), "seed")
    sim_time = _number(d.get("sim_time_s", 200.0), "sim_time_s")
    if sim_time <= 0:
        raise ConfigError("sim_time_s", "must be positive")
    mode = d.get("mode", "both")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")

    g = d.get("grid", {})
    _check_keys(g, {"blocks_x", "blocks_y", "block_len_m", "lane_offset_m"}, "grid")
    grid = GridConfig(
        blocks_x=_integer(g.get("blocks_x", 3), "grid.blocks_x"),
        blocks_y=_integer(g.get("blocks_y", 3), "grid.blocks_y"),
        block_len_m=_number(g.get("block_len_m", 200.0), "grid.block_len_m"),
        lane_offset_m=_number(g.get("lane_offset_m", 2.5), "grid.lane_offset_m"),
    )
    if grid.blocks_x < 1 or grid.blocks_y < 1:
        raise ConfigError("grid", "needs at least one block per axis")
    if grid.block_len_m <= 0:
        raise ConfigError("grid.block_len_m", "must be positive")

    s = d.get("speed", {})
    _check_keys(s, {"v_min_mps", "v_max_mps", "a_max_mps2", "safety_dist_m"}, "speed")
    speed = SpeedConfig(
        v_min_mps=_number(s.get("v_min_mps", 15.0), "speed.v_min_mps"),
        v_max_mps=_number(s.get("v_max_mps", 15.0), "speed.v_max_mps"),
        a_max_mps2=_number(s.get("a_max_mps2", 2.0), "speed.a_max_mps2"),
        safety_dist_m=_number(s.get("safety_dist_m", 10.0), "speed.safety_dist_m"),
    )
    if speed.v_min_mps < 0 or speed.v_max_mps < speed.v_min_mps:
        raise ConfigError("speed", "need 0 <= v_min_mps <= v_max_mps")

    dt = _number(d.get("mobility_step_s", 0.1), "mobility_step_s")
    if dt <= 0:
        raise ConfigError("mobility_step_s", "must be positive")

    c = d.get("channel", {})
    _check_keys(c, {"rx_power_threshold_W", "frequency_Hz", "bandwidth_Hz", "tx_power_W",
                    "tx_gain", "rx_gain", "tx_height_m", "rx_height_m"}, "channel")
    channel = ChannelConfig(
        rx_power_threshold_W=_number(c.get("rx_power_threshold_W", 2.025e-12), "channel.rx_power_threshold_W"),
        frequency_Hz=_number(c.get("frequency_Hz", 3.486e9), "channel.frequency_Hz"),
        bandwidth_Hz=_number(c.get("bandwidth_Hz", 5e6), "channel.bandwidth_Hz"),
        tx_power_W=_number(c.get("tx_power_W", 0.28183815), "channel.tx_power_W"),
        tx_gain=_number(c.get("tx_gain", 1.0), "channel.tx_gain"),
        rx_gain=_number(c.get("rx_gain", 1.0), "channel.rx_gain"),
        tx_height_m=_number(c.get("tx_height_m", 1.5), "channel.tx_height_m"),
        rx_height_m=_number(c.get("rx_height_m", 1.5), "channel.rx_height_m"),
    )
    if channel.rx_power_threshold_W <= 0:
        raise ConfigError("channel.rx_power_threshold_W", "must be positive")

    m = d.get("mac", {})
    _check_keys(m, {"frame_duration_s", "phy_rate_Bps", "queue_limit_pkts"}, "mac")
    mac = MacConfig(
        frame_duration_s=_number(m.get("frame_duration_s", 0.005), "mac.frame_duration_s"),
        phy_rate_Bps=_number(m.get("phy_rate_Bps", 1.5e6), "mac.phy_rate_Bps"),
        queue_limit_pkts=_integer(m.get("queue_limit_pkts", 50), "mac.queue_limit_pkts"),
    )
    if mac.frame_duration_s <= 0 or mac.phy_rate_Bps <= 0 or mac.queue_limit_pkts < 1:
        raise ConfigError("mac", "frame duration, phy rate, and queue limit must be positive")

    bs = d.get("bs_position_m")
    bs_position = None
    if bs is not None:
        if not isinstance(bs, (list, tuple)) or len(bs) != 2:
            raise ConfigError("bs_position_m", "expected [x, y]")
        bs_position = (_number(bs[0], "bs_position_m[0]"), _number(bs[1], "bs_position_m[1]"))

    flow_list = _require(d, "flows", "")
    if not isinstance(flow_list, list) or not flow_list:
        raise ConfigError("flows", "need at least one flow")
    flows = tuple(_flow_from_dict(f, f"flows[{i}]") for i, f in enumerate(flow_list))

    q = d.get("qoe", {})
    _check_keys(q, {"loss_reduction", "recovery_fraction", "recovery_period_s",
                    "quiet_threshold_s", "coalesce_window_s"}, "qoe")
    qoe = QoeParams(
        loss_reduction=_number(q.get("loss_reduction", 0.1), "qoe.loss_reduction"),
        recovery_fraction=_number(q.get("recovery_fraction", 0.2), "qoe.recovery_fraction"),
        recovery_period=_number(q.get("recovery_period_s", 5.0), "qoe.recovery_period_s"),
        quiet_threshold=_number(q.get("quiet_threshold_s", 5.0), "qoe.quiet_threshold_s"),
        coalesce_window=_number(q.get("coalesce_window_s", 0.0), "qoe.coalesce_window_s"),
    )
    try:
        qoe.validate()
    except ValueError as exc:
        raise ConfigError("qoe", str(exc)) from None

    return ScenarioConfig(
        seed=seed,
        sim_time_s=sim_time,
        mode=mode,
        grid=grid,
        speed=speed,
        mobility_step_s=dt,
        channel=channel,
        mac=mac,
        bs_position_m=bs_position,
        flows=flows,
        qoe=qoe,
    )


def load_scenario(path: str) -> ScenarioConfig:
    if not os.path.exists(path):
        raise ConfigError("", f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON in {path}: {exc}") from None
    return from_dict(data)


def golden_config(seed: int = 1, mode: str = "both") -> ScenarioConfig:
    """The built-in experiment: 5 stations, 200-byte packets at intervals
    0.0015/0.001/0.001/0.001/0.0015 s, minimum rates 120/150/150/150/120 kB/s,
    fixed 15 m/s, 200 s, 5 MHz-class cell parameters."""
    intervals = (0.0015, 0.001, 0.001, 0.001, 0.0015)
    minima = (120_000.0, 150_000.0, 150_000.0, 150_000.0, 120_000.0)
    return from_dict(
        {
            "seed": seed,
            "mode": mode,
            "sim_time_s": 200.0,
            "flows": [
                {"packet_size_B": 200, "interval_s": iv, "min_rate_Bps": mn}
                for iv, mn in zip(intervals, minima)
            ],
        }
    )
