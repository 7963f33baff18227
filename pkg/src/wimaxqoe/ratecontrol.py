"""Per-flow rate adaptation: each flow holds an initial maximum rate and a
minimum subjective rate; losses push the current rate down toward the minimum,
quiet periods bring it back up to the maximum."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True, slots=True)
class QoeParams:
    loss_reduction: float = 0.1  # multiplicative decrease per loss notification
    recovery_fraction: float = 0.2  # additive step, as a fraction of (max - min)
    recovery_period: float = 5.0  # seconds between recovery ticks
    quiet_threshold: float = 5.0  # loss-free seconds required before recovering
    coalesce_window: float = 0.0  # >0 merges loss bursts into one reduction

    def validate(self) -> None:
        if not 0.0 < self.loss_reduction < 1.0:
            raise ValueError("loss_reduction must be in (0, 1)")
        if not 0.0 < self.recovery_fraction <= 1.0:
            raise ValueError("recovery_fraction must be in (0, 1]")
        if self.recovery_period <= 0 or self.quiet_threshold < 0 or self.coalesce_window < 0:
            raise ValueError("recovery_period must be positive, thresholds non-negative")


@dataclass(frozen=True, slots=True)
class RateState:
    flow_id: int
    rate_max: float  # initial maximum transmission rate, bytes/s
    rate_min: float  # minimum subjective rate requirement, bytes/s
    rate_current: float
    last_loss_time: float | None = None
    last_change_time: float = 0.0


def attach(flows: list[tuple[int, float, float]]) -> list[RateState]:
    """Build controller states from (flow_id, rate_max, rate_min); starts at max."""
    states = []
    for flow_id, rate_max, rate_min in flows:
        if rate_min <= 0 or rate_max <= 0:
            raise ValueError(f"flow {flow_id}: rates must be positive")
        if rate_min > rate_max:
            raise ValueError(f"flow {flow_id}: rate_min {rate_min} exceeds rate_max {rate_max}")
        states.append(RateState(flow_id=flow_id, rate_max=rate_max, rate_min=rate_min, rate_current=rate_max))
    return states


def on_loss(state: RateState, now: float, params: QoeParams) -> RateState:
    """Reduce the rate toward rate_min; at or below the minimum the rate holds.

    The loss timestamp is recorded even when no reduction happens, so ongoing
    losses keep the recovery quiet-timer from starting.
    """
    coalesced = (
        params.coalesce_window > 0.0
        and state.last_loss_time is not None
        and now - state.last_loss_time < params.coalesce_window
    )
    if coalesced or state.rate_current <= state.rate_min:
        return replace(state, last_loss_time=now)
    new_rate = max(state.rate_min, state.rate_current * (1.0 - params.loss_reduction))
    return replace(state, rate_current=new_rate, last_loss_time=now, last_change_time=now)


def on_recovery_tick(state: RateState, now: float, params: QoeParams) -> RateState:
    """Step the rate back toward rate_max after a quiet (loss-free) period."""
    if state.rate_current >= state.rate_max:
        return state
    if state.last_loss_time is not None and now - state.last_loss_time < params.quiet_threshold:
        return state
    step = params.recovery_fraction * (state.rate_max - state.rate_min)
    new_rate = min(state.rate_max, state.rate_current + step)
    return replace(state, rate_current=new_rate, last_change_time=now)


class RateController:
    """Holds all flows' states; a disabled controller is the fixed-rate baseline."""

    def __init__(self, states: list[RateState], params: QoeParams, enabled: bool = True):
        params.validate()
        self.params = params
        self.enabled = enabled
        self._states = {s.flow_id: s for s in states}

    def rate(self, flow_id: int) -> float:
        return self._states[flow_id].rate_current

    def state(self, flow_id: int) -> RateState:
        return self._states[flow_id]

    def states(self) -> list[RateState]:
        return list(self._states.values())

    def notify_loss(self, flow_id: int, now: float) -> float | None:
        """Apply a loss notification; returns the new rate if it changed."""
        if not self.enabled:
            return None
        old = self._states[flow_id]
        new = on_loss(old, now, self.params)
        self._states[flow_id] = new
        return new.rate_current if new.rate_current != old.rate_current else None

    def recovery_tick(self, now: float) -> list[tuple[int, float]]:
        """Apply one recovery tick to every flow; returns (flow_id, new_rate) changes."""
        if not self.enabled:
            return []
        changes = []
        for flow_id, old in self._states.items():
            new = on_recovery_tick(old, now, self.params)
            if new.rate_current != old.rate_current:
                self._states[flow_id] = new
                changes.append((flow_id, new.rate_current))
        return changes
