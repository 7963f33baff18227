"""Trace parsing and per-flow performance measures: average throughput, packet
loss rate, average delay, average jitter, plus baseline-vs-qoe comparison.

Trace grammar (one record per line, space-separated, newline-terminated):
    <time:%.6f> <kind> <flow_id> <seq> <size> [<reason>|<new_rate>]
with kind one of create, enqueue, drop, send, recv, rate_change; drop lines
carry a reason, rate_change lines carry the new rate in bytes/s.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

TRACE_KINDS = ("create", "enqueue", "drop", "send", "recv", "rate_change")
DROP_REASONS = ("queue_overflow", "channel_outage")


class TraceParseError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceIntegrityError(Exception):
    """A trace violated packet-lifecycle invariants (duplicate create, double
    terminal state, out-of-order delivery, time regression)."""


class MetricsError(Exception):
    """A metric is undefined for the requested flow (e.g. no delivered packets)."""


@dataclass(slots=True)
class TraceRecord:
    time: float
    kind: str
    flow_id: int
    seq: int
    size: int
    extra: str | float | None = None  # drop reason or new rate


def format_record(rec: TraceRecord) -> str:
    base = f"{rec.time:.6f} {rec.kind} {rec.flow_id} {rec.seq} {rec.size}"
    if rec.kind == "drop":
        return f"{base} {rec.extra}"
    if rec.kind == "rate_change":
        return f"{base} {rec.extra!r}"
    return base


def emit_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in records)


def parse_record(line: str, line_no: int) -> TraceRecord:
    parts = line.split()
    if len(parts) < 5:
        raise TraceParseError(line_no, f"expected at least 5 fields, got {len(parts)}")
    try:
        time = float(parts[0])
        kind = parts[1]
        flow_id = int(parts[2])
        seq = int(parts[3])
        size = int(parts[4])
    except ValueError as exc:
        raise TraceParseError(line_no, str(exc)) from None
    if kind not in TRACE_KINDS:
        raise TraceParseError(line_no, f"unknown record kind {kind!r}")
    extra: str | float | None = None
    if kind == "drop":
        if len(parts) != 6 or parts[5] not in DROP_REASONS:
            raise TraceParseError(line_no, f"drop record needs a reason from {DROP_REASONS}")
        extra = parts[5]
    elif kind == "rate_change":
        if len(parts) != 6:
            raise TraceParseError(line_no, "rate_change record needs the new rate")
        try:
            extra = float(parts[5])
        except ValueError:
            raise TraceParseError(line_no, f"bad rate {parts[5]!r}") from None
    elif len(parts) != 5:
        raise TraceParseError(line_no, f"{kind} record takes exactly 5 fields")
    return TraceRecord(time=time, kind=kind, flow_id=flow_id, seq=seq, size=size, extra=extra)


def parse_trace(lines: Iterable[str]) -> list[TraceRecord]:
    """Parse a whole trace; every non-empty line yields exactly one record."""
    records = []
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        records.append(parse_record(line, line_no))
    return records


def iter_trace(path: str) -> Iterator[TraceRecord]:
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line:
                yield parse_record(line, line_no)


# --- the four contract measures, straightforward over record lists ---


def compute_throughput(records: Iterable[TraceRecord], flow_id: int, t_start: float, t_end: float) -> float:
    """Delivered bytes inside [t_start, t_end] divided by the window length."""
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")
    total = 0
    for r in records:
        if r.kind == "recv" and r.flow_id == flow_id and t_start <= r.time <= t_end:
            total += r.size
    return total / (t_end - t_start)


def compute_plr(records: Iterable[TraceRecord], flow_id: int) -> float:
    created = dropped = 0
    for r in records:
        if r.flow_id != flow_id:
            continue
        if r.kind == "create":
            created += 1
        elif r.kind == "drop":
            dropped += 1
    if created == 0:
        raise MetricsError(f"flow {flow_id}: packet loss rate undefined (no created packets)")
    return dropped / created


def _delays_by_seq(records: Iterable[TraceRecord], flow_id: int) -> list[float]:
    created: dict[int, float] = {}
    received: list[tuple[int, float]] = []
    for r in records:
        if r.flow_id != flow_id:
            continue
        if r.kind == "create":
            created[r.seq] = r.time
        elif r.kind == "recv":
            received.append((r.seq, r.time))
    received.sort()
    return [t - created[seq] for seq, t in received]


def compute_delay(records: Iterable[TraceRecord], flow_id: int) -> float:
    """Mean end-to-end (create to recv) delay over delivered packets."""
    delays = _delays_by_seq(records, flow_id)
    if not delays:
        raise MetricsError(f"flow {flow_id}: average delay undefined (no delivered packets)")
    return sum(delays) / len(delays)


def compute_jitter(records: Iterable[TraceRecord], flow_id: int) -> float:
    """Mean absolute difference of consecutive delivered packets' delays, by seq."""
    delays = _delays_by_seq(records, flow_id)
    if len(delays) < 2:
        raise MetricsError(f"flow {flow_id}: average jitter undefined (fewer than 2 deliveries)")
    diffs = [abs(b - a) for a, b in zip(delays, delays[1:])]
    return sum(diffs) / len(diffs)


# --- streaming per-flow analysis used by the run pipeline ---


@dataclass(slots=True)
class FlowMetrics:
    flow_id: int
    avg_throughput_Bps: float
    packet_loss_rate: float | None  # None when the flow created no packets
    avg_delay_s: float | None  # None when nothing was delivered
    avg_jitter_s: float | None  # None with fewer than 2 deliveries
    created: int
    delivered: int
    dropped: int
    residual: int
    dropped_overflow: int = 0
    dropped_outage: int = 0

    def to_dict(self) -> dict:
        return {
            "flow_id": self.flow_id,
            "avg_throughput_Bps": self.avg_throughput_Bps,
            "plr": self.packet_loss_rate,
            "avg_delay_s": self.avg_delay_s,
            "avg_jitter_s": self.avg_jitter_s,
            "created": self.created,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "residual": self.residual,
            "dropped_overflow": self.dropped_overflow,
            "dropped_outage": self.dropped_outage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlowMetrics":
        return cls(
            flow_id=d["flow_id"],
            avg_throughput_Bps=d["avg_throughput_Bps"],
            packet_loss_rate=d["plr"],
            avg_delay_s=d["avg_delay_s"],
            avg_jitter_s=d["avg_jitter_s"],
            created=d["created"],
            delivered=d["delivered"],
            dropped=d["dropped"],
            residual=d["residual"],
            dropped_overflow=d.get("dropped_overflow", 0),
            dropped_outage=d.get("dropped_outage", 0),
        )


CSV_HEADER = "flow_id,avg_throughput_Bps,plr,avg_delay_s,avg_jitter_s,created,delivered,dropped,residual"


def metrics_csv(flows: list[FlowMetrics]) -> str:
    def cell(v: float | None) -> str:
        return "" if v is None else repr(v)

    lines = [CSV_HEADER]
    for m in flows:
        lines.append(
            f"{m.flow_id},{cell(m.avg_throughput_Bps)},{cell(m.packet_loss_rate)},"
            f"{cell(m.avg_delay_s)},{cell(m.avg_jitter_s)},"
            f"{m.created},{m.delivered},{m.dropped},{m.residual}"
        )
    return "\n".join(lines) + "\n"


class _FlowAccumulator:
    __slots__ = (
        "created", "delivered", "dropped", "over", "out",
        "pending", "recv_bytes", "delay_sum", "jitter_sum", "jitter_pairs",
        "last_delay", "last_recv_seq", "last_recv_time",
    )

    def __init__(self) -> None:
        self.created = 0
        self.delivered = 0
        self.dropped = 0
        self.over = 0
        self.out = 0
        self.pending: dict[int, float] = {}
        self.recv_bytes = 0
        self.delay_sum = 0.0
        self.jitter_sum = 0.0
        self.jitter_pairs = 0
        self.last_delay: float | None = None
        self.last_recv_seq = -1
        self.last_recv_time = -1.0


def analyze_trace_file(path: str, t_start: float = 0.0, t_end: float | None = None) -> list[FlowMetrics]:
    """One streaming pass over a trace file; enforces lifecycle invariants loudly.

    The throughput window defaults to [0, last record time] when t_end is omitted.
    """
    flows: dict[int, _FlowAccumulator] = {}
    last_time = t_start
    prev_time = -1.0
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 5:
                raise TraceParseError(line_no, f"expected at least 5 fields, got {len(parts)}")
            try:
                time = float(parts[0])
                kind = parts[1]
                flow_id = int(parts[2])
                seq = int(parts[3])
                size = int(parts[4])
            except ValueError as exc:
                raise TraceParseError(line_no, str(exc)) from None
            if kind not in TRACE_KINDS:
                raise TraceParseError(line_no, f"unknown record kind {kind!r}")
            if len(parts) != (6 if kind in ("drop", "rate_change") else 5):
                raise TraceParseError(line_no, f"wrong field count for a {kind} record")
            if time < prev_time:
                raise TraceIntegrityError(f"line {line_no}: records are not time-sorted")
            prev_time = time
            last_time = time
            acc = flows.get(flow_id)
            if acc is None:
                acc = flows[flow_id] = _FlowAccumulator()
            if kind == "create":
                if seq in acc.pending:
                    raise TraceIntegrityError(f"line {line_no}: duplicate create for flow {flow_id} seq {seq}")
                acc.pending[seq] = time
                acc.created += 1
            elif kind == "recv":
                t_created = acc.pending.pop(seq, None)
                if t_created is None:
                    raise TraceIntegrityError(f"line {line_no}: recv without pending create (flow {flow_id} seq {seq})")
                if seq <= acc.last_recv_seq:
                    raise TraceIntegrityError(f"line {line_no}: out-of-order delivery in flow {flow_id}")
                acc.delivered += 1
                if t_start <= time and (t_end is None or time <= t_end):
                    acc.recv_bytes += size
                delay = time - t_created
                acc.delay_sum += delay
                if acc.last_delay is not None:
                    acc.jitter_sum += abs(delay - acc.last_delay)
                    acc.jitter_pairs += 1
                acc.last_delay = delay
                acc.last_recv_seq = seq
            elif kind == "drop":
                if parts[5] not in DROP_REASONS:
                    raise TraceParseError(line_no, f"drop record needs a reason from {DROP_REASONS}")
                if acc.pending.pop(seq, None) is None:
                    raise TraceIntegrityError(f"line {line_no}: drop without pending create (flow {flow_id} seq {seq})")
                acc.dropped += 1
                if parts[5] == "queue_overflow":
                    acc.over += 1
                else:
                    acc.out += 1

    window_end = t_end if t_end is not None else last_time
    window = window_end - t_start
    result = []
    for flow_id in sorted(flows):
        acc = flows[flow_id]
        residual = acc.created - acc.delivered - acc.dropped
        if residual != len(acc.pending) or residual < 0:
            raise TraceIntegrityError(f"flow {flow_id}: packet conservation violated")
        result.append(
            FlowMetrics(
                flow_id=flow_id,
                avg_throughput_Bps=(acc.recv_bytes / window) if window > 0 else 0.0,
                packet_loss_rate=(acc.dropped / acc.created) if acc.created else None,
                avg_delay_s=(acc.delay_sum / acc.delivered) if acc.delivered else None,
                avg_jitter_s=(acc.jitter_sum / acc.jitter_pairs) if acc.jitter_pairs else None,
                created=acc.created,
                delivered=acc.delivered,
                dropped=acc.dropped,
                residual=residual,
                dropped_overflow=acc.over,
                dropped_outage=acc.out,
            )
        )
    return result


# --- run-level containers and the baseline-vs-qoe comparison ---


@dataclass(slots=True)
class RunMetrics:
    mode: str
    seed: int
    config_digest: str
    trajectory_digest: str
    window: tuple[float, float]
    flows: list[FlowMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "mode": self.mode,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "trajectory_digest": self.trajectory_digest,
            "window": list(self.window),
            "flows": [m.to_dict() for m in self.flows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(
            mode=d["mode"],
            seed=d["seed"],
            config_digest=d["config_digest"],
            trajectory_digest=d["trajectory_digest"],
            window=(d["window"][0], d["window"][1]),
            flows=[FlowMetrics.from_dict(f) for f in d["flows"]],
        )

    @classmethod
    def load(cls, path: str) -> "RunMetrics":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MetricsError(f"{path} is not a metrics document: {exc}") from None


class ComparisonError(Exception):
    """Raised when two runs cannot be compared (digest or flow-set mismatch)."""


_METRIC_FIELDS = ("avg_throughput_Bps", "packet_loss_rate", "avg_delay_s", "avg_jitter_s")
_METRIC_KEYS = ("avg_throughput_Bps", "plr", "avg_delay_s", "avg_jitter_s")


def _delta(q: float | None, b: float | None) -> float | None:
    if q is None or b is None:
        return None
    return q - b


def _verdict(delta: float | None) -> str:
    if delta is None:
        return "undefined"
    if delta < 0:
        return "lower"
    if delta > 0:
        return "higher"
    return "tie"


def _mean(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def compare(baseline: RunMetrics, qoe: RunMetrics) -> dict:
    """Per-flow deltas (qoe minus baseline) and directional verdicts.

    Refuses runs whose config or mobility trajectory digests differ.
    """
    if baseline.config_digest != qoe.config_digest:
        raise ComparisonError("config digest mismatch between runs")
    if baseline.trajectory_digest != qoe.trajectory_digest:
        raise ComparisonError("mobility trajectory digest mismatch between runs")
    base_by_id = {m.flow_id: m for m in baseline.flows}
    qoe_by_id = {m.flow_id: m for m in qoe.flows}
    if set(base_by_id) != set(qoe_by_id):
        raise ComparisonError("flow sets differ between runs")

    per_flow = []
    for flow_id in sorted(base_by_id):
        b, q = base_by_id[flow_id], qoe_by_id[flow_id]
        deltas = {}
        verdicts = {}
        for attr, key in zip(_METRIC_FIELDS, _METRIC_KEYS):
            d = _delta(getattr(q, attr), getattr(b, attr))
            deltas[key] = d
            verdicts[key] = _verdict(d)
        per_flow.append({"flow_id": flow_id, "deltas": deltas, "verdicts": verdicts})

    means = {}
    for side, run in (("baseline", baseline), ("qoe", qoe)):
        means[side] = {
            key: _mean([getattr(m, attr) for m in run.flows])
            for attr, key in zip(_METRIC_FIELDS, _METRIC_KEYS)
        }
    mean_deltas = {key: _delta(means["qoe"][key], means["baseline"][key]) for key in _METRIC_KEYS}

    def _le(key: str) -> bool:
        d = mean_deltas[key]
        return d is not None and d <= 0

    def _lt(key: str) -> bool:
        d = mean_deltas[key]
        return d is not None and d < 0

    return {
        "schema_version": 1,
        "seed": baseline.seed,
        "config_digest": baseline.config_digest,
        "trajectory_digest": baseline.trajectory_digest,
        "baseline": baseline.to_dict(),
        "qoe": qoe.to_dict(),
        "flows": per_flow,
        "means": means,
        "mean_deltas": mean_deltas,
        "verdicts": {
            "throughput_lower": _lt("avg_throughput_Bps"),
            "plr_not_higher": all(
                f["deltas"]["plr"] is not None and f["deltas"]["plr"] <= 0 for f in per_flow
            ),
            "jitter_lower": _lt("avg_jitter_s"),
            "delay_not_higher": _le("avg_delay_s"),
        },
    }
