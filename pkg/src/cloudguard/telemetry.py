"""Telemetry record types and their JSON-lines persistence.

An event is one observation from one of three sources: a network flow, a
system log line, or a user behavior action. A window is a half-open time
slice ``[start, end)`` holding its events in timestamp order, optionally
tagged with a ground-truth label. Timestamps are integer milliseconds.
"""

import csv
import json
from dataclasses import dataclass, field

from .errors import InputError

LABELS = (
    "benign",
    "ddos",
    "sql_injection",
    "port_scan",
    "brute_force",
    "data_exfiltration",
)

ATTACK_KINDS = LABELS[1:]

BEHAVIOR_ACTIONS = ("login", "query", "upload", "download", "admin_op")

LOG_SUBSYSTEMS = ("auth", "db", "net", "api", "kernel")


@dataclass(frozen=True)
class FlowData:
    """One network flow record."""

    src: str
    dst: str
    port: int
    protocol: str  # tcp or udp
    bytes: int
    packets: int
    duration_ms: int
    syn_flag: bool
    payload_class: int  # 0 = plain; 1..3 = suspicious payload families


@dataclass(frozen=True)
class LogData:
    """One system log line."""

    severity: int  # 0 (debug) .. 7 (emergency)
    event_code: int
    subsystem: str


@dataclass(frozen=True)
class BehaviorData:
    """One user action."""

    user_id: str
    action: str  # one of BEHAVIOR_ACTIONS
    success: bool


@dataclass(frozen=True)
class TelemetryEvent:
    """A timestamped observation carrying exactly one source payload."""

    kind: str  # flow, log, or behavior
    timestamp: int  # milliseconds
    flow: FlowData | None = None
    log: LogData | None = None
    behavior: BehaviorData | None = None

    def __post_init__(self):
        if self.kind not in ("flow", "log", "behavior"):
            raise InputError(f"unknown event kind {self.kind!r}")
        if self.timestamp < 0:
            raise InputError("timestamp must be non-negative")
        payloads = {"flow": self.flow, "log": self.log, "behavior": self.behavior}
        populated = [k for k, v in payloads.items() if v is not None]
        if populated != [self.kind]:
            raise InputError(
                f"event of kind {self.kind!r} must populate exactly that payload, "
                f"got {populated or 'none'}"
            )


@dataclass
class TelemetryWindow:
    """Events inside ``[start, end)``, sorted by timestamp."""

    start: int
    end: int
    events: list[TelemetryEvent] = field(default_factory=list)
    label: str | None = None

    def __post_init__(self):
        if self.start >= self.end:
            raise InputError(f"window start {self.start} must precede end {self.end}")
        if self.label is not None and self.label not in LABELS:
            raise InputError(f"unknown label {self.label!r}")
        prev = self.start
        for ev in self.events:
            if not self.start <= ev.timestamp < self.end:
                raise InputError(
                    f"event at {ev.timestamp} outside window [{self.start}, {self.end})"
                )
            if ev.timestamp < prev:
                raise InputError("events must be sorted by timestamp")
            prev = ev.timestamp

    @property
    def duration_ms(self) -> int:
        return self.end - self.start


def event_to_dict(ev: TelemetryEvent) -> dict:
    d = {"kind": ev.kind, "timestamp": ev.timestamp}
    if ev.flow is not None:
        d["flow"] = vars(ev.flow).copy()
    if ev.log is not None:
        d["log"] = vars(ev.log).copy()
    if ev.behavior is not None:
        d["behavior"] = vars(ev.behavior).copy()
    return d


def event_from_dict(d: dict) -> TelemetryEvent:
    try:
        kind = d["kind"]
        timestamp = d["timestamp"]
    except KeyError as exc:
        raise InputError(f"event record missing field {exc}") from exc
    try:
        flow = FlowData(**d["flow"]) if "flow" in d else None
        log = LogData(**d["log"]) if "log" in d else None
        behavior = BehaviorData(**d["behavior"]) if "behavior" in d else None
    except TypeError as exc:
        raise InputError(f"malformed event payload: {exc}") from exc
    return TelemetryEvent(kind=kind, timestamp=timestamp, flow=flow, log=log,
                          behavior=behavior)


def write_events_jsonl(path: str, windows: list[TelemetryWindow]) -> None:
    """Write every event of every window as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for w in windows:
            for ev in w.events:
                fh.write(json.dumps(event_to_dict(ev), sort_keys=True))
                fh.write("\n")


def write_label_sidecar(path: str, windows: list[TelemetryWindow]) -> None:
    """CSV sidecar mapping each window's time span to its ground-truth label."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start", "end", "label"])
        for w in windows:
            writer.writerow([w.start, w.end, w.label if w.label is not None else ""])


def read_stream_jsonl(events_path: str, labels_path: str) -> list[TelemetryWindow]:
    """Rebuild labeled windows from an events file and its label sidecar."""
    events: list[TelemetryEvent] = []
    with open(events_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(event_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise InputError(f"{events_path}:{lineno}: invalid JSON ({exc})") from exc
    spans: list[tuple[int, int, str | None]] = []
    with open(labels_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["start", "end", "label"]:
            raise InputError(f"{labels_path}: expected header start,end,label")
        for row in reader:
            label = row["label"] or None
            spans.append((int(row["start"]), int(row["end"]), label))
    windows = []
    idx = 0
    for start, end, label in spans:
        evs = []
        while idx < len(events) and events[idx].timestamp < end:
            if events[idx].timestamp < start:
                raise InputError(
                    f"event at {events[idx].timestamp} not covered by any window span"
                )
            evs.append(events[idx])
            idx += 1
        windows.append(TelemetryWindow(start=start, end=end, events=evs, label=label))
    if idx != len(events):
        raise InputError(f"{events_path}: {len(events) - idx} events past the last window")
    return windows
