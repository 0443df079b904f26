"""Fixed-width feature extraction over telemetry windows.

A window maps to one numeric vector of configurable dimension (default 428).
The vector is split into three contiguous segments:

- ``traffic``      flow-derived scalars and histograms
- ``time_series``  per-sub-bin activity counts, their first differences,
                   and per-series peak ratios across a fixed sub-bin grid
- ``behavior``     user-action and system-log statistics

Every position has a stable name (``"traffic.byte_sum"``); the full catalog
lives in a FeatureLayout that serializes to JSON next to datasets, so tests
and downstream consumers address features by name instead of raw index.
Positions the catalog does not populate are named ``*.reserved_*`` and are
always zero. Extraction is pure: the same window yields the same vector, and
all time handling is window-relative, so shifting a window and its events by
a constant changes nothing.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .telemetry import BEHAVIOR_ACTIONS, LOG_SUBSYSTEMS, TelemetryWindow

DEFAULT_DIM = 428

# segment boundaries for the default 428-wide vector; other dims scale
# these proportionally so the three segments always partition [0, D)
_TRAFFIC_END_DEFAULT = 200
_TIMESERIES_END_DEFAULT = 328

TS_SERIES = ("flows", "bytes", "logs", "actions")

_PORT_BUCKETS = 32  # 2048 ports per bucket
_BYTE_LOG_BUCKETS = 24
_PACKET_LOG_BUCKETS = 12
_DURATION_LOG_BUCKETS = 16


def entropy_nats(counts) -> float:
    """Shannon entropy (natural log) of an empirical count distribution."""
    values = np.asarray(list(counts.values()) if isinstance(counts, dict) else counts,
                        dtype=np.float64)
    total = values.sum()
    if total <= 0:
        return 0.0
    p = values[values > 0] / total
    return float(-(p * np.log(p)).sum())


def _traffic_catalog() -> list[str]:
    names = [
        "flow_count", "flow_rate", "byte_sum", "byte_rate", "byte_mean",
        "byte_std", "byte_max", "byte_min", "packet_sum", "packet_rate",
        "packet_mean", "packet_std", "packet_max", "duration_mean",
        "duration_std", "duration_max", "bytes_per_packet_mean",
        "dominant_flow_ratio", "syn_count", "syn_ratio", "tcp_count",
        "tcp_ratio", "udp_count", "udp_ratio", "distinct_ports",
        "port_entropy", "low_port_ratio", "high_port_count", "distinct_src",
        "src_entropy", "distinct_dst", "dst_entropy", "payload_marker_count",
        "payload_marker_ratio", "flows_per_src_mean", "flows_per_src_max",
        "flows_per_dst_mean", "flows_per_dst_max",
    ]
    names += [f"port_bucket_{i:02d}" for i in range(_PORT_BUCKETS)]
    names += [f"byte_log2_{i:02d}" for i in range(_BYTE_LOG_BUCKETS)]
    names += [f"packet_log2_{i:02d}" for i in range(_PACKET_LOG_BUCKETS)]
    names += [f"duration_log2_{i:02d}" for i in range(_DURATION_LOG_BUCKETS)]
    names += [f"payload_class_{i}" for i in range(4)]
    return names


def _timeseries_catalog(n_bins: int) -> list[str]:
    names = []
    for series in TS_SERIES:
        names += [f"{series}_bin_{i:02d}" for i in range(n_bins)]
    for series in TS_SERIES:
        names += [f"{series}_delta_{i:02d}" for i in range(n_bins - 1)]
    names += [f"{series}_peak_ratio" for series in TS_SERIES]
    return names


def _behavior_catalog() -> list[str]:
    names = []
    names += [f"action_{a}_count" for a in BEHAVIOR_ACTIONS]
    names += [f"action_{a}_failure_count" for a in BEHAVIOR_ACTIONS]
    names += [f"action_{a}_success_ratio" for a in BEHAVIOR_ACTIONS]
    names += [
        "event_count", "event_rate", "failure_count", "failure_ratio",
        "distinct_users", "user_entropy", "actions_per_user_mean",
        "actions_per_user_max", "failed_logins_per_user_max",
        "log_count", "log_rate", "severity_mean", "severity_std",
        "severity_max", "high_severity_count", "high_severity_ratio",
    ]
    names += [f"severity_hist_{i}" for i in range(8)]
    names += [f"subsystem_{s}_count" for s in LOG_SUBSYSTEMS]
    names += ["subsystem_entropy", "distinct_event_codes", "event_code_entropy"]
    return names


def _fit_segment(prefix: str, catalog: list[str], width: int) -> list[str]:
    """Trim or zero-pad a segment catalog to the segment's width."""
    names = [f"{prefix}.{n}" for n in catalog[:width]]
    names += [f"{prefix}.reserved_{i:03d}" for i in range(width - len(names))]
    return names


@dataclass(frozen=True)
class FeatureLayout:
    """Immutable description of where every named feature lives."""

    dim: int
    n_bins: int
    segments: dict[str, tuple[int, int]]
    names: tuple[str, ...]

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise InputError(f"unknown feature name {name!r}") from None

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    def segment_slice(self, segment: str) -> slice:
        start, end = self.segments[segment]
        return slice(start, end)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n_bins": self.n_bins,
            "segments": {k: list(v) for k, v in self.segments.items()},
            "names": list(self.names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureLayout":
        try:
            layout = cls(
                dim=d["dim"],
                n_bins=d["n_bins"],
                segments={k: tuple(v) for k, v in d["segments"].items()},
                names=tuple(d["names"]),
            )
        except KeyError as exc:
            raise InputError(f"layout descriptor missing field {exc}") from exc
        if len(layout.names) != layout.dim:
            raise InputError("layout names length does not match dim")
        return layout


def build_layout(dim: int = DEFAULT_DIM, n_bins: int = 16) -> FeatureLayout:
    """Construct the canonical layout for a given vector width."""
    if dim < 3:
        raise InputError("dim must be at least 3, one slot per segment")
    if n_bins < 2:
        raise InputError("n_bins must be at least 2")
    traffic_end = (dim * _TRAFFIC_END_DEFAULT) // DEFAULT_DIM
    ts_end = (dim * _TIMESERIES_END_DEFAULT) // DEFAULT_DIM
    traffic_end = max(traffic_end, 1)
    ts_end = max(ts_end, traffic_end + 1)
    if ts_end >= dim:
        raise InputError(f"dim {dim} too small to hold three segments")
    segments = {
        "traffic": (0, traffic_end),
        "time_series": (traffic_end, ts_end),
        "behavior": (ts_end, dim),
    }
    names = (
        _fit_segment("traffic", _traffic_catalog(), traffic_end)
        + _fit_segment("time_series", _timeseries_catalog(n_bins), ts_end - traffic_end)
        + _fit_segment("behavior", _behavior_catalog(), dim - ts_end)
    )
    return FeatureLayout(dim=dim, n_bins=n_bins, segments=segments, names=tuple(names))


def save_layout(path: str, layout: FeatureLayout) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(layout.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_layout(path: str) -> FeatureLayout:
    with open(path, encoding="utf-8") as fh:
        try:
            return FeatureLayout.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid layout JSON ({exc})") from exc


def _mean_std_max_min(values: list[float]) -> tuple[float, float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0, 0.0
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std()), float(arr.max()), float(arr.min())


def _log2_bucket(value: int, n_buckets: int) -> int:
    return min(int(math.log2(value + 1)), n_buckets - 1)


def _traffic_stats(window: TelemetryWindow) -> dict[str, float]:
    flows = [ev.flow for ev in window.events if ev.flow is not None]
    out: dict[str, float] = {}
    seconds = window.duration_ms / 1000.0
    n = len(flows)
    out["flow_count"] = float(n)
    out["flow_rate"] = n / seconds
    if n == 0:
        return out
    byte_list = [f.bytes for f in flows]
    packet_list = [f.packets for f in flows]
    duration_list = [f.duration_ms for f in flows]
    b_mean, b_std, b_max, b_min = _mean_std_max_min(byte_list)
    p_mean, p_std, p_max, _ = _mean_std_max_min(packet_list)
    d_mean, d_std, d_max, _ = _mean_std_max_min(duration_list)
    byte_sum = float(sum(byte_list))
    packet_sum = float(sum(packet_list))
    out.update({
        "byte_sum": byte_sum, "byte_rate": byte_sum / seconds,
        "byte_mean": b_mean, "byte_std": b_std, "byte_max": b_max,
        "byte_min": b_min,
        "packet_sum": packet_sum, "packet_rate": packet_sum / seconds,
        "packet_mean": p_mean, "packet_std": p_std, "packet_max": p_max,
        "duration_mean": d_mean, "duration_std": d_std, "duration_max": d_max,
        "bytes_per_packet_mean": byte_sum / packet_sum if packet_sum else 0.0,
        "dominant_flow_ratio": b_max / byte_sum if byte_sum else 0.0,
    })
    syn = sum(1 for f in flows if f.syn_flag)
    tcp = sum(1 for f in flows if f.protocol == "tcp")
    out.update({
        "syn_count": float(syn), "syn_ratio": syn / n,
        "tcp_count": float(tcp), "tcp_ratio": tcp / n,
        "udp_count": float(n - tcp), "udp_ratio": (n - tcp) / n,
    })
    ports = Counter(f.port for f in flows)
    out["distinct_ports"] = float(len(ports))
    out["port_entropy"] = entropy_nats(ports)
    out["low_port_ratio"] = sum(1 for f in flows if f.port < 1024) / n
    out["high_port_count"] = float(sum(1 for f in flows if f.port >= 1024))
    srcs = Counter(f.src for f in flows)
    dsts = Counter(f.dst for f in flows)
    out["distinct_src"] = float(len(srcs))
    out["src_entropy"] = entropy_nats(srcs)
    out["distinct_dst"] = float(len(dsts))
    out["dst_entropy"] = entropy_nats(dsts)
    markers = sum(1 for f in flows if f.payload_class > 0)
    out["payload_marker_count"] = float(markers)
    out["payload_marker_ratio"] = markers / n
    src_counts = list(srcs.values())
    dst_counts = list(dsts.values())
    out["flows_per_src_mean"] = float(np.mean(src_counts))
    out["flows_per_src_max"] = float(max(src_counts))
    out["flows_per_dst_mean"] = float(np.mean(dst_counts))
    out["flows_per_dst_max"] = float(max(dst_counts))
    for f in flows:
        bucket = min(f.port // 2048, _PORT_BUCKETS - 1)
        out[f"port_bucket_{bucket:02d}"] = out.get(f"port_bucket_{bucket:02d}", 0.0) + 1.0
        bb = _log2_bucket(f.bytes, _BYTE_LOG_BUCKETS)
        out[f"byte_log2_{bb:02d}"] = out.get(f"byte_log2_{bb:02d}", 0.0) + 1.0
        pb = _log2_bucket(f.packets, _PACKET_LOG_BUCKETS)
        out[f"packet_log2_{pb:02d}"] = out.get(f"packet_log2_{pb:02d}", 0.0) + 1.0
        db = _log2_bucket(f.duration_ms, _DURATION_LOG_BUCKETS)
        out[f"duration_log2_{db:02d}"] = out.get(f"duration_log2_{db:02d}", 0.0) + 1.0
        pc = min(max(f.payload_class, 0), 3)
        out[f"payload_class_{pc}"] = out.get(f"payload_class_{pc}", 0.0) + 1.0
    return out


def _timeseries_stats(window: TelemetryWindow, n_bins: int) -> dict[str, float]:
    duration = window.duration_ms
    bins = {series: np.zeros(n_bins) for series in TS_SERIES}
    for ev in window.events:
        # window-relative offset keeps features invariant under time shifts
        b = min((ev.timestamp - window.start) * n_bins // duration, n_bins - 1)
        if ev.flow is not None:
            bins["flows"][b] += 1.0
            bins["bytes"][b] += ev.flow.bytes
        elif ev.log is not None:
            bins["logs"][b] += 1.0
        else:
            bins["actions"][b] += 1.0
    out: dict[str, float] = {}
    for series in TS_SERIES:
        arr = bins[series]
        for i in range(n_bins):
            out[f"{series}_bin_{i:02d}"] = float(arr[i])
        for i in range(n_bins - 1):
            out[f"{series}_delta_{i:02d}"] = float(arr[i + 1] - arr[i])
        mean = arr.mean()
        out[f"{series}_peak_ratio"] = float(arr.max() / mean) if mean > 0 else 0.0
    return out


def _behavior_stats(window: TelemetryWindow) -> dict[str, float]:
    actions = [ev.behavior for ev in window.events if ev.behavior is not None]
    logs = [ev.log for ev in window.events if ev.log is not None]
    out: dict[str, float] = {}
    seconds = window.duration_ms / 1000.0
    n = len(actions)
    out["event_count"] = float(n)
    out["event_rate"] = n / seconds
    if n:
        failures = 0
        per_action = Counter()
        per_action_fail = Counter()
        users = Counter()
        failed_logins_per_user = Counter()
        for a in actions:
            per_action[a.action] += 1
            users[a.user_id] += 1
            if not a.success:
                failures += 1
                per_action_fail[a.action] += 1
                if a.action == "login":
                    failed_logins_per_user[a.user_id] += 1
        for name in BEHAVIOR_ACTIONS:
            count = per_action.get(name, 0)
            fail = per_action_fail.get(name, 0)
            out[f"action_{name}_count"] = float(count)
            out[f"action_{name}_failure_count"] = float(fail)
            out[f"action_{name}_success_ratio"] = (count - fail) / count if count else 0.0
        out["failure_count"] = float(failures)
        out["failure_ratio"] = failures / n
        out["distinct_users"] = float(len(users))
        out["user_entropy"] = entropy_nats(users)
        per_user = list(users.values())
        out["actions_per_user_mean"] = float(np.mean(per_user))
        out["actions_per_user_max"] = float(max(per_user))
        out["failed_logins_per_user_max"] = float(
            max(failed_logins_per_user.values()) if failed_logins_per_user else 0
        )
    out["log_count"] = float(len(logs))
    out["log_rate"] = len(logs) / seconds
    if logs:
        severities = np.asarray([lg.severity for lg in logs], dtype=np.float64)
        out["severity_mean"] = float(severities.mean())
        out["severity_std"] = float(severities.std())
        out["severity_max"] = float(severities.max())
        high = int((severities >= 5).sum())
        out["high_severity_count"] = float(high)
        out["high_severity_ratio"] = high / len(logs)
        for sev in range(8):
            out[f"severity_hist_{sev}"] = float(int((severities == sev).sum()))
        subsystems = Counter(lg.subsystem for lg in logs)
        for name in LOG_SUBSYSTEMS:
            out[f"subsystem_{name}_count"] = float(subsystems.get(name, 0))
        out["subsystem_entropy"] = entropy_nats(subsystems)
        codes = Counter(lg.event_code for lg in logs)
        out["distinct_event_codes"] = float(len(codes))
        out["event_code_entropy"] = entropy_nats(codes)
    return out


def extract_features(window: TelemetryWindow, layout: FeatureLayout) -> np.ndarray:
    """Compute the named feature vector for one window. Pure and deterministic."""
    stats = {
        "traffic": _traffic_stats(window),
        "time_series": _timeseries_stats(window, layout.n_bins),
        "behavior": _behavior_stats(window),
    }
    vec = np.zeros(layout.dim)
    for i, full_name in enumerate(layout.names):
        segment, name = full_name.split(".", 1)
        vec[i] = stats[segment].get(name, 0.0)
    return vec


@dataclass
class NormStats:
    """Per-dimension mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   std=np.asarray(d["std"], dtype=np.float64))


def fit_normalizer(dataset: list[np.ndarray] | np.ndarray) -> NormStats:
    """Fit per-dimension mean and population std over a non-empty dataset."""
    arr = np.asarray(dataset, dtype=np.float64)
    if arr.size == 0:
        raise InputError("cannot fit a normalizer on an empty dataset")
    if arr.ndim == 1:
        arr = arr[None]
    return NormStats(mean=arr.mean(axis=0), std=arr.std(axis=0))


def normalize(fv: np.ndarray, stats: NormStats) -> np.ndarray:
    """Standardize a vector; constant dimensions (std 0) map to 0."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.shape[-1] != stats.mean.shape[0]:
        raise DimensionError(
            f"vector width {fv.shape[-1]} does not match stats width {stats.mean.shape[0]}"
        )
    safe = np.where(stats.std > 0, stats.std, 1.0)
    out = (fv - stats.mean) / safe
    return np.where(stats.std > 0, out, 0.0)
