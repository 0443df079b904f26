"""Seeded synthetic telemetry with labeled attack injection.

The generator is a pure function of its config. Every window draws from its
own Philox counter-based substream keyed ``(seed, window_index)``, so windows
can be produced in any order or in parallel and the stream is still
byte-identical. Five attack kinds perturb a benign baseline, each with a
distinct signature tied to a documented marker feature:

- ddos               flow-rate surge of tiny SYN flows (marker: flow count)
- sql_injection      suspicious payload classes on db traffic (marker:
                     payload marker count)
- port_scan          uniformly random destination ports (marker: distinct
                     ports)
- brute_force        login-failure bursts against few accounts (marker:
                     login failure count)
- data_exfiltration  very large outbound flows (marker: max flow bytes)

Windows are labeled by majority temporal overlap: the kind covering the most
time wins; ties resolve toward the attack, and between attacks toward the
canonical label order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, StratificationError
from .features import FeatureLayout, extract_features
from .telemetry import (
    ATTACK_KINDS,
    LABELS,
    BehaviorData,
    FlowData,
    LogData,
    TelemetryEvent,
    TelemetryWindow,
)

# documented marker feature per attack kind; separability of these against
# benign is what makes detector training on synthetic data well-posed
MARKER_FEATURES = {
    "ddos": "traffic.flow_count",
    "sql_injection": "traffic.payload_marker_count",
    "port_scan": "traffic.distinct_ports",
    "brute_force": "behavior.action_login_failure_count",
    "data_exfiltration": "traffic.byte_max",
}

# share of benign events by source
_FLOW_SHARE = 0.6
_LOG_SHARE = 0.2
_BEHAVIOR_SHARE = 0.2

# attack event rates per second at intensity 1.0 (ddos scales off the
# benign flow rate instead, see ddos_surge)
_SQLI_RATE = 30.0
_SCAN_RATE = 40.0
_BRUTE_RATE = 25.0
_EXFIL_RATE = 3.0

_COMMON_PORTS = np.array([443, 80, 22, 3306, 8080])
_COMMON_PORT_WEIGHTS = np.array([0.5, 0.2, 0.05, 0.1, 0.15])
_ACTION_WEIGHTS = np.array([0.15, 0.55, 0.10, 0.15, 0.05])  # matches BEHAVIOR_ACTIONS
_SEVERITY_WEIGHTS = np.array([0.10, 0.30, 0.25, 0.20, 0.10, 0.05, 0.0, 0.0])


@dataclass(frozen=True)
class AttackSpec:
    """One attack burst: what, how hard, and when."""

    kind: str
    intensity: float
    start: int  # ms
    end: int  # ms

    def __post_init__(self):
        if self.kind not in LABELS:
            raise ConfigError(f"unknown attack kind {self.kind!r}")
        if not 0.0 < self.intensity <= 1.0:
            raise ConfigError(f"intensity must be in (0, 1], got {self.intensity}")
        if self.start >= self.end:
            raise ConfigError(f"attack start {self.start} must precede end {self.end}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a synthetic run; the stream is a function of this."""

    duration_ms: int
    window_ms: int = 1000
    benign_rate: float = 60.0  # events per second across all sources
    attacks: tuple[AttackSpec, ...] = ()
    seed: int = 0
    ddos_surge: float = 8.0  # ddos flow rate = surge x benign flow rate

    def __post_init__(self):
        object.__setattr__(self, "attacks", tuple(self.attacks))
        if self.duration_ms <= 0 or self.window_ms <= 0:
            raise ConfigError("duration and window must be positive")
        if self.duration_ms % self.window_ms != 0:
            raise ConfigError(
                f"window {self.window_ms} ms must tile duration {self.duration_ms} ms"
            )
        if self.benign_rate <= 0:
            raise ConfigError("benign_rate must be positive")
        if self.ddos_surge <= 1.0:
            raise ConfigError("ddos_surge must exceed 1")
        for spec in self.attacks:
            if spec.start < 0 or spec.end > self.duration_ms:
                raise ConfigError(
                    f"attack [{spec.start}, {spec.end}) outside duration "
                    f"{self.duration_ms} ms"
                )

    @property
    def n_windows(self) -> int:
        return self.duration_ms // self.window_ms

    def to_dict(self) -> dict:
        return {
            "duration_ms": self.duration_ms,
            "window_ms": self.window_ms,
            "benign_rate": self.benign_rate,
            "seed": self.seed,
            "ddos_surge": self.ddos_surge,
            "attacks": [
                {"kind": a.kind, "intensity": a.intensity, "start": a.start, "end": a.end}
                for a in self.attacks
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            attacks = tuple(AttackSpec(**a) for a in d.get("attacks", []))
            return cls(
                duration_ms=d["duration_ms"],
                window_ms=d.get("window_ms", 1000),
                benign_rate=d.get("benign_rate", 60.0),
                attacks=attacks,
                seed=d.get("seed", 0),
                ddos_surge=d.get("ddos_surge", 8.0),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario config missing field {exc}") from exc
        except TypeError as exc:
            raise ConfigError(f"malformed scenario config: {exc}") from exc


@dataclass
class LabeledStream:
    """Windows tiling the configured duration, each with a ground-truth label."""

    windows: list[TelemetryWindow]
    config: ScenarioConfig

    def __len__(self) -> int:
        return len(self.windows)

    def labels(self) -> list[str]:
        return [w.label for w in self.windows]


def _window_rng(seed: int, window_index: int) -> np.random.Generator:
    """Independent substream per window: 128-bit Philox key (seed, index)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(window_index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _overlap(spec: AttackSpec, start: int, end: int) -> tuple[int, int]:
    return max(spec.start, start), min(spec.end, end)


def _union_length(intervals: list[tuple[int, int]]) -> int:
    """Total length covered by a set of half-open intervals."""
    if not intervals:
        return 0
    intervals = sorted(intervals)
    covered = 0
    cur_lo, cur_hi = intervals[0]
    for lo, hi in intervals[1:]:
        if lo > cur_hi:
            covered += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    return covered + (cur_hi - cur_lo)


def label_for_window(attacks, start: int, end: int) -> str:
    """Majority-overlap label, recomputable independently of generation.

    Coverage per kind is the union of that kind's overlap intervals. The
    benign share is whatever no attack covers. Ties go to the attack, and
    between attacks to the canonical label order.
    """
    by_kind: dict[str, list[tuple[int, int]]] = {}
    for spec in attacks:
        if spec.kind == "benign":
            continue
        lo, hi = _overlap(spec, start, end)
        if lo < hi:
            by_kind.setdefault(spec.kind, []).append((lo, hi))
    if not by_kind:
        return "benign"
    per_kind = {kind: _union_length(iv) for kind, iv in by_kind.items()}
    attacked = _union_length([iv for ivs in by_kind.values() for iv in ivs])
    benign_cover = (end - start) - attacked
    best_kind = min(per_kind, key=lambda k: (-per_kind[k], LABELS.index(k)))
    if per_kind[best_kind] >= benign_cover:  # tie resolves to the attack
        return best_kind
    return "benign"


def truth_intensity(attacks, start: int, end: int, kind: str) -> float:
    """Effective attack pressure on a window: max spec intensity x coverage."""
    window_len = end - start
    best = 0.0
    for spec in attacks:
        if spec.kind != kind:
            continue
        lo, hi = _overlap(spec, start, end)
        if lo < hi:
            best = max(best, spec.intensity * (hi - lo) / window_len)
    return best


def _benign_events(rng: np.random.Generator, start: int, window_ms: int,
                   rate: float) -> list[TelemetryEvent]:
    seconds = window_ms / 1000.0
    events = []
    n_flows = rng.poisson(rate * _FLOW_SHARE * seconds)
    for _ in range(n_flows):
        ts = start + int(rng.integers(0, window_ms))
        byte_count = int(rng.lognormal(6.5, 1.0)) + 40
        events.append(TelemetryEvent(
            kind="flow", timestamp=ts,
            flow=FlowData(
                src=f"10.0.{rng.integers(0, 8)}.{rng.integers(1, 200)}",
                dst=f"srv-{rng.integers(0, 12)}",
                port=int(rng.choice(_COMMON_PORTS, p=_COMMON_PORT_WEIGHTS)),
                protocol="tcp" if rng.random() < 0.85 else "udp",
                bytes=byte_count,
                packets=1 + byte_count // 700 + int(rng.integers(0, 3)),
                duration_ms=int(rng.lognormal(3.5, 1.0)) + 1,
                syn_flag=bool(rng.random() < 0.08),
                payload_class=int(rng.integers(1, 4)) if rng.random() < 0.02 else 0,
            )))
    n_logs = rng.poisson(rate * _LOG_SHARE * seconds)
    for _ in range(n_logs):
        ts = start + int(rng.integers(0, window_ms))
        events.append(TelemetryEvent(
            kind="log", timestamp=ts,
            log=LogData(
                severity=int(rng.choice(8, p=_SEVERITY_WEIGHTS)),
                event_code=int(rng.integers(100, 150)),
                subsystem=("auth", "db", "net", "api", "kernel")[int(rng.choice(5))],
            )))
    n_behaviors = rng.poisson(rate * _BEHAVIOR_SHARE * seconds)
    for _ in range(n_behaviors):
        ts = start + int(rng.integers(0, window_ms))
        action = ("login", "query", "upload", "download", "admin_op")[
            int(rng.choice(5, p=_ACTION_WEIGHTS))]
        events.append(TelemetryEvent(
            kind="behavior", timestamp=ts,
            behavior=BehaviorData(
                user_id=f"user-{rng.integers(0, 40)}",
                action=action,
                success=bool(rng.random() >= 0.05),
            )))
    return events


def _attack_events(rng: np.random.Generator, spec: AttackSpec, lo: int, hi: int,
                   config: ScenarioConfig) -> list[TelemetryEvent]:
    """Overlay for one attack spec clipped to [lo, hi) inside one window."""
    seconds = (hi - lo) / 1000.0
    events = []

    def ts() -> int:
        return lo + int(rng.integers(0, hi - lo))

    if spec.kind == "ddos":
        flow_rate = config.benign_rate * _FLOW_SHARE * config.ddos_surge
        for _ in range(rng.poisson(flow_rate * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="flow", timestamp=ts(),
                flow=FlowData(
                    src=f"172.16.{rng.integers(0, 256)}.{rng.integers(0, 256)}",
                    dst="srv-0",
                    port=int(rng.choice([80, 443])),
                    protocol="tcp",
                    bytes=int(rng.lognormal(4.2, 0.4)) + 40,
                    packets=1 + int(rng.integers(0, 2)),
                    duration_ms=1 + int(rng.integers(0, 5)),
                    syn_flag=bool(rng.random() < 0.9),
                    payload_class=0,
                )))
    elif spec.kind == "sql_injection":
        for _ in range(rng.poisson(_SQLI_RATE * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="flow", timestamp=ts(),
                flow=FlowData(
                    src=f"192.0.2.{rng.integers(0, 16)}",
                    dst="srv-db",
                    port=3306,
                    protocol="tcp",
                    bytes=int(rng.lognormal(6.0, 0.5)) + 40,
                    packets=2 + int(rng.integers(0, 4)),
                    duration_ms=int(rng.lognormal(3.0, 0.6)) + 1,
                    syn_flag=False,
                    payload_class=int(rng.integers(1, 4)),
                )))
        for _ in range(rng.poisson(_SQLI_RATE * 0.4 * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="behavior", timestamp=ts(),
                behavior=BehaviorData(
                    user_id="user-web",
                    action="query",
                    success=bool(rng.random() < 0.5),
                )))
        for _ in range(rng.poisson(_SQLI_RATE * 0.2 * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="log", timestamp=ts(),
                log=LogData(severity=4 + int(rng.integers(0, 3)),
                            event_code=int(rng.integers(500, 520)),
                            subsystem="db"),
            ))
    elif spec.kind == "port_scan":
        scanner = f"198.51.100.{spec.start % 251}"
        for _ in range(rng.poisson(_SCAN_RATE * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="flow", timestamp=ts(),
                flow=FlowData(
                    src=scanner,
                    dst=f"srv-{rng.integers(0, 12)}",
                    port=int(rng.integers(1, 65536)),
                    protocol="tcp",
                    bytes=40 + int(rng.integers(0, 20)),
                    packets=1,
                    duration_ms=1 + int(rng.integers(0, 3)),
                    syn_flag=True,
                    payload_class=0,
                )))
    elif spec.kind == "brute_force":
        victim = f"user-{spec.start % 40}"
        attacker = f"203.0.113.{spec.start % 251}"
        for _ in range(rng.poisson(_BRUTE_RATE * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="behavior", timestamp=ts(),
                behavior=BehaviorData(
                    user_id=victim,
                    action="login",
                    success=bool(rng.random() < 0.05),
                )))
        for _ in range(rng.poisson(_BRUTE_RATE * 0.6 * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="log", timestamp=ts(),
                log=LogData(severity=4 + int(rng.integers(0, 2)),
                            event_code=401,
                            subsystem="auth"),
            ))
        for _ in range(rng.poisson(_BRUTE_RATE * 0.3 * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="flow", timestamp=ts(),
                flow=FlowData(
                    src=attacker, dst="srv-1", port=22, protocol="tcp",
                    bytes=200 + int(rng.integers(0, 400)),
                    packets=3 + int(rng.integers(0, 5)),
                    duration_ms=50 + int(rng.integers(0, 300)),
                    syn_flag=bool(rng.random() < 0.5),
                    payload_class=0,
                )))
    elif spec.kind == "data_exfiltration":
        compromised = f"10.0.{spec.start % 8}.{1 + spec.start % 199}"
        lam = max(_EXFIL_RATE * spec.intensity * seconds, 0.0)
        n = rng.poisson(lam)
        if seconds >= 0.5:
            n = max(n, 1)  # a covering exfil burst always moves data
        for _ in range(n):
            events.append(TelemetryEvent(
                kind="flow", timestamp=ts(),
                flow=FlowData(
                    src=compromised,
                    dst=f"ext-{spec.start % 4}.example",
                    port=443,
                    protocol="tcp",
                    bytes=int(rng.lognormal(13.5, 0.4) * spec.intensity) + 1000,
                    packets=200 + int(rng.integers(0, 800)),
                    duration_ms=400 + int(rng.integers(0, 500)),
                    syn_flag=False,
                    payload_class=0,
                )))
        for _ in range(rng.poisson(2.0 * spec.intensity * seconds)):
            events.append(TelemetryEvent(
                kind="behavior", timestamp=ts(),
                behavior=BehaviorData(
                    user_id=f"user-{spec.start % 40}",
                    action="download" if rng.random() < 0.6 else "upload",
                    success=True,
                )))
    return events


def generate_window(config: ScenarioConfig, index: int) -> TelemetryWindow:
    """Generate one labeled window from its own substream."""
    start = index * config.window_ms
    end = start + config.window_ms
    rng = _window_rng(config.seed, index)
    events = _benign_events(rng, start, config.window_ms, config.benign_rate)
    for spec in config.attacks:
        if spec.kind == "benign":
            continue
        lo, hi = _overlap(spec, start, end)
        if lo < hi:
            events.extend(_attack_events(rng, spec, lo, hi, config))
    events.sort(key=lambda ev: ev.timestamp)
    return TelemetryWindow(
        start=start, end=end, events=events,
        label=label_for_window(config.attacks, start, end),
    )


def generate_stream(config: ScenarioConfig) -> LabeledStream:
    """Generate the full labeled stream. Pure function of the config."""
    windows = [generate_window(config, i) for i in range(config.n_windows)]
    return LabeledStream(windows=windows, config=config)


def split_dataset(stream: LabeledStream, train_fraction: float,
                  seed: int = 0) -> tuple[LabeledStream, LabeledStream]:
    """Stratified split into disjoint train/test streams.

    Per-class train counts are round(fraction * n), clamped so both sides
    keep at least one window of every class. Classes with fewer than two
    windows cannot be split.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_label: dict[str, list[int]] = {}
    for i, w in enumerate(stream.windows):
        by_label.setdefault(w.label or "benign", []).append(i)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    for label in LABELS:  # canonical order keeps the split seed-stable
        idx = by_label.get(label)
        if idx is None:
            continue
        if len(idx) < 2:
            raise StratificationError(
                f"label {label!r} has only {len(idx)} window(s), cannot split"
            )
        perm = rng.permutation(len(idx))
        n_train = int(round(train_fraction * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.extend(idx[j] for j in perm[:n_train])
    train_set = set(train_idx)
    train = [stream.windows[i] for i in range(len(stream.windows)) if i in train_set]
    test = [stream.windows[i] for i in range(len(stream.windows)) if i not in train_set]
    return (LabeledStream(windows=train, config=stream.config),
            LabeledStream(windows=test, config=stream.config))


def verify_separability(stream: LabeledStream, layout: FeatureLayout,
                        min_z: float = 3.0) -> dict[str, float]:
    """Check each attack kind's marker feature stands >= min_z benign stds
    from the benign mean. Returns the per-kind z-scores."""
    vectors: dict[str, list[float]] = {}
    marker_idx = {kind: layout.index_of(name) for kind, name in MARKER_FEATURES.items()}
    benign_by_marker: dict[str, list[float]] = {k: [] for k in MARKER_FEATURES}
    for w in stream.windows:
        fv = extract_features(w, layout)
        if w.label == "benign":
            for kind, idx in marker_idx.items():
                benign_by_marker[kind].append(fv[idx])
        elif w.label in marker_idx:
            vectors.setdefault(w.label, []).append(fv[marker_idx[w.label]])
    if not any(benign_by_marker.values()):
        raise InputError("stream has no benign windows to compare against")
    scores = {}
    for kind, values in vectors.items():
        benign = np.asarray(benign_by_marker[kind])
        z = (float(np.mean(values)) - float(benign.mean())) / max(float(benign.std()), 1e-9)
        scores[kind] = z
        if z < min_z:
            raise InputError(
                f"{kind} marker {MARKER_FEATURES[kind]} separates at z={z:.2f} < {min_z}"
            )
    return scores


def default_scenario(seed: int = 0, rounds: int = 30, burst_windows: int = 11,
                     gap_windows: int = 2, window_ms: int = 1000,
                     benign_rate: float = 60.0) -> ScenarioConfig:
    """Round-robin attack schedule giving every class hundreds of windows.

    Each round visits all five attack kinds: a benign gap, then a burst
    aligned to window boundaries. Intensities cycle deterministically over
    [0.6, 1.0] so the policy sees varied pressure.
    """
    attacks = []
    t = 0
    for r in range(rounds):
        for k, kind in enumerate(ATTACK_KINDS):
            t += gap_windows * window_ms
            intensity = 0.6 + 0.4 * ((r * 7 + k * 3) % 5) / 4.0
            attacks.append(AttackSpec(
                kind=kind, intensity=intensity,
                start=t, end=t + burst_windows * window_ms,
            ))
            t += burst_windows * window_ms
    return ScenarioConfig(
        duration_ms=t,
        window_ms=window_ms,
        benign_rate=benign_rate,
        attacks=tuple(attacks),
        seed=seed,
    )
