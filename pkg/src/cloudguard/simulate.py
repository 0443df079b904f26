"""End-to-end protection loop: replay a scenario through detection,
perception, response selection, and enforcement, then score the run.

The run is deterministic given the configuration: every random draw comes
from the scenario generator's seeded substreams, and the pipeline itself
consumes no randomness (response selection is greedy). The only fields that
vary between runs are measured wall-clock latencies, which are confined to
the per-event ``timing`` record and the report's ``timing`` subtree so that
everything else can be compared byte for byte.

Windows are processed in two phases. Detection (featurize + classify) is
pure per window, so replicas score disjoint window shards concurrently and
the results merge canonically by window id. The response walk is sequential
because each decision feeds the next state's recent-action signal, but it is
dictionary lookups and arithmetic, far cheaper than the network forward.
"""

import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baseline import RuleBasedDetector, default_rules
from .detector import (DEFAULT_THRESHOLD, ThreatVerdict, classify,
                       confusion_metrics, DetectionMetrics, load_detector)
from .enforcement import (DefenseState, LatencyBreakdown, apply_action,
                          default_matrix)
from .environment import CollateralModel, enforce_window
from .errors import (CheckpointError, ComparisonError, ConfigError,
                     FilesystemError, InputError)
from .features import build_layout, extract_features, fit_normalizer, normalize
from .perception import (build_embedders, build_scorer, context_from_fused,
                         embed_window, fuse, level_for_score, summarize_threats,
                         threat_score)
from .policy import (build_action_catalog, compose_indicators,
                     default_indicator_schema, encode_state, get_action,
                     load_qtables, select_action)
from .scenario import ScenarioConfig, default_scenario, generate_stream, \
    truth_intensity
from .telemetry import LABELS

DEFAULT_DEADLINE_MS = 50.0

# sentinel detector names accepted in place of a checkpoint path
BASELINE_DETECTOR = "baseline"
ACCEPT_ALL_DETECTOR = "accept-all"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation run depends on.

    ``detector`` is a checkpoint path, or one of the sentinels: "baseline"
    (the packaged signature rules) or "accept-all" (labels every window
    benign with full confidence, for availability floors and smoke tests).
    ``policy`` is a Q-table checkpoint path; when None, ``fixed_action`` is
    enforced on every window instead (default 0, observe only).
    ``seed`` overrides the scenario's own seed so one scenario description
    can be replayed on fresh traffic.
    """

    scenario: ScenarioConfig
    detector: str = BASELINE_DETECTOR
    policy: str | None = None
    fixed_action: int = 0
    threshold: float = DEFAULT_THRESHOLD
    replicas: int = 1
    seed: int | None = None
    deadline_ms: float = DEFAULT_DEADLINE_MS
    convergence: str | None = None  # training curve shipped alongside reports

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.replicas < 1:
            raise ConfigError(f"replicas must be >= 1, got {self.replicas}")
        if self.deadline_ms <= 0:
            raise ConfigError("deadline_ms must be positive")
        if self.detector not in (BASELINE_DETECTOR, ACCEPT_ALL_DETECTOR) \
                and not os.path.exists(self.detector):
            raise ConfigError(f"detector checkpoint not found: {self.detector}")
        for name, path in (("policy", self.policy),
                           ("convergence", self.convergence)):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{name} file not found: {path}")

    def resolved_scenario(self) -> ScenarioConfig:
        if self.seed is None:
            return self.scenario
        return dataclasses.replace(self.scenario, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "detector": self.detector,
            "policy": self.policy,
            "fixed_action": self.fixed_action,
            "threshold": self.threshold,
            "replicas": self.replicas,
            "seed": self.seed,
            "deadline_ms": self.deadline_ms,
            "convergence": self.convergence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        if not isinstance(d, dict):
            raise ConfigError("simulation config must be a JSON object")
        scenario = d.get("scenario")
        if scenario is None:
            scenario = default_scenario(seed=int(d.get("seed") or 0))
        elif isinstance(scenario, dict):
            scenario = ScenarioConfig.from_dict(scenario)
        else:
            raise ConfigError("scenario must be an object")
        try:
            return cls(
                scenario=scenario,
                detector=d.get("detector", BASELINE_DETECTOR),
                policy=d.get("policy"),
                fixed_action=int(d.get("fixed_action", 0)),
                threshold=float(d.get("threshold", DEFAULT_THRESHOLD)),
                replicas=int(d.get("replicas", 1)),
                seed=d.get("seed"),
                deadline_ms=float(d.get("deadline_ms", DEFAULT_DEADLINE_MS)),
                convergence=d.get("convergence"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed simulation config: {exc}") from exc


# ---------------------------------------------------------------------------
# event records


@dataclass(frozen=True)
class PipelineEvent:
    """One window's trip through the loop; the report recomputes from these."""

    window_id: int
    truth: str
    predicted: str
    confident: bool
    max_probability: float
    threat_score: float
    threat_level: int
    action_id: int
    outcome: str  # blocked | mitigated | passed | none
    attack_damage: float
    collateral_damage: float
    latency: LatencyBreakdown
    started_at: float  # wall-clock, seconds since the epoch
    finished_at: float

    def to_dict(self) -> dict:
        return {
            "window_id": self.window_id,
            "truth": self.truth,
            "predicted": self.predicted,
            "confident": self.confident,
            "max_probability": self.max_probability,
            "threat_score": self.threat_score,
            "threat_level": self.threat_level,
            "action_id": self.action_id,
            "outcome": self.outcome,
            "attack_damage": self.attack_damage,
            "collateral_damage": self.collateral_damage,
            "timing": {
                "latency": self.latency.to_dict(),
                "started_at": self.started_at,
                "finished_at": self.finished_at,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineEvent":
        try:
            timing = d["timing"]
            lat = timing["latency"]
            return cls(
                window_id=int(d["window_id"]),
                truth=d["truth"],
                predicted=d["predicted"],
                confident=bool(d["confident"]),
                max_probability=float(d["max_probability"]),
                threat_score=float(d["threat_score"]),
                threat_level=int(d["threat_level"]),
                action_id=int(d["action_id"]),
                outcome=d["outcome"],
                attack_damage=float(d["attack_damage"]),
                collateral_damage=float(d["collateral_damage"]),
                latency=LatencyBreakdown(
                    detection_ms=float(lat["detection_ms"]),
                    policy_ms=float(lat["policy_ms"]),
                    execution_ms=float(lat["execution_ms"]),
                    total_ms=float(lat["total_ms"]),
                ),
                started_at=float(timing["started_at"]),
                finished_at=float(timing["finished_at"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed pipeline event record: {exc}") from exc


# ---------------------------------------------------------------------------
# percentiles (nearest rank)


def compute_percentiles(samples, qs) -> list[float]:
    """Nearest-rank percentiles: the smallest sample with at least q of the
    mass at or below it. Exact set membership, no interpolation, so results
    can be checked against a plain sort."""
    data = sorted(float(s) for s in samples)
    if not data:
        raise InputError("cannot take percentiles of an empty sample set")
    out = []
    for q in qs:
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise InputError(f"percentile fraction must be in [0, 1], got {q}")
        rank = max(math.ceil(q * len(data)), 1)
        out.append(data[rank - 1])
    return out


# ---------------------------------------------------------------------------
# detector adapters


class _AcceptAll:
    """Labels everything benign with full confidence."""

    def classify(self, raw_fv) -> ThreatVerdict:
        probs = np.zeros(len(LABELS))
        probs[0] = 1.0
        return ThreatVerdict(probabilities=probs, predicted=0,
                             max_probability=1.0, confident=True)


class _Pipeline:
    """Loaded models plus the shared layout, catalog, and damage models."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.layout = build_layout()
        self.catalog = build_action_catalog()
        self.schema = default_indicator_schema()
        self.matrix = default_matrix()
        self.collateral = CollateralModel()
        self.neural = None
        self.rules = None
        if config.detector == BASELINE_DETECTOR:
            self.rules = RuleBasedDetector(default_rules(), self.layout)
        elif config.detector == ACCEPT_ALL_DETECTOR:
            self.rules = _AcceptAll()
        else:
            model, arch, stats, layout, classes = load_detector(config.detector)
            if tuple(classes) != LABELS:
                raise CheckpointError(
                    f"{config.detector}: classes {tuple(classes)} do not match "
                    f"the canonical label set")
            self.neural = (model, arch, stats)
            self.layout = layout
        self.embedders = build_embedders(self.layout)
        self.scorer = build_scorer()
        self.tables = load_qtables(config.policy) if config.policy else None
        if self.tables is not None and self.tables.n_actions != len(self.catalog):
            raise CheckpointError(
                f"{config.policy}: n_actions {self.tables.n_actions} does not "
                f"match the catalog size {len(self.catalog)}")
        if not 0 <= config.fixed_action < len(self.catalog):
            raise ConfigError(f"fixed_action {config.fixed_action} outside the "
                              f"catalog of {len(self.catalog)} actions")


def _detect_shard(pipe: _Pipeline, raw: np.ndarray, normed: np.ndarray,
                  feature_ms: np.ndarray, indices, threshold: float) -> dict:
    """Classify one shard of windows; returns {window_id: (verdict, ms)}."""
    out = {}
    if pipe.neural is not None:
        model, arch, _ = pipe.neural
        t = arch.seq_len
        for i in indices:
            t0 = time.perf_counter()
            lo = i - t + 1
            if lo >= 0:
                seq = normed[lo:i + 1]
            else:
                # warm-up: replicate the first window backwards in time
                pad = np.repeat(normed[:1], -lo, axis=0)
                seq = np.concatenate([pad, normed[:i + 1]], axis=0)
            verdict = classify(model, seq, threshold)
            out[i] = (verdict,
                      float(feature_ms[i]) + (time.perf_counter() - t0) * 1e3)
    else:
        for i in indices:
            t0 = time.perf_counter()
            verdict = pipe.rules.classify(raw[i])
            out[i] = (verdict,
                      float(feature_ms[i]) + (time.perf_counter() - t0) * 1e3)
    return out


def _run_detection(pipe: _Pipeline, windows, threshold: float):
    """Featurize and classify every window, sharded across replicas."""
    raw = np.empty((len(windows), pipe.layout.dim))
    feature_ms = np.empty(len(windows))
    for i, win in enumerate(windows):
        t0 = time.perf_counter()
        raw[i] = extract_features(win, pipe.layout)
        feature_ms[i] = (time.perf_counter() - t0) * 1e3
    if pipe.neural is not None:
        stats = pipe.neural[2]
    else:
        # rule detectors read raw values; normalized copies only feed perception
        stats = fit_normalizer(raw)
    normed = normalize(raw, stats)

    n_shards = min(pipe.config.replicas, len(windows))
    shards = [range(k, len(windows), n_shards) for k in range(n_shards)]
    if n_shards == 1:
        results = _detect_shard(pipe, raw, normed, feature_ms, shards[0],
                                threshold)
    else:
        results = {}
        with ThreadPoolExecutor(max_workers=n_shards) as pool:
            futures = [pool.submit(_detect_shard, pipe, raw, normed,
                                   feature_ms, shard, threshold)
                       for shard in shards]
            for fut in futures:
                results.update(fut.result())
    verdicts = [results[i][0] for i in range(len(windows))]
    detect_ms = [results[i][1] for i in range(len(windows))]
    return verdicts, detect_ms, normed


def _window_load(window, benign_rate: float) -> float:
    """Observed utilization proxy: event volume against twice the benign rate."""
    capacity = 2.0 * benign_rate * (window.duration_ms / 1000.0)
    return min(1.0, len(window.events) / capacity) if capacity > 0 else 0.0


def _respond(pipe: _Pipeline, scenario: ScenarioConfig, windows, verdicts,
             detect_ms, normed) -> list[PipelineEvent]:
    """Sequential response walk: perceive, decide, enforce, record."""
    events = []
    defense = DefenseState()
    recent = 0.0
    for i, win in enumerate(windows):
        started = time.time()
        verdict = verdicts[i]
        t0 = time.perf_counter()
        embeddings = embed_window(normed[i], pipe.layout, pipe.embedders)
        fused, _ = fuse(embeddings, pipe.scorer)
        context = context_from_fused(fused)
        score = threat_score(verdict, context)
        level = level_for_score(score)
        load = _window_load(win, scenario.benign_rate)
        if pipe.tables is not None:
            indicators = compose_indicators(pipe.schema, {
                "threat": score,
                "load": load,
                "attack_kind": verdict.probabilities,
                "recent_action": recent,
            })
            state_key = encode_state(indicators, pipe.schema)
            action_id = select_action(pipe.tables, state_key, epsilon=0.0)
        else:
            action_id = pipe.config.fixed_action
        policy_ms = (time.perf_counter() - t0) * 1e3

        defense, execution_ms = apply_action(defense, action_id, pipe.catalog)
        action = get_action(pipe.catalog, action_id)
        recent = action.tier_norm()

        kind = win.label or "benign"
        intensity = truth_intensity(scenario.attacks, win.start, win.end, kind) \
            if kind != "benign" else 0.0
        outcome = enforce_window(action, kind, intensity, load, pipe.matrix,
                                 pipe.collateral)
        latency = LatencyBreakdown.from_parts(detect_ms[i], policy_ms,
                                              execution_ms)
        events.append(PipelineEvent(
            window_id=i,
            truth=kind,
            predicted=LABELS[verdict.predicted],
            confident=verdict.confident,
            max_probability=verdict.max_probability,
            threat_score=score,
            threat_level=level.level,
            action_id=action_id,
            outcome=outcome.verdict,
            attack_damage=outcome.attack_damage,
            collateral_damage=outcome.collateral_damage,
            latency=latency,
            started_at=started,
            finished_at=time.time(),
        ))
    return events


# ---------------------------------------------------------------------------
# metrics


def metrics_from_events(events, classes=LABELS) -> DetectionMetrics:
    """Recount the confusion matrix and rates from an event log."""
    if not events:
        raise InputError("event log is empty")
    k = len(classes)
    index = {name: i for i, name in enumerate(classes)}
    confusion = np.zeros((k, k), dtype=np.int64)
    n_confident = 0
    n_benign = 0
    false_alarms = 0
    for ev in events:
        truth = index[ev.truth]
        pred = index[ev.predicted]
        if ev.confident:
            confusion[truth, pred] += 1
            n_confident += 1
        if truth == 0:
            n_benign += 1
            if ev.confident and pred != 0:
                false_alarms += 1
    precision, recall, f1 = confusion_metrics(confusion)
    return DetectionMetrics(
        classes=tuple(classes),
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        support=confusion.sum(axis=1),
        accuracy=float(np.trace(confusion) / n_confident) if n_confident else 0.0,
        false_positive_rate=false_alarms / n_benign if n_benign else 0.0,
        unknown_rate=1.0 - n_confident / len(events),
        total=len(events),
    )


def _attack_burst_windows(scenario: ScenarioConfig) -> list[tuple[int, int, str]]:
    """(first window id, last window id, kind) per configured burst."""
    w = scenario.window_ms
    out = []
    for spec in scenario.attacks:
        first = spec.start // w
        last = (spec.end - 1) // w
        out.append((first, last, spec.kind))
    return out


def _warning_latency(scenario: ScenarioConfig, events) -> dict:
    """Windows from each burst's onset to its first confident attack verdict."""
    lags = []
    detected = 0
    bursts = _attack_burst_windows(scenario)
    for first, last, _ in bursts:
        lag = None
        for i in range(first, min(last + 1, len(events))):
            ev = events[i]
            if ev.confident and ev.predicted != "benign":
                lag = i - first
                break
        if lag is not None:
            detected += 1
            lags.append(lag)
    return {
        "bursts_total": len(bursts),
        "bursts_detected": detected,
        "mean_windows": float(np.mean(lags)) if lags else None,
        "max_windows": int(max(lags)) if lags else None,
    }


def _unknown_attack_detection_rate(events) -> float:
    """Share of attack windows not confidently waved through as benign."""
    attacks = [ev for ev in events if ev.truth != "benign"]
    if not attacks:
        return 1.0
    missed = sum(1 for ev in attacks if ev.confident and ev.predicted == "benign")
    return 1.0 - missed / len(attacks)


@dataclass(frozen=True)
class SimulationReport:
    """Scored run. Everything outside ``timing`` is deterministic."""

    config: dict
    detection: DetectionMetrics
    unknown_attack_detection_rate: float
    threat_distribution: dict  # band -> fraction
    interceptions: dict  # outcome verdict -> count
    damage: dict  # attack / collateral / total
    warning_latency: dict
    timing: dict  # latency percentiles, component shares, availability
    convergence: str | None  # path of the training curve, when provided

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "detection": self.detection.to_dict(),
            "unknown_attack_detection_rate": self.unknown_attack_detection_rate,
            "threat_distribution": self.threat_distribution,
            "interceptions": self.interceptions,
            "damage": self.damage,
            "warning_latency": self.warning_latency,
            "timing": self.timing,
            "convergence": self.convergence,
        }


def build_report(config: SimConfig, events) -> SimulationReport:
    """Score an event log against its scenario's ground truth."""
    scenario = config.resolved_scenario()
    detection = metrics_from_events(events)
    dist = summarize_threats([level_for_score(ev.threat_score) for ev in events])
    distribution = dict(dist.fractions)
    interceptions = {name: 0 for name in ("blocked", "mitigated", "passed", "none")}
    for ev in events:
        interceptions[ev.outcome] += 1
    attack_damage = float(sum(ev.attack_damage for ev in events))
    collateral = float(sum(ev.collateral_damage for ev in events))

    totals = [ev.latency.total_ms for ev in events]
    p50, p95, p999 = compute_percentiles(totals, (0.50, 0.95, 0.999))
    stage_sums = {
        "detection": sum(ev.latency.detection_ms for ev in events),
        "policy": sum(ev.latency.policy_ms for ev in events),
        "execution": sum(ev.latency.execution_ms for ev in events),
    }
    grand = sum(stage_sums.values())
    shares = {k: (v / grand if grand > 0 else 0.0) for k, v in stage_sums.items()}
    on_time = sum(1 for t in totals if t <= config.deadline_ms)

    return SimulationReport(
        config=config.to_dict(),
        detection=detection,
        unknown_attack_detection_rate=_unknown_attack_detection_rate(events),
        threat_distribution=distribution,
        interceptions=interceptions,
        damage={"attack": attack_damage, "collateral": collateral,
                "total": attack_damage + collateral},
        warning_latency=_warning_latency(scenario, events),
        timing={
            "latency_ms": {"p50": p50, "p95": p95, "p99_9": p999},
            "component_shares": shares,
            "availability": on_time / len(events),
            "deadline_ms": config.deadline_ms,
        },
        convergence=config.convergence,
    )


def run_simulation(config: SimConfig) -> tuple[SimulationReport, list[PipelineEvent]]:
    """Generate the scenario's traffic and run every window through the loop."""
    pipe = _Pipeline(config)
    scenario = config.resolved_scenario()
    stream = generate_stream(scenario)
    verdicts, detect_ms, normed = _run_detection(pipe, stream.windows,
                                                 config.threshold)
    events = _respond(pipe, scenario, stream.windows, verdicts, detect_ms,
                      normed)
    return build_report(config, events), events


# ---------------------------------------------------------------------------
# fixed-action evaluation (no detector in the loop)


def window_truths(scenario: ScenarioConfig, windows) -> list[tuple[str, float, float]]:
    """(kind, intensity, load) per window, straight from ground truth."""
    out = []
    for win in windows:
        kind = win.label or "benign"
        intensity = truth_intensity(scenario.attacks, win.start, win.end, kind) \
            if kind != "benign" else 0.0
        out.append((kind, intensity, _window_load(win, scenario.benign_rate)))
    return out


def fixed_action_damage(truths, action, matrix=None,
                        collateral: CollateralModel | None = None) -> float:
    """Total damage if one action were enforced on every window."""
    matrix = matrix if matrix is not None else default_matrix()
    collateral = collateral if collateral is not None else CollateralModel()
    total = 0.0
    for kind, intensity, load in truths:
        out = enforce_window(action, kind, intensity, load, matrix, collateral)
        total += out.total_damage
    return total


# ---------------------------------------------------------------------------
# report files


def _canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise FilesystemError(f"cannot write {path}: {exc}") from exc


def write_events(path: str, events) -> None:
    """One JSON object per line, in window order."""
    lines = [json.dumps(ev.to_dict(), sort_keys=True) for ev in events]
    _write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_events(path: str) -> list[PipelineEvent]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw_lines = [line for line in fh.read().splitlines() if line.strip()]
    except OSError as exc:
        raise InputError(f"cannot read event log: {exc}") from exc
    events = []
    for line in raw_lines:
        try:
            events.append(PipelineEvent.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise InputError(f"event log line is not valid JSON: {exc}") from exc
    return events


def emit_report(report: SimulationReport, events, out_dir: str,
                fmt: str = "json") -> list[str]:
    """Write the report under ``out_dir``; returns the paths written.

    "json" emits metrics.json; "csv" emits the per-class, latency-share,
    threat-distribution, and convergence tables. The event log is written
    either way: it is the record everything else recomputes from.
    """
    if fmt not in ("json", "csv"):
        raise ConfigError(f"unknown report format {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise FilesystemError(f"cannot create output dir {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise FilesystemError(f"output dir is not writable: {out_dir}")

    written = []

    def emit(name: str, text: str) -> None:
        path = os.path.join(out_dir, name)
        _write(path, text)
        written.append(path)

    write_events(os.path.join(out_dir, "events.jsonl"), events)
    written.append(os.path.join(out_dir, "events.jsonl"))

    if fmt == "json":
        emit("metrics.json", _canonical_json(report.to_dict()))
        return written

    det = report.detection
    rows = ["class,precision,recall,f1,support"]
    for i, name in enumerate(det.classes):
        rows.append(f"{name},{float(det.precision[i])!r},"
                    f"{float(det.recall[i])!r},{float(det.f1[i])!r},"
                    f"{int(det.support[i])}")
    emit("per_class_metrics.csv", "\n".join(rows) + "\n")

    shares = report.timing["component_shares"]
    rows = ["component,share"]
    for name in ("detection", "policy", "execution"):
        rows.append(f"{name},{float(shares[name])!r}")
    emit("latency_breakdown.csv", "\n".join(rows) + "\n")

    rows = ["band,fraction"]
    for band, frac in report.threat_distribution.items():
        rows.append(f"{band},{float(frac)!r}")
    emit("threat_distribution.csv", "\n".join(rows) + "\n")

    if report.convergence and os.path.exists(report.convergence):
        with open(report.convergence, encoding="utf-8") as fh:
            emit("convergence.csv", fh.read())
    else:
        emit("convergence.csv", "episode,mean_reward,moving_avg\n")
    return written


# ---------------------------------------------------------------------------
# report comparison


_POINT_LEAVES = ("accuracy", "precision", "recall", "f1", "availability",
                 "fraction", "share")
_POINT_SUFFIXES = ("_rate", "_ratio")
_POINT_PARENTS = ("threat_distribution", "component_shares")


def _delta_mode(path: tuple[str, ...]) -> str:
    leaf = path[-1]
    if leaf in _POINT_LEAVES or leaf.endswith(_POINT_SUFFIXES):
        return "points"
    if any(parent in path[:-1] for parent in _POINT_PARENTS):
        return "points"
    return "percent"


def _numeric_leaves(doc, prefix=()):
    """Paths of every numeric-or-null scalar; lists and strings are skipped.

    Nulls count as present so that an indicator one run could not measure
    (say, warning latency with zero bursts detected) reads as an
    incomparable value rather than a schema mismatch.
    """
    out = {}
    if isinstance(doc, dict):
        for key, value in doc.items():
            out.update(_numeric_leaves(value, prefix + (str(key),)))
    elif isinstance(doc, bool):
        pass
    elif isinstance(doc, (int, float)):
        out[prefix] = float(doc)
    elif doc is None:
        out[prefix] = None
    return out


@dataclass(frozen=True)
class ComparisonRow:
    """One indicator's movement from baseline to candidate."""

    indicator: str
    baseline: float | None
    candidate: float | None
    mode: str  # "points": percentage-point delta; "percent": relative change
    delta: float | None

    def to_dict(self) -> dict:
        return {"indicator": self.indicator, "baseline": self.baseline,
                "candidate": self.candidate, "mode": self.mode,
                "delta": self.delta}


def compare_reports(baseline: dict, candidate: dict) -> list[ComparisonRow]:
    """Indicator-by-indicator deltas between two report documents.

    Fraction-like indicators move in percentage points, rounded to two
    decimals; scale indicators (damage, latency, counts) move in relative
    percent, rounded to the nearest integer. Both documents must expose the
    same numeric fields.
    """
    if hasattr(baseline, "to_dict"):
        baseline = baseline.to_dict()
    if hasattr(candidate, "to_dict"):
        candidate = candidate.to_dict()
    if not isinstance(baseline, dict) or not isinstance(candidate, dict):
        raise ComparisonError("reports must be mapping documents")
    # inputs and file references are not outcomes
    echoes = ("config", "convergence")
    base = _numeric_leaves({k: v for k, v in baseline.items() if k not in echoes})
    cand = _numeric_leaves({k: v for k, v in candidate.items() if k not in echoes})
    if set(base) != set(cand):
        missing = set(base).symmetric_difference(cand)
        name = ".".join(sorted(missing)[0])
        raise ComparisonError(
            f"reports do not share a schema: {len(missing)} field(s) differ, "
            f"first is {name!r}")
    rows = []
    for path in sorted(base):
        b, c = base[path], cand[path]
        mode = _delta_mode(path)
        if b is None or c is None:
            delta = None  # one side could not measure this indicator
        elif mode == "points":
            delta = round((c - b) * 100.0, 2)
        elif b != 0.0:
            delta = float(round((c - b) / b * 100.0))
        else:
            delta = None  # relative change from zero is undefined
        rows.append(ComparisonRow(indicator=".".join(path), baseline=b,
                                  candidate=c, mode=mode, delta=delta))
    return rows


def comparison_to_dict(rows) -> dict:
    return {"indicators": [r.to_dict() for r in rows]}
