"""Multi-source threat perception: attention fusion, leveling, forecasting.

Three sources (traffic, logs, behavior) are embedded from slices of the
feature vector by seeded linear maps, then fused by dot-product attention:
each source is scored against a learned vector, scores softmax into weights,
and the fused context is the weighted sum. The temporal segment carries the
per-bin log activity counts, so it stands in as the log source's input.

A verdict plus fused context maps to a five-level threat score; levels group
into bands (1 low, 2-3 medium, 4-5 high). Trend forecasting fits an ordinary
least-squares line plus per-phase seasonal mean residuals.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .features import FeatureLayout
from .nn.layers import softmax
from .telemetry import LABELS

SOURCES = ("traffic", "logs", "behavior")

# which layout segment feeds each source embedder
SOURCE_SEGMENTS = {"traffic": "traffic", "logs": "time_series", "behavior": "behavior"}

# relative severity of each predicted class when scoring threats
DEFAULT_SEVERITY = {
    "benign": 0.05,
    "ddos": 1.0,
    "sql_injection": 0.95,
    "port_scan": 0.7,
    "brute_force": 0.8,
    "data_exfiltration": 1.0,
}

# level k covers [edge_{k-1}, edge_k); scores at an edge take the upper level
BAND_EDGES = (0.2, 0.4, 0.6, 0.8)

BANDS = ("low", "medium", "high")

DEFAULT_FUSION_DIM = 16
DEFAULT_PERCEPTION_SEED = 7


@dataclass(frozen=True)
class SourceEmbedding:
    """One source's fixed-width embedding."""

    source: str
    vector: np.ndarray

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InputError(f"unknown source {self.source!r}")
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float64))
        if not np.isfinite(self.vector).all():
            raise InputError(f"{self.source} embedding contains non-finite values")


@dataclass(frozen=True)
class AttentionWeights:
    """Per-source fusion weights, in the order the sources were given."""

    sources: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if (self.values < 0).any() or abs(self.values.sum() - 1.0) > 1e-9:
            raise InputError("attention weights must be nonnegative and sum to 1")

    def by_source(self) -> dict[str, float]:
        return {s: float(v) for s, v in zip(self.sources, self.values)}


class SourceEmbedder:
    """Seeded linear map from one layout segment to the fusion space."""

    def __init__(self, in_width: int, fusion_dim: int, rng: np.random.Generator):
        scale = 1.0 / np.sqrt(in_width)
        self.weights = rng.uniform(-scale, scale, size=(in_width, fusion_dim))

    def embed(self, segment_values: np.ndarray) -> np.ndarray:
        segment_values = np.asarray(segment_values, dtype=np.float64)
        if segment_values.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"segment width {segment_values.shape} does not match embedder "
                f"{self.weights.shape[0]}"
            )
        return segment_values @ self.weights


@dataclass(frozen=True)
class AttentionScorer:
    """Dot-product relevance scorer over the fusion space."""

    score_vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "score_vector",
                           np.asarray(self.score_vector, dtype=np.float64))


def build_embedders(layout: FeatureLayout, fusion_dim: int = DEFAULT_FUSION_DIM,
                    seed: int = DEFAULT_PERCEPTION_SEED) -> dict[str, SourceEmbedder]:
    """One embedder per source, drawn from a single seeded stream."""
    rng = np.random.default_rng(seed)
    out = {}
    for source in SOURCES:
        start, end = layout.segments[SOURCE_SEGMENTS[source]]
        out[source] = SourceEmbedder(end - start, fusion_dim, rng)
    return out


def build_scorer(fusion_dim: int = DEFAULT_FUSION_DIM,
                 seed: int = DEFAULT_PERCEPTION_SEED) -> AttentionScorer:
    rng = np.random.default_rng(seed + 1)  # distinct stream from the embedders
    return AttentionScorer(score_vector=rng.normal(size=fusion_dim) / np.sqrt(fusion_dim))


def embed_window(fv: np.ndarray, layout: FeatureLayout,
                 embedders: dict[str, SourceEmbedder]) -> list[SourceEmbedding]:
    """Slice a feature vector into its three source embeddings."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.shape != (layout.dim,):
        raise DimensionError(f"vector shape {fv.shape} does not match layout {layout.dim}")
    out = []
    for source in SOURCES:
        seg = fv[layout.segment_slice(SOURCE_SEGMENTS[source])]
        out.append(SourceEmbedding(source=source, vector=embedders[source].embed(seg)))
    return out


def fuse(embeddings: list[SourceEmbedding],
         scorer: AttentionScorer) -> tuple[np.ndarray, AttentionWeights]:
    """Attention-weighted combination of the three source embeddings.

    weight_i = softmax_i(score_vector . e_i); fused = sum_i weight_i * e_i.
    The weights follow the order the embeddings were passed in.
    """
    present = [e.source for e in embeddings]
    if sorted(present) != sorted(SOURCES):
        missing = set(SOURCES) - set(present)
        raise InputError(
            f"fusion needs each source exactly once; missing or duplicated: "
            f"{sorted(missing) if missing else present}"
        )
    dims = {e.vector.shape for e in embeddings}
    if len(dims) != 1:
        raise DimensionError(f"embedding dimensions disagree: {sorted(dims)}")
    if embeddings[0].vector.shape != scorer.score_vector.shape:
        raise DimensionError("scorer dimension does not match embeddings")
    scores = np.array([float(scorer.score_vector @ e.vector) for e in embeddings])
    weights = softmax(scores)
    fused = np.zeros_like(embeddings[0].vector)
    for w, e in zip(weights, embeddings):
        fused += w * e.vector
    return fused, AttentionWeights(sources=tuple(present), values=weights)


@dataclass(frozen=True)
class ThreatLevel:
    """Integer severity 1-5 with its derived band."""

    level: int

    def __post_init__(self):
        if not 1 <= self.level <= 5:
            raise InputError(f"threat level must be 1..5, got {self.level}")

    @property
    def band(self) -> str:
        if self.level == 1:
            return "low"
        if self.level <= 3:
            return "medium"
        return "high"


def context_from_fused(fused: np.ndarray) -> float:
    """Squash a fused embedding into a [0, 1] context factor."""
    return float(0.5 + 0.5 * np.tanh(np.abs(np.asarray(fused)).mean()))


def threat_score(verdict, context_factor: float,
                 severity: dict[str, float] | None = None,
                 classes: tuple[str, ...] = LABELS) -> float:
    """Raw threat score: max probability x class severity x context factor."""
    if not 0.0 <= context_factor <= 1.0:
        raise InputError(f"context factor must be in [0, 1], got {context_factor}")
    severity = DEFAULT_SEVERITY if severity is None else severity
    name = classes[verdict.predicted]
    try:
        sev = severity[name]
    except KeyError:
        raise InputError(f"severity table has no entry for class {name!r}") from None
    return float(verdict.max_probability * sev * context_factor)


def level_for_score(score: float) -> ThreatLevel:
    """Map a score to a level via the half-open band edges."""
    level = 1 + int(np.searchsorted(BAND_EDGES, score, side="right"))
    return ThreatLevel(level=level)


def assess_threat_level(verdict, fused_context: float,
                        severity: dict[str, float] | None = None,
                        classes: tuple[str, ...] = LABELS) -> ThreatLevel:
    """Five-level assessment of one verdict in its fused context."""
    return level_for_score(threat_score(verdict, fused_context, severity, classes))


@dataclass(frozen=True)
class ThreatDistribution:
    """Fraction of assessed events per band."""

    fractions: dict[str, float]

    def __post_init__(self):
        if set(self.fractions) != set(BANDS):
            raise InputError(f"distribution must cover bands {BANDS}")
        total = sum(self.fractions.values())
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"band fractions sum to {total}, expected 1")


def summarize_threats(levels: list[ThreatLevel]) -> ThreatDistribution:
    """Band fractions over a non-empty list of assessments."""
    if not levels:
        raise InputError("cannot summarize an empty list of threat levels")
    counts = {band: 0 for band in BANDS}
    for tl in levels:
        counts[tl.band] += 1
    total = len(levels)
    return ThreatDistribution(
        fractions={band: counts[band] / total for band in BANDS}
    )


@dataclass(frozen=True)
class TrendForecast:
    """OLS trend plus seasonal mean residuals, projected ``horizon`` steps."""

    horizon: int
    predictions: np.ndarray
    intercept: float
    slope: float
    seasonal: np.ndarray
    period: int

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "predictions": [float(v) for v in self.predictions],
            "intercept": self.intercept,
            "slope": self.slope,
            "seasonal": [float(v) for v in self.seasonal],
            "period": self.period,
        }


def forecast_trend(series, horizon: int, period: int = 1) -> TrendForecast:
    """Deterministic trend forecast of per-interval threat counts.

    Fits y = a + b t by least squares (closed-form normal equations), adds
    the mean residual of each seasonal phase (t mod period), and clamps
    projections at zero since threat rates cannot be negative.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 4:
        raise InputError("series must be one-dimensional with at least 4 points")
    if not np.isfinite(y).all():
        raise InputError("series contains non-finite values")
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    n = y.shape[0]
    if not 1 <= period <= n // 2:
        raise InputError(f"period must lie in [1, {n // 2}] for {n} points")
    t = np.arange(n, dtype=np.float64)
    t_mean = t.mean()
    y_mean = y.mean()
    var = float(((t - t_mean) ** 2).sum())
    slope = float(((t - t_mean) * (y - y_mean)).sum() / var)
    intercept = float(y_mean - slope * t_mean)
    residuals = y - (intercept + slope * t)
    seasonal = np.array([residuals[np.arange(n) % period == k].mean()
                         for k in range(period)])
    future = np.arange(n, n + horizon, dtype=np.float64)
    raw = intercept + slope * future + seasonal[(np.arange(n, n + horizon) % period)]
    return TrendForecast(
        horizon=horizon,
        predictions=np.maximum(raw, 0.0),
        intercept=intercept,
        slope=slope,
        seasonal=seasonal,
        period=period,
    )


def fitted_values(forecast: TrendForecast, n: int) -> np.ndarray:
    """In-sample fit of the model that produced ``forecast`` (unclamped)."""
    t = np.arange(n, dtype=np.float64)
    return forecast.intercept + forecast.slope * t \
        + forecast.seasonal[np.arange(n) % forecast.period]
