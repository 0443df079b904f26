"""
Attention fusion and threat levels
==================================

Fuse the three telemetry sources with attention weights, grade verdicts
into five threat levels, summarize a whole stream into band fractions,
and project the near-term trend.
"""

import numpy as np

from cloudguard.baseline import RuleBasedDetector, default_rules
from cloudguard.features import build_layout, extract_features, fit_normalizer, normalize
from cloudguard.perception import (
    build_embedders,
    build_scorer,
    context_from_fused,
    embed_window,
    forecast_trend,
    fuse,
    level_for_score,
    summarize_threats,
    threat_score,
)
from cloudguard.scenario import AttackSpec, ScenarioConfig, generate_stream
from cloudguard.telemetry import LABELS

# 1. a short stream with three very different bursts
config = ScenarioConfig(
    duration_ms=120000,
    benign_rate=60.0,
    seed=11,
    attacks=[
        AttackSpec(kind="ddos", intensity=0.9, start=15000, end=35000),
        AttackSpec(kind="port_scan", intensity=0.7, start=55000, end=70000),
        AttackSpec(kind="data_exfiltration", intensity=0.8, start=90000, end=110000),
    ],
)
stream = generate_stream(config)
layout = build_layout()
vectors = np.array([extract_features(w, layout) for w in stream.windows])
normed = normalize(vectors, fit_normalizer(vectors))

# 2. seeded embedders map each layout segment into one fusion space;
#    a dot-product scorer turns relevance into softmax weights
embedders = build_embedders(layout)
scorer = build_scorer()
print("attention weights per source (weights always sum to 1):")
for name, idx in (("benign", 5), ("ddos", 25), ("exfiltration", 100)):
    fused, weights = fuse(embed_window(normed[idx], layout, embedders), scorer)
    parts = ", ".join(f"{s} {v:.3f}" for s, v in weights.by_source().items())
    print(f"  window {idx:3d} ({name:12s}): {parts}")

# 3. verdict + fused context -> score -> one of five levels in three bands.
#    The rule engine supplies quick verdicts here; the neural detector
#    plugs into the same scoring path.
engine = RuleBasedDetector(default_rules(), layout)
print("\nwindow  truth              score  level  band")
levels = []
for i, win in enumerate(stream.windows):
    verdict = engine.classify(vectors[i])
    fused, _ = fuse(embed_window(normed[i], layout, embedders), scorer)
    score = threat_score(verdict, context_from_fused(fused))
    level = level_for_score(score)
    levels.append(level)
    if i in (5, 25, 60, 100):
        truth = win.label or "benign"
        print(f"{i:6d}  {truth:18s} {score:.3f}  {level.level:5d}  {level.band}")

# 4. the whole stream summarized as band fractions
dist = summarize_threats(levels)
print("\nthreat distribution over", len(levels), "windows:",
      {band: round(frac, 3) for band, frac in dist.fractions.items()})

# 5. count elevated windows per 10-window interval and project 3 ahead
elevated = np.array([lv.level >= 2 for lv in levels], dtype=float)
series = elevated.reshape(-1, 10).sum(axis=1)
trend = forecast_trend(series, horizon=3)
print(f"\nelevated-threat counts per interval: {series.astype(int).tolist()}")
print(f"trend slope {trend.slope:+.3f} per interval, "
      f"next three projected: {np.round(trend.predictions, 1).tolist()}")
