"""Attention fusion, threat leveling, and trend forecasting."""

import numpy as np
import pytest

from cloudguard.detector import ThreatVerdict
from cloudguard.errors import DimensionError, InputError
from cloudguard.features import build_layout
from cloudguard.perception import (
    BAND_EDGES,
    DEFAULT_SEVERITY,
    SOURCES,
    AttentionScorer,
    AttentionWeights,
    SourceEmbedding,
    ThreatLevel,
    assess_threat_level,
    build_embedders,
    build_scorer,
    context_from_fused,
    embed_window,
    fitted_values,
    forecast_trend,
    fuse,
    level_for_score,
    summarize_threats,
    threat_score,
)


def make_embeddings(vectors):
    return [SourceEmbedding(source=s, vector=v) for s, v in zip(SOURCES, vectors)]


def basis_scorer(dim, axis=0):
    v = np.zeros(dim)
    v[axis] = 1.0
    return AttentionScorer(score_vector=v)


def verdict_with(probs):
    probs = np.asarray(probs, dtype=np.float64)
    pred = int(np.argmax(probs))
    return ThreatVerdict(
        probabilities=probs,
        predicted=pred,
        max_probability=float(probs[pred]),
        confident=True,
    )


class TestEmbedders:
    def test_one_embedder_per_source_with_segment_widths(self):
        layout = build_layout(dim=428)
        embedders = build_embedders(layout)
        assert set(embedders) == set(SOURCES)
        assert embedders["traffic"].weights.shape == (200, 16)
        assert embedders["logs"].weights.shape == (128, 16)
        assert embedders["behavior"].weights.shape == (100, 16)

    def test_seeded_and_reproducible(self):
        layout = build_layout(dim=64)
        a = build_embedders(layout, fusion_dim=8, seed=7)
        b = build_embedders(layout, fusion_dim=8, seed=7)
        c = build_embedders(layout, fusion_dim=8, seed=8)
        for s in SOURCES:
            assert np.array_equal(a[s].weights, b[s].weights)
        assert not np.array_equal(a["traffic"].weights, c["traffic"].weights)

    def test_embed_window_is_linear_in_the_segment(self):
        layout = build_layout(dim=64)
        embedders = build_embedders(layout, fusion_dim=8)
        rng = np.random.default_rng(0)
        fv1 = rng.normal(size=64)
        fv2 = rng.normal(size=64)
        e1 = embed_window(fv1, layout, embedders)
        e2 = embed_window(fv2, layout, embedders)
        esum = embed_window(fv1 + fv2, layout, embedders)
        for a, b, s in zip(e1, e2, esum):
            np.testing.assert_allclose(a.vector + b.vector, s.vector, atol=1e-12)

    def test_embed_window_rejects_wrong_width(self):
        layout = build_layout(dim=64)
        embedders = build_embedders(layout)
        with pytest.raises(DimensionError):
            embed_window(np.zeros(63), layout, embedders)


class TestFusion:
    def test_hand_checked_score_softmax(self):
        # scores come out as [ln 2, 0, 0], so weights are [1/2, 1/4, 1/4]
        dim = 4
        vecs = [np.zeros(dim) for _ in range(3)]
        vecs[0][0] = np.log(2.0)
        fused, weights = fuse(make_embeddings(vecs), basis_scorer(dim))
        np.testing.assert_allclose(weights.values, [0.5, 0.25, 0.25], atol=1e-12)
        np.testing.assert_allclose(fused, 0.5 * vecs[0], atol=1e-12)

    def test_identical_sources_fuse_uniformly(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=16)
        scorer = build_scorer(fusion_dim=16)
        fused, weights = fuse(make_embeddings([v, v, v]), scorer)
        np.testing.assert_allclose(weights.values, [1 / 3] * 3, atol=1e-12)
        np.testing.assert_allclose(fused, v, atol=1e-12)

    def test_weights_sum_to_one_on_random_inputs(self):
        rng = np.random.default_rng(11)
        scorer = build_scorer(fusion_dim=8)
        for _ in range(250):
            vecs = [rng.normal(size=8) * rng.uniform(0.1, 50) for _ in range(3)]
            fused, weights = fuse(make_embeddings(vecs), scorer)
            assert abs(weights.values.sum() - 1.0) <= 1e-9
            assert (weights.values >= 0).all()
            assert np.isfinite(fused).all()

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        vecs = [rng.normal(size=8) for _ in range(3)]
        scorer = build_scorer(fusion_dim=8)
        base = make_embeddings(vecs)
        fused_a, w_a = fuse(base, scorer)
        order = [2, 0, 1]
        fused_b, w_b = fuse([base[i] for i in order], scorer)
        np.testing.assert_allclose(fused_a, fused_b, atol=1e-12)
        for spot, i in enumerate(order):
            assert w_b.sources[spot] == base[i].source
            assert w_b.values[spot] == pytest.approx(w_a.values[i], abs=1e-12)

    def test_dominant_score_dominates_weight(self):
        dim = 4
        vecs = [np.zeros(dim) for _ in range(3)]
        vecs[2][0] = 40.0
        _, weights = fuse(make_embeddings(vecs), basis_scorer(dim))
        assert weights.values[2] > 0.999
        assert weights.by_source()["behavior"] == pytest.approx(weights.values[2])

    def test_missing_source_rejected(self):
        vecs = [np.zeros(4)] * 3
        emb = make_embeddings(vecs)
        emb[1] = SourceEmbedding(source="traffic", vector=np.zeros(4))
        with pytest.raises(InputError):
            fuse(emb, basis_scorer(4))
        with pytest.raises(InputError):
            fuse(emb[:2], basis_scorer(4))

    def test_mismatched_dimensions_rejected(self):
        emb = make_embeddings([np.zeros(4), np.zeros(5), np.zeros(4)])
        with pytest.raises(DimensionError):
            fuse(emb, basis_scorer(4))

    def test_weights_object_validates(self):
        with pytest.raises(InputError):
            AttentionWeights(sources=SOURCES, values=np.array([0.5, 0.5, 0.5]))
        with pytest.raises(InputError):
            AttentionWeights(sources=SOURCES, values=np.array([1.2, -0.1, -0.1]))


class TestThreatLevels:
    def test_band_edges_are_half_open(self):
        cases = [
            (0.0, 1), (0.19, 1),
            (0.2, 2), (0.39, 2),
            (0.4, 3), (0.59, 3),
            (0.6, 4), (0.79, 4),
            (0.8, 5), (0.95, 5), (1.0, 5),
        ]
        for score, expected in cases:
            assert level_for_score(score).level == expected, score

    def test_levels_monotone_in_score(self):
        scores = np.sort(np.random.default_rng(2).uniform(0, 1, size=200))
        levels = [level_for_score(s).level for s in scores]
        assert all(b >= a for a, b in zip(levels, levels[1:]))

    def test_band_grouping(self):
        assert ThreatLevel(1).band == "low"
        assert ThreatLevel(2).band == "medium"
        assert ThreatLevel(3).band == "medium"
        assert ThreatLevel(4).band == "high"
        assert ThreatLevel(5).band == "high"
        with pytest.raises(InputError):
            ThreatLevel(0)
        with pytest.raises(InputError):
            ThreatLevel(6)

    def test_threat_score_is_the_three_way_product(self):
        v = verdict_with([0.05, 0.9, 0.02, 0.01, 0.01, 0.01])
        assert threat_score(v, 0.5) == pytest.approx(0.9 * 1.0 * 0.5)
        v2 = verdict_with([0.9, 0.02, 0.02, 0.02, 0.02, 0.02])
        assert threat_score(v2, 1.0) == pytest.approx(0.9 * DEFAULT_SEVERITY["benign"])

    def test_assessment_monotone_in_probability(self):
        context = 0.8
        last = 0
        for p in (0.3, 0.5, 0.7, 0.9, 0.99):
            rest = (1 - p) / 5
            v = verdict_with([rest, p, rest, rest, rest, rest])
            level = assess_threat_level(v, context).level
            assert level >= last
            last = level

    def test_context_factor_validated(self):
        v = verdict_with([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        with pytest.raises(InputError):
            threat_score(v, 1.5)
        with pytest.raises(InputError):
            threat_score(v, -0.1)

    def test_unknown_class_in_severity_table(self):
        v = verdict_with([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        with pytest.raises(InputError):
            threat_score(v, 0.5, severity={"benign": 0.1})

    def test_context_from_fused(self):
        assert context_from_fused(np.zeros(8)) == pytest.approx(0.5)
        big = context_from_fused(np.full(8, 100.0))
        assert 0.99 < big <= 1.0
        a = context_from_fused(np.full(8, 0.5))
        b = context_from_fused(np.full(8, 1.5))
        assert b > a

    def test_band_edge_constants(self):
        assert BAND_EDGES == (0.2, 0.4, 0.6, 0.8)


class TestSummary:
    def test_exact_fractions(self):
        levels = (
            [ThreatLevel(1)] * 123 + [ThreatLevel(3)] * 587 + [ThreatLevel(5)] * 290
        )
        dist = summarize_threats(levels)
        assert dist.fractions["low"] == 123 / 1000
        assert dist.fractions["medium"] == 587 / 1000
        assert dist.fractions["high"] == 290 / 1000

    def test_fractions_sum_to_one(self):
        rng = np.random.default_rng(9)
        levels = [ThreatLevel(int(v)) for v in rng.integers(1, 6, size=777)]
        dist = summarize_threats(levels)
        assert sum(dist.fractions.values()) == pytest.approx(1.0, abs=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(InputError):
            summarize_threats([])

    def test_single_band(self):
        dist = summarize_threats([ThreatLevel(4), ThreatLevel(5)])
        assert dist.fractions == {"low": 0.0, "medium": 0.0, "high": 1.0}


class TestForecast:
    def test_constant_series_forecasts_the_constant(self):
        fc = forecast_trend([7.0] * 10, horizon=5)
        np.testing.assert_allclose(fc.predictions, 7.0, atol=1e-9)
        assert fc.slope == pytest.approx(0.0, abs=1e-12)

    def test_linear_series_continues_exactly(self):
        y = [3.0 + 2.0 * t for t in range(12)]
        fc = forecast_trend(y, horizon=4)
        expected = [3.0 + 2.0 * t for t in range(12, 16)]
        np.testing.assert_allclose(fc.predictions, expected, atol=1e-9)
        assert fc.slope == pytest.approx(2.0, abs=1e-9)
        assert fc.intercept == pytest.approx(3.0, abs=1e-9)

    def test_coefficients_match_normal_equations(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            n = int(rng.integers(4, 60))
            y = rng.normal(size=n) * rng.uniform(0.5, 20)
            t = np.arange(n, dtype=np.float64)
            a_mat = np.stack([np.ones(n), t], axis=1)
            beta = np.linalg.solve(a_mat.T @ a_mat, a_mat.T @ y)
            fc = forecast_trend(y, horizon=3)
            assert fc.intercept == pytest.approx(beta[0], abs=1e-9)
            assert fc.slope == pytest.approx(beta[1], abs=1e-9)

    def test_seasonal_pattern_recovered(self):
        # zero-mean period-4 pattern chosen orthogonal to the time index
        pattern = np.array([1.0, -1.0, -1.0, 1.0])
        t = np.arange(8, dtype=np.float64)
        y = 5.0 + 0.5 * t + pattern[np.arange(8) % 4]
        fc = forecast_trend(y, horizon=4, period=4)
        assert fc.slope == pytest.approx(0.5, abs=1e-9)
        np.testing.assert_allclose(fc.seasonal, pattern, atol=1e-9)
        expected = 5.0 + 0.5 * np.arange(8, 12) + pattern[np.arange(8, 12) % 4]
        np.testing.assert_allclose(fc.predictions, expected, atol=1e-9)

    def test_projections_clamped_at_zero(self):
        y = [10.0 - 3.0 * t for t in range(8)]
        fc = forecast_trend(y, horizon=6)
        assert (fc.predictions >= 0).all()
        assert fc.predictions[-1] == 0.0

    def test_zero_residual_series_has_zero_in_sample_error(self):
        y = np.array([1.0 + 0.25 * t for t in range(10)])
        fc = forecast_trend(y, horizon=2)
        np.testing.assert_allclose(fitted_values(fc, 10), y, atol=1e-9)

    def test_input_validation(self):
        with pytest.raises(InputError):
            forecast_trend([1.0, 2.0, 3.0], horizon=2)
        with pytest.raises(InputError):
            forecast_trend([1.0] * 8, horizon=0)
        with pytest.raises(InputError):
            forecast_trend([1.0] * 8, horizon=2, period=5)
        with pytest.raises(InputError):
            forecast_trend([1.0, np.nan, 2.0, 3.0, 4.0], horizon=1)

    def test_dict_round_trip_fields(self):
        fc = forecast_trend([2.0, 4.0, 5.0, 9.0, 11.0, 12.0], horizon=3, period=2)
        d = fc.to_dict()
        assert d["horizon"] == 3
        assert len(d["predictions"]) == 3
        assert len(d["seasonal"]) == 2
        assert d["period"] == 2
