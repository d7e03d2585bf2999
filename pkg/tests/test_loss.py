import math

import numpy as np
import pytest

from scloss import (
    ConfigError,
    DegenerateGeometryError,
    SCLossConfig,
    SCLossError,
    SpatialCoherenceLoss,
    attention_map,
    bce_loss_map,
    combine_addon,
    image_loss,
    multiclass_image_loss,
    mutual_response,
    pairwise_regularizer,
    pixel_level_loss,
    pixel_loss,
    single_response,
)

from naive_reference import naive_image_loss, naive_multiclass_loss

EPS = 1e-7
# Interior uniform-0.5 case: ln2 / (-ln(1/4) + e^(-1/4)) per pair.
PAIR_VALUE = math.log(2.0) / (-math.log(0.25) + math.exp(-0.25))


def uniform_case(h=8, w=8, p=0.5):
    return np.full((h, w), p), np.ones((h, w), dtype=np.int64)


class TestSingleResponse:
    def test_bce_closed_form(self):
        assert single_response("bce", 0.5, 1) == pytest.approx(math.log(2.0))

    def test_mse_l1_closed_forms(self):
        assert single_response("mse", 0.5, 1) == 0.25
        assert single_response("l1", 0.5, 1) == 0.5

    def test_perfect_prediction_limit(self):
        assert single_response("bce", 1.0 - 1e-7, 1) == pytest.approx(1e-7, rel=1e-3)

    def test_rejects_unclamped(self):
        with pytest.raises(SCLossError):
            single_response("bce", 0.0, 1)

    def test_rejects_non_binary_label(self):
        with pytest.raises(SCLossError):
            single_response("bce", 0.5, 2)


class TestMutualResponse:
    def test_positive_pair(self):
        assert mutual_response(0.5, 0.5, 1) == pytest.approx(-math.log(0.25))

    def test_negative_pair(self):
        assert mutual_response(0.9, 0.9, 0) == pytest.approx(-math.log(0.19))

    def test_perfect_co_prediction_limit(self):
        assert mutual_response(1 - 1e-7, 1 - 1e-7, 1) == pytest.approx(2e-7, rel=1e-3)

    def test_symmetric(self):
        assert mutual_response(0.3, 0.8, 1) == mutual_response(0.8, 0.3, 1)
        assert mutual_response(0.3, 0.8, 0) == mutual_response(0.8, 0.3, 0)


class TestPairwiseRegularizer:
    def test_gaussian_near_one(self):
        value = pairwise_regularizer("gaussian", 1 - 1e-7, 1 - 1e-7)
        assert value == pytest.approx(math.exp(-1.0), rel=1e-6)

    def test_distance_identity(self):
        for p in (0.1, 0.5, 0.9):
            assert pairwise_regularizer("distance", p, p) == 1.0

    def test_distance_closed_form(self):
        assert pairwise_regularizer("distance", 0.2, 0.7) == pytest.approx(
            math.exp(0.25)
        )

    @pytest.mark.parametrize("kind", ["gaussian", "distance", "constant"])
    def test_symmetric(self, kind):
        assert pairwise_regularizer(kind, 0.2, 0.9) == pairwise_regularizer(
            kind, 0.9, 0.2
        )


class TestPixelLoss:
    def test_interior_uniform_level(self):
        pred, labels = uniform_case()
        value = pixel_level_loss((4, 4), 1, pred, labels)
        assert value == pytest.approx(PAIR_VALUE, abs=1e-12)

    def test_corner_same_value(self):
        pred, labels = uniform_case(3, 3)
        value = pixel_level_loss((0, 0), 1, pred, labels, SCLossConfig(k_max=1))
        assert value == pytest.approx(PAIR_VALUE, abs=1e-12)

    def test_perfect_prediction_small(self):
        pred = np.ones((5, 5))
        labels = np.ones((5, 5), dtype=np.int64)
        assert pixel_level_loss((2, 2), 1, pred, labels) < 1e-6

    def test_default_aggregation(self):
        pred, labels = uniform_case()
        assert pixel_loss((4, 4), pred, labels) == pytest.approx(
            1.5 * PAIR_VALUE, abs=1e-12
        )

    def test_k1_equals_level1(self):
        pred, labels = uniform_case()
        cfg = SCLossConfig(k_max=1)
        assert pixel_loss((4, 4), pred, labels, cfg) == pixel_level_loss(
            (4, 4), 1, pred, labels, cfg
        )

    def test_zero_weight_annihilates_level(self):
        pred, labels = uniform_case()
        k2 = pixel_loss((4, 4), pred, labels, SCLossConfig(level_weights=(1.0, 0.0)))
        k1 = pixel_loss((4, 4), pred, labels, SCLossConfig(k_max=1))
        assert k2 == k1

    def test_degenerate_geometry(self):
        with pytest.raises(DegenerateGeometryError):
            pixel_level_loss((0, 0), 2, *uniform_case(2, 2))


class TestImageLoss:
    def test_uniform_total(self):
        pred, labels = uniform_case(6, 9)
        breakdown = image_loss(pred, labels)
        assert breakdown.total == pytest.approx(1.5 * PAIR_VALUE, abs=1e-9)
        assert breakdown.total == pytest.approx(0.4802196, abs=1e-6)

    def test_perfect_prediction(self):
        labels = np.zeros((8, 8), dtype=np.int64)
        labels[2:6, 2:6] = 1
        assert image_loss(labels.astype(float), labels).total < 1e-6

    def test_total_is_reduction_of_map(self):
        rng = np.random.default_rng(3)
        pred = rng.uniform(size=(12, 12))
        labels = (rng.uniform(size=(12, 12)) < 0.5).astype(np.int64)
        for reduction in ("mean", "sum"):
            b = image_loss(pred, labels, SCLossConfig(reduction=reduction))
            expected = b.loss_map.mean() if reduction == "mean" else b.loss_map.sum()
            assert b.total == pytest.approx(expected, rel=1e-12)
            assert b.total == pytest.approx(sum(b.per_level_totals), rel=1e-12)

    def test_reduction_consistency(self):
        rng = np.random.default_rng(4)
        pred = rng.uniform(size=(9, 9))
        labels = (rng.uniform(size=(9, 9)) < 0.5).astype(np.int64)
        mean_total = image_loss(pred, labels, SCLossConfig(reduction="mean")).total
        sum_total = image_loss(pred, labels, SCLossConfig(reduction="sum")).total
        assert sum_total == pytest.approx(mean_total * 81, rel=1e-12)

    def test_matches_pixel_loss(self):
        rng = np.random.default_rng(5)
        pred = rng.uniform(size=(6, 6))
        labels = (rng.uniform(size=(6, 6)) < 0.5).astype(np.int64)
        breakdown = image_loss(pred, labels)
        for r in range(6):
            for c in range(6):
                assert breakdown.loss_map[r, c] == pytest.approx(
                    pixel_loss((r, c), pred, labels), rel=1e-12
                )

    @pytest.mark.parametrize("single", ["bce", "mse", "l1"])
    @pytest.mark.parametrize("reg", ["gaussian", "distance", "constant"])
    def test_oracle_equivalence(self, single, reg):
        rng = np.random.default_rng(sum(map(ord, single + reg)))
        pred = rng.uniform(size=(16, 16))
        labels = (rng.uniform(size=(16, 16)) < 0.5).astype(np.int64)
        cfg = SCLossConfig(single_response=single, regularizer=reg)
        breakdown = image_loss(pred, labels, cfg)
        total, loss_map, attn = naive_image_loss(
            pred.tolist(), labels.tolist(), single=single, reg=reg
        )
        assert breakdown.total == pytest.approx(total, rel=1e-12)
        assert np.allclose(breakdown.loss_map, loss_map, rtol=1e-12, atol=0)
        assert np.allclose(breakdown.attention_map, attn, rtol=1e-12, atol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(SCLossError):
            image_loss(np.full((4, 4), 0.5), np.ones((4, 5), dtype=np.int64))

    def test_geometric_equivariance(self):
        rng = np.random.default_rng(6)
        pred = rng.uniform(size=(10, 7))
        labels = (rng.uniform(size=(10, 7)) < 0.5).astype(np.int64)
        base = image_loss(pred, labels)
        for op in (np.fliplr, np.flipud, np.rot90):
            other = image_loss(op(pred).copy(), op(labels).copy())
            assert other.total == pytest.approx(base.total, rel=1e-12)
            assert np.allclose(other.loss_map, op(base.loss_map), rtol=1e-12)
            assert np.allclose(other.attention_map, op(base.attention_map), rtol=1e-12)

    def test_uniform_translation_invariance(self):
        pred, labels = uniform_case(9, 9, 0.37)
        breakdown = image_loss(pred, labels)
        interior = breakdown.loss_map[2:-2, 2:-2]
        assert np.unique(interior).size == 1

    def test_positivity_fuzz(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            pred = rng.uniform(size=(6, 6))
            labels = (rng.uniform(size=(6, 6)) < 0.5).astype(np.int64)
            b = image_loss(pred, labels)
            assert np.all(b.loss_map >= 0)
            assert np.all(b.attention_map > 0)
            assert np.all(np.isfinite(b.loss_map))


class TestAttentionMap:
    def test_uniform_closed_form(self):
        pred, labels = uniform_case()
        att = attention_map(pred, labels)
        denom = -math.log(0.25) + math.exp(-0.25)
        assert att[4, 4] == pytest.approx(1.5 / denom, abs=1e-12)
        assert att[4, 4] == pytest.approx(0.6928101, abs=1e-6)

    def test_accurate_neighbor_weighs_more(self):
        # Denominator with a correct background neighbor vs a wrong one.
        good = mutual_response(0.9, 0.1, 0) + pairwise_regularizer(
            "gaussian", 0.9, 0.1
        )
        bad = mutual_response(0.9, 0.9, 0) + pairwise_regularizer(
            "gaussian", 0.9, 0.9
        )
        assert 1.0 / good == pytest.approx(0.9919, abs=1e-4)
        assert 1.0 / bad == pytest.approx(0.4749, abs=1e-4)
        assert 1.0 / good > 1.0 / bad

    def test_strictly_positive(self):
        rng = np.random.default_rng(8)
        pred = rng.uniform(size=(7, 7))
        labels = (rng.uniform(size=(7, 7)) < 0.5).astype(np.int64)
        assert np.all(attention_map(pred, labels) > 0)

    def test_same_class_weight_monotone_in_neighbor(self):
        # With m=1 the per-pair weight rises as the neighbor's probability does.
        alpha = 1.0
        p_i = 0.6
        grid_points = np.linspace(0.01, 0.99, 1000)
        weights = [
            1.0
            / (
                mutual_response(p_i, p_j, 1)
                + alpha * pairwise_regularizer("gaussian", p_i, p_j)
            )
            for p_j in grid_points
        ]
        assert all(b > a for a, b in zip(weights, weights[1:]))


class TestBceLossMap:
    def test_perfect(self):
        labels = np.zeros((6, 6), dtype=np.int64)
        labels[1:4, 1:4] = 1
        assert np.all(bce_loss_map(labels.astype(float), labels) < 1e-6)

    def test_uniform(self):
        pred, labels = uniform_case()
        assert np.allclose(bce_loss_map(pred, labels), math.log(2.0))

    def test_matches_single_response(self):
        rng = np.random.default_rng(9)
        pred = rng.uniform(0.01, 0.99, size=(5, 5))
        labels = (rng.uniform(size=(5, 5)) < 0.5).astype(np.int64)
        smap = bce_loss_map(pred, labels)
        for r in range(5):
            for c in range(5):
                assert smap[r, c] == pytest.approx(
                    single_response("bce", pred[r, c], int(labels[r, c])), rel=1e-12
                )


class TestCombineAddon:
    def test_identity_base(self):
        assert combine_addon(0.0, 0.48) == 0.48

    def test_zero_weight(self):
        cfg = SCLossConfig(addon_weight=0.0)
        assert combine_addon(1.234, 0.5, cfg) == 1.234

    def test_addition(self):
        assert combine_addon(1.0, 0.4802196) == pytest.approx(1.4802196)


class TestMulticlass:
    def test_binary_reduction_case(self):
        probs = np.full((8, 8, 2), 0.5)
        labels = np.ones((8, 8), dtype=np.int64)
        b = multiclass_image_loss(probs, labels)
        assert b.total == pytest.approx(1.5 * PAIR_VALUE, abs=1e-9)

    def test_perfect_one_hot(self):
        labels = np.zeros((8, 8), dtype=np.int64)
        labels[3:6, 3:6] = 2
        probs = np.eye(3)[labels]
        assert multiclass_image_loss(probs, labels).total < 1e-5

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(10)
        raw = rng.uniform(0.05, 1.0, size=(8, 8, 3))
        probs = raw / raw.sum(axis=-1, keepdims=True)
        labels = rng.integers(0, 3, size=(8, 8))
        b = multiclass_image_loss(probs, labels)
        expected = naive_multiclass_loss(probs.tolist(), labels.tolist())
        assert b.total == pytest.approx(expected, rel=1e-12)

    def test_rejects_unnormalized(self):
        probs = np.full((4, 4, 2), 0.6)
        with pytest.raises(SCLossError):
            multiclass_image_loss(probs, np.zeros((4, 4), dtype=np.int64))

    def test_rejects_label_out_of_range(self):
        probs = np.full((4, 4, 2), 0.5)
        with pytest.raises(SCLossError):
            multiclass_image_loss(probs, np.full((4, 4), 2, dtype=np.int64))


class TestEstimatorApi:
    def test_get_set_params_roundtrip(self):
        est = SpatialCoherenceLoss(k_max=3, alpha=2.0)
        params = est.get_params()
        assert params["k_max"] == 3 and params["alpha"] == 2.0
        est.set_params(alpha=1.0, regularizer="constant")
        assert est.get_params()["regularizer"] == "constant"
        with pytest.raises(ValueError):
            est.set_params(nonsense=1)

    def test_call_matches_image_loss(self):
        pred, labels = uniform_case()
        est = SpatialCoherenceLoss()
        assert est(pred, labels) == image_loss(pred, labels).total

    def test_invalid_config_raises(self):
        with pytest.raises(ConfigError):
            SpatialCoherenceLoss(k_max=0).config()
        with pytest.raises(ConfigError):
            SpatialCoherenceLoss(alpha=-1.0).config()
        with pytest.raises(ConfigError):
            SpatialCoherenceLoss(epsilon=0.7).config()
        with pytest.raises(ConfigError):
            SpatialCoherenceLoss(level_weights=(1.0,)).config()
