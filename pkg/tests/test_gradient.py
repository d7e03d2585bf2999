import numpy as np
import pytest

from scloss import (
    SCLossConfig,
    SCLossError,
    finite_diff_grad,
    grad_check,
    grad_wrt_logits,
    grad_wrt_probs,
)


def random_case(seed, h=8, w=8):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(0.01, 0.99, size=(h, w))
    labels = (rng.uniform(size=(h, w)) < 0.5).astype(np.int64)
    return pred, labels


class TestGradWrtProbs:
    def test_uniform_symmetric_and_negative(self):
        # Equality requires full rings for the pixel and for every center
        # it neighbors, i.e. distance >= 2 * k_max from the edge.
        pred = np.full((12, 12), 0.5)
        labels = np.ones((12, 12), dtype=np.int64)
        g = grad_wrt_probs(pred, labels)
        interior = g[4:-4, 4:-4]
        assert np.unique(interior).size == 1
        assert np.all(interior < 0)

    def test_zero_at_clamped_pixels(self):
        labels = np.zeros((6, 6), dtype=np.int64)
        labels[1:5, 1:5] = 1
        g = grad_wrt_probs(labels.astype(float), labels)
        assert np.all(np.abs(g) < 1e-4)
        assert np.all(g == 0.0)

    def test_matches_fd_random(self):
        pred, labels = random_case(1)
        analytic = grad_wrt_probs(pred, labels)
        numeric = finite_diff_grad(pred, labels, step=1e-4)
        rel = np.abs(analytic - numeric) / np.maximum(
            np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8
        )
        assert rel.max() < 1e-4

    def test_sum_rule(self):
        pred, labels = random_case(2)
        g_mean = grad_wrt_probs(pred, labels, SCLossConfig(reduction="mean"))
        g_sum = grad_wrt_probs(pred, labels, SCLossConfig(reduction="sum"))
        assert np.allclose(g_sum, g_mean * pred.size, rtol=1e-12, atol=0)

    def test_zero_weight_level_removed_exactly(self):
        pred, labels = random_case(3)
        with_zero = grad_wrt_probs(
            pred, labels, SCLossConfig(level_weights=(1.0, 0.0))
        )
        k1_only = grad_wrt_probs(pred, labels, SCLossConfig(k_max=1))
        assert np.array_equal(with_zero, k1_only)


class TestGradWrtLogits:
    def test_zero_logits_quarter_scaling(self):
        labels = np.ones((8, 8), dtype=np.int64)
        gz = grad_wrt_logits(np.zeros((8, 8)), labels)
        gp = grad_wrt_probs(np.full((8, 8), 0.5), labels)
        assert np.allclose(gz, 0.25 * gp, rtol=1e-12, atol=0)

    def test_saturated_logits_vanish(self):
        labels = np.ones((8, 8), dtype=np.int64)
        gz = grad_wrt_logits(np.full((8, 8), 40.0), labels)
        assert np.all(gz == 0.0)

    def test_fd_on_logits(self):
        rng = np.random.default_rng(4)
        z = rng.normal(scale=1.5, size=(8, 8))
        labels = (rng.uniform(size=(8, 8)) < 0.5).astype(np.int64)
        analytic = grad_wrt_logits(z, labels)
        h = 1e-5
        numeric = np.zeros_like(z)
        from scloss.loss import image_loss

        for r in range(8):
            for c in range(8):
                for sign in (1.0, -1.0):
                    zp = z.copy()
                    zp[r, c] += sign * h
                    p = np.clip(1.0 / (1.0 + np.exp(-zp)), 1e-7, 1 - 1e-7)
                    numeric[r, c] += sign * image_loss(p, labels).total
        numeric /= 2 * h
        rel = np.abs(analytic - numeric) / np.maximum(
            np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8
        )
        assert rel.max() < 1e-4

    def test_rejects_nonfinite(self):
        labels = np.ones((4, 4), dtype=np.int64)
        with pytest.raises(SCLossError):
            grad_wrt_logits(np.full((4, 4), np.nan), labels)


class TestFiniteDiff:
    def test_linear_functional_machine_precision(self):
        # mse on a 1x2 grid with the constant regularizer: the denominator
        # depends on p only through the mutual term; at m=0 and tiny q its
        # curvature is negligible, so central differences are near exact.
        pred = np.array([[0.3, 0.6]])
        labels = np.array([[0, 0]])
        cfg = SCLossConfig(
            k_max=1, single_response="mse", regularizer="constant", reduction="sum"
        )
        analytic = grad_wrt_probs(pred, labels, cfg)
        numeric = finite_diff_grad(pred, labels, cfg, step=1e-4)
        assert np.allclose(analytic, numeric, atol=1e-7)

    def test_uniform_symmetry(self):
        pred = np.full((8, 8), 0.5)
        labels = np.ones((8, 8), dtype=np.int64)
        g = finite_diff_grad(pred, labels, step=1e-4)
        assert np.unique(g[3:-3, 3:-3]).size == 1

    def test_warns_at_clamp_boundary(self):
        pred = np.full((5, 5), 0.5)
        pred[0, 0] = 1.0
        labels = np.ones((5, 5), dtype=np.int64)
        with pytest.warns(UserWarning):
            finite_diff_grad(pred, labels, step=1e-4)

    def test_rejects_bad_step(self):
        pred, labels = random_case(5)
        for step in (0.0, 1e-7, 1e-2):
            with pytest.raises(SCLossError):
                finite_diff_grad(pred, labels, step=step)


class TestGradCheck:
    def test_default_case_passes(self):
        report = grad_check(seed=1, dims=(8, 8), trials=10)
        assert report.passed
        assert report.max_rel_error <= 1e-4

    def test_zero_tolerance_fails(self):
        report = grad_check(seed=1, dims=(8, 8), trials=1, tolerance=0.0)
        assert not report.passed

    @pytest.mark.parametrize("single", ["bce", "mse", "l1"])
    @pytest.mark.parametrize("reg", ["gaussian", "distance", "constant"])
    @pytest.mark.parametrize("k_max", [1, 2, 3])
    def test_variant_matrix(self, single, reg, k_max):
        cfg = SCLossConfig(k_max=k_max, single_response=single, regularizer=reg)
        report = grad_check(seed=3, dims=(8, 8), cfg=cfg, trials=3)
        assert report.passed, report
