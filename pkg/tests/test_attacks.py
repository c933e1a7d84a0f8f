import numpy as np
import pytest

from canids.attacks import (
    AttackConfig,
    attack_success_rate,
    best_sweep_config,
    bim,
    epsilon_sweep,
    fgsm,
    perturb_batch,
)
from canids.detector import LstmDetector
from canids.lstm import backward, forward


def small_detector(seed=5, hidden=10, T=8, d=3):
    """Random-weight detector, fitted-shaped but untrained (gradients flow)."""
    rng = np.random.default_rng(seed)
    X = rng.random((16, T, d))
    y = rng.integers(0, 2, 16)
    det = LstmDetector(hidden_dim=hidden, epochs=0, init_seed=seed)
    det.fit(X, y)
    return det


@pytest.fixture(scope="module")
def detector():
    return small_detector()


@pytest.fixture(scope="module")
def batch():
    rng = np.random.default_rng(9)
    return rng.random((24, 8, 3)), rng.integers(0, 2, 24)


class TestFgsm:
    def test_zero_epsilon_is_identity(self, detector, batch):
        X, y = batch
        cfg = AttackConfig("fgsm", 0.0)
        adv = perturb_batch(detector, X, y, cfg)
        assert np.array_equal(adv, X)
        assert np.array_equal(detector.predict(adv), detector.predict(X))

    def test_linf_equals_epsilon_where_gradient_nonzero(self, detector, batch):
        X, y = batch
        eps = 0.03
        adv = perturb_batch(detector, X, y, AttackConfig("fgsm", eps, clamp_to_domain=False))
        probs, cache = forward(detector.params_, X)
        _, gx = backward(detector.params_, cache, X, y, need_param_grads=False)
        diff = np.abs(adv - X)
        nonzero = gx != 0
        assert np.allclose(diff[nonzero], eps, rtol=0, atol=1e-15)
        assert np.all(diff[~nonzero] == 0.0)

    def test_domain_clamp_keeps_unit_box(self, detector, batch):
        X, y = batch
        adv = perturb_batch(detector, X, y, AttackConfig("fgsm", 0.5, clamp_to_domain=True))
        assert adv.min() >= 0.0 and adv.max() <= 1.0

    def test_single_window_outcome(self, detector, batch):
        X, y = batch
        out = fgsm(detector, X[0], int(y[0]), AttackConfig("fgsm", 0.1))
        assert out.adversarial.shape == X[0].shape
        assert out.l_inf_distance <= 0.1 + 1e-12
        assert out.l2_distance <= np.sqrt(X[0].size) * 0.1 + 1e-9
        assert out.flipped == (out.original_prediction != out.adversarial_prediction)

    def test_kind_mismatch_rejected(self, detector, batch):
        X, y = batch
        with pytest.raises(ValueError, match="fgsm"):
            fgsm(detector, X[0], int(y[0]), AttackConfig("bim", 0.1, iterations=2))


class TestBim:
    def test_epsilon_ball_confinement(self, detector, batch):
        X, y = batch
        eps = 0.05
        cfg = AttackConfig("bim", eps, alpha=0.02, iterations=7, clamp_to_domain=False)
        adv = perturb_batch(detector, X, y, cfg)
        assert np.abs(adv - X).max() <= eps + 1e-12

    def test_single_iteration_full_step_matches_fgsm_bitwise(self, detector, batch):
        X, y = batch
        eps = 0.07
        adv_b = perturb_batch(detector, X, y, AttackConfig("bim", eps, alpha=eps, iterations=1))
        adv_f = perturb_batch(detector, X, y, AttackConfig("fgsm", eps))
        assert np.array_equal(adv_b, adv_f)

    def test_zero_gradient_fixed_point(self, batch):
        X, y = batch
        det = small_detector()
        for arr in det.params_.arrays().values():
            arr[:] = 0.0  # probability pinned at 0.5, input gradient exactly 0
        for cfg in (AttackConfig("fgsm", 0.2), AttackConfig("bim", 0.2, iterations=3)):
            adv = perturb_batch(det, X, y, cfg)
            assert np.array_equal(adv, X)

    def test_frozen_gradient_collapses_to_scaled_step(self, detector, batch):
        X, y = batch
        eps, alpha, iters = 0.09, 0.03, 3
        cfg = AttackConfig("bim", eps, alpha=alpha, iterations=iters, frozen_gradient=True)
        adv = perturb_batch(detector, X, y, cfg, mask=None)
        probs, cache = forward(detector.params_, X)
        _, gx = backward(detector.params_, cache, X, y, need_param_grads=False)
        manual = X.copy()
        for _ in range(iters):
            manual = np.clip(manual + alpha * np.sign(gx), X - eps, X + eps)
        manual = np.clip(manual, 0.0, 1.0)
        assert np.array_equal(adv, manual)

    def test_alpha_above_epsilon_rejected(self):
        with pytest.raises(ValueError, match="alpha"):
            AttackConfig("bim", 0.1, alpha=0.2, iterations=5)

    def test_default_alpha_is_epsilon_over_iterations(self):
        cfg = AttackConfig("bim", 0.25, iterations=5)
        assert cfg.step_size == pytest.approx(0.05)

    def test_mask_restricts_perturbation(self, detector, batch):
        X, y = batch
        mask = np.zeros(X.shape[1])
        mask[2:5] = 1.0
        adv = perturb_batch(detector, X, y, AttackConfig("fgsm", 0.1), mask=mask)
        untouched = np.delete(adv - X, [2, 3, 4], axis=1)
        assert np.all(untouched == 0.0)


class TestSuccessRate:
    def test_complement_identity_exact(self, detector, batch):
        X, y = batch
        success, acc = attack_success_rate(detector, X, y, AttackConfig("fgsm", 0.1))
        assert success + acc == 1.0

    def test_zero_epsilon_equals_clean_error(self, detector, batch):
        X, y = batch
        success, acc = attack_success_rate(detector, X, y, AttackConfig("fgsm", 0.0))
        clean_acc = float((detector.predict(X) == y).mean())
        assert acc == clean_acc
        assert success == 1.0 - clean_acc

    def test_empty_test_set_rejected(self, detector):
        with pytest.raises(ValueError, match="empty"):
            attack_success_rate(
                detector, np.zeros((0, 8, 3)), np.zeros(0, dtype=int), AttackConfig("fgsm", 0.1)
            )


class TestSweep:
    def test_rows_per_epsilon(self, detector, batch):
        X, y = batch
        rows = epsilon_sweep(detector, X, y, "fgsm", [0.01, 0.05, 0.1])
        assert [r["epsilon"] for r in rows] == [0.01, 0.05, 0.1]
        assert all(r["kind"] == "fgsm" for r in rows)

    def test_single_epsilon_single_row(self, detector, batch):
        X, y = batch
        assert len(epsilon_sweep(detector, X, y, "bim", [0.1])) == 1

    def test_non_ascending_rejected(self, detector, batch):
        X, y = batch
        with pytest.raises(ValueError, match="ascending"):
            epsilon_sweep(detector, X, y, "fgsm", [0.1, 0.1])

    def test_deterministic(self, detector, batch):
        X, y = batch
        a = epsilon_sweep(detector, X, y, "bim", [0.05, 0.1], iterations=3)
        b = epsilon_sweep(detector, X, y, "bim", [0.05, 0.1], iterations=3)
        assert a == b

    def test_best_config_picks_peak(self):
        rows = [
            {"kind": "fgsm", "epsilon": 0.05, "alpha": 0.05, "iterations": 1, "success_rate": 0.4},
            {"kind": "fgsm", "epsilon": 0.1, "alpha": 0.1, "iterations": 1, "success_rate": 0.9},
        ]
        assert best_sweep_config(rows).epsilon == 0.1


class TestConfigValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown attack kind"):
            AttackConfig("pgd", 0.1)

    def test_negative_epsilon(self):
        with pytest.raises(ValueError, match="epsilon"):
            AttackConfig("fgsm", -0.1)

    def test_bim_needs_iterations(self):
        with pytest.raises(ValueError, match="iteration"):
            AttackConfig("bim", 0.1, iterations=0)
