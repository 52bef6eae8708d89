"""Tests for the Gaussian diffusion block."""

import numpy as np
import pytest

from tabsynth.errors import ShapeError
from tabsynth.services.gaussian import GaussianBlock, mse_loss, mse_loss_grad
from tabsynth.services.schedule import NoiseSchedule, cosine_schedule


def one_step(alpha: float, alpha_bar: float) -> NoiseSchedule:
    """A single-timestep schedule with hand-picked coefficients."""
    return NoiseSchedule(
        T=1,
        beta=np.array([1.0 - alpha]),
        alpha=np.array([alpha]),
        alpha_bar=np.array([alpha_bar]),
        alpha_bar_prev=np.array([alpha_bar / alpha]),
    )


T1 = np.array([1])


class TestQSample:
    def test_closed_form(self):
        block = GaussianBlock(1, one_step(0.25, 0.25))
        out = block.q_sample(np.array([[2.0]]), T1, np.array([[1.0]]))
        assert out[0, 0] == pytest.approx(1.0 + np.sqrt(0.75), rel=1e-9)

    def test_unit_alpha_bar_is_identity(self):
        block = GaussianBlock(2, one_step(1.0, 1.0))
        x0 = np.array([[0.3, -1.2]])
        assert np.allclose(block.q_sample(x0, T1, np.array([[5.0, 5.0]])), x0)

    def test_noiseless(self):
        block = GaussianBlock(1, one_step(0.25, 0.25))
        assert block.q_sample(np.array([[2.0]]), T1, np.zeros((1, 1)))[0, 0] == pytest.approx(1.0)

    def test_shape_mismatch(self):
        block = GaussianBlock(2, cosine_schedule(5))
        with pytest.raises(ShapeError):
            block.q_sample(np.zeros((1, 2)), T1, np.zeros((1, 3)))

    def test_marginal_statistics(self):
        sched = cosine_schedule(100)
        block = GaussianBlock(1, sched)
        rng = np.random.default_rng(0)
        n, t, x0 = 100_000, 40, 1.5
        samples = block.q_sample(np.full((n, 1), x0), np.full(n, t), rng.standard_normal((n, 1)))[:, 0]
        ab = sched.alpha_bar[t - 1]
        stderr = np.sqrt((1 - ab) / n)
        assert abs(samples.mean() - np.sqrt(ab) * x0) < 4 * stderr
        assert samples.var() == pytest.approx(1 - ab, rel=0.05)


class TestPMean:
    def test_hand_value(self):
        block = GaussianBlock(1, one_step(0.9, 0.45))
        out = block.p_mean(np.array([[1.0]]), T1, np.array([[0.5]]))
        assert out[0, 0] == pytest.approx(0.983023, abs=1e-6)

    def test_zero_beta(self):
        block = GaussianBlock(1, one_step(1.0, 0.5))
        assert block.p_mean(np.array([[0.7]]), T1, np.array([[3.0]]))[0, 0] == pytest.approx(0.7)

    def test_zero_prediction(self):
        block = GaussianBlock(1, one_step(0.81, 0.5))
        assert block.p_mean(np.array([[0.9]]), T1, np.zeros((1, 1)))[0, 0] == pytest.approx(1.0)


class TestPSampleStep:
    def setup_method(self):
        self.block = GaussianBlock(2, cosine_schedule(10))
        self.rng = np.random.default_rng(3)

    def test_last_step_ignores_noise(self):
        x_t = self.rng.standard_normal((4, 2))
        eps = self.rng.standard_normal((4, 2))
        t = np.ones(4, dtype=int)
        out = self.block.p_sample_step(x_t, t, eps, self.rng.standard_normal((4, 2)))
        assert np.array_equal(out, self.block.p_mean(x_t, t, eps))

    def test_zero_noise_gives_mean(self):
        x_t = self.rng.standard_normal((3, 2))
        eps = self.rng.standard_normal((3, 2))
        t = np.full(3, 6)
        out = self.block.p_sample_step(x_t, t, eps, np.zeros((3, 2)))
        assert np.allclose(out, self.block.p_mean(x_t, t, eps))

    def test_exact_noise_recovers_x0(self):
        x0 = self.rng.standard_normal((5, 2))
        eps = self.rng.standard_normal((5, 2))
        t = np.ones(5, dtype=int)
        x_t = self.block.q_sample(x0, t, eps)
        out = self.block.p_sample_step(x_t, t, eps, self.rng.standard_normal((5, 2)))
        np.testing.assert_allclose(out, x0, atol=1e-6)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            self.block.p_sample_step(np.zeros((1, 2)), np.array([11]), np.zeros((1, 2)), np.zeros((1, 2)))


class TestBoundedMean:
    def setup_method(self):
        self.block = GaussianBlock(2, cosine_schedule(100))
        self.rng = np.random.default_rng(11)

    def test_predict_x0_inverts_q_sample(self):
        x0 = self.rng.uniform(-2, 2, (6, 2))
        eps = self.rng.standard_normal((6, 2))
        t = np.array([1, 10, 30, 50, 70, 90])
        x_t = self.block.q_sample(x0, t, eps)
        np.testing.assert_allclose(self.block.predict_x0(x_t, t, eps), x0, rtol=1e-8, atol=1e-10)

    def test_agrees_with_direct_form_inside_bound(self):
        x0 = self.rng.uniform(-2, 2, (40, 2))
        eps = self.rng.standard_normal((40, 2))
        t = self.rng.integers(1, 100, size=40)
        x_t = self.block.q_sample(x0, t, eps)
        np.testing.assert_allclose(
            self.block.p_mean(x_t, t, eps, x0_bound=5.0),
            self.block.p_mean(x_t, t, eps),
            rtol=1e-9, atol=1e-12,
        )

    def test_first_reverse_step_stays_bounded(self):
        x_t = self.rng.standard_normal((50, 2))
        eps = x_t + 0.05
        t = np.full(50, 100)
        assert np.all(np.abs(self.block.p_mean(x_t, t, eps)) > 1.0)

        bounded = self.block.p_mean(x_t, t, eps, x0_bound=5.0)
        sched = self.block.schedule
        limit = sched.posterior_x0_coef[-1] * 5.0 + sched.posterior_xt_coef[-1] * np.abs(x_t)
        assert np.all(np.abs(bounded) <= limit + 1e-12)

    def test_clamped_prediction_at_last_step(self):
        x_t = np.array([[0.5, -0.5]])
        eps = np.array([[-1000.0, 1000.0]])
        t = np.array([1])
        out = self.block.p_sample_step(x_t, t, eps, np.ones((1, 2)), x0_bound=3.0)
        np.testing.assert_allclose(out, [[3.0, -3.0]])


class TestMSE:
    def test_perfect(self):
        e = np.array([[0.1, -0.4]])
        assert mse_loss(e, e) == 0.0

    def test_hand_value(self):
        assert mse_loss(np.array([1.0, 1.0]), np.array([0.0, 0.0])) == 1.0

    def test_quadratic(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(10), rng.standard_normal(10)
        assert mse_loss(a, a + 2 * (b - a)) == pytest.approx(4 * mse_loss(a, b))

    def test_empty(self):
        with pytest.raises(ValueError):
            mse_loss(np.zeros((0, 2)), np.zeros((0, 2)))

    def test_gradient(self):
        rng = np.random.default_rng(1)
        true, pred = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        h = 1e-6
        bumped = pred.copy()
        bumped[1, 0] += h
        numeric = (mse_loss(true, bumped) - mse_loss(true, pred)) / h
        assert mse_loss_grad(true, pred)[1, 0] == pytest.approx(numeric, rel=1e-4)
