"""Gaussian diffusion over the numerical block (ε-parameterisation)."""

from dataclasses import dataclass

import numpy as np

from tabsynth.errors import ShapeError
from tabsynth.services.schedule import NoiseSchedule


def _per_row(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    coef = np.asarray(coef, dtype=np.float64)
    if coef.ndim == 1 and x.ndim == 2:
        return coef[:, None]
    return coef


@dataclass(frozen=True)
class GaussianBlock:
    """The N_num numerical coordinates; ``dim`` may be zero."""

    dim: int
    schedule: NoiseSchedule

    def _coef(self, name: str, t, x: np.ndarray) -> np.ndarray:
        return _per_row(self.schedule.take(name, t), x)

    def q_sample(self, x0: np.ndarray, t, noise: np.ndarray) -> np.ndarray:
        """x_t = √ᾱ_t·x0 + √(1-ᾱ_t)·ε"""
        if x0.shape != noise.shape:
            raise ShapeError(f"noise shape {noise.shape} != data shape {x0.shape}")
        ab = self._coef("alpha_bar", t, x0)
        return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise

    def predict_x0(self, x_t: np.ndarray, t, eps_pred: np.ndarray) -> np.ndarray:
        """x̂0 = (x_t - √(1-ᾱ_t)·ε_θ) / √ᾱ_t"""
        if x_t.shape != eps_pred.shape:
            raise ShapeError(f"prediction shape {eps_pred.shape} != x_t shape {x_t.shape}")
        ab = self._coef("alpha_bar", t, x_t)
        return (x_t - np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(ab)

    def p_mean(self, x_t: np.ndarray, t, eps_pred: np.ndarray, x0_bound: float | None = None) -> np.ndarray:
        """μ_θ = (x_t - β_t/√(1-ᾱ_t)·ε_θ) / √α_t

        With *x0_bound* the mean goes through the posterior q(x_{t-1} | x_t, x̂0)
        with x̂0 clamped to [-x0_bound, x0_bound]; inside the bound both forms agree.
        """
        if x_t.shape != eps_pred.shape:
            raise ShapeError(f"prediction shape {eps_pred.shape} != x_t shape {x_t.shape}")
        if x0_bound is not None:
            x0 = np.clip(self.predict_x0(x_t, t, eps_pred), -x0_bound, x0_bound)
            return self._coef("posterior_x0_coef", t, x_t) * x0 + self._coef("posterior_xt_coef", t, x_t) * x_t
        beta = self._coef("beta", t, x_t)
        alpha = self._coef("alpha", t, x_t)
        ab = self._coef("alpha_bar", t, x_t)
        return (x_t - beta / np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(alpha)

    def p_sample_step(
        self,
        x_t: np.ndarray,
        t,
        eps_pred: np.ndarray,
        z: np.ndarray,
        x0_bound: float | None = None,
    ) -> np.ndarray:
        """One ancestral step with σ_t² = β̃_t; deterministic at t = 1."""
        mean = self.p_mean(x_t, t, eps_pred, x0_bound)
        if z.shape != x_t.shape:
            raise ShapeError(f"noise shape {z.shape} != x_t shape {x_t.shape}")
        t_arr = np.asarray(t)
        var = _per_row(self.schedule.posterior_variance[t_arr - 1], x_t)
        sigma = np.where(_per_row(t_arr, x_t) == 1, 0.0, np.sqrt(var))
        return mean + sigma * z


def mse_loss(eps_true: np.ndarray, eps_pred: np.ndarray) -> float:
    """Mean over batch and coordinates of (ε - ε_θ)²."""
    if eps_true.shape != eps_pred.shape:
        raise ShapeError(f"prediction shape {eps_pred.shape} != target shape {eps_true.shape}")
    if eps_true.size == 0:
        raise ValueError("mse_loss of an empty batch")
    diff = np.asarray(eps_true, dtype=np.float64) - eps_pred
    return float(np.mean(diff * diff))


def mse_loss_grad(eps_true: np.ndarray, eps_pred: np.ndarray) -> np.ndarray:
    """Gradient of :func:`mse_loss` with respect to ``eps_pred``."""
    return 2.0 * (np.asarray(eps_pred, dtype=np.float64) - eps_true) / eps_true.size
