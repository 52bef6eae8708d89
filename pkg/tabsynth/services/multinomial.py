"""Multinomial diffusion over one-hot categorical features.

Distributions are carried as arrays of natural-log probabilities over the last
axis (one row per record), clamped at ``LOG_MIN`` so that products of
near-zero probabilities stay finite.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from tabsynth.errors import ShapeError
from tabsynth.services.schedule import NoiseSchedule

LOG_MIN = -70.0


@dataclass(frozen=True)
class CategoricalFeatureSpec:
    K: int
    start: int

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("a categorical feature needs at least two categories")

    @property
    def stop(self) -> int:
        return self.start + self.K

    @property
    def index_range(self) -> slice:
        return slice(self.start, self.stop)


def feature_specs(offset: int, cardinalities: list[int]) -> list[CategoricalFeatureSpec]:
    """Lay out disjoint, ordered slices for each categorical feature after *offset* columns."""
    specs = []
    for k in cardinalities:
        specs.append(CategoricalFeatureSpec(K=int(k), start=offset))
        offset += int(k)
    return specs


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def onehot(codes: np.ndarray, K: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros(codes.shape + (K,), dtype=np.float64)
    np.put_along_axis(out, codes[..., None], 1.0, axis=-1)
    return out


def _check_onehot(x: np.ndarray) -> None:
    if not (np.isin(x, (0.0, 1.0)).all() and np.all(x.sum(axis=-1) == 1.0)):
        raise ValueError("expected a one-hot encoded input")


def _clamped_log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(p), LOG_MIN)


def _normalize(log_p: np.ndarray) -> np.ndarray:
    log_p = np.maximum(log_p, LOG_MIN)
    return log_p - logsumexp(log_p, axis=-1, keepdims=True)


def _column(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values[:, None] if values.ndim == 1 and x.ndim == 2 else values


def kl_divergence(log_p: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    """KL(p ‖ q) in nats along the last axis."""
    return np.sum(np.exp(log_p) * (log_p - log_q), axis=-1)


# ---------------------------------------------------------------------------
# Forward process and posterior
# ---------------------------------------------------------------------------

def q_xt_given_x0(x0_onehot: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """log Cat(ᾱ_t·x0 + (1 - ᾱ_t)/K)"""
    x0_onehot = np.asarray(x0_onehot, dtype=np.float64)
    _check_onehot(x0_onehot)
    K = x0_onehot.shape[-1]
    ab = _column(schedule.take("alpha_bar", t), x0_onehot)
    return _normalize(_clamped_log(ab * x0_onehot + (1.0 - ab) / K))


def q_posterior(x_t_onehot: np.ndarray, x0_probs: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """log q(x_{t-1} | x_t, x0) with π = [α_t x_t + (1-α_t)/K] ⊙ [ᾱ_{t-1} x0 + (1-ᾱ_{t-1})/K]."""
    x_t_onehot = np.asarray(x_t_onehot, dtype=np.float64)
    x0_probs = np.asarray(x0_probs, dtype=np.float64)
    if x_t_onehot.shape != x0_probs.shape:
        raise ShapeError(f"x_t shape {x_t_onehot.shape} != x0 shape {x0_probs.shape}")
    K = x_t_onehot.shape[-1]
    alpha = _column(schedule.take("alpha", t), x_t_onehot)
    ab_prev = _column(schedule.take("alpha_bar_prev", t), x_t_onehot)
    log_a = _clamped_log(alpha * x_t_onehot + (1.0 - alpha) / K)
    log_b = _clamped_log(ab_prev * x0_probs + (1.0 - ab_prev) / K)
    return _normalize(log_a + log_b)


def p_theta_step(logits: np.ndarray, x_t_onehot: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """Reverse kernel q(x_{t-1} | x_t, x̂0) with x̂0 = softmax(logits); Cat(x̂0) at t = 1."""
    logits = np.asarray(logits, dtype=np.float64)
    x0_hat = softmax(logits, axis=-1)
    posterior = q_posterior(x_t_onehot, x0_hat, t, schedule)
    final = _normalize(log_softmax(logits, axis=-1))
    is_last = _column(np.asarray(t) == 1, logits)
    return np.where(is_last, final, posterior)


def prior_kl(x0_onehot: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """KL(q(x_T | x0) ‖ Cat(1/K)); diagnostic only, it has no learnable parameters."""
    x0_onehot = np.asarray(x0_onehot, dtype=np.float64)
    K = x0_onehot.shape[-1]
    t = np.full(x0_onehot.shape[:-1] or (), schedule.T)
    log_q = q_xt_given_x0(x0_onehot, t, schedule)
    return kl_divergence(log_q, np.full_like(log_q, -np.log(K)))


# ---------------------------------------------------------------------------
# Training terms
# ---------------------------------------------------------------------------

def kl_term(x0_onehot: np.ndarray, x_t_onehot: np.ndarray, logits: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """Per-row L_t: KL(q_posterior ‖ p_theta) for t ≥ 2, -log x̂0[true] for t = 1."""
    value, _ = kl_term_and_grad(x0_onehot, x_t_onehot, logits, t, schedule)
    return value


def kl_term_and_grad(x0_onehot, x_t_onehot, logits, t, schedule: NoiseSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Per-row L_t and its gradient with respect to the logits."""
    x0_onehot = np.asarray(x0_onehot, dtype=np.float64)
    x_t_onehot = np.asarray(x_t_onehot, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    if not (x0_onehot.shape == x_t_onehot.shape == logits.shape):
        raise ShapeError("x0, x_t and logits must share one shape")
    K = logits.shape[-1]
    t = np.asarray(t)

    log_x0_hat = log_softmax(logits, axis=-1)
    x0_hat = np.exp(log_x0_hat)

    # t = 1: discrete decoder NLL.
    nll = -np.sum(x0_onehot * np.maximum(log_x0_hat, LOG_MIN), axis=-1)
    nll_grad = x0_hat - x0_onehot

    # t >= 2: KL between the true and the predicted posterior.
    log_q = q_posterior(x_t_onehot, x0_onehot, t, schedule)
    log_p = q_posterior(x_t_onehot, x0_hat, t, schedule)
    kl = kl_divergence(log_q, log_p)
    ab_prev = _column(schedule.take("alpha_bar_prev", t), logits)
    b = ab_prev * x0_hat + (1.0 - ab_prev) / K
    # b only vanishes on t = 1 rows, which take the NLL branch below.
    with np.errstate(divide="ignore", invalid="ignore"):
        g = ab_prev * (np.exp(log_p) - np.exp(log_q)) / b
        kl_grad = x0_hat * (g - np.sum(g * x0_hat, axis=-1, keepdims=True))

    is_last = t == 1
    value = np.where(is_last, nll, kl)
    grad = np.where(_column(is_last, logits), nll_grad, kl_grad)
    return value, grad


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_category(log_probs: np.ndarray, u) -> np.ndarray:
    """Inverse-CDF draw: the first index whose cumulative probability exceeds *u*."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    cdf = np.cumsum(np.exp(log_probs), axis=-1)
    cdf /= cdf[..., -1:]
    u = np.asarray(u, dtype=np.float64)[..., None]
    idx = np.sum(cdf <= u, axis=-1)
    return np.minimum(idx, log_probs.shape[-1] - 1)
