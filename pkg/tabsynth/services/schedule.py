"""Variance schedule shared by the Gaussian and multinomial processes.

Timesteps are 1-based (t = 1..T); arrays are stored 0-based so that
``beta[t - 1]`` is β_t.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

COSINE_OFFSET = 0.008
MAX_BETA = 0.999


class ScheduleTerms(NamedTuple):
    beta: float
    alpha: float
    alpha_bar: float
    alpha_bar_prev: float


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    alpha_bar_prev: np.ndarray
    s: float = COSINE_OFFSET
    clip: float = MAX_BETA

    def gather(self, t: int) -> ScheduleTerms:
        if not 1 <= t <= self.T:
            raise IndexError(f"timestep {t} outside [1, {self.T}]")
        i = t - 1
        return ScheduleTerms(
            float(self.beta[i]),
            float(self.alpha[i]),
            float(self.alpha_bar[i]),
            float(self.alpha_bar_prev[i]),
        )

    def take(self, name: str, t: np.ndarray) -> np.ndarray:
        """Vectorised lookup of one schedule vector at 1-based timesteps *t*."""
        t = np.asarray(t)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise IndexError(f"timesteps outside [1, {self.T}]")
        return getattr(self, name)[t - 1]

    @property
    def posterior_variance(self) -> np.ndarray:
        """β̃_t = (1 - ᾱ_{t-1}) / (1 - ᾱ_t) · β_t; zero at t = 1."""
        return (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar) * self.beta

    @property
    def posterior_x0_coef(self) -> np.ndarray:
        """Weight of x0 in the posterior mean: β_t·√ᾱ_{t-1} / (1 - ᾱ_t)."""
        return self.beta * np.sqrt(self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    @property
    def posterior_xt_coef(self) -> np.ndarray:
        """Weight of x_t in the posterior mean: √α_t·(1 - ᾱ_{t-1}) / (1 - ᾱ_t)."""
        return np.sqrt(self.alpha) * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)


def gather(schedule: NoiseSchedule, t: int) -> ScheduleTerms:
    return schedule.gather(t)


def cosine_schedule(T: int, s: float = COSINE_OFFSET, clip: float = MAX_BETA) -> NoiseSchedule:
    if T < 1:
        raise ValueError("the schedule needs at least one timestep")

    def f(t: float) -> float:
        return math.cos((t / T + s) / (1 + s) * math.pi / 2) ** 2

    f0 = f(0)
    target = np.array([f(t) / f0 for t in range(T + 1)], dtype=np.float64)
    beta = np.minimum(1.0 - target[1:] / target[:-1], clip)
    alpha = 1.0 - beta
    # Cumulative product of the clipped alphas so that ᾱ_t = ᾱ_{t-1}·α_t holds exactly.
    alpha_bar = np.cumprod(alpha)
    alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    return NoiseSchedule(
        T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar,
        alpha_bar_prev=alpha_bar_prev, s=s, clip=clip,
    )
