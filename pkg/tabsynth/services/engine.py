"""Training and ancestral sampling for the joint Gaussian + multinomial diffusion."""

import logging
from dataclasses import dataclass, field

import numpy as np

from tabsynth.config import settings
from tabsynth.errors import DataError, NumericError, StateError
from tabsynth.models import Split
from tabsynth.schemas import TrainConfig
from tabsynth.services import multinomial
from tabsynth.services.checkpoint import Checkpoint
from tabsynth.services.denoiser import DenoiserConfig, DenoiserModel
from tabsynth.services.gaussian import GaussianBlock, mse_loss, mse_loss_grad
from tabsynth.services.loss_log import LossLog
from tabsynth.services.nn import Adam
from tabsynth.services.parallel import chunk_rng, map_chunks
from tabsynth.services.preprocess import ENCODED_BOUND, EncodedBatch, TabularDataset, TabularEncoder
from tabsynth.services.schedule import NoiseSchedule, cosine_schedule

log = logging.getLogger("tabsynth")

LOG_EVERY = 100
EMA_DECAY = 0.99


@dataclass
class LossBreakdown:
    l_simple: float
    l_multinomial_mean: float
    total: float
    per_feature: list[float] = field(default_factory=list)
    l_prior: float = 0.0

    def terms(self) -> dict[str, float]:
        named = {"l_simple": self.l_simple, "l_multinomial_mean": self.l_multinomial_mean}
        named.update({f"categorical[{i}]": v for i, v in enumerate(self.per_feature)})
        return named


class GaussianMultinomialDiffusion:
    """Both diffusion processes over one encoded layout [numerics | one-hots]."""

    def __init__(self, schedule: NoiseSchedule, num_numerical: int, cardinalities: list[int]):
        self.schedule = schedule
        self.gaussian = GaussianBlock(dim=num_numerical, schedule=schedule)
        self.specs = multinomial.feature_specs(num_numerical, cardinalities)

    @classmethod
    def for_encoder(cls, schedule: NoiseSchedule, encoder: TabularEncoder) -> "GaussianMultinomialDiffusion":
        return cls(schedule, encoder.num_numerical, encoder.cardinalities)

    @property
    def num_numerical(self) -> int:
        return self.gaussian.dim

    @property
    def width(self) -> int:
        return self.num_numerical + sum(s.K for s in self.specs)

    def noise_batch(self, x0: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw per-row timesteps and corrupt every feature independently."""
        rows = x0.shape[0]
        t = rng.integers(1, self.schedule.T + 1, size=rows)
        num = self.num_numerical
        noise = rng.standard_normal((rows, num))
        x_t = np.empty_like(x0, dtype=np.float64)
        x_t[:, :num] = self.gaussian.q_sample(x0[:, :num], t, noise)
        for spec in self.specs:
            log_q = multinomial.q_xt_given_x0(x0[:, spec.index_range], t, self.schedule)
            codes = multinomial.sample_category(log_q, rng.random(rows))
            x_t[:, spec.index_range] = multinomial.onehot(codes, spec.K)
        return t, noise, x_t

    def loss_and_grad(
        self,
        model_out: np.ndarray,
        x0: np.ndarray,
        x_t: np.ndarray,
        t: np.ndarray,
        noise: np.ndarray,
    ) -> tuple[LossBreakdown, np.ndarray]:
        """L = L_simple + Σ_i L_i / C and its gradient with respect to the model output."""
        out = np.asarray(model_out, dtype=np.float64)
        rows = out.shape[0]
        grad = np.zeros_like(out)
        num = self.num_numerical

        l_simple = 0.0
        if num:
            l_simple = mse_loss(noise, out[:, :num])
            grad[:, :num] = mse_loss_grad(noise, out[:, :num])

        per_feature, priors = [], []
        C = len(self.specs)
        for spec in self.specs:
            s = spec.index_range
            values, g = multinomial.kl_term_and_grad(x0[:, s], x_t[:, s], out[:, s], t, self.schedule)
            per_feature.append(float(np.mean(values)))
            priors.append(float(np.mean(multinomial.prior_kl(x0[:, s], self.schedule))))
            grad[:, s] = g / (rows * C)

        l_multi = sum(per_feature) / C if C else 0.0
        breakdown = LossBreakdown(
            l_simple=l_simple,
            l_multinomial_mean=l_multi,
            total=l_simple + l_multi,
            per_feature=per_feature,
            l_prior=sum(priors) / C if C else 0.0,
        )
        return breakdown, grad


def _check_finite(breakdown: LossBreakdown, step: int | None) -> None:
    if np.isfinite(breakdown.total):
        return
    offending = [name for name, v in breakdown.terms().items() if not np.isfinite(v)]
    where = f" at step {step}" if step is not None else ""
    raise NumericError(f"non-finite loss{where}; offending term(s): {', '.join(offending) or 'total'}")


def training_step(
    model: DenoiserModel,
    optimizer: Adam,
    diffusion: GaussianMultinomialDiffusion,
    batch: EncodedBatch,
    rng: np.random.Generator,
    step: int | None = None,
) -> LossBreakdown:
    if batch.x.shape[0] == 0:
        raise ValueError("training batch is empty")
    t, noise, x_t = diffusion.noise_batch(batch.x, rng)
    out = model.forward(x_t, t, batch.y)
    breakdown, grad = diffusion.loss_and_grad(out, batch.x, x_t, t, noise)
    _check_finite(breakdown, step)
    model.backward(grad)
    optimizer.step(model.parameters(), model.gradients())
    return breakdown


def annealed_lr(base: float, step: int, iterations: int) -> float:
    """Linear decay from *base* at step 1 towards zero after the last step."""
    return base * (1.0 - (step - 1) / iterations)


def fit(dataset: TabularDataset, config: TrainConfig, loss_log: LossLog | None = None) -> Checkpoint:
    encoder = TabularEncoder().fit(dataset)
    if encoder.width == 0:
        raise DataError("the dataset has no columns to model")
    encoded = encoder.encode(dataset.split_view(Split.TRAIN))
    n = encoded.x.shape[0]

    rng = np.random.default_rng(config.seed)
    schedule = cosine_schedule(config.timesteps)
    diffusion = GaussianMultinomialDiffusion.for_encoder(schedule, encoder)
    model = DenoiserModel(
        DenoiserConfig(
            input_dim=encoder.width,
            num_layers=config.num_layers,
            layer_width=config.layer_width,
            num_classes=encoder.num_classes,
        ),
        rng,
    )
    optimizer = Adam(lr=config.learning_rate)
    log.info(
        "Training on %d rows (width %d, %d classes) for %d iterations, T=%d",
        n, encoder.width, encoder.num_classes, config.iterations, config.timesteps,
    )

    ema: dict[str, float] | None = None
    for step in range(1, config.iterations + 1):
        idx = rng.integers(0, n, size=config.batch_size)
        batch = EncodedBatch(x=encoded.x[idx], y=None if encoded.y is None else encoded.y[idx])
        if config.lr_anneal:
            optimizer.lr = annealed_lr(config.learning_rate, step, config.iterations)
        breakdown = training_step(model, optimizer, diffusion, batch, rng, step=step)
        if loss_log is not None:
            loss_log.append(step, breakdown)

        current = {"l_simple": breakdown.l_simple, "l_multi": breakdown.l_multinomial_mean, "total": breakdown.total}
        if ema is None:
            ema = current
        else:
            ema = {k: EMA_DECAY * ema[k] + (1 - EMA_DECAY) * v for k, v in current.items()}
        if step % LOG_EVERY == 0 or step == config.iterations:
            log.info(
                "step %d: l_simple=%.4f l_multinomial=%.4f total=%.4f (prior %.4f)",
                step, ema["l_simple"], ema["l_multi"], ema["total"], breakdown.l_prior,
            )

    return Checkpoint(model=model, encoder=encoder, schedule=schedule, train_config=config)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def allocate_class_counts(n: int, proportions: dict[int, int]) -> dict[int, int]:
    """Split *n* rows across classes by largest remainder; ties go to the lower class id."""
    total = sum(proportions.values())
    if total <= 0:
        raise ValueError("class proportions must not all be zero")
    classes = sorted(proportions)
    quotas = {c: n * proportions[c] / total for c in classes}
    counts = {c: int(np.floor(quotas[c])) for c in classes}
    leftover = n - sum(counts.values())
    by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in by_remainder[:leftover]:
        counts[c] += 1
    return counts


def _run_chain(
    model: DenoiserModel,
    diffusion: GaussianMultinomialDiffusion,
    rows: int,
    y: np.ndarray | None,
    rng: np.random.Generator,
) -> np.ndarray:
    schedule = diffusion.schedule
    num = diffusion.num_numerical
    x = np.zeros((rows, diffusion.width), dtype=np.float64)
    x[:, :num] = rng.standard_normal((rows, num))
    for spec in diffusion.specs:
        x[:, spec.index_range] = multinomial.onehot(rng.integers(0, spec.K, size=rows), spec.K)

    for t in range(schedule.T, 0, -1):
        out = model.predict(x, t, y).astype(np.float64)
        z = rng.standard_normal((rows, num))
        x_next = np.empty_like(x)
        x_next[:, :num] = diffusion.gaussian.p_sample_step(
            x[:, :num], t, out[:, :num], z, x0_bound=ENCODED_BOUND,
        )
        for spec in diffusion.specs:
            s = spec.index_range
            log_p = multinomial.p_theta_step(out[:, s], x[:, s], t, schedule)
            codes = multinomial.sample_category(log_p, rng.random(rows))
            x_next[:, s] = multinomial.onehot(codes, spec.K)
        x = x_next
    return x


def sample(
    checkpoint: Checkpoint,
    n: int | None = None,
    class_counts: dict[int, int] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> TabularDataset:
    """Ancestral sampling from x_T ~ N(0, I) ⊗ uniform categories down to t = 1.

    Conditional models get labels allocated by class proportion (or exactly
    *class_counts*); rows are generated in fixed-size chunks, each with its
    own generator, so the output does not depend on *threads*.
    """
    if checkpoint is None or checkpoint.encoder.transforms is None:
        raise StateError("sampling requires a fitted checkpoint")
    encoder = checkpoint.encoder
    model = checkpoint.model
    diffusion = GaussianMultinomialDiffusion.for_encoder(checkpoint.schedule, encoder)
    conditional = encoder.num_classes > 0

    if class_counts is not None:
        if not conditional:
            raise ValueError("class counts given for an unconditional (regression) model")
        bad = [c for c in class_counts if not 0 <= c < encoder.num_classes]
        if bad:
            raise IndexError(f"class ids {bad} outside [0, {encoder.num_classes})")
    else:
        if n is None:
            n = int(round(checkpoint.train_config.sample_proportion * encoder.train_size))
        if conditional:
            class_counts = allocate_class_counts(n, encoder.class_counts)

    if conditional:
        labels = np.concatenate(
            [np.full(count, c, dtype=np.int64) for c, count in sorted(class_counts.items())]
        ) if class_counts else np.zeros(0, dtype=np.int64)
        total = len(labels)
    else:
        labels = None
        total = n

    def run(chunk_index: int, start: int, stop: int) -> np.ndarray:
        rng = chunk_rng(seed, chunk_index)
        y = None if labels is None else labels[start:stop]
        return _run_chain(model, diffusion, stop - start, y, rng)

    log.info("Sampling %d rows over %d timesteps", total, checkpoint.schedule.T)
    parts = map_chunks(run, total, settings.sample_chunk_rows, threads)
    x = np.concatenate(parts, axis=0) if parts else np.zeros((0, diffusion.width))
    return encoder.decode(x, labels)
