"""Noise schedule, forward corruption and the ancestral reverse step."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ALPHA_MIN = 0.001


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal fraction ``gamma[t]`` for t = 0..T and per-step terms.

    ``alpha[t] = gamma[t] / gamma[t-1]``; ``beta = 1 - alpha``.  Index 0 of
    the per-step arrays is a placeholder (alpha 1, beta 0).
    """

    T: int
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    posterior_variance: np.ndarray
    posterior_coef_x0: np.ndarray
    posterior_coef_xt: np.ndarray

    def check_t(self, t) -> None:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"t must lie in [1, {self.T}], got {t}")


def schedule_from_gamma(gamma) -> NoiseSchedule:
    gamma = np.asarray(gamma, dtype=np.float64)
    T = len(gamma) - 1
    alpha = np.ones(T + 1)
    alpha[1:] = gamma[1:] / gamma[:-1]
    beta = 1.0 - alpha
    prev = np.concatenate([[1.0], gamma[:-1]])
    one_minus = 1.0 - gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(one_minus > 0, beta * (1.0 - prev) / one_minus, 0.0)
        c0 = np.where(one_minus > 0, beta * np.sqrt(prev) / one_minus, 1.0)
        ct = np.where(one_minus > 0, (1.0 - prev) * np.sqrt(alpha) / one_minus, 0.0)
    return NoiseSchedule(T, gamma, alpha, beta, var, c0, ct)


def cosine_schedule(T: int, s: float = 0.008) -> NoiseSchedule:
    """Cosine schedule ``gamma_t = f(t)/f(0)``, ``f(t) = cos^2(pi/2 (t/T+s)/(1+s))``,
    with per-step alpha clamped to [0.001, 1]."""
    if T < 1:
        raise ValueError("T must be >= 1")
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos((t / T + s) / (1.0 + s) * math.pi / 2.0) ** 2
    raw = f / f[0]
    alpha = np.clip(raw[1:] / raw[:-1], ALPHA_MIN, 1.0)
    gamma = np.concatenate([[1.0], np.cumprod(alpha)])
    return schedule_from_gamma(gamma)


def linear_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear-beta schedule, kept for comparison with the cosine default."""
    betas = np.linspace(beta_start * 1000 / T, beta_end * 1000 / T, T)
    gamma = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return schedule_from_gamma(gamma)


def _per_sample(values: np.ndarray, t, ndim: int) -> np.ndarray:
    v = values[np.asarray(t)]
    return v.reshape(v.shape + (1,) * (ndim - v.ndim))


def forward_sample(x0, t, eps, sched: NoiseSchedule) -> np.ndarray:
    """``x_t = sqrt(gamma_t) x0 + sqrt(1 - gamma_t) eps``; ``t`` scalar or per leading-axis item."""
    x0 = np.asarray(x0, dtype=np.float64)
    g = _per_sample(sched.gamma, t, x0.ndim)
    return np.sqrt(g) * x0 + np.sqrt(1.0 - g) * np.asarray(eps)


def x0_from_eps(x_t, t, eps_hat, sched: NoiseSchedule) -> np.ndarray:
    sched.check_t(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    g = _per_sample(sched.gamma, t, x_t.ndim)
    return (x_t - np.sqrt(1.0 - g) * np.asarray(eps_hat)) / np.sqrt(g)


def posterior_mean(x0, x_t, t, sched: NoiseSchedule) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=np.float64)
    c0 = _per_sample(sched.posterior_coef_x0, t, x_t.ndim)
    ct = _per_sample(sched.posterior_coef_xt, t, x_t.ndim)
    return c0 * np.asarray(x0) + ct * x_t


def reverse_step(x_t, t: int, eps_hat, sched: NoiseSchedule, rng: np.random.Generator,
                 x0_override=None, clip_denoised: bool = False) -> np.ndarray:
    """One ancestral step x_t -> x_{t-1} with the fixed small posterior variance.

    No noise is injected at t = 1.  If ``x0_override`` is given it replaces the
    clean-sample estimate and ``eps_hat`` is ignored.
    """
    if not 1 <= t <= sched.T:
        raise ValueError(f"t must lie in [1, {sched.T}], got {t}")
    x_t = np.asarray(x_t, dtype=np.float64)
    if x0_override is not None:
        x0 = np.asarray(x0_override, dtype=np.float64)
    else:
        x0 = x0_from_eps(x_t, t, eps_hat, sched)
    if clip_denoised:
        x0 = np.clip(x0, -1.0, 1.0)
    mean = posterior_mean(x0, x_t, t, sched)
    if t == 1:
        return mean
    z = rng.standard_normal(x_t.shape)
    return mean + np.sqrt(sched.posterior_variance[t]) * z


# ------------------------------------------------------------------ sampler

def sample_batch(model, diagrams, rngs, hist=None, overrides=None, clip_denoised: bool = True,
                 sched: NoiseSchedule | None = None, hook=None):
    """Generate one floorplan per diagram, each driven by its own RNG stream.

    Starting from Gaussian coordinates, steps t = T..1 are run.  For
    t < ``t_disc_test`` the discrete head's thresholded integer coordinates
    (mapped back to [-1, 1]) replace the clean-sample estimate.  The output
    corners are the discrete head's integers at t = 1.
    ``hook(t, override_active, x0_hat)`` is called once per step.
    """
    from .denoiser import decode_bits, forward_continuous, forward_discrete, prepare_batch
    from .floorplan import Floorplan, Loop, dequantize, sample_corner_counts

    cfg = model.config
    sched = sched if sched is not None else cosine_schedule(cfg.T)
    if sched.T != cfg.T:
        raise ValueError(f"schedule has T={sched.T}, model expects T={cfg.T}")
    hist = model.histogram if hist is None else hist
    for d in diagrams:
        d.check()
    counts = [sample_corner_counts(hist, d, overrides, r) for d, r in zip(diagrams, rngs)]
    batch = prepare_batch(diagrams, counts, cfg)
    B, n = batch.shape
    real = batch.real[..., None]
    x = np.zeros((B, n, 2))
    for b, r in enumerate(rngs):
        x[b, : sum(counts[b])] = r.standard_normal((sum(counts[b]), 2))

    ints = None
    for t in range(sched.T, 0, -1):
        pred = forward_continuous(model.params, batch, x, t, cfg).data
        if cfg.target == "eps":
            x0_hat = x0_from_eps(x, t, pred, sched)
        else:
            x0_hat = pred
        if clip_denoised:
            x0_hat = np.clip(x0_hat, -1.0, 1.0)
        active = t < cfg.t_disc_test
        if active or (t == 1 and ints is None):
            ints = decode_bits(forward_discrete(model.params, batch, x0_hat, t, cfg))
        if active:
            x0_hat = dequantize(ints)
        if hook is not None:
            hook(t, active, x0_hat)
        x = posterior_mean(x0_hat, x, t, sched)
        if t > 1:
            sd = np.sqrt(sched.posterior_variance[t])
            for b, r in enumerate(rngs):
                m = sum(counts[b])
                x[b, :m] += sd * r.standard_normal((m, 2))
        x = x * real

    plans = []
    for b, d in enumerate(diagrams):
        loops, slot = [], 0
        for kind, cnt in zip(d.kinds, counts[b]):
            loops.append(Loop(kind, tuple(map(tuple, ints[b, slot: slot + cnt]))))
            slot += cnt
        plans.append(Floorplan(tuple(loops)))
    return plans


def sample(model, diagram, rng: np.random.Generator, hist=None, overrides=None, **kwargs):
    """Single-diagram convenience wrapper around :func:`sample_batch`."""
    return sample_batch(model, [diagram], [rng], hist=hist, overrides=overrides, **kwargs)[0]
