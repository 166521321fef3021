"""Training loop, checkpointing and the single-plan overfit harness."""
from __future__ import annotations

import configparser
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import engine as E
from .dataset import Corpus, build_histogram, histogram_from_json, histogram_to_json
from .denoiser import (DenoiserConfig, Model, continuous_loss, discrete_loss, forward_continuous,
                       forward_discrete, init_params, int2bit, prepare_batch)
from .diffusion import cosine_schedule, forward_sample, sample_batch, x0_from_eps
from .evaluate import compatibility, reconstruct_bubble_diagram
from .floorplan import dequantize

log = logging.getLogger(__name__)


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: DenoiserConfig = field(default_factory=lambda: DenoiserConfig(T=100))
    batch_size: int = 16
    total_steps: int = 20000
    lr: float = 1e-3
    decay_interval: int | None = 8000   # divide lr by 10 every interval; None disables
    weight_decay: float = 0.01
    seed: int = 0
    eval_every: int = 0                 # 0 disables periodic evaluation
    checkpoint_every: int = 0
    log_every: int = 100

    def __post_init__(self):
        for name in ("batch_size", "total_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive and weight_decay non-negative")
        if self.decay_interval is not None and not 0 < self.decay_interval:
            raise ValueError("decay_interval must be positive or None")

    @property
    def T(self) -> int:
        return self.model.T

    def lr_at(self, step: int) -> float:
        """Learning rate for 0-based ``step``."""
        if not self.decay_interval:
            return self.lr
        return self.lr * 0.1 ** (step // self.decay_interval)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        model = DenoiserConfig(**d.pop("model", {}))
        return cls(model=model, **d)


_MODEL_KEYS = {f.name: f.type for f in dataclasses.fields(DenoiserConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"model"}


def _coerce(raw: str):
    low = raw.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw.strip()


def load_config(path) -> TrainConfig:
    """Read an INI-style config with ``[train]`` and ``[model]`` sections.

    Unknown keys are rejected.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    unknown_sections = set(parser.sections()) - {"train", "model"}
    if unknown_sections:
        raise ValueError(f"unknown config sections: {sorted(unknown_sections)}")
    train = {k: _coerce(v) for k, v in parser["train"].items()} if parser.has_section("train") else {}
    model = {k: _coerce(v) for k, v in parser["model"].items()} if parser.has_section("model") else {}
    bad = (set(train) - _TRAIN_KEYS) | {f"model.{k}" for k in set(model) - set(_MODEL_KEYS)}
    if bad:
        raise ValueError(f"unknown config keys: {sorted(bad)}")
    return TrainConfig(model=DenoiserConfig(**model), **train)


# ----------------------------------------------------------------- batches

def plan_targets(plans):
    """Integer corners (n_i, 2) per plan in loop order, plus per-loop counts."""
    ints, counts = [], []
    for plan in plans:
        ints.append(np.array([c for lp in plan.loops for c in lp.corners], dtype=np.int64))
        counts.append([len(lp.corners) for lp in plan.loops])
    return ints, counts


@dataclass
class StepResult:
    loss: float
    t: np.ndarray
    grad_norms: dict
    discrete_active: int


def train_step(model: Model, optimizer: E.AdamW, items, sched, config: TrainConfig,
               rng: np.random.Generator, lr: float | None = None, step: int = 0,
               t=None) -> StepResult:
    """One optimizer update on ``items`` (a list of (Floorplan, BubbleDiagram)).

    ``t`` fixes the per-plan diffusion steps instead of drawing them.
    """
    cfg = model.config
    params = model.params
    plans = [p for p, _ in items]
    diagrams = [d for _, d in items]
    ints, counts = plan_targets(plans)
    batch = prepare_batch(diagrams, counts, cfg)
    B, n = batch.shape
    real = batch.real
    target_ints = batch.scatter(ints, 2).astype(np.int64)
    x0 = dequantize(target_ints) * real[..., None]

    if t is None:
        t = rng.integers(1, sched.T + 1, size=B)
    else:
        t = np.broadcast_to(np.asarray(t, dtype=np.int64), (B,)).copy()
        sched.check_t(t)
    eps = rng.standard_normal((B, n, 2)) * real[..., None]
    x_t = forward_sample(x0, t, eps, sched)

    pred = forward_continuous(params, batch, x_t, t, cfg)
    total = continuous_loss(pred, eps if cfg.target == "eps" else x0, real)
    if not np.isfinite(total.data):
        raise NonFiniteLoss(f"non-finite continuous loss at step {step}: t={t.tolist()}")

    rows = np.flatnonzero(t < cfg.t_disc_train)
    if rows.size:
        if cfg.target == "eps":
            x0_hat = x0_from_eps(x_t[rows], t[rows], pred.data[rows], sched)
        else:
            x0_hat = pred.data[rows]
        sub = batch.subset(rows)
        bits_hat = forward_discrete(params, sub, x0_hat * sub.real[..., None], t[rows], cfg)
        bits_true = int2bit(np.clip(target_ints[rows], 0, 255))
        term = discrete_loss(bits_hat, bits_true, sub.real)
        if term is not None:
            total = E.add(total, term)

    value = float(total.data)
    grads = E.gradients(total, params)
    norms = {
        "continuous": math.sqrt(sum(float(np.sum(g * g)) for k, g in grads.items() if k.startswith("cont."))),
        "discrete": math.sqrt(sum(float(np.sum(g * g)) for k, g in grads.items() if k.startswith("disc."))),
    }
    if not math.isfinite(value) or not all(math.isfinite(v) for v in norms.values()):
        raise NonFiniteLoss(f"non-finite loss at step {step}: loss={value}, t={t.tolist()}, grad norms={norms}")
    if lr is not None:
        optimizer.lr = lr
    optimizer.step(params, grads)
    return StepResult(value, t, norms, int(rows.size))


# ---------------------------------------------------------------- trainer

@dataclass
class Trainer:
    model: Model
    optimizer: E.AdamW
    config: TrainConfig
    rng: np.random.Generator
    step: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def create(cls, corpus: Corpus, config: TrainConfig) -> "Trainer":
        if not len(corpus):
            raise ValueError("cannot train on an empty corpus")
        seeds = np.random.SeedSequence(config.seed).spawn(2)
        params = init_params(config.model, np.random.default_rng(seeds[0]))
        model = Model(params, config.model, build_histogram(corpus))
        opt = E.AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
        return cls(model, opt, config, np.random.default_rng(seeds[1]))

    def run(self, corpus: Corpus, steps: int | None = None, checkpoint_path=None,
            log_file=None, eval_diagrams=None, callback=None) -> "Trainer":
        sched = cosine_schedule(self.config.T)
        end = self.config.total_steps if steps is None else min(self.config.total_steps, self.step + steps)
        plans = corpus.plans
        started = time.time()
        while self.step < end:
            idx = self.rng.integers(len(plans), size=self.config.batch_size)
            lr = self.config.lr_at(self.step)
            res = train_step(self.model, self.optimizer, [plans[i] for i in idx], sched,
                             self.config, self.rng, lr=lr, step=self.step)
            self.step += 1
            self.history.append(res.loss)
            if log_file is not None and (self.step % self.config.log_every == 0 or self.step == end):
                log_file.write(json.dumps({"step": self.step, "loss": res.loss, "lr": lr,
                                           "wall": round(time.time() - started, 3)}) + "\n")
                log_file.flush()
            if callback is not None:
                callback(self, res)
            if eval_diagrams and self.config.eval_every and self.step % self.config.eval_every == 0:
                score = mean_compatibility(self.model, eval_diagrams, seed=self.config.seed)
                log.info("step %d: mean compatibility %.3f", self.step, score)
            if checkpoint_path and self.config.checkpoint_every and self.step % self.config.checkpoint_every == 0:
                self.save(checkpoint_path)
        if checkpoint_path:
            self.save(checkpoint_path)
        return self

    def save(self, path) -> None:
        meta = {
            "train_config": self.config.to_dict(),
            "histogram": histogram_to_json(self.model.histogram),
            "step": self.step,
            "rng_state": self.rng.bit_generator.state,
        }
        try:
            E.save_checkpoint(path, self.model.params, self.optimizer, meta)
        except OSError as exc:
            raise RuntimeError(f"checkpoint write to {path} failed at step {self.step}; "
                               "in-memory trainer state is intact and can be saved elsewhere") from exc

    @classmethod
    def load(cls, path) -> "Trainer":
        params, opt, meta = E.load_checkpoint(path)
        config = TrainConfig.from_dict(meta["train_config"])
        model = Model(params, config.model, histogram_from_json(meta["histogram"]))
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng_state"]
        if opt is None:
            opt = E.AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
        return cls(model, opt, config, rng, step=int(meta["step"]))


def load_model(path) -> Model:
    """Model snapshot from a training checkpoint."""
    params, _, meta = E.load_checkpoint(path)
    config = TrainConfig.from_dict(meta["train_config"]).model
    return Model(params, config, histogram_from_json(meta["histogram"]))


def train(corpus: Corpus, config: TrainConfig, checkpoint_path=None, log_file=None,
          eval_diagrams=None) -> Trainer:
    return Trainer.create(corpus, config).run(corpus, checkpoint_path=checkpoint_path,
                                              log_file=log_file, eval_diagrams=eval_diagrams)


def mean_compatibility(model: Model, diagrams, seed: int = 0, tol: float = 2.0) -> float:
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(diagrams))]
    plans = sample_batch(model, list(diagrams), rngs)
    return float(np.mean([compatibility(d, reconstruct_bubble_diagram(p, tol)).value
                          for p, d in zip(plans, diagrams)]))


# ----------------------------------------------------------------- overfit

@dataclass
class OverfitResult:
    trainer: Trainer
    reproduced: bool
    steps: int
    sampled: object


def overfit_single(plan, diagram, config: TrainConfig, check_every: int = 500,
                   sample_seed: int = 0, checkpoint_path=None) -> OverfitResult:
    """Train on one plan until a sample reproduces its integer corners."""
    corpus = Corpus([(plan, diagram)], "synthetic")
    trainer = Trainer.create(corpus, config)
    overrides = {i: len(lp.corners) for i, lp in enumerate(plan.loops)}
    sampled = None
    while trainer.step < config.total_steps:
        trainer.run(corpus, steps=check_every)
        sampled = sample_batch(trainer.model, [diagram], [np.random.default_rng(sample_seed)],
                               overrides=overrides)[0]
        if sampled == plan:
            break
    if checkpoint_path:
        trainer.save(checkpoint_path)
    return OverfitResult(trainer, sampled == plan, trainer.step, sampled)
