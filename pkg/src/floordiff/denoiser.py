"""Masked-attention transformer denoiser with continuous and discrete heads.

Each corner is one token.  Three attentions run side by side in every block:

* CSA, corners of the same loop;
* GSA, every pair of real corners;
* RCA, corners of room/door loops connected in the bubble diagram.

Their outputs are summed and passed through a residual LayerNorm.  The
continuous head predicts the per-corner noise (or the clean coordinate, see
``DenoiserConfig.target``); the discrete head reads a quantized clean-sample
estimate and predicts the 8-bit binary code of each coordinate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import engine as E
from .floorplan import (MAX_COMPONENTS, MAX_CORNERS, BubbleDiagram, ComponentType,
                        augment_corners, build_component_graph, quantize)

ATTENTION_KINDS = ("csa", "gsa", "rca")


@dataclass
class DenoiserConfig:
    d: int = 64
    heads: int = 4
    blocks_continuous: int = 4
    blocks_discrete: int = 2
    L: int = 8
    t_disc_train: int = 20
    t_disc_test: int = 32
    room_type_dim: int = 25
    index_dim: int = 32
    bits: int = 8
    T: int = 1000
    time_encoding: str = "fraction"   # "fraction" feeds t/T, "raw" feeds t
    ffn: bool = False
    target: str = "eps"               # "eps" or "x0"

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if self.bits != 8:
            raise ValueError("coordinates are 8-bit; bits must be 8")
        if self.t_disc_train > self.T or self.t_disc_test > self.T:
            raise ValueError("discrete thresholds must not exceed T")
        if self.time_encoding not in ("fraction", "raw"):
            raise ValueError(f"unknown time encoding {self.time_encoding!r}")
        if self.target not in ("eps", "x0"):
            raise ValueError(f"unknown target {self.target!r}")

    @property
    def au_dim(self) -> int:
        return 2 * (self.L + 1)

    @property
    def continuous_in(self) -> int:
        return self.au_dim + self.room_type_dim + 2 * self.index_dim + 1

    @property
    def discrete_in(self) -> int:
        return self.au_dim + 2 * self.bits + self.room_type_dim + 2 * self.index_dim + 1

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- int2bit

_WEIGHTS = 1 << np.arange(7, -1, -1)


def int2bit(v) -> np.ndarray:
    """MSB-first 8-bit code of integer(s) in [0, 255]; adds a trailing axis of 8."""
    v = np.asarray(v)
    if np.any(v < 0) or np.any(v > 255) or np.any(v != np.floor(v)):
        raise ValueError("int2bit expects integers in [0, 255]")
    v = v.astype(np.int64)
    return ((v[..., None] & _WEIGHTS) > 0).astype(np.float64)


def bit2int(bits) -> np.ndarray:
    """Threshold at 0.5 and decode MSB-first bits (last axis of length 8)."""
    bits = np.asarray(bits, dtype=np.float64)
    if bits.shape[-1] != 8:
        raise ValueError(f"bit2int expects a trailing axis of 8, got {bits.shape}")
    return ((bits > 0.5).astype(np.int64) * _WEIGHTS).sum(axis=-1)


# ------------------------------------------------------------------ masks

@dataclass
class AttentionMasks:
    csa: np.ndarray
    gsa: np.ndarray
    rca: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"csa": self.csa, "gsa": self.gsa, "rca": self.rca}


def build_masks(graph, component: np.ndarray) -> AttentionMasks:
    """Masks over corner pairs; ``component[a]`` is the loop of corner ``a``
    (-1 for padding)."""
    component = np.asarray(component)
    real = component >= 0
    both = real[:, None] & real[None, :]
    same = (component[:, None] == component[None, :]) & both
    safe = np.where(real, component, 0)
    adj = np.asarray(graph.adjacency, dtype=bool)
    rca = adj[safe[:, None], safe[None, :]] & both
    return AttentionMasks(csa=same, gsa=both, rca=rca)


# -------------------------------------------------------------- conditioning

@dataclass
class CornerBatch:
    """Per-corner conditioning for a padded batch of B plans with n slots."""

    room_type: np.ndarray      # (B, n, 25)
    comp_onehot: np.ndarray    # (B, n, 32)
    corner_onehot: np.ndarray  # (B, n, 32)
    next_index: np.ndarray     # (B, n) slot of the next corner in the same loop
    component: np.ndarray      # (B, n) loop index, -1 for padding
    real: np.ndarray           # (B, n) bool
    masks: dict = field(default_factory=dict)   # kind -> (B, n, n) bool
    corner_counts: list = field(default_factory=list)
    diagrams: list = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.real.shape

    def additive_mask(self, kind: str) -> np.ndarray:
        return np.where(self.masks[kind], 0.0, -np.inf)[:, None, :, :]

    def subset(self, rows) -> "CornerBatch":
        rows = np.asarray(rows)
        return CornerBatch(
            self.room_type[rows], self.comp_onehot[rows], self.corner_onehot[rows],
            self.next_index[rows], self.component[rows], self.real[rows],
            {k: v[rows] for k, v in self.masks.items()},
            [self.corner_counts[r] for r in rows], [self.diagrams[r] for r in rows],
        )

    def scatter(self, per_plan: Sequence[np.ndarray], width: int) -> np.ndarray:
        """Pack per-plan (n_corners, width) arrays into a zero-padded (B, n, width)."""
        B, n = self.shape
        out = np.zeros((B, n, width))
        for b, arr in enumerate(per_plan):
            out[b, : len(arr)] = arr
        return out


def prepare_batch(diagrams: Sequence[BubbleDiagram], corner_counts: Sequence[Sequence[int]],
                  config: DenoiserConfig, n_slots: int | None = None) -> CornerBatch:
    """Lay out corners loop by loop (rooms, then doors), pad to ``n_slots``."""
    totals = [sum(c) for c in corner_counts]
    n = max(totals) if n_slots is None else n_slots
    if n < max(totals):
        raise ValueError("n_slots smaller than the largest plan")
    B = len(diagrams)
    room_type = np.zeros((B, n, config.room_type_dim))
    comp_oh = np.zeros((B, n, config.index_dim))
    corner_oh = np.zeros((B, n, config.index_dim))
    next_index = np.tile(np.arange(n), (B, 1))
    component = np.full((B, n), -1, dtype=np.int64)
    masks = {k: np.zeros((B, n, n), dtype=bool) for k in ATTENTION_KINDS}
    for b, (diagram, counts) in enumerate(zip(diagrams, corner_counts)):
        kinds = diagram.kinds
        if len(kinds) != len(counts):
            raise ValueError("corner_counts must list one count per component")
        if len(kinds) > min(MAX_COMPONENTS, config.index_dim):
            raise ValueError(f"{len(kinds)} components exceed one-hot capacity {config.index_dim}")
        slot = 0
        for i, (kind, cnt) in enumerate(zip(kinds, counts)):
            if cnt > min(MAX_CORNERS, config.index_dim):
                raise ValueError(f"{cnt} corners exceed one-hot capacity {config.index_dim}")
            for j in range(cnt):
                s = slot + j
                room_type[b, s, kind.index] = 1.0
                comp_oh[b, s, i] = 1.0
                corner_oh[b, s, j] = 1.0
                component[b, s] = i
                next_index[b, s] = slot + (j + 1) % cnt
            slot += cnt
        m = build_masks(build_component_graph(diagram), component[b])
        masks["csa"][b], masks["gsa"][b], masks["rca"][b] = m.csa, m.gsa, m.rca
    return CornerBatch(room_type, comp_oh, corner_oh, next_index, component,
                       component >= 0, masks, [list(c) for c in corner_counts], list(diagrams))


# ------------------------------------------------------------------ params

def _attention_shapes(prefix: str, d: int) -> dict[str, tuple]:
    shapes = {}
    for kind in ATTENTION_KINDS:
        for proj in ("q", "k", "v", "o"):
            shapes[f"{prefix}.{kind}.W{proj}"] = (d, d)
            shapes[f"{prefix}.{kind}.b{proj}"] = (d,)
    shapes[f"{prefix}.norm.gain"] = (d,)
    shapes[f"{prefix}.norm.bias"] = (d,)
    return shapes


def _ffn_shapes(prefix: str, d: int) -> dict[str, tuple]:
    return {f"{prefix}.ffn.W1": (d, 2 * d), f"{prefix}.ffn.b1": (2 * d,),
            f"{prefix}.ffn.W2": (2 * d, d), f"{prefix}.ffn.b2": (d,),
            f"{prefix}.ffn_norm.gain": (d,), f"{prefix}.ffn_norm.bias": (d,)}


def param_shapes(config: DenoiserConfig) -> dict[str, tuple]:
    d = config.d
    shapes = {"cont.embed.W": (config.continuous_in, d), "cont.embed.b": (d,)}
    for k in range(config.blocks_continuous):
        shapes.update(_attention_shapes(f"cont.block{k}", d))
        if config.ffn:
            shapes.update(_ffn_shapes(f"cont.block{k}", d))
    shapes.update({"cont.head.W": (d, 2), "cont.head.b": (2,)})
    shapes.update({"disc.embed.W": (config.discrete_in, d), "disc.embed.b": (d,)})
    for k in range(config.blocks_discrete):
        shapes.update(_attention_shapes(f"disc.block{k}", d))
        if config.ffn:
            shapes.update(_ffn_shapes(f"disc.block{k}", d))
    shapes.update({"disc.head.W": (d, 2 * config.bits), "disc.head.b": (2 * config.bits,)})
    return shapes


def init_params(config: DenoiserConfig, rng: np.random.Generator) -> dict[str, E.Tensor]:
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".gain"):
            arr = np.ones(shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            arr = rng.standard_normal(shape) / math.sqrt(shape[0])
        params[name] = E.Tensor(arr, requires_grad=True, name=name)
    return params


def num_parameters(config: DenoiserConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


# ----------------------------------------------------------------- forward

def _time_feature(t, batch: CornerBatch, config: DenoiserConfig) -> np.ndarray:
    B, n = batch.shape
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (B,))
    if config.time_encoding == "fraction":
        t = t / config.T
    return np.broadcast_to(t[:, None, None], (B, n, 1))


def _attention(h, p, prefix, add_mask, heads, record=None, tag=None):
    B, n, d = h.shape
    dh = d // heads

    def split(x):
        return E.transpose(E.reshape(x, (B, n, heads, dh)), (0, 2, 1, 3))

    q = split(E.linear(h, p[f"{prefix}.Wq"], p[f"{prefix}.bq"]))
    k = split(E.linear(h, p[f"{prefix}.Wk"], p[f"{prefix}.bk"]))
    v = split(E.linear(h, p[f"{prefix}.Wv"], p[f"{prefix}.bv"]))
    logits = E.scale(E.matmul(q, E.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    weights = E.softmax_lastdim(logits, add_mask)
    if record is not None:
        record.append((tag, weights.data))
    ctx = E.reshape(E.transpose(E.matmul(weights, v), (0, 2, 1, 3)), (B, n, d))
    return E.linear(ctx, p[f"{prefix}.Wo"], p[f"{prefix}.bo"])


def _blocks(h, params, batch: CornerBatch, config: DenoiserConfig, branch: str,
            count: int, record=None, attention_outputs=None):
    masks = {kind: batch.additive_mask(kind) for kind in ATTENTION_KINDS}
    for k in range(count):
        prefix = f"{branch}.block{k}"
        outs = [
            _attention(h, params, f"{prefix}.{kind}", masks[kind], config.heads,
                       record, (prefix, kind))
            for kind in ATTENTION_KINDS
        ]
        if attention_outputs is not None:
            attention_outputs.append([o.data for o in outs])
        total = E.add(E.add(outs[0], outs[1]), outs[2])
        h = E.layernorm(E.add(h, total), params[f"{prefix}.norm.gain"], params[f"{prefix}.norm.bias"])
        if config.ffn:
            f = E.relu(E.linear(h, params[f"{prefix}.ffn.W1"], params[f"{prefix}.ffn.b1"]))
            f = E.linear(f, params[f"{prefix}.ffn.W2"], params[f"{prefix}.ffn.b2"])
            h = E.layernorm(E.add(h, f), params[f"{prefix}.ffn_norm.gain"],
                            params[f"{prefix}.ffn_norm.bias"])
    return h


def continuous_features(coords: np.ndarray, t, batch: CornerBatch, config: DenoiserConfig) -> np.ndarray:
    au = augment_corners(np.asarray(coords, dtype=np.float64), batch.next_index, config.L)
    feats = np.concatenate([au, batch.room_type, batch.comp_onehot, batch.corner_onehot,
                            _time_feature(t, batch, config)], axis=-1)
    if feats.shape[-1] != config.continuous_in:
        raise AssertionError(f"continuous embedding width {feats.shape[-1]} != {config.continuous_in}")
    return feats * batch.real[..., None]


def discrete_features(x0: np.ndarray, t, batch: CornerBatch, config: DenoiserConfig) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    if not np.all(np.isfinite(x0)):
        raise ValueError("discrete head received non-finite clean-sample estimate")
    clipped = np.clip(x0, -1.0, 1.0)
    bits = int2bit(quantize(clipped)).reshape(x0.shape[:-1] + (2 * config.bits,))
    au = augment_corners(clipped, batch.next_index, config.L)
    feats = np.concatenate([au, bits, batch.room_type, batch.comp_onehot, batch.corner_onehot,
                            _time_feature(t, batch, config)], axis=-1)
    if feats.shape[-1] != config.discrete_in:
        raise AssertionError(f"discrete embedding width {feats.shape[-1]} != {config.discrete_in}")
    return feats * batch.real[..., None]


def embed_continuous(coords, t, batch: CornerBatch, config: DenoiserConfig, params) -> E.Tensor:
    feats = continuous_features(coords, t, batch, config)
    return E.linear(feats, params["cont.embed.W"], params["cont.embed.b"])


def forward_continuous(params, batch: CornerBatch, coords, t, config: DenoiserConfig,
                       record=None, attention_outputs=None) -> E.Tensor:
    """Per-corner continuous prediction, shape (B, n, 2)."""
    h = embed_continuous(coords, t, batch, config, params)
    h = _blocks(h, params, batch, config, "cont", config.blocks_continuous, record, attention_outputs)
    return E.linear(h, params["cont.head.W"], params["cont.head.b"])


def forward_discrete(params, batch: CornerBatch, x0_estimate, t, config: DenoiserConfig,
                     record=None) -> E.Tensor:
    """Raw bit predictions, shape (B, n, 2, 8).  Use :func:`decode_bits` at inference."""
    feats = discrete_features(x0_estimate, t, batch, config)
    h = E.linear(feats, params["disc.embed.W"], params["disc.embed.b"])
    h = _blocks(h, params, batch, config, "disc", config.blocks_discrete, record)
    out = E.linear(h, params["disc.head.W"], params["disc.head.b"])
    B, n, _ = out.shape
    return E.reshape(out, (B, n, 2, config.bits))


def decode_bits(bits) -> np.ndarray:
    """Thresholded integer coordinates (B, n, 2) from raw (B, n, 2, 8) predictions."""
    return bit2int(np.asarray(bits.data if isinstance(bits, E.Tensor) else bits))


# -------------------------------------------------------------------- loss

def continuous_loss(pred, target, real=None) -> E.Tensor:
    """Mean squared error over the real corners."""
    pred = E.as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise E.ShapeError(f"loss: prediction {pred.shape} vs target {target.shape}")
    real = np.ones(target.shape[:-1], dtype=bool) if real is None else np.asarray(real, dtype=bool)
    diff = E.mul(E.sub(pred, target), real[..., None].astype(np.float64))
    return E.scale(E.sum_of_squares(diff), 1.0 / (real.sum() * target.shape[-1]))


def discrete_loss(bits_hat, bits_true, active) -> E.Tensor | None:
    """Mean squared error of raw bit predictions (B, n, 2, 8) over ``active`` corners."""
    bits_hat = E.as_tensor(bits_hat)
    bits_true = np.asarray(bits_true, dtype=np.float64)
    if bits_hat.shape != bits_true.shape:
        raise E.ShapeError(f"loss: bits {bits_hat.shape} vs target {bits_true.shape}")
    active = np.asarray(active, dtype=bool)
    count = active.sum()
    if count == 0:
        return None
    w = active[..., None, None].astype(np.float64)
    diff = E.mul(E.sub(bits_hat, bits_true), w)
    return E.scale(E.sum_of_squares(diff), 1.0 / (count * bits_true.shape[-1] * bits_true.shape[-2]))


def discrete_active(t, config: DenoiserConfig) -> np.ndarray:
    return np.asarray(t) < config.t_disc_train


def loss(eps_hat, eps_true, bits_hat, bits_true, t, config: DenoiserConfig,
         real=None) -> E.Tensor:
    """Continuous MSE plus, for samples with t < t_disc_train, bit MSE; weight 1 each.

    Arrays are batched (B, n, ...); ``t`` is a scalar or one step per plan.
    Padding corners (``real`` False) are excluded from both means.
    """
    total = continuous_loss(eps_hat, eps_true, real)
    if bits_hat is None:
        return total
    B, n = np.asarray(eps_true).shape[:2]
    real = np.ones((B, n), dtype=bool) if real is None else np.asarray(real, dtype=bool)
    on = np.broadcast_to(discrete_active(t, config), (B,))
    term = discrete_loss(bits_hat, bits_true, real & on[:, None])
    return total if term is None else E.add(total, term)


# ------------------------------------------------------------------- model

@dataclass
class Model:
    """Parameter snapshot plus the config and corner histogram it was trained with."""

    params: dict
    config: DenoiserConfig
    histogram: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, config: DenoiserConfig, seed: int = 0, histogram=None) -> "Model":
        return cls(init_params(config, np.random.default_rng(seed)), config, dict(histogram or {}))
