"""Small dense-array engine with reverse-mode differentiation.

Every op returns a :class:`Tensor` that remembers its parents and a closure
that pushes the output gradient back to them.  ``backward`` walks the graph in
reverse topological order, so gradients accumulate additively at fan-out.

Only the handful of ops the denoiser needs are provided.  Broadcasting is
limited to what ``numpy`` does for ``add``/``mul`` (gradients are summed back
to the operand shape).
"""
from __future__ import annotations

import json
import struct
from typing import Callable, Iterable, Mapping

import numpy as np

DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Switch the engine between 64-bit (default) and 32-bit floats."""
    global DTYPE
    DTYPE = np.dtype(dtype).type


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=DTYPE)
        if arr.ndim and min(arr.shape) == 0:
            raise ShapeError(f"tensor dimensions must be positive, got {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        # never mutate in place: ``g`` may be shared with sibling parents
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        backward(self)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Iterable[Tensor], backward_fn) -> Tensor:
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a.data, b.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), bw)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        a._accumulate(g * c)

    return _make(a.data * c, (a,), bw)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def bw(g):
        a._accumulate(g * mask)

    return _make(a.data * mask, (a,), bw)


# ------------------------------------------------------------------- shaping

def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    old = a.shape

    def bw(g):
        a._accumulate(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), bw)


def transpose(a, axes: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    inverse = tuple(np.argsort(axes))

    def bw(g):
        a._accumulate(g.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), bw)


def concat_lastdim(tensors: list) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    lead = ts[0].shape[:-1]
    for t in ts[1:]:
        if t.shape[:-1] != lead:
            raise ShapeError(f"concat_lastdim: leading shapes differ {ts[0].shape} vs {t.shape}")
    widths = [t.shape[-1] for t in ts]
    bounds = np.cumsum([0] + widths)

    def bw(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t._accumulate(g[..., lo:hi])

    return _make(np.concatenate([t.data for t in ts], axis=-1), ts, bw)


# ------------------------------------------------------------ linear algebra

def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes (numpy semantics)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(a.data @ b.data, (a, b), bw)


def linear(x, W, b=None) -> Tensor:
    """``x @ W + b`` for ``x`` of shape (..., in), ``W`` (in, out), ``b`` (out,)."""
    x, W = as_tensor(x), as_tensor(W)
    if W.data.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {W.shape}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ShapeError(f"linear: bias {b.shape} does not match weight {W.shape}")
    x2 = x.data.reshape(-1, W.shape[0])
    out = x2 @ W.data
    if b is not None:
        out = out + b.data
    out = out.reshape(x.shape[:-1] + (W.shape[1],))
    parents = (x, W) if b is None else (x, W, b)

    def bw(g):
        g2 = g.reshape(-1, W.shape[1])
        if x.requires_grad:
            x._accumulate((g2 @ W.data.T).reshape(x.shape))
        if W.requires_grad:
            W._accumulate(x2.T @ g2)
        if b is not None and b.requires_grad:
            b._accumulate(g2.sum(axis=0))

    return _make(out, parents, bw)


# ------------------------------------------------------------- normalizers

MASKED = -np.inf


def softmax_lastdim(logits, additive_mask=None) -> Tensor:
    """Softmax over the last axis with an additive mask of 0 / -inf entries.

    Masked entries come out exactly 0.  A row with every entry masked returns
    all zeros (padding rows stay inert instead of producing NaN).
    """
    x = as_tensor(logits)
    z = x.data
    if additive_mask is not None:
        m = np.asarray(additive_mask)
        try:
            np.broadcast_shapes(m.shape, z.shape)
        except ValueError:
            raise ShapeError(
                f"softmax_lastdim: mask {m.shape} does not match logits {z.shape}"
            ) from None
        z = z + m
    zmax = np.max(z, axis=-1, keepdims=True)
    zmax[~np.isfinite(zmax)] = 0.0
    e = np.exp(z - zmax)
    total = e.sum(axis=-1, keepdims=True)
    total[total == 0] = np.inf
    s = e / total

    def bw(g):
        x._accumulate(s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return _make(s, (x,), bw)


def layernorm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layernorm: gain {gain.shape}/bias {bias.shape} vs input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def bw(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            x._accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True)
                       - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return _make(out, (x, gain, bias), bw)


# --------------------------------------------------------------- reductions

def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size

    def bw(g):
        a._accumulate(np.full(a.shape, g / n, dtype=DTYPE))

    return _make(np.asarray(a.data.mean()), (a,), bw)


def sum_of_squares(a) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        a._accumulate(2.0 * g * a.data)

    return _make(np.asarray(np.sum(a.data * a.data)), (a,), bw)


# ----------------------------------------------------------------- backward

def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    for node in order:
        if node._backward is not None:
            node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            # interior gradients are not needed once pushed to the parents
            node.grad = None
    loss.grad = np.ones_like(loss.data)


def gradients(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradient of ``loss`` for every named parameter; zeros where unused."""
    for p in params.values():
        p.grad = None
    backward(loss)
    return {
        k: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for k, p in params.items()
    }


# ---------------------------------------------------------------- optimizer

class AdamW:
    """Adam with bias correction and decoupled weight decay.

    Decay is applied to the pre-step parameter, independently of the
    gradient moments: ``p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)``.
    """

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for k, p in params.items():
            g = grads[k]
            if g.shape != p.data.shape:
                raise ShapeError(f"adamw: grad {g.shape} vs param {k} {p.data.shape}")
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data = p.data - self.lr * (update + self.weight_decay * p.data)

    def state_dict(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "weight_decay": self.weight_decay,
            "step": self.step_count,
        }


def adamw_step(params, grads, state: AdamW) -> None:
    state.step(params, grads)


# --------------------------------------------------------------- checkpoint

MAGIC = b"FDCKPT"
FORMAT_VERSION = 1


def save_checkpoint(path, params: Mapping[str, Tensor], optimizer: AdamW | None = None,
                    meta: dict | None = None) -> None:
    """Write a versioned binary checkpoint.

    Layout: magic, u32 version, u64 header length, UTF-8 JSON header, then
    raw little-endian float64 arrays in header order (parameters first,
    then optimizer first/second moments if present).
    """
    names = list(params)
    arrays = [params[k].data for k in names]
    header = {
        "params": [[k, list(params[k].shape)] for k in names],
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "meta": meta or {},
    }
    if optimizer is not None:
        arrays += [optimizer.m[k] for k in names] + [optimizer.v[k] for k in names]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, Tensor], AdamW | None, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a floordiff checkpoint")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<IQ", raw, off)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off += struct.calcsize("<IQ")
    header = json.loads(raw[off: off + hlen].decode("utf-8"))
    off += hlen

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        return arr.astype(DTYPE)

    params = {k: Tensor(take(tuple(s)), requires_grad=True, name=k) for k, s in header["params"]}
    opt = None
    if header["optimizer"] is not None:
        st = header["optimizer"]
        opt = AdamW(params, lr=st["lr"], betas=(st["beta1"], st["beta2"]),
                    eps=st["eps"], weight_decay=st["weight_decay"])
        opt.step_count = st["step"]
        for k, s in header["params"]:
            opt.m[k] = take(tuple(s))
        for k, s in header["params"]:
            opt.v[k] = take(tuple(s))
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return params, opt, header["meta"]
