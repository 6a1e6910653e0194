"""Minimal reverse-mode autodiff over 64-bit numpy arrays.

Every op builds a Tensor holding its forward value and a closure that
scatters incoming gradients to its parents. backward() walks the graph in
reverse topological order iteratively, so gradients through long recurrent
chains never touch the Python recursion limit. All math is float64 and
single-threaded, which keeps repeated runs bit-identical.
"""

from __future__ import annotations

import math
import struct

import numpy as np

CHECKPOINT_MAGIC = b"UCKP"
CHECKPOINT_VERSION = 1


class AutodiffError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "used")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = parents
        self.backward_fn = backward_fn
        self.used = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    out.backward_fn = backward_fn
    return out


def add_const(a: Tensor, c) -> Tensor:
    out = Tensor(a.data + np.asarray(c, dtype=np.float64), parents=(a,))
    out.backward_fn = lambda g: _accum(a, _unbroadcast(g, a.data.shape))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward_fn(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    out.backward_fn = backward_fn
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, parents=(a,))
    out.backward_fn = lambda g: _accum(a, g * s)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes. Operands must carry
    identical leading (batch) shapes; use reshape for vectors."""
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[:-2] != b.data.shape[:-2]:
        raise AutodiffError(
            f"matmul needs aligned >=2-d operands, got {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(np.matmul(a.data, b.data), parents=(a, b))

    def backward_fn(g):
        _accum(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        _accum(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    out.backward_fn = backward_fn
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape), parents=(a,))
    out.backward_fn = lambda g: _accum(a, g.reshape(a.data.shape))
    return out


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    out = Tensor(np.swapaxes(a.data, i, j), parents=(a,))
    out.backward_fn = lambda g: _accum(a, np.swapaxes(g, i, j))
    return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]

    def backward_fn(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + size)
            _accum(t, g[tuple(index)])
            offset += size

    out.backward_fn = backward_fn
    return out


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a (V, d) table; gradients scatter-add back, so only
    the rows of used ids receive gradient."""
    idx = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[idx], parents=(table,))

    def backward_fn(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    out.backward_fn = backward_fn
    return out


gather_rows = embedding_lookup


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gamma.data + beta.data, parents=(x, gamma, beta))
    n = x.data.shape[-1]

    def backward_fn(g):
        dxhat = g * gamma.data
        dx = (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        ) * inv
        _accum(x, dx)
        lead = tuple(range(g.ndim - 1))
        _accum(gamma, (g * xhat).sum(axis=lead))
        _accum(beta, g.sum(axis=lead))

    out.backward_fn = backward_fn
    return out


def softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, parents=(x,))

    def backward_fn(g):
        _accum(x, (g - (g * s).sum(axis=-1, keepdims=True)) * s)

    out.backward_fn = backward_fn
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(x.data * mask, parents=(x,))
    out.backward_fn = lambda g: _accum(x, g * mask)
    return out


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-form gelu; smooth everywhere, which keeps finite-difference
    checks of the full model clean."""
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    out = Tensor(0.5 * x.data * (1.0 + t), parents=(x,))

    def backward_fn(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * du
        _accum(x, g * local)

    out.backward_fn = backward_fn
    return out


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-likelihood of one class over a 1-d logit vector."""
    if logits.data.ndim != 1:
        raise AutodiffError(f"cross_entropy wants 1-d logits, got {logits.data.shape}")
    if not 0 <= target < logits.data.shape[0]:
        raise AutodiffError(f"target {target} out of range {logits.data.shape[0]}")
    m = logits.data.max()
    e = np.exp(logits.data - m)
    z = e.sum()
    log_probs = logits.data - m - np.log(z)
    out = Tensor(-log_probs[target], parents=(logits,))

    def backward_fn(g):
        p = e / z
        p[target] -= 1.0
        _accum(logits, g * p)

    out.backward_fn = backward_fn
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), parents=(x,))
    out.backward_fn = lambda g: _accum(x, np.full_like(x.data, float(g)))
    return out


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray, num_heads: int) -> Tensor:
    """Scaled dot-product attention over (T, d) projections with a key
    padding mask (1 = attend, 0 = ignore). Masked scores drop by 1e9, which
    underflows to exactly zero weight, so padded content cannot leak."""
    t_len, d = q.data.shape
    if d % num_heads:
        raise AutodiffError(f"model dim {d} not divisible by {num_heads} heads")
    dh = d // num_heads
    qh = swapaxes(reshape(q, (t_len, num_heads, dh)), 0, 1)
    kh = swapaxes(reshape(k, (t_len, num_heads, dh)), 0, 1)
    vh = swapaxes(reshape(v, (t_len, num_heads, dh)), 0, 1)
    scores = scale(matmul(qh, swapaxes(kh, 1, 2)), 1.0 / math.sqrt(dh))
    bias = (1.0 - np.asarray(mask, dtype=np.float64)) * -1e9
    att = softmax(add_const(scores, bias[None, None, :]))
    out = matmul(att, vh)
    return reshape(swapaxes(out, 0, 1), (t_len, d))


def backward(loss: Tensor, ensure: tuple[Tensor, ...] | list[Tensor] = ()) -> None:
    """Reverse-topological gradient accumulation from a scalar loss.

    Parameters listed in ``ensure`` that never entered the graph end up
    with zero gradients instead of None. Calling backward twice on the
    same loss raises.
    """
    if loss.data.shape != ():
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss.used:
        raise AutodiffError("backward already ran for this loss; rebuild the graph")
    loss.used = True

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones(())
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
    for p in ensure:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


# --- parameters ------------------------------------------------------------


class ParamStore:
    """Named trainable tensors with seeded Xavier-uniform initialization.

    Creation order is part of the contract: the same seed and the same
    sequence of declarations reproduce identical values.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise AutodiffError(f"duplicate parameter name: {name}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def xavier(self, name: str, shape: tuple[int, ...]) -> Tensor:
        fan_in = shape[0]
        fan_out = shape[-1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return self._register(name, self.rng.uniform(-limit, limit, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.zeros(shape))

    def ones(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.ones(shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def values(self) -> list[Tensor]:
        return list(self._params.values())

    def items(self):
        return self._params.items()

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise AutodiffError(
                f"checkpoint mismatch: missing {sorted(missing)}, extra {sorted(extra)}"
            )
        for name, arr in arrays.items():
            t = self._params[name]
            if t.data.shape != arr.shape:
                raise AutodiffError(
                    f"shape mismatch for {name}: {t.data.shape} vs {arr.shape}"
                )
            t.data = np.asarray(arr, dtype=np.float64).copy()
            t.grad = None


def sgd_step(params, lr: float) -> None:
    """Plain SGD: p <- p - lr * grad, then clear grads. A parameter with no
    gradient means backward was skipped; that is an error."""
    tensors = params.values() if isinstance(params, ParamStore) else list(params)
    for t in tensors:
        if t.grad is None:
            raise AutodiffError("sgd_step before backward: parameter has no gradient")
    for t in tensors:
        t.data = t.data - lr * t.grad
        t.grad = None


# --- checkpoints -----------------------------------------------------------


def save_checkpoint(path: str, params: dict[str, Tensor] | ParamStore) -> None:
    with open(path, "wb") as fh:
        records = list(params.items())
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(records)))
        for name, tensor in records:
            blob = name.encode()
            data = np.ascontiguousarray(tensor.data, dtype="<f8")
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise AutodiffError(f"truncated checkpoint: {path}")
        out = data[off : off + n]
        off += n
        return out

    if take(4) != CHECKPOINT_MAGIC:
        raise AutodiffError(f"bad checkpoint magic in {path}")
    version, count = struct.unpack("<HI", take(6))
    if version != CHECKPOINT_VERSION:
        raise AutodiffError(f"unsupported checkpoint version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(take(8 * n), dtype="<f8").reshape(shape)
        out[name] = arr.astype(np.float64)
    return out


# --- verification ----------------------------------------------------------


def finite_difference_grad(fn, tensor: Tensor, index: tuple[int, ...], eps: float = 1e-5) -> float:
    """Central difference of a scalar-rebuilding closure in one entry."""
    original = tensor.data[index]
    tensor.data[index] = original + eps
    hi = float(fn().data)
    tensor.data[index] = original - eps
    lo = float(fn().data)
    tensor.data[index] = original
    return (hi - lo) / (2 * eps)


def gradcheck(fn, tensors: list[Tensor], rng: np.random.Generator, entries: int = 4, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central differences over a
    random sample of entries of each tensor. ``fn`` must rebuild the loss
    graph on every call."""
    for t in tensors:
        t.grad = None
    loss = fn()
    backward(loss, ensure=tensors)
    worst = 0.0
    for t in tensors:
        flat = t.data.size
        picks = rng.choice(flat, size=min(entries, flat), replace=False)
        for flat_idx in picks:
            index = np.unravel_index(int(flat_idx), t.data.shape)
            fd = finite_difference_grad(fn, t, index, eps)
            an = float(t.grad[index])
            err = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            worst = max(worst, err)
    for t in tensors:
        t.grad = None
    return worst
