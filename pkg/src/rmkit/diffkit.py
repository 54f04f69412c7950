"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Each op computes its forward value eagerly and records a closure that
scatters the output adjoint back to its parents; ``Value.backward`` runs
the recorded graph in reverse topological order.  Shapes up to three axes
are supported, which covers everything the package needs: MLPs, LSTM
cells, and the probabilistic machine recurrence.  Non-finite numbers are
surfaced as :class:`~rmkit.errors.NumericsError` when a loss is reduced or
differentiated, not silently propagated.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, NumericsError

_LOG_FLOOR = 1e-12  # probability floor inside cross_entropy's log


class Value:
    """A node in the recorded computation graph: data plus a grad accumulator."""

    __slots__ = ("data", "grad", "_backward", "_parents")

    def __init__(self, data, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._backward = None
        self._parents = _parents

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Value":
        return Value(self.data.copy())

    def __repr__(self):
        return f"Value(shape={self.data.shape})"

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other if isinstance(other, Value) else -np.asarray(other))

    def __rsub__(self, other):
        return add(-self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- backward pass -----------------------------------------------------

    def backward(self):
        if self.data.shape != ():
            raise InputError("backward() expects a scalar loss")
        if not np.isfinite(self.data):
            raise NumericsError("non-finite loss")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


def _accum(v: Value, g: np.ndarray):
    if v.grad is None:
        v.grad = np.zeros_like(v.data)
    v.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _wrap(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


# ---------------------------------------------------------------------------
# core ops


def add(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    out = Value(a.data + b.data, (a, b))

    def backward():
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(out.grad, b.data.shape))

    out._backward = backward
    return out


def mul(a, b) -> Value:
    if not isinstance(b, Value):
        b_arr = np.asarray(b, dtype=np.float64)
        a = _wrap(a)
        out = Value(a.data * b_arr, (a,))

        def backward_const():
            _accum(a, _unbroadcast(out.grad * b_arr, a.data.shape))

        out._backward = backward_const
        return out
    a = _wrap(a)
    out = Value(a.data * b.data, (a, b))

    def backward():
        _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    out._backward = backward
    return out


def matmul(a: Value, b: Value) -> Value:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim not in (1, 2) or b.data.ndim != 2:
        raise InputError(f"matmul supports vec@mat and mat@mat, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise InputError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Value(a.data @ b.data, (a, b))

    def backward():
        g = out.grad
        if a.data.ndim == 1:
            _accum(a, g @ b.data.T)
            _accum(b, np.outer(a.data, g))
        else:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)

    out._backward = backward
    return out


def concat(values, axis=0) -> Value:
    values = [_wrap(v) for v in values]
    out = Value(np.concatenate([v.data for v in values], axis=axis), tuple(values))
    sizes = [v.data.shape[axis] for v in values]

    def backward():
        offset = 0
        for v, size in zip(values, sizes):
            sl = [slice(None)] * out.data.ndim
            sl[axis] = slice(offset, offset + size)
            _accum(v, out.grad[tuple(sl)])
            offset += size

    out._backward = backward
    return out


def stack(values, axis=0) -> Value:
    values = [_wrap(v) for v in values]
    out = Value(np.stack([v.data for v in values], axis=axis), tuple(values))

    def backward():
        slices = np.moveaxis(out.grad, axis, 0)
        for v, g in zip(values, slices):
            _accum(v, g)

    out._backward = backward
    return out


def reshape(a: Value, shape) -> Value:
    a = _wrap(a)
    out = Value(a.data.reshape(shape), (a,))

    def backward():
        _accum(a, out.grad.reshape(a.data.shape))

    out._backward = backward
    return out


def take(a: Value, index: int, axis=0) -> Value:
    """Select one slice along an axis (the axis is removed)."""
    a = _wrap(a)
    out = Value(np.take(a.data, index, axis=axis), (a,))

    def backward():
        g = np.zeros_like(a.data)
        sl = [slice(None)] * a.data.ndim
        sl[axis] = index
        g[tuple(sl)] = out.grad
        _accum(a, g)

    out._backward = backward
    return out


def tanh(a: Value) -> Value:
    a = _wrap(a)
    out = Value(np.tanh(a.data), (a,))

    def backward():
        _accum(a, out.grad * (1.0 - out.data**2))

    out._backward = backward
    return out


def relu(a: Value) -> Value:
    a = _wrap(a)
    out = Value(np.maximum(a.data, 0.0), (a,))

    def backward():
        _accum(a, out.grad * (a.data > 0))

    out._backward = backward
    return out


def sigmoid(a: Value) -> Value:
    a = _wrap(a)
    out = Value(1.0 / (1.0 + np.exp(-a.data)), (a,))

    def backward():
        _accum(a, out.grad * out.data * (1.0 - out.data))

    out._backward = backward
    return out


def softmax(a: Value, axis=-1) -> Value:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Value(s, (a,))

    def backward():
        g = out.grad
        dot = (g * s).sum(axis=axis, keepdims=True)
        _accum(a, s * (g - dot))

    out._backward = backward
    return out


def log_softmax(a: Value, axis=-1) -> Value:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Value(shifted - log_z, (a,))
    probs = np.exp(out.data)

    def backward():
        g = out.grad
        _accum(a, g - probs * g.sum(axis=axis, keepdims=True))

    out._backward = backward
    return out


def tau_softmax(a: Value, tau: float, axis=-1) -> Value:
    """Temperature softmax: softmax(a / tau); approaches one-hot as tau -> 0."""
    if not 0.0 < tau <= 1.0:
        raise InputError(f"temperature must lie in (0, 1], got {tau}")
    return softmax(mul(a, 1.0 / tau), axis=axis)


def vsum(a: Value, axis=None) -> Value:
    a = _wrap(a)
    out = Value(a.data.sum(axis=axis), (a,))

    def backward():
        g = out.grad
        if axis is not None:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = backward
    return out


def vmean(a: Value, axis=None) -> Value:
    a = _wrap(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(vsum(a, axis=axis), 1.0 / count)


def cross_entropy(pred: Value, targets, from_logits: bool = False) -> Value:
    """Mean negative log-likelihood of integer targets under pred's last axis.

    ``pred`` holds probabilities by default (rows summing to one) or raw
    logits with ``from_logits=True``.  Probabilities are floored before the
    log so that underflow surfaces as a large loss rather than an infinity.
    """
    pred = _wrap(pred)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != pred.data.shape[:-1]:
        raise InputError(f"targets shape {targets.shape} must match {pred.data.shape[:-1]}")
    n = max(targets.size, 1)
    idx = tuple(np.indices(targets.shape)) + (targets,)
    if from_logits:
        shifted = pred.data - pred.data.max(axis=-1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        logp = shifted - log_z
        loss = -logp[idx].sum() / n
        out = Value(loss, (pred,))
        probs = np.exp(logp)

        def backward_logits():
            g = np.array(probs)
            g[idx] -= 1.0
            _accum(pred, out.grad * g / n)

        out._backward = backward_logits
    else:
        clipped = np.maximum(pred.data, _LOG_FLOOR)
        loss = -np.log(clipped[idx]).sum() / n
        out = Value(loss, (pred,))

        def backward_probs():
            g = np.zeros_like(pred.data)
            picked = clipped[idx]
            np.add.at(g, idx, -1.0 / picked)
            g[pred.data < _LOG_FLOOR] = 0.0
            _accum(pred, out.grad * g / n)

        out._backward = backward_probs
    if not np.isfinite(out.data):
        raise NumericsError("cross_entropy produced a non-finite loss")
    return out


def dropout(a: Value, rate: float, rng: np.random.Generator) -> Value:
    """Inverted dropout; identity when rate is zero."""
    if rate <= 0.0:
        return a
    if rate >= 1.0:
        raise InputError("dropout rate must be below 1")
    a = _wrap(a)
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, mask)


def pmm_step(q: Value, p: Value, m) -> Value:
    """One probabilistic-machine transition: q'[o] = sum_i p[i] * (q @ M[i])[o].

    ``q`` is a state-probability row (``[Q]`` or batched ``[B, Q]``), ``p``
    a symbol-probability row (``[P]`` or ``[B, P]``) and ``m`` the
    ``[P, Q, Q]`` transition stack, either a constant array (machine known
    and frozen) or a Value (machine being learned).
    """
    q, p = _wrap(q), _wrap(p)
    m_val = m if isinstance(m, Value) else None
    m_data = m.data if m_val is not None else np.asarray(m, dtype=np.float64)
    batched = q.data.ndim == 2
    if batched:
        out_data = np.einsum("bi,bq,iqo->bo", p.data, q.data, m_data)
    else:
        out_data = np.einsum("i,q,iqo->o", p.data, q.data, m_data)
    parents = (q, p) if m_val is None else (q, p, m_val)
    out = Value(out_data, parents)

    def backward():
        g = out.grad
        if batched:
            _accum(q, np.einsum("bi,iqo,bo->bq", p.data, m_data, g))
            _accum(p, np.einsum("bq,iqo,bo->bi", q.data, m_data, g))
            if m_val is not None:
                _accum(m_val, np.einsum("bi,bq,bo->iqo", p.data, q.data, g))
        else:
            _accum(q, np.einsum("i,iqo,o->q", p.data, m_data, g))
            _accum(p, np.einsum("q,iqo,o->i", q.data, m_data, g))
            if m_val is not None:
                _accum(m_val, np.einsum("i,q,o->iqo", p.data, q.data, g))

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# optimization


class Adam:
    """Adam over a list of Value parameters; moments live alongside each one."""

    def __init__(self, params, lr=4e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**t)
            v_hat = self.v[i] / (1.0 - self.beta2**t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients down so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad**2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Fan one root seed out to n independent generators."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
