"""Network builders on top of the autodiff kernel.

Shapes follow the experiment setup used throughout the package: actor and
critic are three tanh layers of width 120 (the actor ends in a softmax),
the map-environment grounder is three linear layers with a tanh between
the first two, optional dropout, and a terminal softmax, and the recurrent
baseline is a two-layer LSTM of width 50.
"""

from __future__ import annotations

import numpy as np

from .diffkit import Value, dropout, matmul, reshape, sigmoid, softmax, take, tanh
from .errors import MachineFormatError

CKPT_VERSION = 1


class Linear:
    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int):
        bound = np.sqrt(6.0 / (n_in + n_out))
        self.w = Value(rng.uniform(-bound, bound, size=(n_in, n_out)))
        self.b = Value(np.zeros(n_out))

    def __call__(self, x: Value) -> Value:
        return matmul(x, self.w) + self.b

    def forward_numpy(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w.data + self.b.data

    def params(self) -> list[Value]:
        return [self.w, self.b]


class MLP:
    """Fully connected stack with tanh between layers and an optional head."""

    def __init__(self, rng, sizes, head="none"):
        self.layers = [Linear(rng, a, b) for a, b in zip(sizes, sizes[1:])]
        self.head = head

    def __call__(self, x: Value) -> Value:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = tanh(x)
        if self.head == "softmax":
            x = softmax(x, axis=-1)
        return x

    def forward_numpy(self, x: np.ndarray) -> np.ndarray:
        for i, layer in enumerate(self.layers):
            x = layer.forward_numpy(x)
            if i < len(self.layers) - 1:
                x = np.tanh(x)
        if self.head == "softmax":
            shifted = x - x.max(axis=-1, keepdims=True)
            e = np.exp(shifted)
            x = e / e.sum(axis=-1, keepdims=True)
        return x

    def params(self) -> list[Value]:
        return [p for layer in self.layers for p in layer.params()]


def make_actor(rng, n_in: int, n_actions: int, hidden: int = 120) -> MLP:
    return MLP(rng, (n_in, hidden, hidden, n_actions), head="softmax")


def make_critic(rng, n_in: int, hidden: int = 120) -> MLP:
    return MLP(rng, (n_in, hidden, hidden, 1), head="none")


class Grounder:
    """Map-environment symbol grounder: scores states into symbol probabilities.

    Three linear layers, tanh between the first two, dropout after the
    first two (off by default; training with little data is steadier
    without it), softmax over the symbol alphabet at the end.
    """

    def __init__(self, rng, n_in: int, n_symbols: int, hidden: int = 64,
                 dropout_rate: float = 0.0):
        self.fc1 = Linear(rng, n_in, hidden)
        self.fc2 = Linear(rng, hidden, hidden)
        self.fc3 = Linear(rng, hidden, n_symbols)
        self.dropout_rate = dropout_rate
        self.n_symbols = n_symbols
        self._drop_rng = np.random.default_rng(rng.integers(2**63))

    def __call__(self, x: Value, training: bool = False) -> Value:
        rate = self.dropout_rate if training else 0.0
        h = self.fc1(x)
        if rate > 0.0:
            h = dropout(h, rate, self._drop_rng)
        h = tanh(h)
        h = self.fc2(h)
        if rate > 0.0:
            h = dropout(h, rate, self._drop_rng)
        return softmax(self.fc3(h), axis=-1)

    def forward_numpy(self, x: np.ndarray) -> np.ndarray:
        h = np.tanh(self.fc1.forward_numpy(x))
        h = self.fc2.forward_numpy(h)
        logits = self.fc3.forward_numpy(h)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Most probable symbol index per input row."""
        return self.forward_numpy(np.asarray(x, dtype=np.float64)).argmax(axis=-1)

    def params(self) -> list[Value]:
        return self.fc1.params() + self.fc2.params() + self.fc3.params()


class OneHotGrounder:
    """Oracle grounder for inputs that already are probability rows over symbols."""

    def __init__(self, n_symbols: int):
        self.n_symbols = n_symbols

    def __call__(self, x, training: bool = False):
        return x if isinstance(x, Value) else Value(x)

    def forward_numpy(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward_numpy(x).argmax(axis=-1)

    def params(self) -> list[Value]:
        return []


class LSTMCell:
    """Gates are fused: one [in, 4H] and one [H, 4H] matmul per step."""

    def __init__(self, rng, n_in: int, hidden: int):
        self.hidden = hidden
        bound = 1.0 / np.sqrt(hidden)
        self.wx = Value(rng.uniform(-bound, bound, size=(n_in, 4 * hidden)))
        self.wh = Value(rng.uniform(-bound, bound, size=(hidden, 4 * hidden)))
        self.b = Value(np.zeros(4 * hidden))

    def __call__(self, x: Value, state):
        h, c = state
        gates = reshape(matmul(x, self.wx) + matmul(h, self.wh) + self.b, (4, self.hidden))
        i = sigmoid(take(gates, 0))
        f = sigmoid(take(gates, 1))
        g = tanh(take(gates, 2))
        o = sigmoid(take(gates, 3))
        c_new = f * c + i * g
        h_new = o * tanh(c_new)
        return h_new, c_new

    def zero_state(self):
        return Value(np.zeros(self.hidden)), Value(np.zeros(self.hidden))

    def params(self) -> list[Value]:
        return [self.wx, self.wh, self.b]


class LSTM:
    """Stacked LSTM (two layers of 50 by default) exposing per-step stepping."""

    def __init__(self, rng, n_in: int, hidden: int = 50, layers: int = 2):
        sizes = [n_in] + [hidden] * layers
        self.cells = [LSTMCell(rng, sizes[i], hidden) for i in range(layers)]

    def zero_state(self):
        return [cell.zero_state() for cell in self.cells]

    def step(self, x: Value, state):
        new_state = []
        inp = x
        for cell, st in zip(self.cells, state):
            h, c = cell(inp, st)
            new_state.append((h, c))
            inp = h
        return inp, new_state

    def forward(self, xs) -> list[Value]:
        """Hidden sequence of the top layer over a list of input Values."""
        state = self.zero_state()
        outs = []
        for x in xs:
            h, state = self.step(x, state)
            outs.append(h)
        return outs

    @staticmethod
    def detach_state(state):
        return [(h.detach(), c.detach()) for h, c in state]

    def params(self) -> list[Value]:
        return [p for cell in self.cells for p in cell.params()]


def augment_input(env_vec: np.ndarray, machine_vec: np.ndarray) -> np.ndarray:
    """Concatenate an environment encoding with a machine-state vector."""
    return np.concatenate([np.asarray(env_vec, float), np.asarray(machine_vec, float)])


# ---------------------------------------------------------------------------
# checkpoints


def save_params(path, named_params: dict[str, Value], meta: dict | None = None):
    """Versioned binary checkpoint of named parameter arrays."""
    arrays = {f"param::{name}": p.data for name, p in named_params.items()}
    meta_items = sorted((meta or {}).items())
    arrays["__meta__"] = np.array([f"{k}={v}" for k, v in meta_items], dtype=np.str_)
    arrays["__version__"] = np.array([CKPT_VERSION])
    np.savez(path, **arrays)


def load_params(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with np.load(path, allow_pickle=False) as data:
        if "__version__" not in data or int(data["__version__"][0]) != CKPT_VERSION:
            raise MachineFormatError(f"unsupported checkpoint version in {path}")
        params = {
            key[len("param::"):]: data[key] for key in data.files if key.startswith("param::")
        }
        meta = dict(item.split("=", 1) for item in data["__meta__"].tolist())
    return params, meta


def assign_params(named_params: dict[str, Value], arrays: dict[str, np.ndarray]):
    for name, p in named_params.items():
        if name not in arrays:
            raise MachineFormatError(f"checkpoint missing parameter {name!r}")
        if arrays[name].shape != p.data.shape:
            raise MachineFormatError(f"checkpoint shape mismatch for {name!r}")
        p.data = arrays[name].astype(np.float64)
