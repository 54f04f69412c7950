"""Shared test fixtures: hand-built machines, random generators, enumeration oracles."""

from __future__ import annotations

import itertools

import numpy as np

from rmkit.automata import MooreMachine, minimize, run_string
from rmkit.formulas import TASK_ALPHABET, TASK_FORMULAS

# published shortcut counts for the eight tasks, identity included
TASK_URS_COUNTS = {1: 54, 2: 24, 3: 27, 4: 4, 5: 8, 6: 8, 7: 4, 8: 4}


def visit_ab_machine() -> MooreMachine:
    """Hand-built subset acceptor for visiting both a and b, over a..e."""
    return MooreMachine(
        alphabet=TASK_ALPHABET,
        transitions=(
            (1, 2, 0, 0, 0),  # {}   : a -> {a}, b -> {b}
            (1, 3, 1, 1, 1),  # {a}  : b -> {a,b}
            (3, 2, 2, 2, 2),  # {b}  : a -> {a,b}
            (3, 3, 3, 3, 3),  # {a,b}: absorbing accept
        ),
        outputs=(0, 0, 0, 1),
        output_classes=(0, 1),
    )


def visit_a_machine(alphabet=("a", "b")) -> MooreMachine:
    """Acceptor for 'a occurs at least once'."""
    a = alphabet.index("a") if isinstance(alphabet, tuple) else 0
    k = len(alphabet)
    row0 = tuple(1 if p == a else 0 for p in range(k))
    return MooreMachine(
        alphabet=tuple(alphabet),
        transitions=(row0, tuple(1 for _ in range(k))),
        outputs=(0, 1),
        output_classes=(0, 1),
    )


def all_strings(n_symbols: int, max_len: int):
    """Every symbol-index string of length 1..max_len (plus the empty string)."""
    yield ()
    for length in range(1, max_len + 1):
        yield from itertools.product(range(n_symbols), repeat=length)


def outputs_on(m: MooreMachine, x) -> tuple[int, ...]:
    return run_string(m, x)[1]


def random_machine(rng: np.random.Generator, max_states=5, max_symbols=4, max_classes=3,
                   minimized=True) -> MooreMachine:
    """Random small machine; by default minimized so state counts are meaningful."""
    n = int(rng.integers(1, max_states + 1))
    k = int(rng.integers(1, max_symbols + 1))
    c = int(rng.integers(1, max_classes + 1))
    trans = tuple(tuple(int(rng.integers(0, n)) for _ in range(k)) for _ in range(n))
    outs = tuple(int(rng.integers(0, c)) for _ in range(n))
    classes = tuple(range(c))
    alphabet = tuple("abcdefgh"[:k])
    m = MooreMachine(alphabet, trans, outs, classes, 0)
    return minimize(m) if minimized else m


def random_string(rng: np.random.Generator, n_symbols: int, max_len=8) -> tuple[int, ...]:
    length = int(rng.integers(0, max_len + 1))
    return tuple(int(rng.integers(0, n_symbols)) for _ in range(length))


def numeric_grad(f, x: np.ndarray, h=1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued function of one array."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, rtol=1e-4):
    scale = np.maximum(np.abs(numeric), 1.0)
    err = np.abs(analytic - numeric) / scale
    assert err.max() <= rtol, f"gradient mismatch: max rel err {err.max():.2e}"
