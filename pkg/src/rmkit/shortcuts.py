"""Search for unremovable reasoning shortcuts of a reward machine.

A reasoning shortcut is a symbol renaming ``alpha`` under which the machine
produces the same output sequence on ``alpha(x)`` as on ``x``.  Shortcuts
surviving every string (complete support) are *unremovable*: no dataset can
ever falsify them, so a symbol grounder trained on machine outputs alone
can at best be correct up to one of them.

Three routes are implemented:

* :func:`find_urs` - the pruned search.  Candidate renamings keep a
  frontier of (state-under-x, state-under-alpha(x)) pairs, deduplicated per
  candidate over its lifetime; extensions are skipped when both sides sit
  in absorbing states (suffixes can never diverge) or when a symbol
  self-loops both sides (pumping adds nothing).  The frontiers of all
  |P|^|P| candidates advance together as boolean arrays, one scatter per
  symbol value, so the search is a few milliseconds even at 3125 maps.
* :func:`urs_oracle_exact` - per-candidate machine equivalence via
  synchronized-product reachability; the ground truth.
* :func:`urs_oracle_bounded` - string-semantics brute force over all
  strings up to a length bound, kept naive on purpose: per level it
  materializes representative strings and re-checks complete output traces
  with :func:`is_working`.  At bound ``|Q|^2`` it is exact (any divergence
  shows up within the product state space) and serves as the timing
  baseline.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .automata import MooreMachine, absorbing_states, run_string
from .errors import InputError

__all__ = [
    "enumerate_maps",
    "identity_map",
    "apply_map",
    "format_map",
    "is_working",
    "find_urs",
    "urs_oracle_exact",
    "urs_oracle_bounded",
    "UrsReport",
    "report_to_csv",
]


def identity_map(n_symbols: int) -> tuple[int, ...]:
    return tuple(range(n_symbols))


def apply_map(alpha: Sequence[int], x: Sequence[int]) -> tuple[int, ...]:
    return tuple(alpha[p] for p in x)


def format_map(alpha: Sequence[int], alphabet: Sequence[str]) -> str:
    names = [alphabet[a] for a in alpha]
    sep = "" if all(len(n) == 1 for n in names) else ","
    return sep.join(names)


def enumerate_maps(n_symbols: int) -> Iterator[tuple[int, ...]]:
    """All |P|^|P| renamings: the identity first, the rest lexicographic."""
    if n_symbols < 1:
        raise InputError("alphabet must have at least one symbol")
    ident = identity_map(n_symbols)
    yield ident
    for alpha in itertools.product(range(n_symbols), repeat=n_symbols):
        if alpha != ident:
            yield alpha


def _candidate_array(n_symbols: int) -> np.ndarray:
    """enumerate_maps as an [n^n, n] array, built without the generator."""
    k = n_symbols
    total = k**k
    digits = np.empty((total, k), dtype=np.int64)
    vals = np.arange(total)
    for p in range(k - 1, -1, -1):
        digits[:, p] = vals % k
        vals //= k
    ident_row = int(sum(p * k ** (k - 1 - p) for p in range(k)))
    order = np.concatenate(([ident_row], np.arange(ident_row), np.arange(ident_row + 1, total)))
    return digits[order]


def is_working(m: MooreMachine, alpha: Sequence[int], dataset) -> bool:
    """True iff the machine's output trace on x matches the trace on alpha(x) for every x."""
    for x in dataset:
        if run_string(m, x)[1] != run_string(m, apply_map(alpha, x))[1]:
            return False
    return True


# ---------------------------------------------------------------------------
# Pruned search


@dataclass
class UrsReport:
    """Search outcome: surviving renamings plus per-candidate diagnostics."""

    alphabet: tuple[str, ...]
    candidates: np.ndarray  # [N, P] int, enumeration order (identity first)
    survived: np.ndarray  # [N] bool
    iterations: np.ndarray  # [N] int, level at which each candidate resolved
    peak_pairs: np.ndarray  # [N] int, largest frontier reached per candidate
    levels: int  # outer-loop iterations of the search
    timings: dict[str, float]

    @property
    def count(self) -> int:
        return int(self.survived.sum())

    def survivors(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.candidates[self.survived]]

    def survivor_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(self.survivors())


def _machine_tables(m: MooreMachine):
    n, k = m.n_states, len(m.alphabet)
    delta = np.array(m.transitions, dtype=np.int64)  # [Q, P]
    out = np.array(m.outputs, dtype=np.int64)
    pairs = n * n
    q1 = np.arange(pairs) // n
    q2 = np.arange(pairs) % n
    bad = out[q1] != out[q2]
    absorbing = np.zeros(n, dtype=bool)
    absorbing[list(absorbing_states(m))] = True
    abs_pair = absorbing[q1] & absorbing[q2]
    # target[p, r, j]: pair reached from pair j by reading p on the left and r on the right
    target = np.empty((k, k, pairs), dtype=np.int64)
    for p in range(k):
        for r in range(k):
            target[p, r] = delta[q1, p] * n + delta[q2, r]
    self_loop = target == np.arange(pairs)[np.newaxis, np.newaxis, :]
    return delta, bad, abs_pair, target, self_loop


def _search_chunk(m: MooreMachine, cand: np.ndarray, skip_absorbing: bool,
                  skip_selfloop: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    n, k = m.n_states, len(m.alphabet)
    delta, bad, abs_pair, target, self_loop = _machine_tables(m)
    big_n = cand.shape[0]
    pairs = n * n
    bad_cols = np.flatnonzero(bad)

    alive = np.ones(big_n, dtype=bool)
    iterations = np.zeros(big_n, dtype=np.int64)
    peak = np.zeros(big_n, dtype=np.int64)

    # level 1: every length-1 string
    q0 = m.initial
    frontier = np.zeros((big_n, pairs), dtype=bool)
    rows = np.arange(big_n)
    for p in range(k):
        frontier[rows, delta[q0, p] * n + delta[q0, cand[:, p]]] = True
    peak[:] = np.count_nonzero(frontier, axis=1)
    died = frontier[:, bad_cols].any(axis=1)
    alive &= ~died
    iterations[died] = 1

    # the surviving minority advances level by level; candidates drop out of
    # the active set as soon as they die or their frontier stops growing
    act = np.flatnonzero(alive)
    fr = frontier[act]
    vis = fr.copy()
    ca = cand[act]
    level = 1
    cap = pairs + 1
    while act.size:
        level += 1
        if level > cap:
            raise RuntimeError("URS search exceeded the product-space iteration cap")
        ext = fr & ~abs_pair[np.newaxis, :] if skip_absorbing else fr
        nxt = np.zeros_like(fr)
        for p in range(k):
            targ = target[p][ca[:, p]]
            src = ext & ~self_loop[p][ca[:, p]] if skip_selfloop else ext
            r, c = np.nonzero(src)
            nxt[r, targ[r, c]] = True
        new = nxt & ~vis
        peak[act] = np.maximum(peak[act], np.count_nonzero(new, axis=1))
        died_l = new[:, bad_cols].any(axis=1)
        empty_l = ~died_l & ~new.any(axis=1)
        alive[act[died_l]] = False
        resolved = died_l | empty_l
        iterations[act[resolved]] = level
        keep = ~resolved
        act = act[keep]
        fr = new[keep]
        vis = (vis | new)[keep]
        ca = ca[keep]
    return alive, iterations, peak, level


def find_urs(m: MooreMachine, skip_absorbing: bool = True, skip_selfloop: bool = True,
             jobs: int = 1) -> UrsReport:
    """All renamings alpha with machine == machine-after-alpha, by pruned search.

    Exactly the set ``{alpha : equivalent(m, relabel(m, alpha))}``.  The two
    skips never change the result (they drop extensions whose suffixes are
    covered by the absorbing-state and pumping arguments); they exist to be
    toggled off for the pruning-neutrality check.
    """
    t0 = time.perf_counter()
    k = len(m.alphabet)
    cand = _candidate_array(k)
    t_init = time.perf_counter() - t0

    t1 = time.perf_counter()
    if jobs > 1:
        chunks = np.array_split(cand, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_search_chunk, itertools.repeat(m), chunks,
                                  itertools.repeat(skip_absorbing), itertools.repeat(skip_selfloop)))
        alive = np.concatenate([p[0] for p in parts])
        iterations = np.concatenate([p[1] for p in parts])
        peak = np.concatenate([p[2] for p in parts])
        levels = max(p[3] for p in parts)
    else:
        alive, iterations, peak, levels = _search_chunk(m, cand, skip_absorbing, skip_selfloop)
    t_search = time.perf_counter() - t1

    return UrsReport(
        alphabet=m.alphabet,
        candidates=cand,
        survived=alive,
        iterations=iterations,
        peak_pairs=peak,
        levels=levels,
        timings={"init": t_init, "search": t_search, "total": time.perf_counter() - t0},
    )


# ---------------------------------------------------------------------------
# Brute-force oracles


def urs_oracle_exact(m: MooreMachine) -> frozenset[tuple[int, ...]]:
    """Ground truth: filter every renaming by exact machine equivalence."""
    from .automata import equivalent, relabel

    k = len(m.alphabet)
    return frozenset(alpha for alpha in enumerate_maps(k) if equivalent(m, relabel(m, alpha)))


def _bounded_support(m: MooreMachine, alpha: Sequence[int], max_len: int) -> list[tuple[int, ...]]:
    """Representative strings for every (length, state-pair) up to max_len.

    One string per pair per level decides the bounded check: a shortest
    diverging string first diverges at its final output, and any
    representative of its final state pair diverges there too.
    """
    k = len(m.alphabet)
    trans = m.transitions
    level = {(trans[m.initial][p], trans[m.initial][alpha[p]]): (p,) for p in range(k)}
    support = list(level.values())
    for _ in range(max_len - 1):
        nxt: dict[tuple[int, int], tuple[int, ...]] = {}
        for (u, v), x in level.items():
            for p in range(k):
                pair = (trans[u][p], trans[v][alpha[p]])
                if pair not in nxt:
                    nxt[pair] = x + (p,)
        level = nxt
        support.extend(level.values())
    return support


def urs_oracle_bounded(m: MooreMachine, max_len: int) -> frozenset[tuple[int, ...]]:
    """Renamings working on every string of length <= max_len.

    The naive baseline: for each of the |P|^|P| candidates it materializes
    the whole bounded support (one representative string per length and
    state pair; without that reduction nothing terminates) and only then
    evaluates the conjunction over it with :func:`is_working`, re-running
    complete output traces.  None of the absorbing-state, pumping, or
    shorter-support-first arguments that speed up :func:`find_urs` are
    used, and no work is shared between candidates.  The result is a
    superset of the unremovable set, shrinking as the bound grows, and is
    exact once ``max_len >= |Q|^2``.
    """
    k = len(m.alphabet)
    if max_len < 1:
        return frozenset(enumerate_maps(k))
    survivors = []
    for alpha in enumerate_maps(k):
        if is_working(m, alpha, _bounded_support(m, alpha, max_len)):
            survivors.append(alpha)
    return frozenset(survivors)


# ---------------------------------------------------------------------------
# Report output


def report_to_csv(report: UrsReport) -> str:
    """Deterministic CSV: one row per renaming (lexicographic), then a TOTAL row.

    Wall-times are deliberately excluded; identical inputs must yield
    bit-identical files.
    """
    order = np.lexsort(report.candidates.T[::-1])
    lines = ["alpha,survived,iterations"]
    for i in order:
        alpha = format_map(report.candidates[i], report.alphabet)
        lines.append(f"{alpha},{int(report.survived[i])},{int(report.iterations[i])}")
    lines.append(f"TOTAL,{report.count},{report.levels}")
    return "\n".join(lines) + "\n"
