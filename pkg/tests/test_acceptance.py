"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and measured values.  The RL ordering check (criterion 8) trains
three agents for 3000 episodes over three seeds and takes a few minutes;
everything else is fast.
"""

import time

import numpy as np
import pytest

from helpers import numeric_grad, random_machine, random_string, visit_a_machine
from rmkit import diffkit as dk
from rmkit.automata import (
    absorbing_states,
    equivalent,
    final_state,
    minimize,
    run_string,
    serialize,
    shape_rewards,
)
from rmkit.diffkit import Value
from rmkit.formulas import TASK_ALPHABET, TASK_FORMULAS, compile_formula
from rmkit.gridworld import DEFAULT_CONFIG, GridWorld, make_eps_optimal_policy, synth_dataset
from rmkit.networks import Grounder, OneHotGrounder
from rmkit.nrm import (
    extract_machine,
    forward,
    params_from_machine,
    pure_learning,
    random_params,
    train_grounder,
    traces_from_strings,
    urs_corrected_accuracy,
)
from rmkit.shortcuts import (
    apply_map,
    find_urs,
    is_working,
    urs_oracle_bounded,
    urs_oracle_exact,
)
from rmkit.training import TrainConfig, run_experiment

EXPECTED_COUNTS = [54, 24, 27, 4, 8, 8, 4, 4]


def verdict(criterion: str, ok: bool, detail: str):
    print(f"\n[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def machines():
    return {tid: compile_formula(text, TASK_ALPHABET) for tid, text in TASK_FORMULAS.items()}


def test_criterion_1_urs_exactness(machines):
    counts = []
    worst = 0.0
    for tid in sorted(machines):
        m = machines[tid]
        t0 = time.perf_counter()
        report = find_urs(m)
        exact = urs_oracle_exact(m)
        elapsed = time.perf_counter() - t0
        worst = max(worst, elapsed)
        assert report.survivor_set() == exact, f"task {tid}: search disagrees with oracle"
        counts.append(report.count)
    verdict(
        "criterion 1 (URS exactness)",
        counts == EXPECTED_COUNTS and worst <= 60.0,
        f"counts={counts} expected={EXPECTED_COUNTS}, slowest task {worst:.2f}s <= 60s",
    )


def test_criterion_2_urs_speedup(machines):
    ratios = {}
    for tid in sorted(machines):
        m = machines[tid]
        alg = min(_timed(find_urs, m) for _ in range(3))
        bound = m.n_states**2
        t0 = time.perf_counter()
        bounded = urs_oracle_bounded(m, bound)
        oracle = time.perf_counter() - t0
        assert bounded == find_urs(m).survivor_set()
        ratios[tid] = oracle / alg
    detail = " ".join(f"t{tid}={r:.0f}x" for tid, r in ratios.items())
    verdict("criterion 2 (URS speedup)", min(ratios.values()) >= 50.0, detail)


def _timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


def test_criterion_3_theorem_properties(machines):
    rng = np.random.default_rng(2024)
    # bounded-support monotonicity over L = 1..4
    for _ in range(50):
        m = random_machine(rng, max_states=4, max_symbols=3)
        sets = [urs_oracle_bounded(m, L) for L in (1, 2, 3, 4)]
        for bigger, smaller in zip(sets, sets[1:]):
            assert smaller <= bigger, "bounded sets must shrink as the bound grows"
    # every bounded set upper-bounds the unremovable set
    for tid, m in machines.items():
        urs = find_urs(m).survivor_set()
        for L in (1, 2, 3, 4):
            assert urs <= urs_oracle_bounded(m, L), f"task {tid}, L={L}"
    # absorbing-prefix suffix extension
    checked_absorb = 0
    while checked_absorb < 60:
        m = random_machine(rng, max_states=4, max_symbols=3)
        absorbing = absorbing_states(m)
        if not absorbing:
            continue
        k = len(m.alphabet)
        alpha = tuple(int(rng.integers(0, k)) for _ in range(k))
        x = random_string(rng, k, max_len=6)
        if final_state(m, x) not in absorbing:
            continue
        if final_state(m, apply_map(alpha, x)) not in absorbing:
            continue
        if not is_working(m, alpha, [x]):
            continue
        for _ in range(100):
            y = random_string(rng, k, max_len=6)
            assert is_working(m, alpha, [x + y]), "absorbing prefixes must extend freely"
        checked_absorb += 1
    # self-loop pumping
    checked_pump = 0
    while checked_pump < 60:
        m = random_machine(rng, max_states=4, max_symbols=3)
        k = len(m.alphabet)
        alpha = tuple(int(rng.integers(0, k)) for _ in range(k))
        x = random_string(rng, k, max_len=5)
        p = int(rng.integers(0, k))
        if final_state(m, x) != final_state(m, x + (p,)):
            continue
        ax = apply_map(alpha, x)
        if final_state(m, ax) != final_state(m, ax + (alpha[p],)):
            continue
        z = random_string(rng, k, max_len=5)
        if not is_working(m, alpha, [x + z]):
            continue
        for reps in range(1, 6):
            assert is_working(m, alpha, [x + (p,) * reps + z]), "pumped strings must keep working"
        checked_pump += 1
    # pruning neutrality on all tasks
    for tid, m in machines.items():
        base = find_urs(m).survivor_set()
        for sa, sl in ((False, True), (True, False), (False, False)):
            assert find_urs(m, skip_absorbing=sa, skip_selfloop=sl).survivor_set() == base, \
                f"task {tid}: pruning changed the result"
    verdict(
        "criterion 3 (theorem property suite)",
        True,
        f"monotonicity on 50 machines, {checked_absorb} absorbing cases, "
        f"{checked_pump} pumping cases, pruning neutral on 8 tasks",
    )


def test_criterion_4_forward_exactness():
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 100:
        m = random_machine(rng)
        x = random_string(rng, len(m.alphabet), max_len=12)
        if not x:
            continue
        k = len(m.alphabet)
        encoded = np.zeros((len(x), k))
        encoded[np.arange(len(x)), list(x)] = 1.0
        traces = forward(params_from_machine(m), OneHotGrounder(k), encoded)
        states, outputs = run_string(m, x)
        _, dec_states, dec_rewards = traces.decode()
        assert tuple(dec_states) == states[1:]
        assert tuple(dec_rewards) == outputs
        for mat in (traces.symbols, traces.states, traces.rewards):
            assert np.allclose(mat.data.sum(axis=-1), 1.0, atol=1e-9)
        checked += 1
    verdict("criterion 4 (forward-pass exactness)", True,
            f"{checked} random machine/string pairs decode exactly; rows sum to 1")


def test_criterion_5_gradient_checks():
    rng = np.random.default_rng(5)
    rtol = 1e-4
    checks = 0

    def grad_check(build, *shapes):
        nonlocal checks
        arrays = [rng.standard_normal(s) for s in shapes]
        leaves = [Value(a.copy()) for a in arrays]
        build(*leaves).backward()
        for i, a in enumerate(arrays):
            def f(x, i=i):
                vals = [Value(arr.copy()) for arr in arrays]
                vals[i] = Value(x.copy())
                return build(*vals).item()

            num = numeric_grad(f, a.copy())
            scale = np.maximum(np.abs(num), 1.0)
            err = np.abs(leaves[i].grad - num) / scale
            assert err.max() <= rtol, f"op check failed with rel err {err.max():.2e}"
        checks += 1

    targets2 = np.array([0, 2])
    grad_check(lambda a, b: dk.vsum(dk.mul(dk.add(a, b), a)), (3, 4), (4,))
    grad_check(lambda a, b: dk.vsum(dk.matmul(a, b)), (3, 4), (4, 2))
    grad_check(lambda a, b: dk.vsum(dk.matmul(a, b)), (4,), (4, 2))
    grad_check(lambda a: dk.vsum(dk.mul(a, 2.5)), (5,))
    grad_check(lambda a, b: dk.vsum(dk.mul(dk.concat([a, b], axis=0), 0.7)), (2, 3), (1, 3))
    grad_check(lambda a, b: dk.vsum(dk.mul(dk.stack([a, b]), 1.3)), (3,), (3,))
    grad_check(lambda a: dk.vsum(dk.mul(dk.reshape(a, (6,)), np.arange(6.0))), (2, 3))
    grad_check(lambda a: dk.vsum(dk.mul(dk.take(a, 1, axis=0), np.arange(3.0))), (2, 3))
    grad_check(lambda a: dk.vsum(dk.tanh(a)), (5,))
    grad_check(lambda a: dk.vsum(dk.mul(dk.relu(a), a)), (5,))
    grad_check(lambda a: dk.vsum(dk.sigmoid(a)), (5,))
    grad_check(lambda a: dk.vsum(dk.mul(dk.softmax(a), np.arange(4.0))), (3, 4))
    grad_check(lambda a: dk.vsum(dk.mul(dk.log_softmax(a), np.arange(4.0))), (3, 4))
    for tau in (1.0, 0.5, 0.1):
        grad_check(lambda a, tau=tau: dk.vsum(dk.mul(dk.tau_softmax(a, tau), np.arange(3.0))), (2, 3))
    grad_check(lambda a: dk.vmean(dk.mul(a, a)), (4, 3))
    grad_check(lambda a: dk.vsum(dk.mul(dk.dropout(a, 0.4, np.random.default_rng(77)), a)), (4, 5))
    grad_check(lambda a: dk.cross_entropy(dk.softmax(a), targets2), (2, 4))
    grad_check(lambda a: dk.cross_entropy(a, targets2, from_logits=True), (2, 4))
    grad_check(lambda q, p, m: dk.vsum(dk.mul(
        dk.pmm_step(dk.softmax(q), dk.softmax(p), dk.softmax(m, axis=-1)), np.arange(3.0))),
        (3,), (2,), (2, 3, 3))

    # full composite: grounder -> machine recurrence -> reward cross-entropy, T=5
    m = shape_rewards(visit_a_machine(("a", "b")))
    xs = np.random.default_rng(55).random((5, 2))
    classes = np.array([0, 0, 1, 1, 1])

    def composite_frozen(params_list, grounder):
        traces = forward(params_from_machine(m), grounder, xs)
        return dk.cross_entropy(traces.rewards, classes)

    grounder = Grounder(np.random.default_rng(56), 2, 2, hidden=6)
    loss = composite_frozen(None, grounder)
    loss.backward()
    for p in grounder.params():
        def f(arr, p=p):
            saved = p.data
            p.data = arr
            out = composite_frozen(None, grounder).item()
            p.data = saved
            return out

        num = numeric_grad(f, p.data.copy())
        scale = np.maximum(np.abs(num), 1.0)
        assert (np.abs(p.grad - num) / scale).max() <= rtol
    checks += 1

    # learnable-machine composite (temperature-softmaxed tensors in the loop)
    params = random_params(np.random.default_rng(57), ("a", "b"), (0, 1), 3, tau=0.5)
    onehots = np.zeros((5, 2))
    onehots[np.arange(5), [0, 1, 0, 0, 1]] = 1.0

    def composite_learnable():
        traces = forward(params, OneHotGrounder(2), onehots)
        return dk.cross_entropy(traces.rewards, classes)

    loss = composite_learnable()
    loss.backward()
    for p in (params.mt, params.mr):
        def f(arr, p=p):
            saved = p.data
            p.data = arr
            out = composite_learnable().item()
            p.data = saved
            return out

        num = numeric_grad(f, p.data.copy())
        scale = np.maximum(np.abs(num), 1.0)
        assert (np.abs(p.grad - num) / scale).max() <= rtol
    checks += 1

    verdict("criterion 5 (gradient checks)", True,
            f"{checks} op/composite checks at rel err <= {rtol}")


def test_criterion_6_offline_grounding():
    t0 = time.perf_counter()
    machine = compile_formula(TASK_FORMULAS[1], TASK_ALPHABET)
    traces = synth_dataset(DEFAULT_CONFIG, machine, policy="mixture", n=500, seed=0)
    params = params_from_machine(machine)
    rng = np.random.default_rng(1)
    grounder = Grounder(rng, 2, 5, hidden=64)
    train_grounder(params, grounder, traces, epochs=100, rng=rng)
    urs = find_urs(machine).survivor_set()
    cells_rng = np.random.default_rng(2)
    cells = [(int(cells_rng.integers(0, 5)), int(cells_rng.integers(0, 5))) for _ in range(1000)]
    states = np.array([DEFAULT_CONFIG.encode(c) for c in cells])
    labels = np.array([DEFAULT_CONFIG.label(c) for c in cells])
    accuracy = urs_corrected_accuracy(grounder, states, labels, urs)
    elapsed = time.perf_counter() - t0
    verdict("criterion 6 (offline semi-supervised grounding)",
            accuracy >= 0.90 and elapsed <= 600.0,
            f"corrected accuracy {accuracy:.3f} >= 0.90 in {elapsed:.0f}s <= 600s")


def test_criterion_7_pure_learning():
    target = shape_rewards(visit_a_machine(("a", "b")))
    rng = np.random.default_rng(7)
    strings = [tuple(int(rng.integers(0, 2)) for _ in range(int(rng.integers(1, 9))))
               for _ in range(1000)]
    dataset = traces_from_strings(target, strings)
    wins = 0
    for seed in range(5):
        params, _ = pure_learning(dataset, n_states=3, alphabet=("a", "b"),
                                  output_classes=target.output_classes, seed=seed)
        if equivalent(minimize(extract_machine(params)), target):
            wins += 1
    verdict("criterion 7 (pure learning)", wins >= 4, f"{wins}/5 seeds recover the target machine")


def test_criterion_8_rl_ordering():
    config = TrainConfig(episodes=3000, seeds=(0, 1, 2))
    means = {}
    for kind in ("rm", "nrm", "rnn"):
        result = run_experiment(1, kind, config, DEFAULT_CONFIG, jobs=3)
        means[kind] = sum(result["final"].values()) / len(result["final"])
    ok = means["rm"] >= means["nrm"] >= means["rnn"] and means["nrm"] >= 0.85 * means["rm"]
    verdict("criterion 8 (desk-scale RL ordering)", ok,
            f"final smoothed means rm={means['rm']:.2f} nrm={means['nrm']:.2f} "
            f"rnn={means['rnn']:.2f}")


def test_criterion_9_reward_scaling(machines):
    totals = {}
    for tid, m in machines.items():
        env = GridWorld(DEFAULT_CONFIG, m)
        policy = make_eps_optimal_policy(DEFAULT_CONFIG, m, eps=0.0)
        rng = np.random.default_rng(0)
        env.reset()
        total = 0.0
        while not env.done:
            total += env.step(policy(env.cell, env.q, rng))[1]
        assert env.machine.label_of(env.q) == max(m.output_classes), f"task {tid} not solved"
        assert abs(total - 100.0) <= 1e-9, f"task {tid}: cumulative reward {total!r}"
        totals[tid] = total
    verdict("criterion 9 (reward scaling)", True,
            "optimal trajectories on all 8 tasks accumulate exactly 100")


def test_criterion_10_determinism(machines, tmp_path):
    from rmkit.cli import main

    # urs subcommand: identical runs and worker counts give identical bytes
    mm = tmp_path / "task1.mm"
    mm.write_text(serialize(machines[1]))
    outs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / f"urs_{name}.csv"
        assert main(["urs", "--machine", str(mm), "--jobs", jobs, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]

    # train subcommand: fixed seeds give identical CSVs
    train_outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["train", "--task", "1", "--agent", "nrm", "--seeds", "0",
                     "--episodes", "125", "--out", str(out)]) == 0
        train_outs.append((out / "1_nrm_seed0.csv").read_bytes())
    assert train_outs[0] == train_outs[1]
    verdict("criterion 10 (determinism)", True,
            "urs and train outputs bit-identical across reruns and worker counts")
