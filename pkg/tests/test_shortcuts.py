import itertools

import numpy as np
import pytest

from helpers import TASK_URS_COUNTS, random_machine, random_string, visit_ab_machine
from rmkit.automata import absorbing_states, final_state, shape_rewards
from rmkit.formulas import compile_formula
from rmkit.shortcuts import (
    apply_map,
    enumerate_maps,
    find_urs,
    format_map,
    identity_map,
    is_working,
    report_to_csv,
    urs_oracle_bounded,
    urs_oracle_exact,
)


class TestEnumerateMaps:
    def test_five_symbols_count(self):
        maps = list(enumerate_maps(5))
        assert len(maps) == 5**5 == 3125
        assert len(set(maps)) == 3125

    def test_identity_first_then_lexicographic(self):
        maps = list(enumerate_maps(3))
        assert maps[0] == (0, 1, 2)
        rest = [m for m in maps[1:]]
        assert rest == sorted(rest)
        assert (0, 1, 2) not in rest

    def test_single_symbol(self):
        assert list(enumerate_maps(1)) == [(0,)]

    def test_two_symbols(self):
        assert len(list(enumerate_maps(2))) == 4


class TestIsWorking:
    def test_identity_always_works(self):
        m = shape_rewards(visit_ab_machine())
        dataset = [m.encode("a"), m.encode("abc"), m.encode("cde")]
        assert is_working(m, identity_map(5), dataset)

    def test_symmetric_swap_works_on_single_a(self):
        m = shape_rewards(visit_ab_machine())
        assert is_working(m, (1, 0, 2, 3, 4), [m.encode("a")])

    def test_swap_fails_on_ordered_task(self):
        m = compile_formula("F(a & F(b))", ("a", "b", "c", "d", "e"))
        assert not is_working(m, (1, 0, 2, 3, 4), [m.encode("a")])


class TestFindUrs:
    @pytest.mark.parametrize("tid", sorted(TASK_URS_COUNTS))
    def test_task_counts_match_published_analysis(self, tid, task_machines):
        report = find_urs(task_machines[tid])
        assert report.count == TASK_URS_COUNTS[tid]

    @pytest.mark.parametrize("tid", sorted(TASK_URS_COUNTS))
    def test_matches_exact_oracle_on_tasks(self, tid, task_machines):
        m = task_machines[tid]
        assert find_urs(m).survivor_set() == urs_oracle_exact(m)

    def test_single_symbol_machine(self):
        m = compile_formula("F(a)", ("a",))
        report = find_urs(m)
        assert report.survivors() == [(0,)]
        assert report.count == 1

    def test_identity_always_survives(self, task_machines):
        for m in task_machines.values():
            assert identity_map(5) in find_urs(m).survivor_set()

    def test_matches_exact_oracle_on_random_machines(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            m = random_machine(rng, max_states=5, max_symbols=4)
            assert find_urs(m).survivor_set() == urs_oracle_exact(m)

    def test_pruning_neutrality(self, task_machines):
        for m in task_machines.values():
            base = find_urs(m).survivor_set()
            for sa, sl in ((False, True), (True, False), (False, False)):
                assert find_urs(m, skip_absorbing=sa, skip_selfloop=sl).survivor_set() == base

    def test_jobs_partitioning_is_neutral(self, task_machines):
        m = task_machines[1]
        assert find_urs(m, jobs=2).survivor_set() == find_urs(m).survivor_set()

    def test_survivors_form_a_monoid(self, task_machines):
        # closed under composition and containing the identity
        for m in task_machines.values():
            urs = find_urs(m).survivor_set()
            assert identity_map(5) in urs
            for f, g in itertools.product(urs, repeat=2):
                composed = tuple(f[g[p]] for p in range(5))
                assert composed in urs

    def test_task1_structure(self, task_machines):
        # every survivor fixes {a,b} setwise and keeps {c,d,e} inside {c,d,e}
        urs = find_urs(task_machines[1]).survivor_set()
        for alpha in urs:
            assert sorted(alpha[:2]) == [0, 1]
            assert all(alpha[p] >= 2 for p in (2, 3, 4))
        assert len(urs) == 2 * 27


class TestBoundedOracle:
    def test_superset_of_exact_at_small_bound(self, task_machines):
        m = task_machines[1]
        exact = urs_oracle_exact(m)
        assert urs_oracle_bounded(m, 1) >= exact

    def test_monotone_in_bound(self):
        rng = np.random.default_rng(43)
        for _ in range(25):
            m = random_machine(rng, max_states=4, max_symbols=3)
            sets = [urs_oracle_bounded(m, L) for L in range(1, 5)]
            for smaller_l, larger_l in zip(sets, sets[1:]):
                assert larger_l <= smaller_l

    def test_exact_at_product_space_bound(self, task_machines):
        m = task_machines[1]
        assert urs_oracle_bounded(m, m.n_states**2) == urs_oracle_exact(m)

    def test_upper_bounds_find_urs_at_every_bound(self, task_machines):
        m = task_machines[3]
        urs = find_urs(m).survivor_set()
        for L in range(1, m.n_states**2 + 1):
            assert urs <= urs_oracle_bounded(m, L)


class TestAbsorbingSuffixExtension:
    def test_working_prefixes_extend_freely(self):
        # once both branches sit in absorbing states, any suffix keeps working
        rng = np.random.default_rng(47)
        checked = 0
        while checked < 100:
            m = random_machine(rng, max_states=4, max_symbols=3)
            k = len(m.alphabet)
            absorbing = absorbing_states(m)
            if not absorbing:
                continue
            alpha = tuple(int(rng.integers(0, k)) for _ in range(k))
            x = random_string(rng, k, max_len=6)
            if final_state(m, x) not in absorbing:
                continue
            if final_state(m, apply_map(alpha, x)) not in absorbing:
                continue
            if not is_working(m, alpha, [x]):
                continue
            y = random_string(rng, k, max_len=6)
            assert is_working(m, alpha, [x + y])
            checked += 1


class TestSelfLoopPumping:
    def test_pumped_strings_keep_working(self):
        rng = np.random.default_rng(53)
        checked = 0
        while checked < 100:
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
                assert is_working(m, alpha, [x + (p,) * reps + z])
            checked += 1


class TestReportCsv:
    def test_deterministic_and_sorted(self, task_machines):
        m = task_machines[1]
        a = report_to_csv(find_urs(m))
        b = report_to_csv(find_urs(m))
        assert a == b
        lines = a.strip().splitlines()
        assert lines[0] == "alpha,survived,iterations"
        assert lines[-1].startswith("TOTAL,54,")
        body = [ln.split(",")[0] for ln in lines[1:-1]]
        assert body == sorted(body)
        assert len(body) == 3125

    def test_format_map(self):
        assert format_map((1, 0, 2, 3, 4), ("a", "b", "c", "d", "e")) == "bacde"
        assert format_map((0, 0), ("left", "right")) == "left,left"


class TestReportDiagnostics:
    def test_iterations_and_peaks_populated(self, task_machines):
        report = find_urs(task_machines[1])
        assert (report.iterations >= 1).all()
        assert report.levels == int(report.iterations.max())
        assert (report.peak_pairs >= 1).all()
        assert (report.peak_pairs <= task_machines[1].n_states ** 2).all()
