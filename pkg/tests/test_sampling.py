from __future__ import annotations

import numpy as np
import pytest

from viewplan.sampling import (
    InputCase,
    NSTable,
    ObjectCase,
    generate_whole_space,
    greedy_rollout,
    long_tail_limit,
    read_cases,
    sample_longtail,
    sample_nbvr,
    write_cases,
)
from viewplan.voxel_world import VisibilityTable


def synthetic_table(seed: int, n_elements: int = 120) -> VisibilityTable:
    """Random per-view element sets whose union is the full universe."""
    rng = np.random.default_rng(seed)
    sets = []
    for vid in range(32):
        p = rng.uniform(0.05, 0.35)
        sets.append(set(np.flatnonzero(rng.random(n_elements) < p)))
    for e in range(n_elements):
        if not any(e in s for s in sets):
            sets[int(rng.integers(0, 32))].add(e)
    return VisibilityTable.from_sets(
        [frozenset(int(x) for x in s) for s in sets]
    )


def builder_for(tables: dict[ObjectCase, VisibilityTable]):
    return lambda case: tables[case]


@pytest.fixture(scope="module")
def small_corpus():
    objects = [ObjectCase(object_id=i, rotation=r) for i in range(3) for r in (0, 4)]
    tables = {
        case: synthetic_table(seed=17 + 13 * case.object_id + case.rotation)
        for case in objects
    }
    return objects, tables


class TestObjectAndInputCase:
    def test_rotation_validation(self):
        with pytest.raises(ValueError):
            ObjectCase(object_id=0, rotation=8)

    def test_input_case_requires_selected_view(self):
        with pytest.raises(ValueError):
            InputCase(object_case=ObjectCase(0, 0), c_view=0)

    def test_n_select_is_popcount(self):
        case = InputCase(object_case=ObjectCase(0, 0), c_view=0b1011)
        assert case.n_select == 3


class TestNSTable:
    def test_running_mean(self):
        ns = NSTable()
        case = ObjectCase(0, 0)
        for g in (0.2, 0.4, 0.6):
            ns.update(case, 1, g)
        assert ns.mean(case, 1) == pytest.approx(0.4, abs=1e-12)

    def test_order_independent_merge(self):
        case = ObjectCase(0, 0)
        gains = [0.11, 0.52, 0.33, 0.24, 0.08]
        a, b = NSTable(), NSTable()
        for g in gains[:2]:
            a.update(case, 2, g)
        for g in gains[2:]:
            b.update(case, 2, g)
        direct = NSTable()
        for g in reversed(gains):
            direct.update(case, 2, g)
        assert a.merge(b).mean(case, 2) == pytest.approx(
            direct.mean(case, 2), abs=1e-12
        )

    def test_rejects_bad_values(self):
        ns = NSTable()
        with pytest.raises(ValueError):
            ns.update(ObjectCase(0, 0), 0, 0.5)
        with pytest.raises(ValueError):
            ns.update(ObjectCase(0, 0), 1, 0.0)
        with pytest.raises(ValueError):
            ns.update(ObjectCase(0, 0), 1, 1.5)


class TestGenerateWholeSpace:
    def test_single_object_single_rotation(self, small_corpus):
        objects, tables = small_corpus
        one = [objects[0]]
        cases, ns = generate_whole_space(one, builder_for(tables))
        initials = [c for c in cases if c.n_select == 1]
        assert len(initials) == 32
        assert all(c.object_case == one[0] for c in cases)
        assert len(cases) >= 32

    def test_case_count_equals_rollout_lengths(self, small_corpus):
        objects, tables = small_corpus
        cases, ns = generate_whole_space(objects, builder_for(tables))
        expected = 0
        for case in objects:
            for v0 in range(32):
                expected += len(greedy_rollout(tables[case], v0))
        assert len(cases) == expected

    def test_rollouts_terminate_at_full_coverage(self, small_corpus):
        objects, tables = small_corpus
        for case in objects:
            for v0 in (0, 7, 31):
                steps = greedy_rollout(tables[case], v0)
                assert len(steps) <= 32
                assert steps[-1][1] == pytest.approx(1.0, abs=1e-12)
                fractions = [f for _, f in steps]
                assert all(b >= a for a, b in zip(fractions, fractions[1:]))

    def test_failed_builds_are_skipped(self, small_corpus, caplog):
        objects, tables = small_corpus

        def flaky(case):
            if case.object_id == 1:
                raise RuntimeError("ingestion failed")
            return tables[case]

        with caplog.at_level("ERROR"):
            cases, _ = generate_whole_space(objects, flaky)
        assert {c.object_case.object_id for c in cases} == {0, 2}
        assert any("skipping" in r.message for r in caplog.records)

    def test_ns_keyed_by_depth_before_selection(self, small_corpus):
        objects, tables = small_corpus
        cases, ns = generate_whole_space([objects[0]], builder_for(tables))
        depths = ns.depths(objects[0])
        assert depths[0] == 1
        max_depth = max(c.n_select for c in cases)
        assert max(depths) == max_depth - 1


class TestLongTailLimit:
    def test_depth_one_returns_n_single(self):
        assert long_tail_limit(NSTable(), ObjectCase(0, 0), 1, 32) == 32

    def test_ratio_arithmetic(self):
        ns = NSTable()
        case = ObjectCase(0, 0)
        ns.update(case, 1, 0.4)
        ns.update(case, 5, 0.2)
        assert long_tail_limit(ns, case, 5, 32) == 16

    def test_ceiling_keeps_at_least_one(self):
        ns = NSTable()
        case = ObjectCase(0, 0)
        ns.update(case, 1, 0.5)
        ns.update(case, 9, 0.005)
        assert long_tail_limit(ns, case, 9, 8) == 1

    def test_absent_depth_limit_zero(self):
        ns = NSTable()
        case = ObjectCase(0, 0)
        ns.update(case, 1, 0.5)
        assert long_tail_limit(ns, case, 20, 8) == 0


class TestSampleLongtail:
    def test_bucket_caps_exact(self, small_corpus):
        objects, tables = small_corpus
        whole, ns = generate_whole_space(objects, builder_for(tables))
        n_single = 4
        sampled = sample_longtail(whole, ns, n_single, seed=5)
        by_bucket: dict[tuple[ObjectCase, int], int] = {}
        for c in sampled:
            key = (c.object_case, c.n_select)
            by_bucket[key] = by_bucket.get(key, 0) + 1
        available: dict[tuple[ObjectCase, int], int] = {}
        for c in whole:
            key = (c.object_case, c.n_select)
            available[key] = available.get(key, 0) + 1
        for key, avail in available.items():
            limit = long_tail_limit(ns, key[0], key[1], n_single)
            assert by_bucket.get(key, 0) == min(limit, avail)
        assert len(sampled) == sum(
            min(long_tail_limit(ns, k[0], k[1], n_single), a)
            for k, a in available.items()
        )

    def test_depth_one_bucket_full(self, small_corpus):
        objects, tables = small_corpus
        whole, ns = generate_whole_space(objects, builder_for(tables))
        sampled = sample_longtail(whole, ns, n_single=4, seed=5)
        for case in objects:
            ones = [
                c for c in sampled if c.object_case == case and c.n_select == 1
            ]
            avail = [
                c for c in whole if c.object_case == case and c.n_select == 1
            ]
            assert len(ones) == min(4, len(avail))

    def test_deterministic_for_seed(self, small_corpus):
        objects, tables = small_corpus
        whole, ns = generate_whole_space(objects, builder_for(tables))
        a = sample_longtail(whole, ns, 8, seed=123)
        b = sample_longtail(whole, ns, 8, seed=123)
        assert a == b
        c = sample_longtail(whole, ns, 8, seed=124)
        assert a != c

    def test_long_tail_shape(self, small_corpus):
        # Depth-one average gain dominates deeper averages.
        objects, tables = small_corpus
        _, ns = generate_whole_space(objects, builder_for(tables))
        mean_1 = np.mean([ns.mean(c, 1) for c in objects])
        for depth in (4, 5, 6):
            deeper = [
                ns.mean(c, depth) for c in objects if ns.mean(c, depth) is not None
            ]
            if deeper:
                assert mean_1 > np.mean(deeper)


class TestSampleNbvr:
    def test_full_subset_equals_whole_space(self, small_corpus):
        objects, tables = small_corpus
        whole, _ = generate_whole_space(objects, builder_for(tables))
        nbvr = sample_nbvr(objects, builder_for(tables), 32, seed=9)
        assert sorted(
            (c.object_case, c.c_view) for c in nbvr
        ) == sorted((c.object_case, c.c_view) for c in whole)

    def test_subset_size_validated(self, small_corpus):
        objects, tables = small_corpus
        with pytest.raises(ValueError):
            sample_nbvr(objects, builder_for(tables), 0, seed=1)

    def test_histogram_mirrors_whole_space(self, small_corpus):
        objects, tables = small_corpus
        whole, _ = generate_whole_space(objects, builder_for(tables))
        nbvr = sample_nbvr(objects, builder_for(tables), 8, seed=9)

        def hist(cases):
            h = np.zeros(33)
            for c in cases:
                h[c.n_select] += 1
            return h / h.sum()

        hw, hn = hist(whole), hist(nbvr)
        corr = np.corrcoef(hw, hn)[0, 1]
        assert corr > 0.95


class TestCaseIO:
    def test_round_trip(self, tmp_path, small_corpus):
        objects, tables = small_corpus
        whole, _ = generate_whole_space(objects[:2], builder_for(tables))
        path = tmp_path / "cases.txt"
        write_cases(whole, path)
        assert read_cases(path) == whole
        first = path.read_text().splitlines()[0].split()
        assert len(first) == 3
        assert len(first[2]) == 8
