"""Tests for deployment: exploration, uniform MH chains, exact p-values."""

import math

import numpy as np
import pytest

from fiberwalk.agent import make_actor_critic
from fiberwalk.errors import ContractViolation
from fiberwalk.lattice import compute_lattice_basis, enumerate_fiber
from fiberwalk.models import (
    build_design_matrix,
    fit_expected_counts,
    independence,
    observe_table,
    verify_marginals,
)
from fiberwalk.sampling import (
    FiberSample,
    GofTestResult,
    besag_clifford_pvalues,
    explore,
    mh_uniform,
    proposal_log_prob,
    rank_p_value,
    write_histogram_csv,
    write_pvalues_csv,
    write_sample_csv,
)


def _setup22(start=(1, 0, 0, 1)):
    dm = build_design_matrix(independence(2, 2))
    basis = compute_lattice_basis(dm)
    ac = make_actor_critic(4, basis.count, hidden=(8,), seed=0)
    return dm, basis, ac, np.array(start, dtype=np.int64)


class TestExplore:
    def test_zero_steps_only_start(self):
        dm, basis, ac, start = _setup22()
        sample, discovered = explore(ac, basis, start, 0, np.random.default_rng(0))
        assert len(sample.points) == 1
        assert np.array_equal(sample.points[0], start)
        assert discovered.count == 1

    def test_two_point_fiber_fully_discovered(self):
        dm, basis, ac, start = _setup22()
        sample, discovered = explore(ac, basis, start, 1000, np.random.default_rng(1))
        fiber = enumerate_fiber(dm, dm.marginals(start))
        assert discovered.count == len(fiber) == 2
        visited = {tuple(int(v) for v in p) for p in discovered.points}
        assert visited == fiber

    def test_discovered_never_exceeds_fiber_size(self):
        dm = build_design_matrix(independence(3, 3))
        basis = compute_lattice_basis(dm)
        start = np.array([2, 0, 1, 0, 1, 0, 0, 1, 1], dtype=np.int64)
        fiber = enumerate_fiber(dm, dm.marginals(start))
        ac = make_actor_critic(9, basis.count, hidden=(8,), seed=2)
        _, discovered = explore(ac, basis, start, 3000, np.random.default_rng(3))
        assert discovered.count <= len(fiber)
        for point in discovered.points:
            assert np.all(point >= 0)
            assert verify_marginals(dm, point, dm.marginals(start))

    def test_trace_length_counts_rejections(self):
        dm, basis, ac, start = _setup22()
        sample, _ = explore(ac, basis, start, 250, np.random.default_rng(4))
        assert len(sample.points) == 251

    def test_negative_start_rejected(self):
        dm, basis, ac, _ = _setup22()
        with pytest.raises(ContractViolation):
            explore(ac, basis, np.array([-1, 0, 0, 1]), 5, np.random.default_rng(0))

    def test_stuck_chain_flagged(self):
        dm, basis, ac, _ = _setup22()
        # Single-point fiber; force the policy to always propose +2 with
        # a tiny stddev, so every proposal is infeasible.
        ac.set_actor_params(np.zeros(ac.actor_params().size))
        ac.actor_head.biases[0][0] = 2.0     # mean
        ac.actor_head.biases[0][1] = -20.0   # log sigma, clamps to 1e-3
        start = np.array([1, 1, 0, 0], dtype=np.int64)
        sample, discovered = explore(ac, basis, start, 100, np.random.default_rng(5))
        assert sample.stuck
        assert discovered.count == 1


class TestMhUniform:
    def test_symmetric_proposals_for_zero_policy(self):
        dm, basis, ac, start = _setup22()
        ac.set_actor_params(np.zeros(ac.actor_params().size))
        other = np.array([0, 1, 1, 0], dtype=np.int64)
        for coeffs in ([1], [-1], [2]):
            fwd = proposal_log_prob(ac, start, np.array(coeffs))
            rev = proposal_log_prob(ac, other, -np.array(coeffs))
            assert fwd == pytest.approx(rev)

    def test_never_leaves_fiber(self):
        dm, basis, ac, start = _setup22((2, 1, 1, 2))
        sample, _ = mh_uniform(ac, basis, start, 400, np.random.default_rng(6))
        b = dm.marginals(start)
        for point in sample.points:
            assert np.all(point >= 0)
            assert verify_marginals(dm, point, b)

    def test_two_point_fiber_frequencies_near_half(self):
        dm, basis, ac, start = _setup22()
        sample, _ = mh_uniform(ac, basis, start, 4000, np.random.default_rng(7))
        hits = sum(1 for p in sample.points if tuple(p) == (1, 0, 0, 1))
        frac = hits / len(sample.points)
        assert 0.4 < frac < 0.6

    def test_statistics_attached_when_expected_given(self):
        dm, basis, ac, start = _setup22((2, 1, 1, 2))
        spec = independence(2, 2)
        data = observe_table(spec, dm, start)
        expected = fit_expected_counts(spec, data)
        sample, _ = mh_uniform(
            ac, basis, start, 50, np.random.default_rng(8), expected=expected
        )
        assert sample.statistics is not None
        assert len(sample.statistics) == len(sample.points)
        assert np.all(sample.statistics >= 0)


class TestRankPValue:
    def test_observed_above_everything(self):
        stats = np.zeros(99)
        assert rank_p_value(stats, 1.0) == pytest.approx(1 / 100)

    def test_all_equal_gives_one(self):
        stats = np.full(25, 3.0)
        assert rank_p_value(stats, 3.0) == 1.0

    def test_support_grid(self):
        rng = np.random.default_rng(9)
        n = 49
        stats = rng.random(n)
        p = rank_p_value(stats, 0.5)
        assert p in {k / (n + 1) for k in range(1, n + 2)}

    def test_adding_smaller_statistic_never_raises_p(self):
        stats = [1.0, 2.0, 3.0]
        p1 = rank_p_value(stats, 2.5)
        p2 = rank_p_value(stats + [0.1], 2.5)
        assert p2 <= p1

    def test_result_type_validates_rank_form(self):
        with pytest.raises(ContractViolation):
            GofTestResult(
                observed_statistic=1.0,
                p_value=0.123,
                sample_size=10,
                chain_id=0,
                seed=0,
            )


class TestBesagClifford:
    def test_protocol_shape_and_reproducibility(self):
        dm, basis, ac, start = _setup22((3, 1, 1, 3))
        spec = independence(2, 2)
        data = observe_table(spec, dm, start)
        runs = []
        for _ in range(2):
            results = besag_clifford_pvalues(
                ac, basis, spec, data, chains=4, chain_length=19, seed=11
            )
            runs.append([r.p_value for r in results])
            assert len(results) == 4
            for i, r in enumerate(results):
                assert r.sample_size == 19
                assert r.chain_id == i
                assert r.seed == 11 + i
                assert 0 < r.p_value <= 1
        assert runs[0] == runs[1]

    def test_infinite_observed_statistic_gives_smallest_p(self):
        # Observed statistic above every sampled one: p = 1/(n+1) only
        # if no sampled statistic ties it; +inf observed ties +inf.
        stats = np.array([1.0, 2.0])
        assert rank_p_value(stats, math.inf) == pytest.approx(1 / 3)


class TestCsvOutputs:
    def test_sample_csv(self, tmp_path):
        dm, basis, ac, start = _setup22((2, 1, 1, 2))
        spec = independence(2, 2)
        data = observe_table(spec, dm, start)
        expected = fit_expected_counts(spec, data)
        sample, _ = mh_uniform(
            ac, basis, start, 10, np.random.default_rng(0), expected=expected
        )
        path = tmp_path / "sample.csv"
        write_sample_csv(path, sample, dm.column_labels)
        lines = path.read_text().splitlines()
        assert lines[0] == "0_0,0_1,1_0,1_1,statistic"
        assert len(lines) == 12

    def test_pvalues_and_histogram_csv(self, tmp_path):
        results = [
            GofTestResult(1.0, (1 + i) / 11, 10, chain_id=i, seed=i) for i in range(10)
        ]
        pv = tmp_path / "p.csv"
        write_pvalues_csv(pv, results)
        assert pv.read_text().splitlines()[0] == "chain_id,p_value"
        hist = tmp_path / "h.csv"
        write_histogram_csv(hist, [r.p_value for r in results], bins=5)
        lines = hist.read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count"
        assert len(lines) == 6
        total = sum(int(line.split(",")[2]) for line in lines[1:])
        assert total == 10


class TestFiberSampleInvariants:
    def test_statistic_length_enforced(self):
        with pytest.raises(ContractViolation):
            FiberSample(
                points=np.zeros((3, 2), dtype=np.int64),
                statistics=np.zeros(2),
                chain_id=0,
                seed=0,
            )
