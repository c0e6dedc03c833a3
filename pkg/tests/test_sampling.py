import itertools
import threading

import numpy as np
import pytest

from fglearn.experiments import generate_model
from fglearn.model import Assignment, Factor, FactorGraph, ValidationError, binary_variables
from fglearn.oracle import JointTable, joint_table, marginal, symmetric_kl
from fglearn.sampling import (Dataset, EmpiricalAccess, ZeroCount, empirical_log_conditional,
                              empirical_log_prob, exact_sample, gibbs_sample)

ROWS = [(0, 0), (0, 1), (1, 1), (1, 1)]


def small():
    return Dataset(binary_variables(2), ROWS)


class TestDataset:
    def test_rows_validated(self):
        with pytest.raises(ValidationError):
            Dataset(binary_variables(2), [(0, 2)])

    def test_needs_a_row(self):
        with pytest.raises(ValidationError):
            Dataset(binary_variables(2), np.zeros((0, 2)))

    def test_rows_read_only(self):
        with pytest.raises(ValueError):
            small().rows[0, 0] = 1

    def test_counts_match_recount(self):
        data = exact_sample(joint_table(generate_model("chain", 4, 3, seed=1)), 2000, seed=2)
        for scope in [(0,), (1, 3), (0, 2, 3)]:
            table = data.count_table(scope)
            for d in itertools.product(*(range(data.cardinalities[i]) for i in scope)):
                assert table[d] == int(np.all(data.rows[:, scope] == d, axis=1).sum())

    def test_count_coherence(self):
        data = exact_sample(joint_table(generate_model("chain", 4, 3, seed=1)), 2000, seed=3)
        t = data.count_table((0, 1, 3))
        np.testing.assert_array_equal(t.sum(axis=1), data.count_table((0, 3)))
        np.testing.assert_array_equal(t.sum(axis=(0, 2)), data.count_table((1,)))

    def test_concurrent_cache_fills_agree(self):
        data = exact_sample(joint_table(generate_model("chain", 5, seed=1)), 5000, seed=3)
        scopes = [s for r in (1, 2, 3) for s in itertools.combinations(range(5), r)]
        results = {}

        def work(tag):
            results[tag] = [data.count_table(s).copy() for s in scopes]

        threads = [threading.Thread(target=work, args=(t,)) for t in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for tag in range(1, 4):
            for a, b in zip(results[0], results[tag]):
                np.testing.assert_array_equal(a, b)

    def test_head(self):
        assert small().head(2).m == 2


class TestEmpirical:
    def test_conditional_by_counting(self):
        v = empirical_log_conditional(small(), Assignment((0,), (1,)), Assignment((1,), (1,)))
        assert v == pytest.approx(np.log(2 / 3), abs=1e-15)

    def test_empty_event(self):
        assert empirical_log_prob(small(), Assignment((), ())) == 0.0

    def test_identical_rows(self):
        data = Dataset(binary_variables(2), [(1, 0)] * 5)
        assert empirical_log_prob(data, Assignment((0, 1), (1, 0))) == 0.0
        with pytest.raises(ZeroCount):
            empirical_log_prob(data, Assignment((0,), (0,)))
        with pytest.raises(ZeroCount):
            empirical_log_conditional(data, Assignment((0,), (1,)), Assignment((1,), (1,)))

    def test_clipped_zero_goes_to_floor(self):
        data = Dataset(binary_variables(2), [(1, 0)] * 5)
        assert empirical_log_conditional(data, Assignment((0,), (0,)), Assignment((1,), (0,)), log_floor=-3.0) == -3.0

    def test_access_strict_and_clipped(self):
        data = Dataset(binary_variables(2), [(1, 0)] * 5)
        with pytest.raises(ZeroCount):
            EmpiricalAccess(data).log_conditional((0,), (1,), (0,))
        np.testing.assert_array_equal(EmpiricalAccess(data, -2.0).log_conditional((0,), (1,), (0,)), [-2.0, 0.0])
        np.testing.assert_array_equal(EmpiricalAccess(data, -2.0).log_conditional((0,), (1,), (1,)), [-2.0, -2.0])

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            empirical_log_conditional(small(), Assignment((0,), (1,)), Assignment((0,), (1,)))


class TestExactSample:
    def test_near_certain(self):
        probs = np.full(4, 1e-12 / 3)
        probs[2] = 1 - 1e-12
        data = exact_sample(JointTable.from_probs(binary_variables(2), probs), 1000, seed=1)
        assert np.all(data.rows == (1, 0))

    def test_bernoulli_frequency(self):
        # binomial sd at m=1e5 is 0.00137, so [0.74, 0.76] is more than 7 sd wide
        data = exact_sample(JointTable.from_probs(binary_variables(1), [0.25, 0.75]), 100_000, seed=5)
        assert 0.74 <= data.rows[:, 0].mean() <= 0.76

    def test_seed_determinism(self):
        j = joint_table(generate_model("chain", 4, 3, seed=1))
        np.testing.assert_array_equal(exact_sample(j, 500, 9).rows, exact_sample(j, 500, 9).rows)
        assert not np.array_equal(exact_sample(j, 500, 9).rows, exact_sample(j, 500, 10).rows)

    def test_frozen_stream(self):
        # first rows of a fixed Philox stream; guards against silent RNG changes
        j = JointTable.from_probs(binary_variables(2), [0.1, 0.2, 0.3, 0.4])
        rows = exact_sample(j, 6, seed=0).rows.tolist()
        assert rows == [[0, 0], [0, 1], [0, 1], [1, 0], [1, 0], [0, 1]]
        u = np.random.Generator(np.random.Philox(key=0)).random(6)
        flat = np.searchsorted([0.1, 0.3, 0.6, 1.0], u, side="right")
        assert rows == [[int(k) // 2, int(k) % 2] for k in flat]

    def test_empirical_joint_converges(self):
        j = joint_table(generate_model("chain", 4, 2, seed=3))
        means = []
        for m in (1000, 10_000, 100_000):
            kls = []
            for seed in range(1, 11):
                counts = exact_sample(j, m, seed).count_table((0, 1, 2, 3)).astype(float) + 0.5
                q = JointTable.from_probs(j.variables, counts / counts.sum())
                kls.append(symmetric_kl(j, q))
            means.append(np.mean(kls))
        assert means[0] > means[1] > means[2]


class TestGibbs:
    def test_single_variable(self):
        g = FactorGraph(binary_variables(1), (Factor.from_values((0,), [1.0, 3.0]),))
        freq = gibbs_sample(g, 100_000, seed=1).rows[:, 0].mean()
        assert abs(freq - 0.75) <= 0.01

    def test_independent_pair(self):
        g = FactorGraph(binary_variables(2), (Factor.from_values((0,), [1.0, 3.0]),
                                              Factor.from_values((1,), [2.0, 1.0])))
        rows = gibbs_sample(g, 100_000, seed=2).rows
        assert abs(np.corrcoef(rows[:, 0], rows[:, 1])[0, 1]) <= 0.02

    def test_chain_total_variation(self):
        g = generate_model("chain", 3, 2, 3.0, seed=4)
        rows = gibbs_sample(g, 100_000, burn_in=500, thinning=2, seed=3)
        counts = rows.count_table((0, 1, 2)) / rows.m
        assert 0.5 * np.abs(counts - joint_table(g).probs).sum() <= 0.02

    def test_deterministic(self):
        g = generate_model("chain", 4, seed=4)
        np.testing.assert_array_equal(gibbs_sample(g, 200, seed=7).rows, gibbs_sample(g, 200, seed=7).rows)

    def test_parameters_validated(self):
        g = generate_model("chain", 3, seed=4)
        with pytest.raises(ValidationError):
            gibbs_sample(g, 10, burn_in=0)
        with pytest.raises(ValidationError):
            gibbs_sample(g, 10, thinning=0)
