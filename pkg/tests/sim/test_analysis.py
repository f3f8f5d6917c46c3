import pytest
from pytest_check import check

from app.sim.analysis import (
    empirical_distribution,
    expected_accepted_count,
    extend_to_length,
    fixed_tree_outcome_distribution,
    speculative_outcome_distribution,
    target_sequence_distribution,
    total_variation,
)
from app.sim.models import TreeMode
from app.sim.SpecDecodeSimulator import SpecDecodeSimulator
from app.sim.ToyLM import ToyLM


class TestExactLaws:
    @pytest.fixture(autouse=True)
    def setup(self, fixtures_dir):
        self.peaked = ToyLM.load(fixtures_dir / "toylm" / "peaked_target.txt")
        self.uniform = ToyLM.load(fixtures_dir / "toylm" / "uniform_draft.txt")

    def test_target_law_sums_to_one(self, markov_pair):
        target, _ = markov_pair
        law = target_sequence_distribution(target, [1], 3)

        with check:
            check.equal(len(law), 27)
            check.equal(sum(law.values()), pytest.approx(1.0))
            check.equal(law[(2, 0, 1)], pytest.approx(0.6 * 0.7 * 0.6))

    def test_expected_count_for_chain(self):
        law = speculative_outcome_distribution(self.peaked, self.uniform, [], 1, 2, TreeMode.SAMPLED)

        with check:
            check.equal(expected_accepted_count(law), pytest.approx(1.8525))
            check.equal(sum(law.values()), pytest.approx(1.0))

    @pytest.mark.parametrize("mode", list(TreeMode))
    @pytest.mark.parametrize("top_c,depth", [(1, 1), (1, 2), (1, 3), (2, 2), (3, 2)])
    def test_cycle_is_lossless(self, mode, top_c, depth):
        """Tree drafting plus verification leaves the target's sequence law unchanged"""
        for seed in range(10):
            target = ToyLM.random(3, 1, seed=2 * seed)
            draft = ToyLM.random(3, 1, seed=2 * seed + 1, concentration=0.5)
            law = speculative_outcome_distribution(target, draft, [seed % 3], top_c, depth, mode)
            observed = extend_to_length(law, target, [seed % 3], depth + 1)
            exact = target_sequence_distribution(target, [seed % 3], depth + 1)
            check.less(total_variation(observed, exact), 1e-9, f"seed={seed}")

    def test_fixed_greedy_tree_is_lossless(self, markov_pair):
        target, draft = markov_pair
        sim = SpecDecodeSimulator(target, draft)
        for prefix in ([], [0], [2, 1]):
            tree = sim.build_tree(prefix, top_c=2, depth=2, budget=4)
            law = extend_to_length(fixed_tree_outcome_distribution(target, prefix, tree), target, prefix, 3)
            check.less(total_variation(law, target_sequence_distribution(target, prefix, 3)), 1e-9)

    def test_extend_truncates_long_outcomes(self, markov_pair):
        target, _ = markov_pair
        law = extend_to_length({(0, 1, 2): 0.5, (1,): 0.5}, target, [], 2)

        with check:
            check.equal(law[(0, 1)], 0.5)
            check.equal(law[(1, 2)], pytest.approx(0.5 * 0.6))
            check.equal(sum(law.values()), pytest.approx(1.0))


class TestDistributionHelpers:
    def test_total_variation(self):
        with check:
            check.equal(total_variation({(0,): 1.0}, {(1,): 1.0}), 1.0)
            check.equal(total_variation({(0,): 0.5, (1,): 0.5}, {(0,): 0.5, (1,): 0.5}), 0.0)
            check.equal(total_variation({(0,): 0.75, (1,): 0.25}, {(0,): 0.25, (1,): 0.75}), 0.5)

    def test_empirical_distribution(self):
        law = empirical_distribution([(0,), (0, 1), (0,), (2,)])
        check.equal(law, {(0,): 0.5, (0, 1): 0.25, (2,): 0.25})

    def test_expected_accepted_count(self):
        check.equal(expected_accepted_count({(0,): 0.5, (0, 1, 2): 0.5}), 2.0)
