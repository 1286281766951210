import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankties.floatsim import BF16, quantize_array
from rankties.ties import (ScoredCandidate, TieProfile, group_ties, tie_stats,
                           truncation_counts)

from sample_data import SATURATED_BF16_SCORES, SATURATED_LEADING_GROUP_SIZES


def make_candidates(scores, relevant=None):
    relevant = relevant or [False] * len(scores)
    return [ScoredCandidate(f"d{i}", s, r, i)
            for i, (s, r) in enumerate(zip(scores, relevant))]


class TestGroupTies:
    def test_distinct_scores_give_singletons(self):
        profile = group_ties(make_candidates([0.9, 0.7, 0.4, 0.1]))
        assert profile.num_groups == 4
        assert list(profile.sizes) == [1, 1, 1, 1]
        assert list(profile.cumulative) == [0, 1, 2, 3, 4]

    def test_single_group(self):
        profile = group_ties(make_candidates([0.5] * 6))
        assert profile.num_groups == 1
        assert profile.total_items == 6

    def test_saturated_bf16_list(self):
        scores = quantize_array(SATURATED_BF16_SCORES, BF16)
        profile = group_ties(make_candidates(list(scores)))
        assert profile.values[0] == 1.0
        assert profile.sizes[0] == 10
        assert list(profile.sizes[:4]) == SATURATED_LEADING_GROUP_SIZES
        assert profile.total_items == 100

    def test_relevant_counts(self):
        cands = make_candidates([0.5, 0.5, 0.2], [True, False, True])
        profile = group_ties(cands)
        assert list(profile.relevant_counts) == [1, 1]
        assert profile.total_relevant == 2
        assert list(profile.relevance_probabilities) == [0.5, 1.0]

    def test_errors(self):
        with pytest.raises(ValueError):
            group_ties([])
        with pytest.raises(ValueError):
            group_ties(make_candidates([0.5, float("nan")]))

    def test_signed_zero_shares_a_group(self):
        profile = group_ties(make_candidates([0.0, -0.0, 0.5]))
        assert profile.num_groups == 2
        assert list(profile.sizes) == [1, 2]

    def test_bit_identical_predicate(self):
        a = 0.99609375
        b = float(np.nextafter(a, 0.0))
        profile = group_ties(make_candidates([a, b]))
        assert profile.num_groups == 2


class TestTruncation:
    def test_direct_formula(self):
        profile = TieProfile([0.9, 0.5], [2, 3], [0, 0])
        assert list(truncation_counts(profile, 3)) == [2, 1]

    def test_cutoff_beyond_list(self):
        profile = TieProfile([0.9, 0.5], [2, 3], [0, 0])
        assert list(truncation_counts(profile, 99)) == [2, 3]

    def test_saturated_list_at_ten(self):
        scores = quantize_array(SATURATED_BF16_SCORES, BF16)
        profile = group_ties(make_candidates(list(scores)))
        t = truncation_counts(profile, 10)
        assert t[0] == 10
        assert t[1:].sum() == 0

    def test_sums_to_min_k_l(self):
        profile = TieProfile([3.0, 2.0, 1.0], [4, 1, 2], [1, 0, 2])
        for k in range(1, 10):
            assert truncation_counts(profile, k).sum() == min(k, 7)
        with pytest.raises(ValueError):
            truncation_counts(profile, 0)


class TestTieStats:
    def test_all_singletons(self):
        profile = group_ties(make_candidates([0.3, 0.2, 0.1]))
        stats = tie_stats(profile, 2)
        assert not stats.straddling_tie
        assert stats.tied_fraction == 0.0
        assert stats.largest_group == 1

    def test_single_big_group(self):
        profile = group_ties(make_candidates([0.5] * 8))
        assert tie_stats(profile, 3).straddling_tie

    def test_saturated_at_five(self):
        scores = quantize_array(SATURATED_BF16_SCORES, BF16)
        profile = group_ties(make_candidates(list(scores)))
        assert tie_stats(profile, 5).straddling_tie
        assert tie_stats(profile, 5).largest_group == 19


score_lists = st.lists(
    st.floats(min_value=-4.0, max_value=4.0, allow_nan=False), min_size=1, max_size=40)


@given(score_lists)
def test_partition_and_order(scores):
    # quantize to force collisions
    scores = list(quantize_array(scores, BF16))
    profile = group_ties(make_candidates(scores))
    assert profile.sizes.sum() == len(scores)
    assert (profile.values[:-1] > profile.values[1:]).all()
    assert profile.cumulative[-1] == len(scores)


@given(score_lists, st.randoms(use_true_random=False))
@settings(max_examples=100)
def test_permutation_invariance(scores, rnd):
    scores = list(quantize_array(scores, BF16))
    relevant = [i % 3 == 0 for i in range(len(scores))]
    base = group_ties(make_candidates(scores, relevant))
    paired = list(zip(scores, relevant))
    rnd.shuffle(paired)
    shuffled = [ScoredCandidate(f"s{i}", s, r, i) for i, (s, r) in enumerate(paired)]
    other = group_ties(shuffled)
    assert np.array_equal(base.values, other.values)
    assert np.array_equal(base.sizes, other.sizes)
    assert np.array_equal(base.relevant_counts, other.relevant_counts)


def test_from_scores_matches_group_ties():
    rng = np.random.default_rng(5)
    scores = quantize_array(rng.normal(0, 1, 200), BF16)
    relevant = rng.integers(0, 2, 200)
    profile_a = TieProfile.from_scores(scores, relevant)
    profile_b = group_ties([ScoredCandidate(str(i), float(s), bool(r), i)
                            for i, (s, r) in enumerate(zip(scores, relevant))])
    assert np.array_equal(profile_a.values, profile_b.values)
    assert np.array_equal(profile_a.relevant_counts, profile_b.relevant_counts)


def test_profile_validation():
    with pytest.raises(ValueError):
        TieProfile([1.0, 1.0], [1, 1], [0, 0])  # not strictly descending
    with pytest.raises(ValueError):
        TieProfile([1.0], [0], [0])
    with pytest.raises(ValueError):
        TieProfile([1.0], [2], [3])
    with pytest.raises(ValueError):
        TieProfile.from_sorted_arrays([0.1, 0.9], [0, 0])  # ascending
