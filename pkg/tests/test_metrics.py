import numpy as np
import pytest

from internal.domain.errors import EmptyInputError
from internal.modeling.metrics import ap_at_k, map_at_k, precision_at_k

T, F = True, False


def reference_ap(labels, total_relevant, k):
    labels = (list(labels) + [False] * k)[:k]
    if total_relevant == 0:
        return 0.0
    hits, total = 0, 0.0
    for i, rel in enumerate(labels, start=1):
        if rel:
            hits += 1
            total += hits / i
    return min(total / min(k, total_relevant), 1.0)


class TestPrecisionAtK:
    def test_counts_the_top_k(self):
        assert precision_at_k([T, T, T, F, F], 5) == pytest.approx(0.6)

    def test_short_lists_are_padded(self):
        assert precision_at_k([T, T], 5) == pytest.approx(0.4)

    def test_all_false(self):
        assert precision_at_k([F, F, F], 3) == 0.0

    def test_longer_list_is_truncated(self):
        assert precision_at_k([T, F, T, T], 2) == pytest.approx(0.5)

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            precision_at_k([T], 0)


class TestApAtK:
    def test_hand_value(self):
        assert ap_at_k([T, F, T, F, F], 2, 5) == pytest.approx(5 / 6)

    def test_perfect_ranking(self):
        assert ap_at_k([T, T, T], 3, 3) == pytest.approx(1.0)

    def test_nothing_relevant(self):
        assert ap_at_k([T, T], 0, 2) == 0.0
        assert ap_at_k([F, F], 4, 2) == 0.0

    def test_matches_reference(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            k = int(rng.integers(1, 11))
            labels = list(rng.random(int(rng.integers(0, 12))) < 0.4)
            total = int(rng.integers(0, 12))
            expected = reference_ap(labels, total, k)
            assert ap_at_k(labels, total, k) == pytest.approx(expected, abs=1e-12)

    def test_values_stay_in_unit_interval(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            labels = list(rng.random(10) < 0.5)
            k = int(rng.integers(1, 11))
            total = int(rng.integers(0, 15))
            assert 0.0 <= ap_at_k(labels, total, k) <= 1.0
            assert 0.0 <= precision_at_k(labels, k) <= 1.0

    def test_moving_a_hit_down_never_helps(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            labels = list(rng.random(10) < 0.5)
            swaps = [
                i for i in range(9) if labels[i] and not labels[i + 1]
            ]
            if not swaps:
                continue
            i = swaps[int(rng.integers(0, len(swaps)))]
            worse = labels[:]
            worse[i], worse[i + 1] = worse[i + 1], worse[i]
            total = sum(labels)
            assert ap_at_k(labels, total, 10) >= ap_at_k(worse, total, 10)

    def test_all_hits_equal_precision(self):
        assert ap_at_k([T] * 5, 7, 5) == precision_at_k([T] * 5, 5) == 1.0


class TestMapAtK:
    def test_mean(self):
        assert map_at_k([1.0, 0.0]) == pytest.approx(0.5)

    def test_single(self):
        assert map_at_k([0.37]) == pytest.approx(0.37)

    def test_matches_naive_sum(self):
        values = list(np.random.default_rng(2).random(200))
        assert map_at_k(values) == pytest.approx(sum(values) / 200, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            map_at_k([])
