import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distraction.errors import ConfigError, MetricError
from distraction.metrics import (accuracy, area_over_curve, average_precision, demographic_parity,
                                 equal_opportunity_gap, evaluate, hard_labels, positive_rates)


def test_dp_examples():
    assert demographic_parity([1, 1, 0, 1], [0, 0, 1, 1]) == 0.5
    assert demographic_parity([1, 1, 0, 1, 0, 0], [0, 0, 1, 1, 2, 2]) == 1.0
    assert demographic_parity([1, 0, 1, 0], [0, 0, 1, 1]) == 0.0


def test_dp_missing_group_named():
    with pytest.raises(MetricError, match="2"):
        demographic_parity([1, 0], [0, 1], groups=[0, 1, 2])


def test_eo_examples():
    assert equal_opportunity_gap([1, 0, 1, 1], [1, 1, 1, 1], [0, 0, 1, 1]) == 0.5
    y = [1, 0, 1, 1, 0]
    assert equal_opportunity_gap(y, y, [0, 0, 1, 1, 1]) == 0.0
    with pytest.raises(MetricError):
        equal_opportunity_gap([1, 0], [0, 1], [0, 1])


def test_ap_examples():
    assert average_precision([0.9, 0.8, 0.3], [1, 0, 1]) == pytest.approx(1 * 0.5 + (2 / 3) * 0.5, abs=1e-15)
    assert average_precision([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    n = 7
    assert average_precision(np.arange(n)[::-1] * -1.0, [1] + [0] * (n - 1)) == pytest.approx(1 / n)
    with pytest.raises(MetricError):
        average_precision([0.1, 0.2], [0, 0])


def test_ap_ties_use_original_order():
    assert average_precision([0.5, 0.5], [0, 1]) == 0.5
    assert average_precision([0.5, 0.5], [1, 0]) == 1.0


def test_accuracy_examples():
    y = np.array([1, 0, 1, 1])
    assert accuracy(y, y) == 1.0
    assert accuracy(1 - y, y) == 0.0
    assert accuracy([1, 0, 0, 0], y) == 0.5
    with pytest.raises(MetricError):
        accuracy([1], [1, 0])


def test_threshold_is_inclusive():
    assert hard_labels([0.5, 0.4999]).tolist() == [1, 0]


def test_aoc_examples():
    assert area_over_curve([(0.0, 0.9)], 1.0, 0.5) == pytest.approx(0.4)
    assert area_over_curve([(0.1, 0.3), (0.5, 0.4)], 1.0, 0.5) == 0.0
    b = 0.4
    assert area_over_curve([(0.2, b + 0.3), (0.6, b + 0.5)], 1.0, b) == pytest.approx(0.32, abs=1e-12)
    with pytest.raises(ConfigError):
        area_over_curve([(0.1, 0.9)], 0.0, 0.5)
    with pytest.raises(ConfigError):
        area_over_curve([], 1.0, 0.5)


points = st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=10)


@settings(max_examples=100, deadline=None)
@given(points, st.tuples(st.floats(0, 1), st.floats(0, 1)), st.floats(0.05, 1), st.floats(0, 1))
def test_aoc_adding_a_point_never_decreases(pts, extra, dp_max, base):
    assert area_over_curve(pts + [extra], dp_max, base) >= area_over_curve(pts, dp_max, base) - 1e-15


# -- brute-force oracle -----------------------------------------------------------

def oracle_rate(pred, cond):
    num = sum(1 for p, c in zip(pred, cond) if c and p == 1)
    den = sum(1 for c in cond if c)
    return num / den


def oracle_dp(y_hat, a):
    groups = sorted(set(a))
    rates = [oracle_rate(y_hat, [ai == g for ai in a]) for g in groups]
    return max(abs(r1 - r2) for r1, r2 in itertools.product(rates, rates))


def oracle_eo(y_hat, y, a):
    groups = sorted(set(a))
    rates = [oracle_rate(y_hat, [ai == g and yi == 1 for ai, yi in zip(a, y)]) for g in groups]
    return max(abs(r1 - r2) for r1, r2 in itertools.product(rates, rates))


def oracle_ap(s, y):
    # precision at the rank of each positive, ranks counted with ties broken by index
    n = len(s)
    total = 0.0
    for i in range(n):
        if y[i] != 1:
            continue
        ahead = [j for j in range(n) if s[j] > s[i] or (s[j] == s[i] and j <= i)]
        total += sum(y[j] for j in ahead) / len(ahead)
    return total / sum(y)


def random_instance(rng):
    n = int(rng.integers(2, 9))
    g = int(rng.integers(2, 4))
    a = rng.integers(0, g, n)
    a[:g] = np.arange(g) if n >= g else a[:g]
    s = np.round(rng.random(n), int(rng.integers(1, 3)))  # coarse rounding forces ties
    y = rng.integers(0, 2, n)
    return s, y, a


def test_metrics_match_brute_force_on_small_instances():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        s, y, a = random_instance(rng)
        y_hat = hard_labels(s)
        if len(set(a.tolist())) >= 2:
            assert demographic_parity(y_hat, a) == oracle_dp(y_hat.tolist(), a.tolist())
        assert accuracy(y_hat, y) == sum(int(p == t) for p, t in zip(y_hat, y)) / len(y)
        if y.sum() > 0:
            assert abs(average_precision(s, y) - oracle_ap(s.tolist(), y.tolist())) <= 1e-12
        if all(((a == g) & (y == 1)).any() for g in set(a.tolist())) and len(set(a.tolist())) >= 2:
            assert equal_opportunity_gap(y_hat, y, a) == oracle_eo(y_hat.tolist(), y.tolist(), a.tolist())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance_and_range(seed):
    rng = np.random.default_rng(seed)
    n = 12
    a = rng.integers(0, 3, n)
    a[:3] = [0, 1, 2]
    y = rng.integers(0, 2, n)
    y_hat = rng.integers(0, 2, n)
    perm = rng.permutation(n)
    dp = demographic_parity(y_hat, a)
    assert 0 <= dp <= 1
    assert dp == demographic_parity(y_hat[perm], a[perm])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-500, 500), min_size=3, max_size=15, unique=True), st.integers(0, 1000))
def test_ap_invariant_under_monotone_transform(s, seed):
    s = np.array(s) / 100.0  # well-separated so the transform cannot create float ties
    y = np.random.default_rng(seed).integers(0, 2, len(s))
    y[0] = 1
    assert average_precision(s, y) == pytest.approx(average_precision(np.tanh(s / 3) * 7 + 2, y), abs=1e-12)


def test_binary_dp_equals_pairwise_formula():
    y_hat = np.array([1, 0, 1, 1, 0, 1, 0])
    a = np.array([0, 0, 0, 1, 1, 1, 1])
    r = positive_rates(y_hat, a)
    assert demographic_parity(y_hat, a) == abs(r[0] - r[1])


def test_report_keys_stable_and_json_safe():
    import json
    rep = evaluate([0.9, 0.2, 0.6, 0.4], [1, 0, 0, 0], [0, 0, 1, 1])
    d = rep.to_dict()
    assert list(d) == ["n", "accuracy", "average_precision", "demographic_parity", "equal_opportunity",
                       "positive_rates", "true_positive_rates", "group_counts"]
    assert d["equal_opportunity"] is None  # group 1 has no positives
    assert json.loads(rep.to_json())["group_counts"] == {"0": 2, "1": 2}
