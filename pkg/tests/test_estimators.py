import numpy as np
import pytest
from hypothesis import given, strategies as st

from hauslip.errors import NoValidPairs, ScaleRangeDegenerate
from hauslip.estimators import (MetricSample, box_dimension, check_metric_axioms, empirical_lip,
                                empirical_skew, entropy_bounds_report, greedy_net, net_count,
                                power_rule_check)


def euclid(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.ndim == 1:
        return np.abs(a - b)
    return np.linalg.norm(a - b, axis=-1)


def chebyshev(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max(axis=-1)


def arc(a, b):
    t = np.abs(np.mod(a, 1) - np.mod(b, 1))
    return np.minimum(t, 1 - t)


def doubling(x):
    return np.mod(2 * x, 1)


def interval_sample(n=10_000, seed=0):
    return MetricSample(np.random.default_rng(seed).uniform(size=n), euclid)


# Lipschitz and skew -----------------------------------------------------------

def test_lip_and_skew_of_isometry():
    ms = interval_sample(500).with_random_pairs(2000, 1)
    flip = lambda x: 1 - x  # noqa: E731
    assert empirical_lip(ms, flip) == pytest.approx(1, abs=1e-12)
    assert empirical_skew(ms, flip, [0.1, 0.5]) == pytest.approx(1, abs=1e-12)


def test_doubling_lip_on_close_pairs():
    k = np.arange(0, 1024)
    X = k / 1024.0
    ms = MetricSample(X, arc)
    pairs = ms.all_pairs()
    close = pairs[arc(X[pairs[:, 0]], X[pairs[:, 1]]) <= 0.25]
    assert empirical_lip(ms, doubling, close) == 2.0


def test_doubling_skew():
    ms = MetricSample(np.arange(512) / 512.0, arc)
    assert empirical_skew(ms, doubling, [1 / 8]) == 2.0


def test_constant_map_skew_zero():
    ms = interval_sample(200)
    assert empirical_skew(ms, lambda x: np.zeros_like(x), [0.05]) == 0.0


def test_no_valid_pairs():
    ms = MetricSample(np.zeros(5), euclid)
    with pytest.raises(NoValidPairs):
        empirical_lip(ms, lambda x: x)
    with pytest.raises(NoValidPairs):
        empirical_skew(interval_sample(20), lambda x: x, [1e-9])


@given(st.lists(st.tuples(st.integers(0, 99), st.integers(0, 99)), min_size=2, max_size=60),
       st.integers(1, 30))
def test_lip_monotone_in_pair_set(pairs, k):
    ms = MetricSample(np.random.default_rng(0).uniform(size=100), euclid)
    f = lambda x: x ** 2  # noqa: E731
    pairs = np.array(pairs)
    if not (pairs[:, 0] != pairs[:, 1]).any() or not (pairs[:k, 0] != pairs[:k, 1]).any():
        return
    assert empirical_lip(ms, f, pairs[:k]) <= empirical_lip(ms, f, pairs)


def test_skew_at_most_lip_on_common_pairs():
    ms = interval_sample(2000).with_random_pairs(5000, 3)
    f = lambda x: np.sin(3 * x)  # noqa: E731
    assert empirical_skew(ms, f, [0.1, 0.3, 1.1]) <= empirical_lip(ms, f)


# nets and dimension -----------------------------------------------------------

def test_greedy_net_properties():
    ms = interval_sample(2000)
    eps = 0.01
    centers = greedy_net(ms, eps)
    assert centers[0] == 0
    C = ms.points[centers]
    assert (np.abs(C[:, None] - C[None, :]) + np.eye(len(C)) * 10 > eps).all()
    assert (np.abs(ms.points[:, None] - C[None, :]).min(axis=1) <= eps).all()


def test_net_count_limit():
    ms = interval_sample(2000)
    assert net_count(ms, 0.001, limit=10) is None
    assert net_count(ms, 10.0, limit=10) == 1


def test_net_counts_monotone():
    ms = interval_sample(3000)
    counts = [net_count(ms, e) for e in np.geomspace(0.5, 0.001, 12)]
    assert counts == sorted(counts)


def test_interval_dimension():
    fit = box_dimension(interval_sample(10_000))
    assert 0.9 <= fit.slope <= 1.1
    assert fit.label == "box"


def test_square_grid_dimension():
    g = np.linspace(0, 1, 100)
    X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    fit = box_dimension(MetricSample(X, chebyshev))
    assert 1.8 <= fit.slope <= 2.2


def test_single_point_dimension_zero():
    fit = box_dimension(MetricSample(np.zeros(50), euclid))
    assert fit.slope == 0.0


def test_degenerate_scale_range():
    ms = MetricSample(np.array([0.0, 1.0]), euclid)
    with pytest.raises(ScaleRangeDegenerate):
        box_dimension(ms, [0.5, 0.4, 0.3])


# power rule -------------------------------------------------------------------

@pytest.mark.parametrize("gamma", [1.0, 0.5])
def test_power_rule_interval(gamma):
    rep = power_rule_check(interval_sample(5000), gamma)
    assert rep.counts_match
    assert rep.counts_power == rep.counts_base
    if gamma == 0.5:
        assert 1.8 <= rep.slope_ratio <= 2.2


def test_power_rule_rejects_bad_gamma():
    with pytest.raises(ValueError):
        power_rule_check(interval_sample(100), 1.5)


@pytest.mark.parametrize("gamma", [0.2, 0.5, 0.9])
def test_powered_metric_axioms(gamma):
    ms = MetricSample(np.random.default_rng(4).normal(size=(500, 3)), euclid)
    assert check_metric_axioms(ms.powered(gamma), 10_000, seed=5).ok


def test_axiom_check_detects_violation():
    bad = MetricSample(np.random.default_rng(0).uniform(size=300), lambda a, b: (a - b) ** 2)
    assert check_metric_axioms(bad, 5000, seed=0).triangle_violations > 0


# relabeling -------------------------------------------------------------------

def test_isometric_relabeling_is_bit_identical():
    rng = np.random.default_rng(6)
    X = rng.integers(0, 2 ** 20, size=3000) / 2 ** 20
    t = 12345 / 2 ** 20
    ms = MetricSample(X, arc).with_random_pairs(5000, 7)
    ms2 = MetricSample(np.mod(X + t, 1), arc).with_random_pairs(5000, 7)
    f2 = lambda y: np.mod(doubling(np.mod(y - t, 1)) + t, 1)  # noqa: E731
    assert empirical_lip(ms, doubling) == empirical_lip(ms2, f2)
    assert empirical_skew(ms, doubling, [0.01, 0.1]) == empirical_skew(ms2, f2, [0.01, 0.1])
    for eps in (0.1, 0.01, 0.001):
        assert greedy_net(ms, eps) == greedy_net(ms2, eps)


# entropy bounds report --------------------------------------------------------

def test_entropy_bounds_report():
    rep = entropy_bounds_report(box_dim=1.0, skew=2.0, h=np.log(2), analytic_hd=1.0,
                                analytic_lip=2.0)
    assert rep["lower_ok"] and rep["upper_ok"]
    rep = entropy_bounds_report(box_dim=3.0, skew=2.0, h=np.log(2), analytic_hd=0.5,
                                analytic_lip=2.0)
    assert not rep["lower_ok"] and not rep["upper_ok"]
