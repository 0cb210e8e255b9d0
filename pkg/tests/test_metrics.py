import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfgnn.metrics import (MetricError, RankingQuery, auc, classification_report, f1_macro,
                           hit_at_k, mrr, ndcg_at_k, rank_of_positive, ranking_report)

from oracles import (brute_auc, brute_f1_macro, brute_hit, brute_mrr, brute_ndcg, brute_rank,
                     random_metric_case)


def query(scores, pos=0):
    return RankingQuery(0, pos, np.arange(len(scores)), scores)


def test_rank_examples():
    assert rank_of_positive(query([0.9, 0.1, 0.2])) == 1
    assert rank_of_positive(query([0.9, 0.9, 0.2])) == 2
    assert rank_of_positive(query(np.r_[0.0, np.linspace(1, 2, 99)])) == 100


def test_query_validation():
    with pytest.raises(MetricError, match="missing"):
        RankingQuery(0, 5, [0, 1], [0.1, 0.2])
    with pytest.raises(MetricError, match="distinct"):
        RankingQuery(0, 0, [0, 0], [0.1, 0.2])


def test_ranking_metric_examples():
    assert mrr([4]) == 0.25
    assert hit_at_k([4], 10) == 1.0
    assert abs(ndcg_at_k([4], 10) - 1 / np.log2(5)) < 1e-15
    assert abs(ndcg_at_k([4], 10) - 0.43068) < 1e-5
    assert ndcg_at_k([3], 10) == 0.5
    assert hit_at_k([11], 10) == 0.0 and ndcg_at_k([11], 10) == 0.0
    assert hit_at_k([11], 50) == 1.0
    with pytest.raises(MetricError):
        mrr([])


def test_ranking_report_keys():
    rep = ranking_report([1, 2, 60], ks=(10, 50))
    assert sorted(rep) == ["HIT@10", "HIT@50", "MRR", "NDCG@10", "NDCG@50"]


def test_auc_examples():
    assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5
    with pytest.raises(MetricError):
        auc([0.1, 0.2], [1, 1])


def test_auc_random_50_vs_pairs(rng):
    s = rng.normal(size=50)
    y = rng.integers(0, 2, 50)
    assert abs(auc(s, y) - brute_auc(s, y)) <= 1e-12


def test_f1_examples():
    y = np.array([1, 0, 1, 0])
    assert f1_macro(y, y) == 1.0
    assert abs(f1_macro(np.ones(4), y) - 1 / 3) < 1e-15
    assert f1_macro(1 - y, y) == 0.0
    with pytest.warns(RuntimeWarning, match="absent"):
        assert f1_macro(np.ones(3), np.ones(3)) == 0.5


def test_classification_report_threshold():
    rep = classification_report([0.2, 0.6, 0.4, 0.9], [0, 1, 0, 1], threshold=0.5)
    assert rep == {"AUC": 1.0, "F1-Macro": 1.0}


def test_metrics_match_brute_force(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for _ in range(1000):
            scores, pos, cls_scores, labels = random_metric_case(rng)
            q = query(scores, pos)
            r = rank_of_positive(q)
            assert r == brute_rank(list(scores), pos)
            assert abs(mrr([q]) - brute_mrr([r])) <= 1e-12
            for k in (1, 3, 10):
                assert abs(hit_at_k([q], k) - brute_hit([r], k)) <= 1e-12
                assert abs(ndcg_at_k([q], k) - brute_ndcg([r], k)) <= 1e-12
            assert abs(auc(cls_scores, labels) - brute_auc(cls_scores, labels)) <= 1e-12
            pred = (cls_scores >= 0.5).astype(int)
            assert abs(f1_macro(pred, labels) - brute_f1_macro(pred, labels)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=30)
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    for f in (np.exp, lambda x: 3 * x - 7, lambda x: x ** 3, np.arctan):
        assert auc(f(s), y) == auc(s, y)
        assert rank_of_positive(query(f(s), 4)) == rank_of_positive(query(s, 4))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 100), min_size=1, max_size=30))
def test_hit_monotone_and_ndcg_bounded(ranks):
    for k in range(1, 60, 7):
        assert hit_at_k(ranks, k) <= hit_at_k(ranks, k + 1)
        assert ndcg_at_k(ranks, k) <= hit_at_k(ranks, k)


def test_auc_null_model(rng):
    s = rng.normal(size=10_000)
    y = rng.integers(0, 2, 10_000)
    assert abs(auc(s, y) - 0.5) < 0.02
