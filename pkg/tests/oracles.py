"""Brute-force reference implementations shared by unit and acceptance tests."""

import math


def brute_rank(scores, pos_index):
    s = scores[pos_index]
    return 1 + sum(1 for k, v in enumerate(scores) if k != pos_index and v >= s)


def brute_mrr(ranks):
    return sum(1.0 / r for r in ranks) / len(ranks)


def brute_hit(ranks, k):
    return sum(1 for r in ranks if r <= k) / len(ranks)


def brute_ndcg(ranks, k):
    return sum(1.0 / math.log2(r + 1) if r <= k else 0.0 for r in ranks) / len(ranks)


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def brute_f1_macro(pred, labels):
    out = []
    for cls in (1, 0):
        tp = sum(1 for p, y in zip(pred, labels) if p == cls and y == cls)
        fp = sum(1 for p, y in zip(pred, labels) if p == cls and y != cls)
        fn = sum(1 for p, y in zip(pred, labels) if p != cls and y == cls)
        out.append(0.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))
    return sum(out) / 2


def random_metric_case(rng):
    """One random small case: ranking query scores (with ties) and a labelled set."""
    n_cand = int(rng.integers(1, 12))
    scores = rng.integers(0, 6, n_cand).astype(float) / 5.0
    pos_index = int(rng.integers(0, n_cand))
    n = int(rng.integers(2, 25))
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    cls_scores = rng.integers(0, 8, n).astype(float) / 7.0
    return scores, pos_index, cls_scores, labels
