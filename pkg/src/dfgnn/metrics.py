"""Ranking and classification metrics.

Ranking queries hold one relevant item; ties are broken pessimistically
(the positive is placed after every candidate with an equal score).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass
class RankingQuery:
    user: int
    positive: int
    candidates: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.candidates = np.asarray(self.candidates, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.candidates.shape != self.scores.shape:
            raise MetricError("candidates and scores differ in length")
        if not np.any(self.candidates == self.positive):
            raise MetricError(f"positive item {self.positive} missing from candidates")
        if np.unique(self.candidates).shape[0] != self.candidates.shape[0]:
            raise MetricError("candidates must be distinct")


def rank_of_positive(q: RankingQuery) -> int:
    """1-based worst-case rank of the positive among the candidates."""
    pos_score = q.scores[np.flatnonzero(q.candidates == q.positive)[0]]
    others = q.scores[q.candidates != q.positive]
    return 1 + int(np.sum(others >= pos_score))


def _ranks(queries):
    if len(queries) == 0:
        raise MetricError("empty query set")
    return np.array([rank_of_positive(q) if isinstance(q, RankingQuery) else int(q)
                     for q in queries], dtype=np.float64)


def mrr(queries) -> float:
    """Mean reciprocal rank. Accepts queries or precomputed ranks."""
    return float(np.mean(1.0 / _ranks(queries)))


def hit_at_k(queries, k: int) -> float:
    return float(np.mean(_ranks(queries) <= k))


def ndcg_at_k(queries, k: int) -> float:
    r = _ranks(queries)
    return float(np.mean(np.where(r <= k, 1.0 / np.log2(r + 1.0), 0.0)))


def ranking_report(ranks, ks=(10, 50)) -> dict:
    out = {"MRR": mrr(ranks)}
    for k in ks:
        out[f"HIT@{k}"] = hit_at_k(ranks, k)
        out[f"NDCG@{k}"] = ndcg_at_k(ranks, k)
    return out


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + 0.5 P(s+ = s-), via average ranks."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average 1-based rank for each run of tied scores
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], s.shape[0]]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty_like(s)
    ranks[order] = np.repeat(avg, ends - starts)
    # U statistic is integral or half-integral, so this is exact in float64
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_macro(pred, labels) -> float:
    """Unweighted mean of per-class F1 over classes {0, 1}.

    A class absent from both predictions and labels scores 0 (with a warning).
    """
    p = np.asarray(pred).astype(bool)
    y = np.asarray(labels).astype(bool)
    if p.shape != y.shape or p.size == 0:
        raise MetricError("predictions and labels must be nonempty and aligned")
    scores = []
    for cls in (True, False):
        tp = np.sum((p == cls) & (y == cls))
        fp = np.sum((p == cls) & (y != cls))
        fn = np.sum((p != cls) & (y == cls))
        if tp + fp + fn == 0:
            warnings.warn(f"class {int(cls)} absent from predictions and labels", RuntimeWarning)
            scores.append(0.0)
        else:
            scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


def classification_report(probs, labels, threshold: float = 0.5) -> dict:
    probs = np.asarray(probs, dtype=np.float64)
    return {"AUC": auc(probs, labels), "F1-Macro": f1_macro(probs >= threshold, labels)}
