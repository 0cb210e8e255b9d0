"""Planted-cluster signed rating data for tests, demos and acceptance runs."""

from __future__ import annotations

import numpy as np

from .ingest import RatingRecord


def planted_ratings(num_users=200, num_items=200, clusters=2, per_user=20,
                    sign_noise=0.1, seed=0):
    """Ratings where users like items of their own interest cluster.

    Each user rates ``per_user`` distinct random items: 4-5 stars within the
    user's cluster, 1-2 stars across clusters, and the like/dislike outcome is
    flipped with probability ``sign_noise``. Returns ``(records, user_cluster,
    item_cluster)``; keys are ``u<idx>`` / ``i<idx>``.
    """
    rng = np.random.default_rng(seed)
    user_cluster = rng.permutation(np.arange(num_users) % clusters)
    item_cluster = rng.permutation(np.arange(num_items) % clusters)
    records = []
    for u in range(num_users):
        items = rng.choice(num_items, size=min(per_user, num_items), replace=False)
        for i in np.sort(items):
            like = user_cluster[u] == item_cluster[i]
            if rng.random() < sign_noise:
                like = not like
            rating = float(rng.integers(4, 6) if like else rng.integers(1, 3))
            records.append(RatingRecord(f"u{u:04d}", f"i{int(i):04d}", rating))
    return records, user_cluster, item_cluster


def write_ratings_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user,item,rating\n")
        for r in records:
            fh.write(f"{r.user_key},{r.item_key},{r.rating:g}\n")
