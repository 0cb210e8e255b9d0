"""One-dimensional matrix factorization used as a node signal for spectral analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

DIVERGENCE_LOSS = 1e6


class MFDivergenceError(FloatingPointError):
    pass


@dataclass
class MFConfig:
    lr: float = 0.01
    l2_reg: float = 0.01
    epochs: int = 50
    seed: int = 0
    init_scale: float = 0.05
    # fit ratings minus their global mean (the mean is kept on the model)
    center: bool = False


@dataclass
class MFModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    config: MFConfig
    offset: float = 0.0
    history: list = field(default_factory=list)

    def predict(self, users, items):
        return self.offset + self.user_factors[users] * self.item_factors[items]


def record_loss_and_grad(p, q, r, reg):
    """Per-record objective ``(r - p q)^2 + reg (p^2 + q^2)`` and its gradient."""
    err = r - p * q
    loss = err * err + reg * (p * p + q * q)
    return loss, -2.0 * err * q + 2.0 * reg * p, -2.0 * err * p + 2.0 * reg * q


def objective(users, items, ratings, pu, qi, reg):
    err = ratings - pu[users] * qi[items]
    return float(np.mean(err * err + reg * (pu[users] ** 2 + qi[items] ** 2)))


def train_mf_1d(records, num_users: int, num_items: int, cfg: MFConfig | None = None) -> MFModel:
    """Fit scalar user/item factors by SGD on squared rating error.

    ``records`` is an (m, 3) array-like of (user, item, rating). Records are
    visited in a fresh seeded permutation each epoch. Raises
    :class:`MFDivergenceError` when the epoch loss exceeds 1e6.
    """
    cfg = cfg or MFConfig()
    rec = np.asarray(records, dtype=np.float64).reshape(-1, 3)
    if rec.shape[0] == 0:
        raise ValueError("no ratings to fit")
    users = np.ascontiguousarray(rec[:, 0], dtype=np.int64)
    items = np.ascontiguousarray(rec[:, 1], dtype=np.int64)
    ratings = np.ascontiguousarray(rec[:, 2])
    offset = float(ratings.mean()) if cfg.center else 0.0
    target = ratings - offset
    rng = np.random.default_rng(cfg.seed)
    pu = rng.uniform(-cfg.init_scale, cfg.init_scale, num_users)
    qi = rng.uniform(-cfg.init_scale, cfg.init_scale, num_items)
    history = []
    lr, reg = cfg.lr, cfg.l2_reg
    for epoch in range(cfg.epochs):
        kernels.mf_sgd_epoch(users, items, target, rng.permutation(rec.shape[0]),
                             pu, qi, lr, reg)
        loss = objective(users, items, target, pu, qi, reg)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise MFDivergenceError(f"MF diverged at epoch {epoch + 1} (loss {loss:.3g}) "
                                    f"with learning rate {lr}")
        history.append(loss)
    return MFModel(pu, qi, cfg, offset, history)


def node_signal(m: MFModel) -> np.ndarray:
    """Unified node signal: user factors followed by item factors."""
    return np.concatenate([m.user_factors, m.item_factors])
