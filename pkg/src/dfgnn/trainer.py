"""Mini-batch training with full-graph forward passes, Adam and early stopping."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .graph import build_graph
from .losses import Batch, LossConfig, loss_and_grads
from .metrics import classification_report, ranking_report
from .model import (Model, ModelConfig, Operators, build_operators, forward, init_model,
                    sigmoid)

LR_GRID = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5)
TASKS = ("ranking", "feedback_type")


class NumericError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 512
    lr: float = 1e-3
    patience: int = 20
    max_epochs: int = 200
    task: str = "feedback_type"
    neg_ratio: int = 1
    eval_negatives: int = 99
    seed: int = 0

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, **kw)

    def copy(self):
        return AdamState({k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()},
                         self.t, self.beta1, self.beta2, self.eps)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """In-place bias-corrected Adam update of every tensor in ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def effective_loss_config(variant: str, cfg: LossConfig) -> LossConfig:
    """SGR belongs to the full DFGNN only; ablation variants train with w = 0."""
    if variant == "DFGNN":
        return cfg
    return LossConfig(cfg.tau, 0.0, cfg.uniform_mode, cfg.normalize)


class InteractionIndex:
    """Membership test for (user, item) pairs via sorted pair codes."""

    def __init__(self, edges, num_items):
        e = np.asarray(edges, dtype=np.int64)
        e = e.reshape(-1, e.shape[-1] if e.ndim == 2 else 2)[:, :2]
        self.num_items = num_items
        self.codes = np.unique(e[:, 0] * num_items + e[:, 1])

    def contains(self, users, items):
        codes = np.asarray(users, dtype=np.int64) * self.num_items + np.asarray(items, dtype=np.int64)
        if self.codes.shape[0] == 0:
            return np.zeros(codes.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(self.codes, codes), self.codes.shape[0] - 1)
        return self.codes[pos] == codes

    def degree(self, user):
        return int(np.sum(self.codes // self.num_items == user))


def sample_negative_items(users, index: InteractionIndex, num_items, rng):
    """One uniformly drawn non-interacted item per user (rejection sampling)."""
    users = np.asarray(users, dtype=np.int64)
    items = rng.integers(0, num_items, users.shape[0])
    bad = index.contains(users, items)
    for _ in range(1000):
        if not bad.any():
            return items
        idx = np.flatnonzero(bad)
        items[idx] = rng.integers(0, num_items, idx.shape[0])
        bad[idx] = index.contains(users[idx], items[idx])
    saturated = [int(u) for u in np.unique(users[bad]) if index.degree(u) >= num_items]
    raise ValueError(f"cannot sample negatives; users with no free item: {saturated[:5]}")


@dataclass
class TrainingData:
    """Everything a run needs that is derived once from the split."""

    num_users: int
    num_items: int
    graph: object
    ops: Operators
    train: np.ndarray
    valid: np.ndarray
    train_index: InteractionIndex
    known_index: InteractionIndex


def prepare(split, variant: str) -> TrainingData:
    """Training graph (train edges only) and operators for ``variant``."""
    graph = build_graph(split.num_users, split.num_items, split.train)
    known = split.all_edges()
    return TrainingData(split.num_users, split.num_items, graph,
                        build_operators(graph, variant), np.asarray(split.train),
                        np.asarray(split.valid),
                        InteractionIndex(split.train, split.num_items),
                        InteractionIndex(known, split.num_items))


def make_batches(data: TrainingData, cfg: TrainConfig, rng):
    """Shuffle training instances and yield (users, items, labels) batches.

    Ranking: observed positive edges, each followed by ``neg_ratio`` sampled
    non-interacted items. Feedback type: signed edges, label 1 for positive.
    """
    tr = data.train
    if cfg.task == "ranking":
        tr = tr[tr[:, 2] > 0]
    order = rng.permutation(tr.shape[0])
    for start in range(0, order.shape[0], cfg.batch_size):
        chunk = tr[order[start:start + cfg.batch_size]]
        users, items = chunk[:, 0], chunk[:, 1]
        if cfg.task == "ranking":
            labels = np.ones(users.shape[0])
            neg_u = np.repeat(users, cfg.neg_ratio)
            neg_i = sample_negative_items(neg_u, data.train_index, data.num_items, rng)
            users = np.concatenate([users, neg_u])
            items = np.concatenate([items, neg_i])
            labels = np.concatenate([labels, np.zeros(neg_u.shape[0])])
        else:
            labels = (chunk[:, 2] > 0).astype(np.float64)
        yield users, items, labels


def build_batch(data: TrainingData, users, items, labels) -> Batch:
    return Batch(data.num_users, np.asarray(users, np.int64), np.asarray(items, np.int64),
                 np.asarray(labels, np.float64), data.graph.pos_edges, data.graph.neg_edges)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    task_loss: float
    sgr_loss: float
    elapsed_ms: float


def train_epoch(model: Model, data: TrainingData, cfg: TrainConfig, loss_cfg: LossConfig,
                state: AdamState, rng, epoch: int = 0) -> EpochStats:
    t0 = time.perf_counter()
    totals = np.zeros(3)
    n_batches = 0
    for b, (users, items, labels) in enumerate(make_batches(data, cfg, rng)):
        h, trace = forward(model, data.ops)
        batch = build_batch(data, users, items, labels)
        parts, grads = loss_and_grads(model, data.ops, h, trace, batch, loss_cfg)
        if not np.isfinite(parts["total"]):
            raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
        try:
            adam_step(model.params, grads, state, cfg.lr)
        except NumericError as exc:
            raise NumericError(f"{exc} (epoch {epoch}, batch {b})") from None
        model.version += 1
        totals += (parts["total"], parts["task"], parts["sgr"])
        n_batches += 1
    mean = totals / max(n_batches, 1)
    return EpochStats(epoch, float(mean[0]), float(mean[1]), float(mean[2]),
                      (time.perf_counter() - t0) * 1000.0)


@dataclass
class RankingQueries:
    users: np.ndarray
    positives: np.ndarray
    candidates: np.ndarray  # (q, c) negatives, -1 padded
    seed: int


def build_ranking_queries(edges, known: InteractionIndex, num_items, num_negatives, seed):
    """1 positive + ``num_negatives`` sampled non-interacted items per positive edge.

    Items the user interacted with in any split (either sign) are never
    candidates. ``num_negatives < 0`` uses every remaining item.
    """
    from .ingest import sample_ranking_negatives

    edges = np.asarray(edges)
    edges = edges[edges[:, 2] > 0]
    rng = np.random.default_rng(seed)
    if num_negatives < 0:
        num_negatives = num_items
    cands = np.full((edges.shape[0], num_negatives), -1, dtype=np.int64)
    per_user = {}
    for code in known.codes:
        per_user.setdefault(int(code // num_items), []).append(int(code % num_items))
    for q, (u, i, _) in enumerate(edges):
        excl = per_user.get(int(u), [])
        k = min(num_negatives, num_items - len(set(excl) | {int(i)}))
        if k > 0:
            cands[q, :k] = sample_ranking_negatives(int(u), k, excl + [int(i)], num_items, rng)
    return RankingQueries(edges[:, 0].copy(), edges[:, 1].copy(), cands, seed)


def ranking_ranks(h, num_users, queries: RankingQueries):
    """Worst-case rank of each query's positive among its candidates."""
    hu = h[queries.users]
    pos = np.einsum("ij,ij->i", hu, h[num_users + queries.positives])
    valid = queries.candidates >= 0
    neg_items = np.where(valid, queries.candidates, 0)
    neg = np.einsum("qd,qcd->qc", hu, h[num_users + neg_items])
    return 1 + np.sum((neg >= pos[:, None]) & valid, axis=1)


def evaluate_model(h, num_users, task, edges=None, queries=None, threshold=0.5,
                   ks=(10, 50)) -> dict:
    if task == "ranking":
        if queries is None or queries.users.shape[0] == 0:
            raise ValueError("no ranking queries to evaluate")
        return ranking_report(ranking_ranks(h, num_users, queries), ks)
    edges = np.asarray(edges)
    if edges.shape[0] == 0:
        raise ValueError("no signed edges to evaluate")
    logits = np.einsum("ij,ij->i", h[edges[:, 0]], h[num_users + edges[:, 1]])
    return classification_report(sigmoid(logits), edges[:, 2] > 0, threshold)


SELECTION_METRIC = {"ranking": "MRR", "feedback_type": "AUC"}


class EarlyStopping:
    """Track the best metric; signal a stop after ``patience`` epochs without gain."""

    def __init__(self, patience):
        self.patience = patience
        self.best = float("-inf")
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch, metric) -> bool:
        """Record ``metric``; return True if it is a new best."""
        if metric > self.best:
            self.best, self.best_epoch, self.wait = metric, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self):
        return self.wait >= self.patience


@dataclass
class FitResult:
    checkpoint: Checkpoint
    history: list = field(default_factory=list)
    stopped_epoch: int = 0


def fit(split, model_cfg: ModelConfig, cfg: TrainConfig, loss_cfg: LossConfig,
        on_epoch=None, data: TrainingData | None = None) -> FitResult:
    """Train from scratch with early stopping on the validation metric.

    Validation uses MRR (ranking) or AUC (feedback type). The returned
    checkpoint holds the parameters, optimizer and RNG state of the best epoch.
    """
    cfg.validate()
    loss_cfg.validate()
    model_cfg.validate()
    data = data or prepare(split, model_cfg.variant)
    if data.valid.shape[0] == 0:
        raise ValueError("empty validation set")
    loss_cfg = effective_loss_config(model_cfg.variant, loss_cfg)
    model = init_model(model_cfg, data.num_users + data.num_items)
    state = AdamState.zeros_like(model.params)
    rng = np.random.default_rng(cfg.seed)
    queries = None
    if cfg.task == "ranking":
        queries = build_ranking_queries(data.valid, data.known_index, data.num_items,
                                        cfg.eval_negatives, cfg.seed + 1)
        if queries.users.shape[0] == 0:
            raise ValueError("validation split has no positive edges for ranking")
    metric_name = SELECTION_METRIC[cfg.task]
    stopper = EarlyStopping(cfg.patience)
    meta = {"task": cfg.task, "num_users": data.num_users, "num_items": data.num_items,
            "metric": metric_name}
    best = Checkpoint(model.copy(), state.copy(), 0, float("-inf"),
                      rng.bit_generator.state, dict(meta))
    history = []
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        stats = train_epoch(model, data, cfg, loss_cfg, state, rng, epoch)
        h, _ = forward(model, data.ops)
        report = evaluate_model(h, data.num_users, cfg.task, data.valid, queries)
        metric = report[metric_name]
        row = {"epoch": epoch, "train_loss": stats.train_loss, "val_metric": metric,
               "elapsed_ms": stats.elapsed_ms}
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if stopper.update(epoch, metric):
            best = Checkpoint(model.copy(), state.copy(), epoch, float(metric),
                              rng.bit_generator.state, dict(meta))
        if stopper.should_stop:
            break
    return FitResult(best, history, epoch)


def history_lines(history, timing=True) -> str:
    out = []
    for row in history:
        row = dict(row)
        if not timing:
            row["elapsed_ms"] = 0
        out.append(json.dumps({k: row[k] for k in ("epoch", "train_loss", "val_metric",
                                                   "elapsed_ms")}))
    return "".join(line + "\n" for line in out)


@dataclass
class GradCheckReport:
    errors: dict
    tol: float

    @property
    def failed(self):
        return [k for k, e in self.errors.items() if not e < self.tol]

    @property
    def passed(self):
        return not self.failed

    def lines(self):
        return [f"{k}: max rel err {e:.3e} {'ok' if e < self.tol else 'FAIL'}"
                for k, e in self.errors.items()]


def grad_check(model: Model, ops: Operators, batch: Batch, loss_cfg: LossConfig,
               eps: float = 1e-5, tol: float = 1e-4, grads: dict | None = None) -> GradCheckReport:
    """Compare analytic gradients with central differences on every entry.

    Error per entry is ``|analytic - numeric| / max(1, |analytic|)``; the
    report keeps the maximum per tensor. ``grads`` overrides the analytic
    gradients (used to test the checker itself).
    """
    if grads is None:
        h, trace = forward(model, ops)
        _, grads = loss_and_grads(model, ops, h, trace, batch, loss_cfg)

    def loss_at():
        h, trace = forward(model, ops)
        return loss_and_grads(model, ops, h, trace, batch, loss_cfg)[0]["total"]

    errors = {}
    for name, p in model.params.items():
        worst = 0.0
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for j in range(flat.shape[0]):
            orig = flat[j]
            flat[j] = orig + eps
            up = loss_at()
            flat[j] = orig - eps
            down = loss_at()
            flat[j] = orig
            num = (up - down) / (2.0 * eps)
            worst = max(worst, abs(g[j] - num) / max(1.0, abs(g[j])))
        errors[name] = worst
    return GradCheckReport(errors, tol)
