"""Task loss, signed graph regularization and the full reverse pass."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Model, Operators, ForwardTrace, encoder_backward, sigmoid

P_CLAMP = 1e-12


@dataclass
class LossConfig:
    tau: float = 0.2
    w: float = 0.1
    # "batch": users/items seen in the batch; "exact": every user and item
    uniform_mode: str = "batch"
    # mean over users / edges; False gives plain sums
    normalize: bool = True

    def validate(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.w < 0:
            raise ValueError("SGR weight w must be >= 0")
        if self.uniform_mode not in ("batch", "exact"):
            raise ValueError(f"unknown uniform_mode {self.uniform_mode!r}")


@dataclass
class Batch:
    """Scored (user, item, label) triples plus the edges the alignment term sees.

    ``align_pos``/``align_neg`` are (m, 2) user/item index arrays; item
    indices are item-local (the unified node id is ``num_users + item``).
    """

    num_users: int
    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray
    align_pos: np.ndarray
    align_neg: np.ndarray


def bce_loss(p, y):
    """Elementwise ``-[y ln p + (1-y) ln(1-p)]`` with p clamped to [1e-12, 1-1e-12]."""
    p = np.clip(np.asarray(p, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def bce_with_logits(z, y):
    """Mean BCE computed from logits, and its gradient w.r.t. each logit."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    # softplus(z) - y z, stable for large |z|
    loss = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    n = z.shape[0]
    return float(loss.mean()), (sigmoid(z) - y) / n


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, x / safe, 0.0), norms


def _unit_rows_backward(unit, norms, g_unit):
    """Gradient through ``x -> x/|x|``; zero rows get zero gradient."""
    safe = np.where(norms > 0, norms, 1.0)
    radial = np.sum(unit * g_unit, axis=-1, keepdims=True)
    return np.where(norms > 0, (g_unit - unit * radial) / safe, 0.0)


def cosine_sim(u, v):
    """Cosine similarity; 0 if either vector is zero."""
    (uu, _), (vv, _) = _unit_rows(np.asarray(u, float)), _unit_rows(np.asarray(v, float))
    return float(np.clip(np.dot(uu, vv), -1.0, 1.0))


def cosine_sim_grad(u, v):
    """Gradients of :func:`cosine_sim` w.r.t. ``u`` and ``v``."""
    uu, nu = _unit_rows(np.asarray(u, float))
    vv, nv = _unit_rows(np.asarray(v, float))
    return _unit_rows_backward(uu, nu, vv), _unit_rows_backward(vv, nv, uu)


def _logsumexp_rows(s):
    m = s.max(axis=1, keepdims=True)
    e = np.exp(s - m)
    tot = e.sum(axis=1, keepdims=True)
    return (m + np.log(tot))[:, 0], e / tot


def uniform_loss_and_grad(u_emb, v_emb, tau, normalize=True):
    """Uniformity term ``sum_u log sum_v exp(sim(u, v)/tau)`` with gradients.

    Rows of ``u_emb`` are users, rows of ``v_emb`` the item sample.
    ``normalize`` averages over users instead of summing.
    """
    if u_emb.shape[0] == 0 or v_emb.shape[0] == 0:
        raise ValueError("uniformity term needs at least one user and one item")
    uu, nu = _unit_rows(u_emb)
    vv, nv = _unit_rows(v_emb)
    s = uu @ vv.T / tau
    lse, soft = _logsumexp_rows(s)
    scale = 1.0 / u_emb.shape[0] if normalize else 1.0
    gs = soft * (scale / tau)
    g_u = _unit_rows_backward(uu, nu, gs @ vv)
    g_v = _unit_rows_backward(vv, nv, gs.T @ uu)
    return float(lse.sum() * scale), g_u, g_v


def uniform_loss(u_emb, v_emb, tau, normalize=True):
    return uniform_loss_and_grad(np.asarray(u_emb, float), np.asarray(v_emb, float),
                                 tau, normalize)[0]


def alignment_loss_and_grad(h0, num_users, pos_edges, neg_edges, tau, normalize=True):
    """``-sum_{E+} sim/tau + sum_{E-} sim/tau`` over embedding rows, with gradient.

    With ``normalize`` each sum is divided by its edge count; an empty edge
    set contributes nothing.
    """
    grad = np.zeros_like(h0)
    total = 0.0
    unit, norms = _unit_rows(h0)
    for edges, sign in ((pos_edges, -1.0), (neg_edges, 1.0)):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        m = edges.shape[0]
        if m == 0:
            continue
        ui = edges[:, 0]
        vi = edges[:, 1] + num_users
        sims = np.einsum("ij,ij->i", unit[ui], unit[vi])
        coef = sign / tau / (m if normalize else 1.0)
        total += coef * float(sims.sum())
        g_unit = np.zeros_like(h0)
        np.add.at(g_unit, ui, coef * unit[vi])
        np.add.at(g_unit, vi, coef * unit[ui])
        grad += g_unit
    return total, _unit_rows_backward(unit, norms, grad)


def alignment_loss(h0, num_users, pos_edges, neg_edges, tau, normalize=True):
    return alignment_loss_and_grad(np.asarray(h0, float), num_users, pos_edges,
                                   neg_edges, tau, normalize)[0]


def sgr_loss_and_grad(h0, num_users, pos_edges, neg_edges, tau,
                      users=None, items=None, normalize=True):
    """Uniformity over (users x items) plus alignment over the signed edges.

    ``users``/``items`` select the uniformity sample (default: all). The
    gradient is w.r.t. the embedding table ``h0`` only.
    """
    num_items = h0.shape[0] - num_users
    users = np.arange(num_users) if users is None else np.unique(users)
    items = np.arange(num_items) if items is None else np.unique(items)
    grad = np.zeros_like(h0)
    try:
        uni, g_u, g_v = uniform_loss_and_grad(h0[users], h0[num_users + items], tau, normalize)
    except ValueError:
        warnings.warn("empty uniformity sample; uniformity term set to 0", RuntimeWarning)
        uni = 0.0
    else:
        np.add.at(grad, users, g_u)
        np.add.at(grad, num_users + items, g_v)
    ali, g_a = alignment_loss_and_grad(h0, num_users, pos_edges, neg_edges, tau, normalize)
    return uni + ali, grad + g_a


def sgr_loss(h0, num_users, pos_edges, neg_edges, tau, users=None, items=None, normalize=True):
    return sgr_loss_and_grad(np.asarray(h0, float), num_users, pos_edges, neg_edges, tau,
                             users, items, normalize)[0]


def total_loss(task_loss, sgr, w):
    if w < 0:
        raise ValueError("w must be >= 0")
    if w == 0:
        return task_loss
    return task_loss + w * sgr


def loss_and_grads(model: Model, ops: Operators, h, trace: ForwardTrace,
                   batch: Batch, cfg: LossConfig):
    """Total loss and exact gradients for every parameter.

    Returns ``(parts, grads)`` where ``parts`` holds ``task``, ``sgr`` and
    ``total``. SGR acts on the embedding table ``X`` only.
    """
    n_users = batch.num_users
    z = np.einsum("ij,ij->i", h[batch.users], h[n_users + batch.items])
    task, gz = bce_with_logits(z, batch.labels)
    g_h = np.zeros_like(h)
    np.add.at(g_h, batch.users, gz[:, None] * h[n_users + batch.items])
    np.add.at(g_h, n_users + batch.items, gz[:, None] * h[batch.users])
    grads = encoder_backward(model, ops, trace, g_h)
    sgr = 0.0
    if cfg.w > 0:
        if cfg.uniform_mode == "exact":
            su, si = None, None
        else:
            su, si = batch.users, batch.items
        sgr, g_x = sgr_loss_and_grad(model.params["X"], n_users, batch.align_pos,
                                     batch.align_neg, cfg.tau, su, si, cfg.normalize)
        grads["X"] += cfg.w * g_x
    return {"task": task, "sgr": sgr, "total": total_loss(task, sgr, cfg.w)}, grads


def backward(trace: ForwardTrace, model: Model, ops: Operators, h, batch, cfg: LossConfig):
    """Gradient set for ``model`` from a matching forward trace."""
    return loss_and_grads(model, ops, h, trace, batch, cfg)[1]
