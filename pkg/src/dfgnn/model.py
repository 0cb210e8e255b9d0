"""DFGNN encoder: embedding table, stacked dual-frequency layers, fusion MLP.

Forward passes record a :class:`ForwardTrace` so that :func:`encoder_backward`
can compute exact parameter gradients without an autograd framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SignedBipartiteGraph, SparseSymMatrix, spmm

VARIANTS = ("Basic", "Basic+LGF", "Basic+DGF", "DFGNN")
ACTIVATIONS = ("relu", "tanh", "identity")


class ModelError(ValueError):
    pass


@dataclass
class ModelConfig:
    embed_dim: int = 64
    num_layers: int = 2
    activation: str = "relu"
    variant: str = "DFGNN"
    seed: int = 0
    share_weights: bool = False

    def validate(self):
        if self.embed_dim < 1:
            raise ModelError("embed_dim must be >= 1")
        if self.num_layers < 1:
            raise ModelError("num_layers must be >= 1")
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"unknown activation {self.activation!r}")

    @property
    def fused(self):
        return self.variant != "Basic"


@dataclass
class Model:
    """All trainable tensors keyed by name, in a fixed order.

    Names: ``X`` (node embeddings), and per layer ``l``: ``W_pos.l``,
    ``W_neg.l``, ``W_f.l`` (2d x d), ``b_f.l``. Basic has only ``X`` and
    ``W_pos.l``; ``share_weights`` drops ``W_neg.l``.
    """

    config: ModelConfig
    num_nodes: int
    params: dict
    version: int = 0

    def param_count(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return Model(self.config, self.num_nodes,
                     {k: v.copy() for k, v in self.params.items()}, self.version)


def param_shapes(cfg: ModelConfig, num_nodes: int) -> dict:
    d = cfg.embed_dim
    shapes = {"X": (num_nodes, d)}
    for layer in range(cfg.num_layers):
        shapes[f"W_pos.{layer}"] = (d, d)
        if cfg.fused:
            if not cfg.share_weights:
                shapes[f"W_neg.{layer}"] = (d, d)
            shapes[f"W_f.{layer}"] = (2 * d, d)
            shapes[f"b_f.{layer}"] = (d,)
    return shapes


def init_bound(name: str, shape) -> float:
    """Half-width of the uniform init range; 0 for biases."""
    if name.startswith("b_f"):
        return 0.0
    if name == "X":
        return float(np.sqrt(6.0 / (2 * shape[1])))
    return float(np.sqrt(6.0 / (shape[0] + shape[1])))


def init_model(cfg: ModelConfig, num_nodes: int) -> Model:
    """Xavier-uniform weights, zero fusion bias, uniform embeddings; seeded."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg, num_nodes).items():
        a = init_bound(name, shape)
        params[name] = rng.uniform(-a, a, shape) if a > 0 else np.zeros(shape)
    return Model(cfg, num_nodes, params)


@dataclass(frozen=True)
class Operators:
    """Propagation matrices for one variant: ``pos`` on G+, ``neg`` on G- (or None)."""

    pos: SparseSymMatrix
    neg: SparseSymMatrix | None


def build_operators(graph: SignedBipartiteGraph, variant: str) -> Operators:
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}")
    pos = graph.operator("lgf+")
    if variant == "Basic":
        return Operators(pos, None)
    if variant == "Basic+LGF":
        return Operators(pos, graph.operator("lgf-"))
    return Operators(pos, graph.operator("hgf-"))


def activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def activate_grad(name, z, g):
    """Chain ``g`` through the activation evaluated at pre-activation ``z``."""
    if name == "relu":
        return g * (z > 0.0)
    if name == "tanh":
        t = np.tanh(z)
        return g * (1.0 - t * t)
    return g


def lgf_layer(p: SparseSymMatrix, h, w, act="identity"):
    """Low-pass layer ``act(P H W)`` with ``P`` the augmented propagation matrix."""
    return activate(act, spmm(p, h) @ _check_w(h, w))


def hgf_layer(lap: SparseSymMatrix, h, w, act="identity"):
    """High-pass layer ``act(L H W)`` with ``L`` the unaugmented normalized Laplacian."""
    return activate(act, spmm(lap, h) @ _check_w(h, w))


def fuse(h_pos, h_neg, w_f, b_f, act="identity"):
    """``act([H_pos || H_neg] W_f + b_f)``; H_pos fills the first d columns."""
    if h_pos.shape != h_neg.shape:
        raise ModelError(f"branch shapes differ: {h_pos.shape} vs {h_neg.shape}")
    c = np.hstack([h_pos, h_neg])
    if w_f.shape[0] != c.shape[1] or b_f.shape[0] != w_f.shape[1]:
        raise ModelError(f"fusion weight {w_f.shape} / bias {b_f.shape} do not fit input {c.shape}")
    return activate(act, c @ w_f + b_f)


def _check_w(h, w):
    if h.ndim != 2 or w.ndim != 2 or h.shape[1] != w.shape[0]:
        raise ModelError(f"shape mismatch: H {h.shape} times W {w.shape}")
    return w


@dataclass
class ForwardTrace:
    version: int
    variant: str
    layers: list = field(default_factory=list)


def _layer_act(cfg, layer):
    return "identity" if layer == cfg.num_layers - 1 else cfg.activation


def forward(model: Model, ops: Operators):
    """Run the K-layer encoder from ``H^0 = X``; returns ``(H^K, trace)``.

    Hidden layers use the configured activation in every branch and in the
    fusion; the last layer is linear throughout.
    """
    cfg = model.config
    if cfg.fused and ops.neg is None:
        raise ModelError(f"variant {cfg.variant} needs a negative-graph operator")
    if ops.pos.n != model.num_nodes:
        raise ModelError(f"operator size {ops.pos.n} != model nodes {model.num_nodes}")
    p = model.params
    h = p["X"]
    trace = ForwardTrace(model.version, cfg.variant)
    for layer in range(cfg.num_layers):
        act = _layer_act(cfg, layer)
        rec = {"act": act, "h_in": h}
        w_pos = p[f"W_pos.{layer}"]
        rec["ph"] = spmm(ops.pos, h)
        rec["z_pos"] = rec["ph"] @ w_pos
        h_pos = activate(act, rec["z_pos"])
        if not cfg.fused:
            h = h_pos
        else:
            w_neg = p[f"W_pos.{layer}"] if cfg.share_weights else p[f"W_neg.{layer}"]
            rec["qh"] = spmm(ops.neg, h)
            rec["z_neg"] = rec["qh"] @ w_neg
            h_neg = activate(act, rec["z_neg"])
            rec["cat"] = np.hstack([h_pos, h_neg])
            rec["z_f"] = rec["cat"] @ p[f"W_f.{layer}"] + p[f"b_f.{layer}"]
            h = activate(act, rec["z_f"])
        trace.layers.append(rec)
    return h, trace


def encoder_backward(model: Model, ops: Operators, trace: ForwardTrace, grad_out):
    """Reverse pass through the encoder given ``dLoss/dH^K``.

    Returns a dict of gradients keyed like ``model.params``. Propagation
    matrices are symmetric, so ``P^T g = P g``.
    """
    cfg = model.config
    if trace.version != model.version or len(trace.layers) != cfg.num_layers \
            or trace.variant != cfg.variant:
        raise ModelError("stale forward trace: model changed since the forward pass")
    p = model.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    g = grad_out
    d = cfg.embed_dim
    for layer in reversed(range(cfg.num_layers)):
        rec = trace.layers[layer]
        act = rec["act"]
        w_pos_name = f"W_pos.{layer}"
        if cfg.fused:
            w_neg_name = w_pos_name if cfg.share_weights else f"W_neg.{layer}"
            gz_f = activate_grad(act, rec["z_f"], g)
            grads[f"W_f.{layer}"] += rec["cat"].T @ gz_f
            grads[f"b_f.{layer}"] += gz_f.sum(axis=0)
            gcat = gz_f @ p[f"W_f.{layer}"].T
            gz_pos = activate_grad(act, rec["z_pos"], gcat[:, :d])
            gz_neg = activate_grad(act, rec["z_neg"], gcat[:, d:])
            grads[w_neg_name] += rec["qh"].T @ gz_neg
            g_in = spmm(ops.neg, gz_neg @ p[w_neg_name].T)
        else:
            gz_pos = activate_grad(act, rec["z_pos"], g)
            g_in = 0.0
        grads[w_pos_name] += rec["ph"].T @ gz_pos
        g = g_in + spmm(ops.pos, gz_pos @ p[w_pos_name].T)
    grads["X"] += g
    return grads


def sigmoid(z):
    """Numerically stable logistic function (no overflow for any finite z)."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


def predict(h_u, h_v):
    """``sigmoid(h_u . h_v)`` kept strictly inside (0, 1).

    Accepts single vectors or row-aligned matrices.
    """
    logit = np.sum(np.asarray(h_u) * np.asarray(h_v), axis=-1)
    return np.clip(sigmoid(logit), _TINY, _BELOW_ONE)


def score_pairs(h, num_users, users, items):
    """Logits ``h_u . h_v`` for user/item index arrays."""
    return np.einsum("ij,ij->i", h[users], h[num_users + np.asarray(items)])
