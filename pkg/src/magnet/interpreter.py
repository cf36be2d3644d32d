"""Edge and feature mask optimization against a trained MaGNet model.

Each edge ``(i, j)`` carries a logit ``psi_ij``; a relaxed Bernoulli sample of
the edge is ``sigmoid((log u - log(1 - u) + psi_ij) / omega)`` for uniform
noise ``u``. Node features are scaled by ``sigmoid(b_tilde)`` column-wise. The
masks are fitted so that the model's prediction on the masked graph stays
close, in cross-entropy, to a fixed target distribution, with linear
penalties on the expected mask sizes.

Masks live on the upper-triangle edge list of the adjacency, so every
sampled weighted adjacency is symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .errors import DimensionMismatch, InvalidParams
from .estimator import MaGNetModel, predict_proba
from .graph_core import AdjacencyMatrix

_U_CLAMP = 1e-12


@dataclass
class ExplanationParams:
    psi: np.ndarray | None = None  # one logit per edge, aligned with adjacency.edges
    b_tilde: np.ndarray | None = None
    omega_start: float = 1.0
    omega_end: float = 0.1
    iters: int = 300
    lambda_edge: float = 0.005
    lambda_feature: float = 0.1
    mc_samples: int = 4
    lr: float = 0.05
    seed: int = 0
    degree_floor: float = 1e-8
    target_mode: str = "fixed_full"  # fixed_full | masked_features

    def __post_init__(self):
        if not (self.omega_start > 0 and self.omega_end > 0):
            raise InvalidParams("temperatures must be positive")
        if self.target_mode not in ("fixed_full", "masked_features"):
            raise InvalidParams(f"unknown target_mode {self.target_mode!r}")
        if self.mc_samples < 0 or self.iters < 0:
            raise InvalidParams("mc_samples and iters must be >= 0")

    def omega(self, t):
        """Geometric schedule from ``omega_start`` (t=0) to ``omega_end`` (t=iters-1)."""
        if self.iters <= 1:
            return self.omega_start
        frac = t / (self.iters - 1)
        return self.omega_start * (self.omega_end / self.omega_start) ** frac

    def edge_scores(self):
        return _sigmoid(self.psi)

    def feature_scores(self):
        return _sigmoid(self.b_tilde)


@dataclass
class Explanation:
    edges: np.ndarray  # (E, 2) pairs aligned with edge_scores
    edge_scores: np.ndarray
    feature_scores: np.ndarray
    node_scores: np.ndarray
    kept_edges: list
    kept_nodes: list
    kept_features: list
    loss_trajectory: list = field(default_factory=list)

    def to_dict(self):
        return {
            "edge_scores": [[int(i), int(j), float(s)] for (i, j), s in zip(self.edges, self.edge_scores)],
            "feature_scores": [float(s) for s in self.feature_scores],
            "node_scores": [float(s) for s in self.node_scores],
            "kept_edges": [[int(i), int(j)] for i, j in self.kept_edges],
            "kept_nodes": [int(v) for v in self.kept_nodes],
            "kept_features": [int(t) for t in self.kept_features],
            "loss_trajectory": [float(v) for v in self.loss_trajectory],
        }


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def concrete_edge_sample(psi, omega, u):
    """Relaxed Bernoulli edge weight; works on scalars, arrays and tensors."""
    if np.any(np.asarray(omega) <= 0):
        raise InvalidParams("temperature must be positive")
    u = np.clip(np.asarray(u, dtype=float), _U_CLAMP, 1.0 - _U_CLAMP)
    noise = np.log(u) - np.log1p(-u)
    if isinstance(psi, ad.Tensor):
        return ad.sigmoid((psi + noise) * (1.0 / omega))
    return _sigmoid((noise + psi) / omega)


class MaskedForward:
    """Differentiable forward pass of a trained model on one graph and a feature stack.

    Pooling is linear, so ``pool(L^k X W)`` is computed as ``(r_k X) W`` with
    the node weight row ``r_k = pool(1^T L^k)``; all instances then share
    one small ``1 x N`` chain of products per order.
    """

    def __init__(self, model: MaGNetModel, adjacency: AdjacencyMatrix, features, degree_floor=1e-8):
        features = np.asarray(features, dtype=float)
        if features.ndim == 2:
            features = features[None]
        n, n_nodes, p = features.shape
        if n_nodes != adjacency.n_nodes:
            raise DimensionMismatch(f"features have {n_nodes} rows, graph has {adjacency.n_nodes} nodes")
        if p != model.feat_dim:
            raise DimensionMismatch(f"model expects {model.feat_dim} features, got {p}")
        self.model = model
        self.adjacency = adjacency
        self.n, self.n_nodes, self.p = n, n_nodes, p
        self.degree_floor = degree_floor
        e = adjacency.n_edges
        scatter = np.zeros((n_nodes * n_nodes, e))
        i, j = adjacency.edges[:, 0], adjacency.edges[:, 1]
        scatter[i * n_nodes + j, np.arange(e)] = 1.0
        scatter[j * n_nodes + i, np.arange(e)] = 1.0
        self._scatter = ad.Tensor(scatter)
        self._stacked = ad.Tensor(features.transpose(1, 0, 2).reshape(n_nodes, n * p))
        self._row = ad.Tensor(np.ones((1, n_nodes)) / (n_nodes if model.pooling == "mean" else 1.0))
        self._w = ad.Tensor(model.W)

    def weighted_adjacency(self, edge_mask):
        m = ad.as_tensor(edge_mask).reshape(-1, 1)
        return (self._scatter @ m).reshape(self.n_nodes, self.n_nodes)

    def laplacian(self, edge_mask):
        w = self.weighted_adjacency(edge_mask)
        d = w.sum(axis=1) + self.degree_floor
        inv = ad.power(d, -0.5)
        return w * inv.reshape(-1, 1) * inv.reshape(1, -1)

    def logits(self, edge_mask, feature_mask):
        lap = self.laplacian(edge_mask)
        row, node_weights = self._row, None
        for alpha in self.model.alphas:
            row = row @ lap
            term = row * float(alpha)
            node_weights = term if node_weights is None else node_weights + term
        pooled = (node_weights @ self._stacked).reshape(self.n, self.p)
        fm = ad.as_tensor(feature_mask).reshape(1, self.p)
        fused = (pooled * fm) @ self._w
        return _head_logits(self.model, fused)

    def log_probs(self, edge_mask, feature_mask):
        return ad.log_softmax(self.logits(edge_mask, feature_mask))

    def probs(self, edge_mask, feature_mask):
        return ad.softmax(self.logits(edge_mask, feature_mask))


def _head_logits(model, fused):
    if model.head_mode == "linear":
        h = model.head
        return fused @ h[:-1] + h[-1]
    w1, w2 = model.head_hidden
    hid = ad.relu(fused @ w1[:-1] + w1[-1])
    return hid @ w2[:-1] + w2[-1]


def masked_prediction(model, adjacency, x, edge_mask, feature_mask, degree_floor=1e-8):
    """Probabilities on the masked graph; ``edge_mask`` is a symmetric ``N x N`` matrix or per-edge vector."""
    edge_mask = np.asarray(edge_mask, dtype=float)
    if edge_mask.ndim == 2:
        if edge_mask.shape != (adjacency.n_nodes, adjacency.n_nodes):
            raise DimensionMismatch("edge mask must be n_nodes x n_nodes")
        edge_mask = edge_mask[adjacency.edges[:, 0], adjacency.edges[:, 1]]
    fwd = MaskedForward(model, adjacency, x, degree_floor)
    probs = fwd.probs(edge_mask, np.asarray(feature_mask, dtype=float)).value
    return probs[0] if np.asarray(x).ndim == 2 else probs


class Objective:
    """Cross-entropy interpretation loss over a fixed set of graph instances."""

    def __init__(self, model, dataset, params: ExplanationParams):
        self.model = model
        self.params = params
        self.forward = MaskedForward(model, dataset.adjacency, dataset.features, params.degree_floor)
        self.n_edges = dataset.adjacency.n_edges
        self.feat_dim = dataset.feat_dim
        if params.target_mode == "fixed_full":
            self.fixed_target = predict_proba(model, dataset.adjacency, dataset.features)
        else:
            self.fixed_target = None
        self._ones = np.ones(self.n_edges)

    def target(self, feature_mask):
        if self.fixed_target is not None:
            return self.fixed_target
        return ad.stop_gradient(self.forward.probs(self._ones, ad.stop_gradient(feature_mask))).value

    def cross_entropy(self, edge_mask, feature_mask):
        """Mean over instances of ``-sum_s target(s) log q(s)`` for explicit masks."""
        target = self.target(feature_mask)
        logq = self.forward.log_probs(edge_mask, feature_mask)
        return -(logq * target).sum() * (1.0 / self.forward.n)

    def __call__(self, psi, b_tilde, omega=None, noise=None):
        """Penalized loss. ``noise`` is an ``(S, E)`` array of uniforms; ``None`` uses ``sigmoid(psi)``."""
        p = self.params
        psi, b_tilde = ad.as_tensor(psi), ad.as_tensor(b_tilde)
        feature_mask = ad.sigmoid(b_tilde)
        if noise is None or len(noise) == 0:
            data_term = self.cross_entropy(ad.sigmoid(psi), feature_mask)
        else:
            data_term = None
            for u in noise:
                ce = self.cross_entropy(concrete_edge_sample(psi, omega, u), feature_mask)
                data_term = ce if data_term is None else data_term + ce
            data_term = data_term * (1.0 / len(noise))
        loss = data_term
        if p.lambda_edge:
            loss = loss + ad.sigmoid(psi).sum() * p.lambda_edge
        if p.lambda_feature:
            loss = loss + feature_mask.sum() * p.lambda_feature
        return loss


def interpretation_objective(model, dataset, params: ExplanationParams, omega=None, noise_draws=None):
    """Scalar loss value at ``params.psi`` / ``params.b_tilde``."""
    params = _initialized(params, dataset)
    return float(Objective(model, dataset, params)(params.psi, params.b_tilde, omega, noise_draws).value)


def noise_draws(params: ExplanationParams, n_edges, iteration):
    """Uniform noise for one optimizer step, reproducible from ``(seed, iteration)``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(params.seed), 29, int(iteration)]))
    return rng.uniform(size=(params.mc_samples, n_edges))


def _initialized(params, dataset):
    psi = np.zeros(dataset.adjacency.n_edges) if params.psi is None else np.asarray(params.psi, float)
    b = np.zeros(dataset.feat_dim) if params.b_tilde is None else np.asarray(params.b_tilde, float)
    if psi.shape != (dataset.adjacency.n_edges,):
        raise DimensionMismatch("psi must have one entry per edge")
    if b.shape != (dataset.feat_dim,):
        raise DimensionMismatch("b_tilde must have one entry per feature")
    return replace(params, psi=psi, b_tilde=b)


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        out = []
        for k, (x, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            m_hat = self.m[k] / (1 - self.beta1**self.t)
            v_hat = self.v[k] / (1 - self.beta2**self.t)
            out.append(x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def optimize_explanation(model, dataset, params: ExplanationParams | None = None):
    """Fit edge and feature logits from ``psi = 0``, ``b_tilde = 0`` with Adam.

    Returns the final parameters and the per-iteration loss values.
    """
    params = replace(params or ExplanationParams(), psi=None, b_tilde=None)
    params = _initialized(params, dataset)
    objective = Objective(model, dataset, params)
    opt = _Adam(params.lr)
    psi, b = params.psi, params.b_tilde
    trajectory = []
    for t in range(params.iters):
        noise = noise_draws(params, dataset.adjacency.n_edges, t) if params.mc_samples else None
        omega = params.omega(t)
        value, (g_psi, g_b) = ad.grad(lambda a, c: objective(a, c, omega, noise), [psi, b])
        trajectory.append(value)
        psi, b = opt.step([psi, b], [g_psi, g_b])
    return replace(params, psi=psi, b_tilde=b), trajectory


def threshold_explanation(
    params: ExplanationParams,
    adjacency: AdjacencyMatrix,
    edge_threshold=0.5,
    feature_threshold=0.5,
    top_m_nodes=None,
    loss_trajectory=(),
):
    mu = params.edge_scores()
    feat = params.feature_scores()
    edges = adjacency.edges
    keep = mu >= edge_threshold
    kept_edges = [(int(i), int(j)) for i, j in edges[keep]]
    node_scores = np.zeros(adjacency.n_nodes)
    np.maximum.at(node_scores, edges[:, 0], mu)
    np.maximum.at(node_scores, edges[:, 1], mu)
    if top_m_nodes is not None:
        order = sorted(range(adjacency.n_nodes), key=lambda v: (-node_scores[v], v))
        kept_nodes = sorted(order[:top_m_nodes])
    else:
        kept_nodes = sorted({v for e in kept_edges for v in e})
    return Explanation(
        edges=edges.copy(),
        edge_scores=mu,
        feature_scores=feat,
        node_scores=node_scores,
        kept_edges=kept_edges,
        kept_nodes=kept_nodes,
        kept_features=[int(t) for t in np.flatnonzero(feat >= feature_threshold)],
        loss_trajectory=list(loss_trajectory),
    )
