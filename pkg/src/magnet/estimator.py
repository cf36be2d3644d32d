"""Multi-order actor-critic graph classifier with boosting-weighted fusion.

For each order ``k`` the actor embeds a graph as ``pool(L^k X W)``. A softmax
regression critic is fitted on those embeddings under AdaBoost-style sample
weights; its weighted error sets the order's fusion weight
``alpha_k = max(0, 0.5 * log((1 - eps) / eps))`` and the sample weights are
tilted towards the misclassified graphs before the next order. The fused
embedding ``sum_k alpha_k * pool(L^k X W)`` feeds a final softmax head.

Class index 0 is label -1 and index 1 is label +1; equal logits predict +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DimensionMismatch, EmptyDataset, InvalidParams, SingleClassTrainingSet
from .graph_core import (
    AdjacencyMatrix,
    NormalizedLaplacian,
    augmented_laplacian,
    laplacian_power_apply,
    normalized_laplacian,
)


@dataclass(frozen=True)
class ActorConfig:
    k_orders: int = 3
    w_mode: str = "identity"  # identity | trained
    pooling: str = "mean"  # mean | sum
    critic_iters: int = 500
    critic_lr: float = 0.1
    epsilon_min: float = 1e-4
    head: str = "linear"  # linear | mlp
    head_epochs: int = 300
    head_lr: float = 0.05
    head_hidden: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.k_orders < 1:
            raise InvalidParams("k_orders must be >= 1")
        if not 0 < self.epsilon_min < 0.5:
            raise InvalidParams("epsilon_min must lie in (0, 0.5)")
        if self.w_mode not in ("identity", "trained"):
            raise InvalidParams(f"unknown w_mode {self.w_mode!r}")
        if self.pooling not in ("mean", "sum"):
            raise InvalidParams(f"unknown pooling {self.pooling!r}")
        if self.head not in ("linear", "mlp"):
            raise InvalidParams(f"unknown head {self.head!r}")
        if self.critic_iters < 0 or self.head_epochs < 0:
            raise InvalidParams("iteration counts must be >= 0")


@dataclass
class CriticModel:
    """Softmax regression; ``weights`` is ``(embed_dim + 1) x 2`` with the bias last."""

    weights: np.ndarray

    def logits(self, embeddings):
        return _affine(embeddings, self.weights)

    def predict_index(self, embeddings):
        z = self.logits(embeddings)
        return (z[..., 1] >= z[..., 0]).astype(np.int64)


@dataclass
class MaGNetModel:
    W: np.ndarray
    critics: list
    alphas: np.ndarray
    head: np.ndarray  # (embed_dim + 1) x 2 for the linear head
    pooling: str = "mean"
    w_mode: str = "identity"
    head_mode: str = "linear"
    head_hidden: list | None = None  # [(embed_dim+1) x h, (h+1) x 2] for the mlp head
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        if len(self.critics) != len(self.alphas):
            raise InvalidParams("need one critic per order")
        if np.any(self.alphas < 0):
            raise InvalidParams("fusion weights must be nonnegative")

    @property
    def k_orders(self):
        return len(self.alphas)

    @property
    def feat_dim(self):
        return self.W.shape[0]

    @property
    def embed_dim(self):
        return self.W.shape[1]

    def head_logits(self, fused):
        if self.head_mode == "linear":
            return _affine(fused, self.head)
        w1, w2 = self.head_hidden
        return _affine(np.maximum(_affine(fused, w1), 0.0), w2)


def _affine(x, weights):
    x = np.asarray(x, dtype=float)
    return x @ weights[:-1] + weights[-1]


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _labels_to_index(labels):
    return (np.asarray(labels) > 0).astype(np.int64)


def _pool(h, pooling, axis=0):
    return h.mean(axis=axis) if pooling == "mean" else h.sum(axis=axis)


def actor_embed(l: NormalizedLaplacian, x, w, k, pooling="mean"):
    """``pool(L^k X W)`` for a single graph instance."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"features have {x.shape[1]} columns, W has {w.shape[0]} rows")
    return _pool(laplacian_power_apply(l, k, x) @ w, pooling)


def order_embeddings(l: NormalizedLaplacian, features, w, k_orders, pooling="mean"):
    """Pooled embeddings for every instance and order, shape ``(K, n, embed_dim)``.

    All instances are propagated together by stacking them column-wise, so
    each extra order costs one sparse product.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim == 2:
        features = features[None]
    n, n_nodes, p = features.shape
    if n_nodes != l.n_nodes:
        raise DimensionMismatch(f"features have {n_nodes} rows, graph has {l.n_nodes} nodes")
    if p != w.shape[0]:
        raise DimensionMismatch(f"features have {p} columns, W has {w.shape[0]} rows")
    cur = (features @ w).transpose(1, 0, 2).reshape(n_nodes, -1)
    out = []
    for _ in range(k_orders):
        cur = np.asarray(l.matrix @ cur)
        out.append(_pool(cur.reshape(n_nodes, n, -1), pooling))
    return np.stack(out)


def _standardizer(x):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return mu, sd


def _fold(weights, mu, sd):
    """Rewrite weights fitted on ``(x - mu) / sd`` as weights acting on raw ``x``."""
    w = weights[:-1] / sd[:, None]
    b = weights[-1] - mu @ w
    return np.vstack([w, b])


def train_critic(embeddings, labels, sample_weights, iters=500, lr=0.1):
    """Fit a weighted softmax regression by full-batch gradient descent from zero.

    Columns are standardized during fitting and the scaling is folded back
    into the returned weights, so the critic acts on raw embeddings.
    """
    h = np.asarray(embeddings, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    beta = np.asarray(sample_weights, dtype=float)
    if np.any(beta < 0) or not np.isclose(beta.sum(), 1.0):
        raise InvalidParams("sample weights must lie on the simplex")
    y = np.eye(2)[_labels_to_index(labels)]
    mu, sd = _standardizer(h)
    z = np.hstack([(h - mu) / sd, np.ones((len(h), 1))])
    c = np.zeros((z.shape[1], 2))
    for _ in range(iters):
        p = _softmax(z @ c)
        c -= lr * (z.T @ (beta[:, None] * (p - y)))
    return CriticModel(_fold(c, mu, sd))


def misclassified(critic: CriticModel, embeddings, labels):
    return critic.predict_index(embeddings) != _labels_to_index(labels)


def weighted_error(critic, embeddings, labels, sample_weights, epsilon_min=1e-4):
    beta = np.asarray(sample_weights, dtype=float)
    if np.any(beta < 0) or beta.sum() <= 0:
        raise InvalidParams("sample weights must be nonnegative and not all zero")
    wrong = misclassified(critic, embeddings, labels)
    eps = float(beta[wrong].sum() / beta.sum())
    return float(np.clip(eps, epsilon_min, 1.0 - epsilon_min))


def fusion_weight(eps):
    if not 0 < eps < 1:
        raise InvalidParams("error rate must lie in (0, 1)")
    return max(0.0, 0.5 * float(np.log((1.0 - eps) / eps)))


def update_sample_weights(weights, alpha, misclassified_mask):
    w = np.asarray(weights, dtype=float) * np.exp(alpha * np.asarray(misclassified_mask, dtype=float))
    return w / w.sum()


def fuse_embeddings(per_order, alphas):
    per_order = [np.asarray(h, dtype=float) for h in per_order]
    if len(per_order) != len(alphas):
        raise DimensionMismatch("need one fusion weight per order")
    if len({h.shape for h in per_order}) > 1:
        raise DimensionMismatch("per-order embeddings must share a shape")
    out = np.zeros_like(per_order[0])
    for a, h in zip(alphas, per_order):
        out = out + a * h
    return out


def _fit_softmax_head(x, labels, epochs, lr):
    """Unweighted counterpart of :func:`train_critic`, used for the final head."""
    n = len(x)
    return train_critic(x, labels, np.full(n, 1.0 / n), epochs, lr).weights


def _fit_mlp_head(x, labels, hidden, epochs, lr, seed):
    mu, sd = _standardizer(x)
    z = (x - mu) / sd
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 91]))
    bound1 = 1.0 / np.sqrt(z.shape[1] + 1)
    w1 = rng.uniform(-bound1, bound1, size=(z.shape[1] + 1, hidden))
    w2 = np.zeros((hidden + 1, 2))
    y = np.eye(2)[_labels_to_index(labels)]
    zc = ad.Tensor(z)

    def loss(a, b):
        hid = ad.relu(zc @ a[:-1] + a[-1])
        logits = hid @ b[:-1] + b[-1]
        return -(ad.log_softmax(logits) * y).sum() * (1.0 / len(z))

    for _ in range(epochs):
        _, (g1, g2) = ad.grad(loss, [w1, w2])
        w1 = w1 - lr * g1
        w2 = w2 - lr * g2
    return [_fold(w1, mu, sd), w2]


def _fit_actor_weights(l, features, labels, cfg):
    """Identity-initialized W fitted jointly with a throwaway linear head on order-1 embeddings."""
    p = features.shape[2]
    n_nodes = l.n_nodes
    n = features.shape[0]
    lx = np.asarray(l.matrix @ features.transpose(1, 0, 2).reshape(n_nodes, -1)).reshape(n_nodes, n, p)
    pooled = _pool(lx, cfg.pooling)
    mu, sd = _standardizer(pooled)
    z = ad.Tensor((pooled - mu) / sd)
    y = np.eye(2)[_labels_to_index(labels)]

    def loss(w, c):
        logits = (z @ w) @ c[:-1] + c[-1]
        return -(ad.log_softmax(logits) * y).sum() * (1.0 / n)

    w, c = np.eye(p), np.zeros((p + 1, 2))
    for _ in range(cfg.head_epochs):
        _, (gw, gc) = ad.grad(loss, [w, c])
        w, c = w - cfg.head_lr * gw, c - cfg.head_lr * gc
    return w


def train_magnet(train, cfg: ActorConfig = ActorConfig()) -> MaGNetModel:
    """Sequentially fit K order-specific critics, fuse, and fit the head."""
    labels = np.asarray(train.labels)
    if len(labels) < 2 or len(np.unique(labels)) < 2:
        raise SingleClassTrainingSet("training set needs both labels and >= 2 instances")
    l = normalized_laplacian(train.adjacency)
    if cfg.w_mode == "identity":
        w = np.eye(train.feat_dim)
    else:
        w = _fit_actor_weights(l, train.features, labels, cfg)
    per_order = order_embeddings(l, train.features, w, cfg.k_orders, cfg.pooling)

    n = len(labels)
    beta = np.full(n, 1.0 / n)
    critics, alphas, epsilons, rounds = [], [], [], []
    for k in range(cfg.k_orders):
        critic = train_critic(per_order[k], labels, beta, cfg.critic_iters, cfg.critic_lr)
        eps = weighted_error(critic, per_order[k], labels, beta, cfg.epsilon_min)
        alpha = fusion_weight(eps)
        wrong = misclassified(critic, per_order[k], labels)
        rounds.append({"beta": beta.tolist(), "misclassified": wrong.tolist()})
        beta = update_sample_weights(beta, alpha, wrong)
        critics.append(critic)
        alphas.append(alpha)
        epsilons.append(eps)

    fused = fuse_embeddings(list(per_order), alphas)
    hidden = None
    if cfg.head == "linear":
        head = _fit_softmax_head(fused, labels, cfg.head_epochs, cfg.head_lr)
    else:
        hidden = _fit_mlp_head(fused, labels, cfg.head_hidden, cfg.head_epochs, cfg.head_lr, cfg.seed)
        head = np.zeros((fused.shape[1] + 1, 2))
    return MaGNetModel(
        W=w,
        critics=critics,
        alphas=np.array(alphas),
        head=head,
        pooling=cfg.pooling,
        w_mode=cfg.w_mode,
        head_mode=cfg.head,
        head_hidden=hidden,
        diagnostics={
            "epsilons": epsilons,
            "betas": beta.tolist(),
            "rounds": rounds,
            "alpha_floored": [a == 0.0 for a in alphas],
        },
    )


def fused_embeddings(model: MaGNetModel, adjacency: AdjacencyMatrix, features):
    l = normalized_laplacian(adjacency)
    per_order = order_embeddings(l, features, model.W, model.k_orders, model.pooling)
    return fuse_embeddings(list(per_order), model.alphas)


def predict_proba(model: MaGNetModel, adjacency: AdjacencyMatrix, features):
    """Class probabilities ``[P(-1), P(+1)]``; accepts one ``(N, p)`` instance or a stack."""
    features = np.asarray(features, dtype=float)
    single = features.ndim == 2
    if features.shape[-1] != model.feat_dim:
        raise DimensionMismatch(f"model expects {model.feat_dim} features, got {features.shape[-1]}")
    probs = _softmax(model.head_logits(fused_embeddings(model, adjacency, features)))
    return probs[0] if single else probs


def _index_to_label(idx):
    return np.where(idx == 1, 1, -1)


def predict(model: MaGNetModel, adjacency: AdjacencyMatrix, x):
    """Label (+1 / -1) and class probabilities for one instance."""
    logits = model.head_logits(fused_embeddings(model, adjacency, np.asarray(x, dtype=float)))[0]
    probs = _softmax(logits)
    label = 1 if logits[1] >= logits[0] else -1
    return label, probs


def predict_labels(model: MaGNetModel, adjacency: AdjacencyMatrix, features):
    logits = model.head_logits(fused_embeddings(model, adjacency, features))
    return _index_to_label((logits[:, 1] >= logits[:, 0]).astype(np.int64))


def evaluate_accuracy(model, dataset):
    if dataset.n == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    if isinstance(model, GCNBaseline):
        pred = model.predict_labels(dataset.features)
    else:
        pred = predict_labels(model, dataset.adjacency, dataset.features)
    return float(np.mean(pred == dataset.labels))


# ---------------------------------------------------------------------------
# two-layer GCN baseline


@dataclass
class GCNBaseline:
    """``softmax(mean_nodes(L~ relu(L~ X W0) W1) + b)`` with the augmented Laplacian."""

    laplacian: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    b: np.ndarray

    def logits(self, features):
        features = np.asarray(features, dtype=float)
        hid = np.maximum(self.laplacian @ features @ self.w0, 0.0)
        return (self.laplacian @ hid @ self.w1).mean(axis=-2) + self.b

    def predict_proba(self, features):
        return _softmax(self.logits(features))

    def predict_labels(self, features):
        z = self.logits(features)
        return _index_to_label((z[..., 1] >= z[..., 0]).astype(np.int64))


def gcn_loss(laplacian, features, labels):
    """Mean cross-entropy of the GCN baseline as a function of ``(w0, w1, b)`` tensors."""
    lt = ad.Tensor(laplacian)
    x = ad.Tensor(features)
    y = np.eye(2)[_labels_to_index(labels)]
    n = len(labels)

    def loss(w0, w1, b):
        hid = ad.relu(lt @ (x @ w0))
        logits = (lt @ (hid @ w1)).mean(axis=1) + b
        return -(ad.log_softmax(logits) * y).sum() * (1.0 / n)

    return loss


def train_gcn_baseline(train, hidden_dim=16, epochs=200, lr=0.1, seed=0, init_scale=None):
    labels = np.asarray(train.labels)
    if len(labels) < 2 or len(np.unique(labels)) < 2:
        raise SingleClassTrainingSet("training set needs both labels and >= 2 instances")
    lap = augmented_laplacian(train.adjacency).toarray()
    p = train.feat_dim
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 53]))
    s0 = 1.0 / np.sqrt(p) if init_scale is None else init_scale
    s1 = 1.0 / np.sqrt(hidden_dim) if init_scale is None else init_scale
    params = [
        rng.uniform(-s0, s0, size=(p, hidden_dim)),
        rng.uniform(-s1, s1, size=(hidden_dim, 2)),
        np.zeros(2),
    ]
    loss = gcn_loss(lap, train.features, labels)
    for _ in range(epochs):
        _, grads = ad.grad(loss, params)
        params = [q - lr * g for q, g in zip(params, grads)]
    return GCNBaseline(lap, *params)
