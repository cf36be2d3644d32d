"""JSON persistence for datasets, models and explanations.

Every document carries ``schema_version`` and ``kind``. Floats go through
``json`` (shortest repr), which round-trips float64 exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import SchemaError, VersionMismatch
from .estimator import CriticModel, MaGNetModel
from .graph_core import AdjacencyMatrix
from .synth import GraphDataset

SCHEMA_VERSION = 1
LABEL_CONVENTION = {"0": -1, "1": 1}


def _dump(doc, path):
    text = json.dumps(doc, indent=1, sort_keys=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _read(path, kind):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")
    version = _field(doc, "schema_version", "$")
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"schema_version {version!r}, expected {SCHEMA_VERSION}")
    if doc.get("kind", kind) != kind:
        raise SchemaError("$.kind", f"expected {kind!r}, got {doc.get('kind')!r}")
    return doc


def _field(doc, key, where):
    if key not in doc:
        raise SchemaError(f"{where}.{key}", "missing field")
    return doc[key]


def _int(value, path, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected integer, got {value!r}")
    if lo is not None and value < lo:
        raise SchemaError(path, f"must be >= {lo}")
    return value


def _matrix(value, path, shape=None):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, "expected a numeric array") from exc
    if shape is not None and arr.shape != shape:
        raise SchemaError(path, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(path, "non-finite entry")
    return arr


# ---------------------------------------------------------------------------
# datasets


def dataset_to_dict(ds: GraphDataset, run_config=None):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "dataset",
        "n_nodes": ds.n_nodes,
        "feat_dim": ds.feat_dim,
        "adjacency": ds.adjacency.edges.tolist(),
        "important_nodes": None if ds.important_nodes is None else ds.important_nodes.tolist(),
        "meta": ds.meta,
        "run_config": run_config or {},
        "instances": [
            {"features": x.ravel().tolist(), "label": int(s)} for x, s in zip(ds.features, ds.labels)
        ],
    }


def save_dataset(ds: GraphDataset, path, run_config=None):
    _dump(dataset_to_dict(ds, run_config), path)


def load_dataset(path) -> GraphDataset:
    return dataset_from_dict(_read(path, "dataset"))


def dataset_from_dict(doc):
    n_nodes = _int(_field(doc, "n_nodes", "$"), "$.n_nodes", 2)
    feat_dim = _int(_field(doc, "feat_dim", "$"), "$.feat_dim", 1)

    raw_edges = _field(doc, "adjacency", "$")
    if not isinstance(raw_edges, list):
        raise SchemaError("$.adjacency", "expected a list of [i, j] pairs")
    seen = set()
    for k, pair in enumerate(raw_edges):
        where = f"$.adjacency[{k}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(where, "expected [i, j]")
        i, j = _int(pair[0], where + "[0]", 0), _int(pair[1], where + "[1]", 0)
        if not i < j:
            raise SchemaError(where, "edges must be listed once with i < j")
        if j >= n_nodes:
            raise SchemaError(where, "node index out of range")
        if (i, j) in seen:
            raise SchemaError(where, "duplicate edge")
        seen.add((i, j))
    adjacency = AdjacencyMatrix(n_nodes, np.array(sorted(seen), dtype=np.int64).reshape(-1, 2))

    imp = doc.get("important_nodes")
    if imp is not None:
        if not isinstance(imp, list):
            raise SchemaError("$.important_nodes", "expected a list or null")
        for k, v in enumerate(imp):
            if _int(v, f"$.important_nodes[{k}]", 0) >= n_nodes:
                raise SchemaError(f"$.important_nodes[{k}]", "node index out of range")
        imp = np.array(imp, dtype=np.int64)

    instances = _field(doc, "instances", "$")
    if not isinstance(instances, list):
        raise SchemaError("$.instances", "expected a list")
    feats = np.empty((len(instances), n_nodes, feat_dim))
    labels = np.empty(len(instances), dtype=np.int64)
    for k, inst in enumerate(instances):
        where = f"$.instances[{k}]"
        if not isinstance(inst, dict):
            raise SchemaError(where, "expected an object")
        label = _field(inst, "label", where)
        if isinstance(label, bool) or not isinstance(label, int) or label not in (-1, 1):
            raise SchemaError(where + ".label", f"labels must be -1 or 1, got {label!r}")
        labels[k] = label
        feats[k] = _matrix(_field(inst, "features", where), where + ".features", (n_nodes * feat_dim,)).reshape(
            n_nodes, feat_dim
        )
    meta = doc.get("meta") or {}
    return GraphDataset(adjacency, feats, labels, imp, meta)


# ---------------------------------------------------------------------------
# models


def model_to_dict(model: MaGNetModel, run_config=None):
    diag = model.diagnostics
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "model",
        "K": model.k_orders,
        "w_mode": model.w_mode,
        "pooling": model.pooling,
        "head_mode": model.head_mode,
        "W": model.W.tolist(),
        "critics": [c.weights.tolist() for c in model.critics],
        "alphas": model.alphas.tolist(),
        "head": model.head.tolist(),
        "head_hidden": None if model.head_hidden is None else [w.tolist() for w in model.head_hidden],
        "diagnostics": {
            "epsilons": list(diag.get("epsilons", [])),
            "betas": list(diag.get("betas", [])),
            "alpha_floored": list(diag.get("alpha_floored", [])),
        },
        "label_convention": LABEL_CONVENTION,
        "run_config": run_config or {},
    }


def save_model(model: MaGNetModel, path, run_config=None):
    _dump(model_to_dict(model, run_config), path)


def load_model(path) -> MaGNetModel:
    return model_from_dict(_read(path, "model"))


def model_from_dict(doc):
    k = _int(_field(doc, "K", "$"), "$.K", 1)
    w = _matrix(_field(doc, "W", "$"), "$.W")
    if w.ndim != 2:
        raise SchemaError("$.W", "expected a matrix")
    d = w.shape[1]
    alphas = _matrix(_field(doc, "alphas", "$"), "$.alphas")
    if alphas.shape != (k,):
        raise SchemaError("$.alphas", f"expected {k} fusion weights, got {alphas.size}")
    if np.any(alphas < 0):
        raise SchemaError("$.alphas", "fusion weights must be nonnegative")
    critics_raw = _field(doc, "critics", "$")
    if not isinstance(critics_raw, list) or len(critics_raw) != k:
        raise SchemaError("$.critics", f"expected {k} critics")
    critics = [CriticModel(_matrix(c, f"$.critics[{i}]", (d + 1, 2))) for i, c in enumerate(critics_raw)]
    head = _matrix(_field(doc, "head", "$"), "$.head", (d + 1, 2))
    head_mode = doc.get("head_mode", "linear")
    hidden = None
    if head_mode == "mlp":
        raw = _field(doc, "head_hidden", "$")
        if not isinstance(raw, list) or len(raw) != 2:
            raise SchemaError("$.head_hidden", "expected two weight matrices")
        w1 = _matrix(raw[0], "$.head_hidden[0]")
        if w1.ndim != 2 or w1.shape[0] != d + 1:
            raise SchemaError("$.head_hidden[0]", f"expected {d + 1} rows")
        w2 = _matrix(raw[1], "$.head_hidden[1]", (w1.shape[1] + 1, 2))
        hidden = [w1, w2]
    elif head_mode != "linear":
        raise SchemaError("$.head_mode", f"unknown head mode {head_mode!r}")
    pooling = doc.get("pooling", "mean")
    if pooling not in ("mean", "sum"):
        raise SchemaError("$.pooling", f"unknown pooling {pooling!r}")
    diag = doc.get("diagnostics") or {}
    return MaGNetModel(
        W=w,
        critics=critics,
        alphas=alphas,
        head=head,
        pooling=pooling,
        w_mode=doc.get("w_mode", "identity"),
        head_mode=head_mode,
        head_hidden=hidden,
        diagnostics={k_: diag.get(k_, []) for k_ in ("epsilons", "betas", "alpha_floored")},
    )


# ---------------------------------------------------------------------------
# explanations


def save_explanation(explanation, params, path, run_config=None):
    doc = {"schema_version": SCHEMA_VERSION, "kind": "explanation"}
    doc.update(explanation.to_dict())
    doc["params"] = {
        "psi": params.psi.tolist(),
        "b_tilde": params.b_tilde.tolist(),
        "omega_start": params.omega_start,
        "omega_end": params.omega_end,
        "iters": params.iters,
        "lambda_edge": params.lambda_edge,
        "lambda_feature": params.lambda_feature,
        "mc_samples": params.mc_samples,
        "lr": params.lr,
        "seed": params.seed,
        "degree_floor": params.degree_floor,
        "target_mode": params.target_mode,
    }
    doc["run_config"] = run_config or {}
    _dump(doc, path)


def load_explanation(path):
    doc = _read(path, "explanation")
    for key in ("edge_scores", "feature_scores", "kept_edges", "kept_nodes", "kept_features", "loss_trajectory"):
        if not isinstance(_field(doc, key, "$"), list):
            raise SchemaError(f"$.{key}", "expected a list")
    return doc
