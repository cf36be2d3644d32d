"""Repeated generate / train / evaluate / explain runs and CSV reports."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .estimator import ActorConfig, evaluate_accuracy, train_gcn_baseline, train_magnet
from .interpreter import ExplanationParams, optimize_explanation, threshold_explanation
from .metrics import interpretation_metrics
from .synth import generate_setting1, generate_setting2

CSV_HEADER = ["setting", "n", "nodes", "important", "method", "metric", "mean", "sd", "repeats"]


@dataclass(frozen=True)
class BenchmarkConfig:
    setting: int = 1
    n: int = 250
    nodes: int = 30
    important: int = 20
    feat_dim: int = 25
    seed: int = 7
    k: int = 3
    split: float = 0.7
    repeats: int = 10
    target_density: float = 0.2
    noise_sd: float = 0.1
    baseline: str = "none"
    explain: bool = True
    top_m: int | None = None  # defaults to ``important``
    iters: int = 300
    lambda_edge: float = 0.005
    lambda_feature: float = 0.1
    omega_start: float = 1.0
    omega_end: float = 0.1
    mc_samples: int = 4
    target_mode: str = "fixed_full"
    gcn_hidden: int = 16
    gcn_epochs: int = 200
    gcn_lr: float = 0.1


def repetition_seed(seed, rep):
    """Independent 32-bit seed for repetition ``rep`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1)[0])


def generate(cfg: BenchmarkConfig, seed):
    gen = generate_setting1 if cfg.setting == 1 else generate_setting2
    return gen(
        cfg.n, cfg.nodes, cfg.important, cfg.feat_dim, noise_sd=cfg.noise_sd, seed=seed,
        target_density=cfg.target_density,
    )


def run_repetition(cfg: BenchmarkConfig, rep):
    """One repetition; returns ``{(method, metric): value}``."""
    seed = repetition_seed(cfg.seed, rep)
    data = generate(cfg, seed)
    # random relabelling so index-ordered tie breaks cannot favour planted nodes
    perm = np.random.default_rng(np.random.SeedSequence([seed, 5])).permutation(data.n_nodes)
    data = data.permute_nodes(perm)
    train, test = data.split(cfg.split, seed)
    model = train_magnet(train, ActorConfig(k_orders=cfg.k, seed=seed))
    out = {("magnet", "accuracy"): evaluate_accuracy(model, test)}
    if cfg.baseline == "gcn":
        gcn = train_gcn_baseline(train, cfg.gcn_hidden, cfg.gcn_epochs, cfg.gcn_lr, seed)
        out[("gcn", "accuracy")] = evaluate_accuracy(gcn, test)
    if cfg.explain:
        params = ExplanationParams(
            omega_start=cfg.omega_start,
            omega_end=cfg.omega_end,
            iters=cfg.iters,
            lambda_edge=cfg.lambda_edge,
            lambda_feature=cfg.lambda_feature,
            mc_samples=cfg.mc_samples,
            seed=seed,
            target_mode=cfg.target_mode,
        )
        params, trajectory = optimize_explanation(model, train, params)
        top_m = cfg.important if cfg.top_m is None else cfg.top_m
        ex = threshold_explanation(params, data.adjacency, top_m_nodes=top_m, loss_trajectory=trajectory)
        im = interpretation_metrics(data.adjacency, ex.kept_nodes, ex.kept_edges, data.important_nodes)
        out[("magnet", "recovery")] = im.recovery_rate
        out[("magnet", "rm")] = im.rm
        out[("magnet", "am")] = im.am
    return out


def _threads():
    try:
        return max(1, int(os.environ.get("MAGNET_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(cfg: BenchmarkConfig):
    """All repetitions in repetition order; returns ``(rows, per_rep)``."""
    workers = min(_threads(), cfg.repeats)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per_rep = list(pool.map(run_repetition, [cfg] * cfg.repeats, range(cfg.repeats)))
    else:
        per_rep = [run_repetition(cfg, r) for r in range(cfg.repeats)]
    rows = []
    for key in per_rep[0]:
        values = np.array([rep[key] for rep in per_rep])
        rows.append(
            {
                "setting": cfg.setting,
                "n": cfg.n,
                "nodes": cfg.nodes,
                "important": cfg.important,
                "method": key[0],
                "metric": key[1],
                "mean": float(values.mean()),
                "sd": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                "repeats": cfg.repeats,
            }
        )
    return rows, per_rep


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_HEADER])
    return buf.getvalue()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append(
                {
                    **r,
                    "mean": float(r["mean"]),
                    "sd": float(r["sd"]),
                    "repeats": int(r["repeats"]),
                }
            )
    return rows


def config_dict(cfg: BenchmarkConfig):
    return asdict(cfg)
