"""Interpretation metrics: node recovery and redundant-edge pruning (AM / RM).

An edge is *redundant* when at least one endpoint is outside the important
node set. AM divides the redundant edges that survive pruning by every
possible redundant pair, ``C(N, 2) - C(|V0|, 2)``; RM is the fraction of
the originally present redundant edges that were removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

from .errors import InvalidParams, UndefinedMetric


@dataclass(frozen=True)
class InterpretationMetrics:
    recovery_rate: float
    am: float
    rm: float
    redundant_before: int
    redundant_after: int
    possible_redundant: int


def node_recovery_rate(kept_nodes, true_important):
    true_set = {int(v) for v in true_important}
    if not true_set:
        raise InvalidParams("true important set must be nonempty")
    return len({int(v) for v in kept_nodes} & true_set) / len(true_set)


def _is_redundant(edge, important):
    i, j = edge
    return int(i) not in important or int(j) not in important


def redundant_edge_counts(adjacency_before, kept_edges, important):
    important = {int(v) for v in important}
    n = adjacency_before.n_nodes
    if any(v < 0 or v >= n for v in important):
        raise InvalidParams("important node out of range")
    before = sum(_is_redundant(e, important) for e in adjacency_before.edges)
    after = sum(_is_redundant(e, important) for e in kept_edges)
    possible = comb(n, 2) - comb(len(important), 2)
    return before, after, possible


def am_metric(after, possible):
    if possible <= 0:
        raise UndefinedMetric("AM undefined: no possible redundant edges")
    return after / possible


def rm_metric(before, after):
    if before <= 0:
        raise UndefinedMetric("RM undefined: no redundant edges before pruning")
    return (before - after) / before


def interpretation_metrics(adjacency, kept_nodes, kept_edges, important):
    before, after, possible = redundant_edge_counts(adjacency, kept_edges, important)
    return InterpretationMetrics(
        recovery_rate=node_recovery_rate(kept_nodes, important),
        am=am_metric(after, possible),
        rm=rm_metric(before, after),
        redundant_before=before,
        redundant_after=after,
        possible_redundant=possible,
    )
