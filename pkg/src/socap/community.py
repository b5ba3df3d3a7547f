"""Louvain partitions, edge-count modularity, its theoretical maximum and the
fragmentation ratio of a settlement network.

Detection optimises standard degree-based (Newman-Girvan) modularity. The
reported ``Q`` and ``Q_max`` use the edge-count form

    Q     = sum_k [ L_k^w / L - (L_k / L)^2 ]
    Q_max = sum_k [ L_k   / L - (L_k / L)^2 ]

where ``L_k^w`` counts edges inside group ``k`` and ``L_k`` counts edges with
at least one endpoint in ``k``. Under the default ``crossing="both"`` an edge
between two groups counts fully toward both, so ``sum_k L_k >= L``. With
``crossing="half"`` it counts one half toward each, which makes ``Q`` equal
to Newman-Girvan modularity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Literal

import numpy as np

from . import _louvain
from .graph import SocialGraph

log = logging.getLogger(__name__)

Crossing = Literal["both", "half"]


class EmptyGraphError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Community labels ``1..K`` aligned with ``graph.node_ids``."""

    node_ids: tuple
    labels: np.ndarray

    @property
    def K(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    @property
    def assignment(self) -> dict:
        return dict(zip(self.node_ids, self.labels.tolist()))

    def communities(self) -> list[set]:
        out = [set() for _ in range(self.K)]
        for n, k in zip(self.node_ids, self.labels):
            out[k - 1].add(n)
        return out

    @classmethod
    def from_assignment(cls, g: SocialGraph, assignment: dict) -> "Partition":
        """Partition from any node->label map; labels are renumbered 1..K."""
        raw = [assignment[n] for n in g.node_ids]
        lut = {}
        labels = np.array([lut.setdefault(x, len(lut) + 1) for x in raw], dtype=np.int64)
        return cls(tuple(g.node_ids), labels)


@dataclass
class ModularityReport:
    Q: float
    Q_max: float
    F: float
    K: int
    L: int
    n_nodes: int
    per_community: list = field(default_factory=list)
    degenerate: bool = False
    undefined: bool = False


def _seed64(seed) -> np.uint64:
    return np.uint64(int(seed) & ((1 << 64) - 1))


def louvain(g: SocialGraph, seed: int = 0) -> Partition:
    """Louvain partition of ``g``, deterministic for a given ``seed``.

    Node visit order is a seeded shuffle; a node moves only on strictly
    positive gain and equal-gain targets resolve to the lowest community
    label. Isolated nodes stay singletons.
    """
    if g.n_nodes == 0:
        raise EmptyGraphError("louvain needs a graph with at least one node")
    labels = _louvain.louvain_csr(g.indptr, g.indices, _seed64(seed))
    return Partition(tuple(g.node_ids), labels + 1)


def newman_modularity(g: SocialGraph, p: Partition) -> float:
    """Standard degree-based modularity; 0.0 for an edgeless graph."""
    return float(_louvain.newman_modularity_csr(g.indptr, g.indices, p.labels - 1))


def community_edge_counts(g: SocialGraph, p: Partition, crossing: Crossing = "both"):
    """Per-community ``(L_k, L_k^w)`` arrays and total ``L``."""
    L = g.edge_count()
    K = p.K
    e = g.edge_array()
    lu = p.labels[e[:, 0]] - 1
    lv = p.labels[e[:, 1]] - 1
    inside = lu == lv
    Lw = np.bincount(lu[inside], minlength=K).astype(float)
    cross_w = 1.0 if crossing == "both" else 0.5
    Lk = Lw.copy()
    Lk += cross_w * np.bincount(lu[~inside], minlength=K)
    Lk += cross_w * np.bincount(lv[~inside], minlength=K)
    return Lk, Lw, L


def edge_count_modularity(g: SocialGraph, p: Partition, crossing: Crossing = "both"):
    """Edge-count modularity of ``p`` with its per-community terms.

    Returns
    -------
    Q : float
    terms : list of (L_k, L_k^w)

    Raises
    ------
    EmptyGraphError
        If the graph has no edges.
    """
    Lk, Lw, L = community_edge_counts(g, p, crossing)
    if L == 0:
        raise EmptyGraphError("modularity is undefined for a graph without edges")
    q = float(np.sum(Lw / L - (Lk / L) ** 2))
    return q, list(zip(Lk.tolist(), Lw.tolist()))


def q_max(g: SocialGraph, p: Partition, crossing: Crossing = "both") -> float:
    """Modularity ``p`` would reach if every edge stayed inside its group."""
    Lk, _, L = community_edge_counts(g, p, crossing)
    if L == 0:
        raise EmptyGraphError("Q_max is undefined for a graph without edges")
    return float(np.sum(Lk / L - (Lk / L) ** 2))


def report(g: SocialGraph, p: Partition, crossing: Crossing = "both", label=None) -> ModularityReport:
    L = g.edge_count()
    if L == 0:
        return ModularityReport(np.nan, np.nan, np.nan, p.K, 0, g.n_nodes, undefined=True)
    q, terms = edge_count_modularity(g, p, crossing)
    qm = q_max(g, p, crossing)
    if qm > 0:
        return ModularityReport(q, qm, q / qm, p.K, L, g.n_nodes, terms)
    log.info("degenerate fragmentation (Q_max=0) for %s: F set to 0", label if label is not None else g)
    return ModularityReport(q, qm, 0.0, p.K, L, g.n_nodes, terms, degenerate=True)


def fragmentation(g_internal: SocialGraph, seed: int = 0, crossing: Crossing = "both",
                  label: Hashable = None) -> ModularityReport:
    """Louvain on a settlement's internal network, then ``F = Q / Q_max``.

    ``F`` is set to 0 when ``Q_max`` is 0 (a single community holds every
    edge). A graph without edges gives a report flagged ``undefined``.
    """
    if g_internal.edge_count() == 0:
        log.warning("fragmentation undefined for %s: no internal edges", label if label is not None else g_internal)
        return ModularityReport(np.nan, np.nan, np.nan, 0, 0, g_internal.n_nodes, undefined=True)
    return report(g_internal, louvain(g_internal, seed), crossing, label)


# -- exhaustive oracle ----------------------------------------------------

def _restricted_growth(n: int):
    """All set partitions of range(n) as restricted growth strings."""
    a = [0] * n
    if n == 0:
        yield ()
        return

    def rec(i, m):
        if i == n:
            yield tuple(a)
            return
        for v in range(m + 2):
            a[i] = v
            yield from rec(i + 1, max(m, v))

    a[0] = 0
    yield from rec(1, 0)


def brute_force_best_partition(g: SocialGraph, max_nodes: int = 10):
    """Exact Newman-Girvan maximiser by enumerating every set partition.

    Ties keep the first partition in restricted-growth order, which lists
    coarser groupings of early nodes first.
    """
    n = g.n_nodes
    if n > max_nodes:
        raise ValueError(f"brute force limited to {max_nodes} nodes, graph has {n}")
    if n == 0:
        raise EmptyGraphError("empty graph")
    best_q, best = -np.inf, None
    for rgs in _restricted_growth(n):
        labels = np.asarray(rgs, dtype=np.int64)
        q = _louvain.newman_modularity_csr(g.indptr, g.indices, labels)
        if q > best_q + 1e-12:
            best_q, best = q, labels
    return Partition(tuple(g.node_ids), best + 1), float(best_q)


def all_fragmentation(g: SocialGraph, seed: int = 0, crossing: Crossing = "both", settlements=None) -> dict:
    """Fragmentation report per settlement, Louvain seeded from (seed, settlement)."""
    from .graph import split_internal
    from .seeding import entity_seed

    return {s: fragmentation(sub, entity_seed(seed, s), crossing, label=s)
            for s, sub in split_internal(g, settlements)}
