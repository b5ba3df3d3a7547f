"""Undirected social graph with settlement attribution.

Node identifiers are interned to dense integer indices; adjacency is kept in
CSR form with sorted neighbour lists so that numba kernels can walk it
directly. Instances are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np


class IngestError(ValueError):
    """Fatal problem with graph input data."""


class UnknownNodeError(KeyError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Simple undirected graph of users, each attributed to one settlement.

    Attributes
    ----------
    node_ids : tuple
        External identifier of each internal node index.
    indptr, indices : ndarray of int64
        CSR adjacency; ``indices[indptr[i]:indptr[i + 1]]`` are the sorted
        neighbours of node ``i``. Every undirected edge is stored twice.
    settlement_codes : ndarray of int64
        Index into ``settlement_ids`` for each node.
    settlement_ids : tuple
        External settlement identifiers.
    """

    node_ids: tuple
    indptr: np.ndarray
    indices: np.ndarray
    settlement_codes: np.ndarray
    settlement_ids: tuple
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self._index is None:
            object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.node_ids)})
        for name in ("indptr", "indices", "settlement_codes"):
            _frozen(getattr(self, name))

    # -- sizes -----------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def edge_count(self) -> int:
        return int(self.indices.shape[0] // 2)

    def __len__(self) -> int:
        return self.n_nodes

    # -- lookups ---------------------------------------------------------
    def index_of(self, node: Hashable) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    def __contains__(self, node) -> bool:
        return node in self._index

    def degree(self, node: Hashable) -> int:
        i = self.index_of(node)
        return int(self.indptr[i + 1] - self.indptr[i])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, node: Hashable) -> list:
        i = self.index_of(node)
        return [self.node_ids[j] for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]

    def settlement_of(self, node: Hashable) -> Hashable:
        return self.settlement_ids[self.settlement_codes[self.index_of(node)]]

    def settlement_members(self, settlement: Hashable) -> set:
        try:
            code = self.settlement_ids.index(settlement)
        except ValueError:
            return set()
        return {self.node_ids[i] for i in np.flatnonzero(self.settlement_codes == code)}

    # -- set views -------------------------------------------------------
    @property
    def nodes(self) -> frozenset:
        return frozenset(self.node_ids)

    def edge_array(self) -> np.ndarray:
        """(L, 2) array of internal index pairs with ``u < v``."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degrees())
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def iter_edges(self) -> Iterator[tuple]:
        ids = self.node_ids
        for u, v in self.edge_array():
            yield ids[u], ids[v]

    @property
    def edges(self) -> set:
        return {frozenset(e) for e in self.iter_edges()}

    @property
    def attribution(self) -> dict:
        return {n: self.settlement_ids[c] for n, c in zip(self.node_ids, self.settlement_codes)}

    def __repr__(self) -> str:
        return (f"SocialGraph(n_nodes={self.n_nodes}, n_edges={self.edge_count()}, "
                f"n_settlements={len(self.settlement_ids)})")


def from_index_arrays(u: np.ndarray, v: np.ndarray, node_ids: Sequence,
                      settlement_codes: np.ndarray, settlement_ids: Sequence) -> SocialGraph:
    """Build a graph from integer endpoint arrays, dropping loops and duplicates."""
    n = len(node_ids)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    keep = lo != hi
    key = np.unique(lo[keep] * n + hi[keep]) if n else np.empty(0, np.int64)
    lo, hi = key // max(n, 1), key % max(n, 1)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return SocialGraph(
        node_ids=tuple(node_ids),
        indptr=indptr,
        indices=np.ascontiguousarray(dst, dtype=np.int64),
        settlement_codes=np.asarray(settlement_codes, dtype=np.int64).copy(),
        settlement_ids=tuple(settlement_ids),
    )


def build_graph(edges: Iterable[tuple], attribution: Mapping) -> SocialGraph:
    """Build a :class:`SocialGraph` from node pairs and a node->settlement map.

    Every attributed node becomes a graph node, isolated or not. Self-loops
    and repeated edges are dropped silently.

    Raises
    ------
    IngestError
        If an edge endpoint has no settlement attribution.
    """
    node_ids = list(attribution)
    index = {n: i for i, n in enumerate(node_ids)}
    settlement_ids = list(dict.fromkeys(attribution.values()))
    s_index = {s: i for i, s in enumerate(settlement_ids)}
    codes = np.fromiter((s_index[attribution[n]] for n in node_ids), dtype=np.int64,
                        count=len(node_ids))
    us, vs = [], []
    for a, b in edges:
        for x in (a, b):
            if x not in index:
                raise IngestError(f"node {x!r} appears in edges but has no settlement attribution")
        us.append(index[a])
        vs.append(index[b])
    return from_index_arrays(np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                             node_ids, codes, settlement_ids)


def induced_subgraph(g: SocialGraph, keep: np.ndarray) -> SocialGraph:
    """Subgraph induced on the sorted internal indices ``keep``.

    Node order (and hence CSR layout) follows the parent graph.
    """
    keep = np.asarray(keep, dtype=np.int64)
    remap = np.full(g.n_nodes, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.shape[0])
    e = g.edge_array()
    if e.shape[0]:
        mask = (remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)
        e = remap[e[mask]]
    used = np.unique(g.settlement_codes[keep])
    s_remap = np.full(len(g.settlement_ids), -1, dtype=np.int64)
    s_remap[used] = np.arange(used.shape[0])
    return from_index_arrays(
        e[:, 0] if e.shape[0] else np.empty(0, np.int64),
        e[:, 1] if e.shape[0] else np.empty(0, np.int64),
        [g.node_ids[i] for i in keep],
        s_remap[g.settlement_codes[keep]],
        [g.settlement_ids[i] for i in used],
    )


def internal_subgraph(g: SocialGraph, settlement: Hashable) -> SocialGraph:
    """Residents of ``settlement`` and the ties among them only.

    An unknown settlement yields an empty graph.
    """
    try:
        code = g.settlement_ids.index(settlement)
    except ValueError:
        return induced_subgraph(g, np.empty(0, np.int64))
    return induced_subgraph(g, np.flatnonzero(g.settlement_codes == code))


def ego_alters_subgraph(g: SocialGraph, ego: Hashable) -> SocialGraph:
    """Neighbours of ``ego`` and the ties among them, ego removed.

    Alters from every settlement are kept.
    """
    i = g.index_of(ego)
    return induced_subgraph(g, g.indices[g.indptr[i]:g.indptr[i + 1]])


def degree(g: SocialGraph, node: Hashable) -> int:
    return g.degree(node)


def edge_count(g: SocialGraph) -> int:
    return g.edge_count()


def settlement_members(g: SocialGraph, settlement: Hashable) -> set:
    return g.settlement_members(settlement)


def split_internal(g: SocialGraph, settlements=None) -> Iterator[tuple]:
    """Yield ``(settlement, internal_subgraph)`` for each settlement in one pass."""
    n_s = len(g.settlement_ids)
    codes = range(n_s) if settlements is None else [
        g.settlement_ids.index(s) for s in settlements if s in g.settlement_ids]
    e = g.edge_array()
    cu = g.settlement_codes[e[:, 0]]
    e = e[cu == g.settlement_codes[e[:, 1]]]
    cu = g.settlement_codes[e[:, 0]]
    e_order = np.argsort(cu, kind="stable")
    e, cu = e[e_order], cu[e_order]
    n_order = np.argsort(g.settlement_codes, kind="stable")
    sorted_codes = g.settlement_codes[n_order]
    local = np.empty(g.n_nodes, dtype=np.int64)
    for c in codes:
        nodes = n_order[np.searchsorted(sorted_codes, c):np.searchsorted(sorted_codes, c, side="right")]
        local[nodes] = np.arange(nodes.shape[0])
        sub = e[np.searchsorted(cu, c):np.searchsorted(cu, c, side="right")]
        yield g.settlement_ids[c], from_index_arrays(
            local[sub[:, 0]], local[sub[:, 1]], [g.node_ids[i] for i in nodes],
            np.zeros(nodes.shape[0], np.int64), [g.settlement_ids[c]])
