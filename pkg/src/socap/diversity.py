"""Ego-network diversity and its settlement average.

A user's diversity is the Newman-Girvan modularity of the Louvain partition
of their alters subgraph (ego removed). Alters in every settlement are used,
except in the internal variant, which keeps only same-settlement alters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from . import _louvain
from .graph import SocialGraph
from .seeding import entity_seeds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EgoDiversity:
    ego: Hashable
    Q_ego: float
    n_alters: int
    n_alter_edges: int
    K_ego: int

    @property
    def included(self) -> bool:
        return self.n_alters > 0 and self.n_alter_edges > 0


@dataclass(frozen=True)
class SettlementDiversity:
    settlement: Hashable
    D: float
    n_users_included: int
    n_users_excluded: int = 0

    @property
    def excluded(self) -> bool:
        return np.isnan(self.D)


def _batch(g: SocialGraph, idx: np.ndarray, seed: int, internal_only: bool):
    seeds = entity_seeds(seed, (g.node_ids[i] for i in idx))
    return _louvain.ego_modularity_batch(g.indptr, g.indices, g.settlement_codes,
                                         np.asarray(idx, dtype=np.int64), seeds, internal_only)


def ego_diversities(g: SocialGraph, egos, seed: int = 0, internal_only: bool = False) -> list[EgoDiversity]:
    """Diversity of several egos; each ego's Louvain run is seeded from (seed, ego)."""
    idx = np.array([g.index_of(e) for e in egos], dtype=np.int64)
    q, na, ne, k = _batch(g, idx, seed, internal_only)
    return [EgoDiversity(g.node_ids[i], float(q[t]), int(na[t]), int(ne[t]), int(k[t]))
            for t, i in enumerate(idx)]


def ego_diversity(g: SocialGraph, ego: Hashable, seed: int = 0, internal_only: bool = False) -> EgoDiversity:
    """Modularity of the Louvain partition of ``ego``'s alters.

    ``Q_ego`` is 0 when the alters share no edges; such egos (and isolated
    ones) are marked not ``included``.

    Raises
    ------
    UnknownNodeError
        If ``ego`` is not in the graph.
    """
    return ego_diversities(g, [ego], seed, internal_only)[0]


def aggregate(settlement, q, included, n_members: int, strict: bool = False) -> SettlementDiversity:
    """Average user diversities into a settlement score.

    By default only included users enter the mean. With ``strict=True`` the
    sum over included users is divided by every member of the settlement.
    """
    q = np.asarray(q, dtype=float)
    included = np.asarray(included, dtype=bool)
    n_inc = int(included.sum())
    n_exc = int(n_members - n_inc)
    if n_inc == 0:
        log.warning("settlement %s excluded from diversity: no user with connected alters", settlement)
        return SettlementDiversity(settlement, np.nan, 0, n_exc)
    total = float(np.sum(q[included]))
    return SettlementDiversity(settlement, total / (n_members if strict else n_inc), n_inc, n_exc)


def _members(g: SocialGraph, settlement) -> np.ndarray:
    try:
        code = g.settlement_ids.index(settlement)
    except ValueError:
        return np.empty(0, np.int64)
    return np.flatnonzero(g.settlement_codes == code)


def settlement_diversity(g: SocialGraph, s: Hashable, seed: int = 0, strict: bool = False,
                         internal_only: bool = False) -> SettlementDiversity:
    """Mean ego diversity over the users of settlement ``s``."""
    members = _members(g, s)
    q, na, ne, _ = _batch(g, members, seed, internal_only)
    return aggregate(s, q, (na > 0) & (ne > 0), members.shape[0], strict)


def internal_diversity(g: SocialGraph, s: Hashable, seed: int = 0, strict: bool = False) -> SettlementDiversity:
    """As :func:`settlement_diversity`, with alters restricted to ``s`` itself."""
    return settlement_diversity(g, s, seed, strict, internal_only=True)


def all_settlements(g: SocialGraph, seed: int = 0, strict: bool = False, internal_only: bool = False,
                    settlements=None) -> dict:
    """Settlement diversity for every (or each listed) settlement in one batch."""
    if settlements is None:
        codes = np.arange(len(g.settlement_ids))
    else:
        lut = {s: i for i, s in enumerate(g.settlement_ids)}
        codes = np.array([lut[s] for s in settlements if s in lut], dtype=np.int64)
    wanted = np.zeros(len(g.settlement_ids), dtype=bool)
    wanted[codes] = True
    members = np.flatnonzero(wanted[g.settlement_codes])
    q, na, ne, _ = _batch(g, members, seed, internal_only)
    inc = (na > 0) & (ne > 0)
    member_codes = g.settlement_codes[members]
    order = np.argsort(member_codes, kind="stable")
    bounds = np.searchsorted(member_codes[order], codes)
    ends = np.searchsorted(member_codes[order], codes, side="right")
    out = {}
    for c, lo, hi in zip(codes, bounds, ends):
        sel = order[lo:hi]
        s = g.settlement_ids[c]
        out[s] = aggregate(s, q[sel], inc[sel], hi - lo, strict)
    return out
