"""Shared graph builders, independent oracles and hypothesis strategies."""

from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from socap.graph import build_graph


def graph_of(edges, nodes=None, settlement="S"):
    """Build a one-settlement graph; ``nodes`` adds isolated members."""
    nodes = list(nodes) if nodes is not None else []
    for a, b in edges:
        for x in (a, b):
            if x not in nodes:
                nodes.append(x)
    return build_graph(edges, {n: settlement for n in nodes})


def clique(nodes):
    return list(itertools.combinations(nodes, 2))


def set_partitions(items):
    """Every set partition of ``items``, generated by insertion (a second enumeration order)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def nx_graph(g):
    h = nx.Graph()
    h.add_nodes_from(g.node_ids)
    h.add_edges_from(g.iter_edges())
    return h


def nx_best_modularity(g):
    """Exhaustive optimum of standard modularity computed with networkx."""
    h = nx_graph(g)
    if h.number_of_edges() == 0:
        return 0.0
    return max(nx.community.modularity(h, [set(b) for b in part], weight=None) for part in set_partitions(g.node_ids))


def tally_modularity(g, assignment, crossing="both"):
    """Edge-by-edge tally of the edge-count modularity."""
    Lk, Lw = {}, {}
    L = 0
    w = 1.0 if crossing == "both" else 0.5
    for a, b in g.iter_edges():
        L += 1
        ka, kb = assignment[a], assignment[b]
        if ka == kb:
            Lw[ka] = Lw.get(ka, 0) + 1
            Lk[ka] = Lk.get(ka, 0) + 1
        else:
            Lk[ka] = Lk.get(ka, 0) + w
            Lk[kb] = Lk.get(kb, 0) + w
    q = sum(Lw.get(k, 0) / L - (Lk[k] / L) ** 2 for k in Lk)
    qmax = sum(Lk[k] / L - (Lk[k] / L) ** 2 for k in Lk)
    return q, qmax


@st.composite
def small_graphs(draw, min_nodes=1, max_nodes=7, connected=False):
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    if connected:
        # a random spanning path guarantees connectivity
        order = draw(st.permutations(range(n)))
        chosen = list({tuple(sorted(e)) for e in chosen} | {tuple(sorted(p)) for p in zip(order, order[1:])})
    return graph_of([(f"n{a}", f"n{b}") for a, b in chosen], nodes=[f"n{i}" for i in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture
def record_criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (ok, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
