import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socap.graph import (IngestError, UnknownNodeError, build_graph, degree, edge_count, ego_alters_subgraph,
                         internal_subgraph, settlement_members, split_internal)

from conftest import clique, graph_of


def test_triangle_degrees():
    g = graph_of([("a", "b"), ("b", "c"), ("a", "c")])
    assert [degree(g, n) for n in "abc"] == [2, 2, 2]


def test_k5_edge_count():
    assert edge_count(graph_of(clique(range(5)))) == 10


def test_empty_settlement_has_no_members():
    g = graph_of([("a", "b")])
    assert settlement_members(g, "nowhere") == set()


def test_duplicates_and_self_loops_dropped():
    g = build_graph([("a", "b"), ("b", "a"), ("a", "a"), ("a", "b")], {"a": "S", "b": "S"})
    assert edge_count(g) == 1
    assert g.edges == {frozenset("ab")}


def test_unattributed_node_is_an_ingest_error():
    with pytest.raises(IngestError, match="'c'"):
        build_graph([("a", "c")], {"a": "S"})


def test_unknown_node_lookup():
    g = graph_of([("a", "b")])
    with pytest.raises(UnknownNodeError):
        degree(g, "zz")
    with pytest.raises(UnknownNodeError):
        ego_alters_subgraph(g, "zz")


def test_attributed_isolate_is_kept():
    g = build_graph([("a", "b")], {"a": "S", "b": "S", "c": "T"})
    assert g.n_nodes == 3 and degree(g, "c") == 0
    assert settlement_members(g, "T") == {"c"}


def test_graph_is_read_only():
    g = graph_of([("a", "b")])
    with pytest.raises(ValueError):
        g.indices[0] = 5


def test_ego_alters_excludes_ego():
    g = graph_of([("e", "a"), ("e", "b"), ("a", "b"), ("b", "c")])
    sub = ego_alters_subgraph(g, "e")
    assert sub.nodes == frozenset("ab") and sub.edges == {frozenset("ab")}


@st.composite
def attributed_graphs(draw):
    n = draw(st.integers(1, 25))
    towns = draw(st.lists(st.sampled_from("ABC"), min_size=n, max_size=n))
    m = draw(st.integers(0, 60))
    u = draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    v = draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    return build_graph(list(zip(u, v)), dict(enumerate(towns)))


@given(attributed_graphs())
@settings(max_examples=150, deadline=None)
def test_degree_sum_is_twice_edges(g):
    assert int(g.degrees().sum()) == 2 * edge_count(g)


@given(attributed_graphs())
@settings(max_examples=150, deadline=None)
def test_internal_plus_crossing_edges_reconstruct_graph(g):
    rebuilt = set()
    for s in g.settlement_ids:
        rebuilt |= internal_subgraph(g, s).edges
    crossing = {e for e in g.edges if len({g.settlement_of(x) for x in e}) == 2}
    assert rebuilt | crossing == g.edges
    assert not rebuilt & crossing


@given(attributed_graphs())
@settings(max_examples=100, deadline=None)
def test_split_internal_matches_internal_subgraph(g):
    for s, sub in split_internal(g):
        ref = internal_subgraph(g, s)
        assert sub.edges == ref.edges and sub.nodes == ref.nodes


@given(attributed_graphs(), st.data())
@settings(max_examples=150, deadline=None)
def test_alter_count_is_degree(g, data):
    ego = data.draw(st.sampled_from(sorted(g.nodes)))
    sub = ego_alters_subgraph(g, ego)
    assert sub.n_nodes == degree(g, ego)
    assert sub.nodes == set(g.neighbors(ego))


def test_neighbours_sorted_in_csr():
    g = graph_of([("a", "d"), ("a", "b"), ("a", "c")])
    i = g.index_of("a")
    row = g.indices[g.indptr[i]:g.indptr[i + 1]]
    assert np.all(np.diff(row) > 0)
