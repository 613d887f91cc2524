import itertools

import networkx as nx
import numpy as np
import pytest

from hetgraph import graphcore as gc
from hetgraph.curvature import curvature_gap
from hetgraph.generators import (
    complete_graph, cycle_graph, disjoint_union, erdos_renyi, path_graph, random_connected, star_graph,
)
from hetgraph.graphio import make_graph


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return h


def test_edge_density_examples():
    assert gc.edge_density(complete_graph(3)) == 1.0
    assert gc.edge_density(path_graph(3)) == pytest.approx(2 / 3)
    assert gc.edge_density(make_graph(5, [])) == 0.0
    with pytest.raises(ValueError):
        gc.edge_density(make_graph(1, []))


def test_average_degree_examples():
    assert gc.average_degree(cycle_graph(4)) == 2.0
    assert gc.average_degree(complete_graph(4)) == 3.0
    assert gc.average_degree(star_graph(4)) == pytest.approx(8 / 5)


def test_assortativity_examples():
    a = gc.degree_assortativity(cycle_graph(4))
    assert a == gc.Assortativity(0.0, True)
    a = gc.degree_assortativity(path_graph(4))
    assert a.value == pytest.approx(-0.5, abs=1e-12) and not a.degenerate
    two_k2 = make_graph(4, [(0, 1), (2, 3)])
    assert gc.degree_assortativity(two_k2) == gc.Assortativity(0.0, True)
    with pytest.raises(ValueError):
        gc.degree_assortativity(make_graph(2, []))


def test_diameter_examples():
    assert gc.diameter(path_graph(4)) == 3
    assert gc.diameter(complete_graph(5)) == 1
    assert gc.diameter(disjoint_union(complete_graph(3), path_graph(4))) == 3
    assert gc.diameter(make_graph(1, [])) == 0


def brute_transitivity(g):
    adj = g.adjacency()
    closed = triads = 0
    for c in range(g.n):
        for a, b in itertools.combinations([v for v in range(g.n) if adj[c, v]], 2):
            triads += 1
            closed += int(adj[a, b])
    return closed / triads if triads else 0.0


def test_clustering_examples():
    assert gc.avg_clustering(complete_graph(3)) == 1.0
    assert gc.transitivity(complete_graph(3)) == 1.0
    assert gc.avg_clustering(star_graph(3)) == 0.0
    assert gc.transitivity(star_graph(3)) == 0.0
    k4e = make_graph(4, [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    # 2 triangles over 8 connected triples (degrees 2,2,3,3 -> 1+1+3+3)
    assert brute_transitivity(k4e) == 0.75
    assert gc.transitivity(k4e) == pytest.approx(0.75)
    assert gc.transitivity(make_graph(4, [])) == 0.0


def test_clique_examples():
    assert gc.largest_clique_ratio(complete_graph(4)) == 1.0
    assert gc.largest_clique_ratio(path_graph(3)) == pytest.approx(2 / 3)
    assert gc.largest_clique_ratio(cycle_graph(5)) == pytest.approx(2 / 5)
    assert gc.max_clique_size(make_graph(3, [])) == 1


def test_clique_budget():
    with pytest.raises(gc.TimeBudgetExceeded):
        gc.max_clique_size(erdos_renyi(np.random.default_rng(0), 60, 0.5), time_budget=0.0)


@pytest.mark.parametrize("seed", range(25))
def test_against_networkx(seed):
    rng = np.random.default_rng(seed)
    g = erdos_renyi(rng, int(rng.integers(3, 16)), float(rng.uniform(0.15, 0.8)))
    h = to_nx(g)
    assert gc.avg_clustering(g) == pytest.approx(nx.average_clustering(h), abs=1e-12)
    assert gc.transitivity(g) == pytest.approx(nx.transitivity(h), abs=1e-12)
    assert gc.transitivity(g) == pytest.approx(brute_transitivity(g), abs=1e-12)
    largest = h.subgraph(max(nx.connected_components(h), key=len))
    assert gc.diameter(g) == nx.diameter(largest)
    assert gc.max_clique_size(g) == max(len(c) for c in nx.find_cliques(h))
    if g.m:
        a = gc.degree_assortativity(g)
        if not a.degenerate:
            assert a.value == pytest.approx(nx.degree_assortativity_coefficient(h), abs=1e-9)


def test_topo_features_examples():
    f = gc.topo_features(complete_graph(3))
    assert f.as_row()[:7] == pytest.approx([1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 3.0])
    assert f.curvature_gap == curvature_gap(complete_graph(3)).value == 0.0
    assert f.largest_clique_ratio == 1.0
    p = gc.topo_features(path_graph(3))
    assert p.edge_density == pytest.approx(2 / 3)
    assert p.algebraic_connectivity == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        gc.topo_features(make_graph(2, []))
    assert gc.TopoFeatures.names()[0] == "edge_density" and len(gc.TopoFeatures.names()) == 9


@pytest.mark.parametrize("seed", range(10))
def test_features_relabel_invariant(seed):
    rng = np.random.default_rng(100 + seed)
    g = random_connected(rng, int(rng.integers(4, 12)), 0.3)
    perm = rng.permutation(g.n)
    a = gc.topo_features(g).as_row()
    b = gc.topo_features(g.permuted(perm)).as_row()
    np.testing.assert_allclose(a, b, atol=1e-9)


@pytest.mark.parametrize("n", range(2, 9))
def test_complete_graph_ratios(n):
    g = complete_graph(n)
    assert gc.edge_density(g) == 1.0
    assert gc.largest_clique_ratio(g) == 1.0


def test_regular_graph_clustering_coincides():
    # circulant graphs C_n(1, 2): every node has the same local coefficient
    for n in range(5, 12):
        g = make_graph(n, [(i, (i + s) % n) for i in range(n) for s in (1, 2)])
        assert gc.avg_clustering(g) == pytest.approx(gc.transitivity(g), abs=1e-12)
        assert gc.transitivity(g) == pytest.approx(brute_transitivity(g), abs=1e-12)


def test_edge_addition_monotone():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = erdos_renyi(rng, 8, 0.3)
        missing = [(u, v) for u in range(8) for v in range(u + 1, 8) if (u, v) not in g.edges]
        if not missing:
            continue
        h = g.with_edges(list(g.edges) + [missing[int(rng.integers(len(missing)))]])
        assert gc.average_degree(h) >= gc.average_degree(g)
        assert gc.edge_density(h) >= gc.edge_density(g)
