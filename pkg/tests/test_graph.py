import json

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from rcmperc.errors import InvalidArgument
from rcmperc.graph import (build_graph, candidate_pairs, components, crossing_cluster_ids, graph_from_edges,
                           local_uniqueness, pair_uniforms, relabel)
from rcmperc.models import BooleanModel, KernelModel, MottModel
from rcmperc.pointprocess import Dirac, Region, UniformInterval, lattice_config, sample_ppp, thin


def naive_edges(cfg, model, seed):
    """O(n^2) reference: every pair evaluated directly."""
    out = []
    n = len(cfg)
    for i in range(n):
        for j in range(i + 1, n):
            dx = (cfg.positions[j] - cfg.positions[i])[None, :]
            p = model.phi_arrays(dx, cfg.marks[i:i + 1], cfg.marks[j:j + 1])[0]
            if p <= 0:
                continue
            if model.is_indicator or pair_uniforms(seed, [cfg.ids[i]], [cfg.ids[j]])[0] <= p:
                out.append((i, j))
    return sorted(out)


@pytest.mark.parametrize("model,marks", [
    (BooleanModel(), UniformInterval(0.1, 0.7)),
    (MottModel(1.5), UniformInterval(-0.5, 0.5)),
    (KernelModel("linear_decay", {"p": 0.9, "r": 1.3}, 1.3), Dirac(0.0)),
])
def test_build_matches_naive(model, marks):
    for seed in range(4):
        cfg = sample_ppp(Region.cube(4, 2), 2.0, marks, seed)
        g = build_graph(cfg, model, seed)
        assert [tuple(e) for e in g.edges.tolist()] == naive_edges(cfg, model, seed)


def test_candidate_pairs_complete():
    pos = np.random.default_rng(0).uniform(-3, 3, (80, 2))
    got = {tuple(p) for p in candidate_pairs(pos, 0.9).tolist()}
    d = squareform(pdist(pos, "chebyshev"))
    want = {(i, j) for i in range(80) for j in range(i + 1, 80) if d[i, j] <= 0.9}
    assert got == want


def test_build_deterministic_and_id_keyed():
    cfg = sample_ppp(Region.cube(5, 2), 1.5, Dirac(0.0), 3)
    K = KernelModel("hard_range", {"p": 0.5, "r": 1.0}, 1.0)
    g1, g2 = build_graph(cfg, K, 8), build_graph(cfg, K, 8)
    assert np.array_equal(g1.edges, g2.edges)
    # thinning keeps each surviving pair's decision
    th = thin(cfg, 0.7, 1)
    gt = build_graph(th, K, 8)
    full = {tuple(cfg.ids[e].tolist()) for e in g1.edges}
    kept = {tuple(th.ids[e].tolist()) for e in gt.edges}
    assert kept <= full
    alive = set(th.ids.tolist())
    assert kept == {e for e in full if e[0] in alive and e[1] in alive}


def test_edges_sorted_and_dump():
    cfg = sample_ppp(Region.cube(3, 2), 2.0, Dirac(0.5), 4)
    g = build_graph(cfg, BooleanModel(), 0)
    e = g.edges.tolist()
    assert e == sorted(e) and all(a < b for a, b in e)
    dump = json.loads(g.to_json())
    assert dump["edges"] == e and len(dump["vertices"]) == g.n


def test_components_small():
    cfg = lattice_config([[0, 0], [1, 0], [5, 5], [6, 5], [9, 9]])
    g = graph_from_edges(cfg, [(0, 1), (2, 3)])
    lab = components(g)
    assert lab.label.tolist() == [0, 0, 2, 2, 4]
    assert lab.sizes == {0: 2, 2: 2, 4: 1}
    assert relabel(np.array([7, 7, 3, 3, 9])).tolist() == [0, 0, 2, 2, 4]


def test_components_against_bfs(strip_graph):
    import networkx as nx
    g = strip_graph(1.6, 6, 5)
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges.tolist())
    lab = components(g).label
    for comp in nx.connected_components(G):
        comp = sorted(comp)
        assert set(lab[comp].tolist()) == {comp[0]}


def test_crossing_cluster_ids():
    pts = [[-5, 0], [-3, 0], [-1, 0], [1, 0], [3, 0], [5, 0], [0, 2]]
    cfg = lattice_config(pts, region=Region.box([6, 3]))
    g = graph_from_edges(cfg, [(i, i + 1) for i in range(5)])
    assert crossing_cluster_ids(g, 2, 2) == {0}
    g2 = graph_from_edges(cfg, [(0, 1), (1, 2), (3, 4), (4, 5)])
    assert crossing_cluster_ids(g2, 2, 2) == set()
    with pytest.raises(InvalidArgument):
        crossing_cluster_ids(g, 2, 10)


def test_local_uniqueness():
    # two separate arms from the centre box to the shell
    pts = [[0.5, 0], [2, 0], [3.5, 0], [-0.5, 0], [-2, 0], [-3.5, 0]]
    cfg = lattice_config(pts, region=Region.cube(5, 2))
    g = graph_from_edges(cfg, [(0, 1), (1, 2), (3, 4), (4, 5)])
    assert not local_uniqueness(g, 1, 4, [0, 0])
    assert local_uniqueness(g.with_edges(g.edges.tolist() + [[0, 3]]), 1, 4, [0, 0])
    with pytest.raises(InvalidArgument):
        local_uniqueness(g, 3, 4, [0, 0])
