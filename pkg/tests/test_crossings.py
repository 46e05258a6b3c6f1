import numpy as np
import pytest

from rcmperc.crossings import (BRUTE_FORCE_LIMIT, EXACT, GREEDY, CrossingQuery, brute_force_crossings,
                               is_lr_crossing, max_disjoint_crossings, roles, unit_vertex_flow)
from rcmperc.errors import InvalidArgument, UnsupportedOperation
from rcmperc.graph import build_graph, crossing_cluster_ids, graph_from_edges
from rcmperc.models import BooleanModel
from rcmperc.pointprocess import Dirac, Region, lattice_config, sample_ppp


def chain(xs, y=0.0, region=None):
    cfg = lattice_config([[x, y] for x in xs], region=region or Region.box([6, 3]))
    return graph_from_edges(cfg, [(i, i + 1) for i in range(len(xs) - 1)])


def test_roles_closed_box():
    pos = np.array([[-2.0, 0], [-2.0001, 0], [2.0, 2.0], [2.5, 0], [0, 2.1]])
    left, right, interior = roles(pos, 2.0)
    assert left.tolist() == [False, True, False, False, False]
    assert right.tolist() == [False, False, False, True, False]
    assert interior.tolist() == [True, False, True, False, False]


def test_single_chain():
    g = chain([-3, -1, 1, 3])
    res = max_disjoint_crossings(g, CrossingQuery(2))
    assert res.count == 1 and res.method == EXACT
    assert is_lr_crossing(g, res.witnesses[0], 2)


def test_no_interior_vertex_no_crossing():
    # a direct left-right edge is not a crossing: at least one box vertex needed
    cfg = lattice_config([[-3, 0], [3, 0]], region=Region.box([6, 3]))
    g = graph_from_edges(cfg, [(0, 1)])
    assert max_disjoint_crossings(g, CrossingQuery(2)).count == 0
    assert brute_force_crossings(g, 2) == 0


def test_shared_vertex_bottleneck():
    # two left and two right ends all through one box vertex
    cfg = lattice_config([[-3, 1], [-3, -1], [0, 0], [3, 1], [3, -1]], region=Region.box([6, 3]))
    g = graph_from_edges(cfg, [(0, 2), (1, 2), (2, 3), (2, 4)])
    assert max_disjoint_crossings(g, CrossingQuery(2)).count == 1


def test_parallel_chains():
    pts, edges = [], []
    for k, y in enumerate([-1.5, 0.0, 1.5]):
        base = len(pts)
        pts += [[x, y] for x in (-3, -1, 1, 3)]
        edges += [(base + i, base + i + 1) for i in range(3)]
    g = graph_from_edges(lattice_config(pts, region=Region.box([6, 3])), edges)
    res = max_disjoint_crossings(g, CrossingQuery(2))
    assert res.count == 3
    used = [v for p in res.witnesses for v in p]
    assert len(used) == len(set(used))


def test_unit_vertex_flow_directed():
    arcs = np.array([[0, 1], [1, 2], [0, 3], [3, 2]])
    assert unit_vertex_flow(4, arcs, [0], [2])[0] == 1   # source vertex has unit capacity
    assert unit_vertex_flow(4, arcs, [], [2]) == (0, [])


def test_region_must_contain_box():
    g = chain([-3, -1, 1, 3], region=Region.box([6, 1]))
    with pytest.raises(InvalidArgument):
        max_disjoint_crossings(g, CrossingQuery(2))


def test_cluster_filter():
    g = chain([-3, -1, 1, 3])
    assert max_disjoint_crossings(g, CrossingQuery(2, cluster_filter={0})).count == 1
    assert max_disjoint_crossings(g, CrossingQuery(2, cluster_filter=set())).count == 0


def test_length_cap_greedy():
    g = build_graph(sample_ppp(Region.strip(5, 2), 2.2, Dirac(0.5), 3), BooleanModel(), 3)
    exact = max_disjoint_crossings(g, CrossingQuery(5))
    capped = max_disjoint_crossings(g, CrossingQuery(5, length_cap=200))
    assert capped.method == GREEDY
    assert capped.count <= exact.count
    for p in capped.witnesses:
        assert is_lr_crossing(g, p, 5) and len(p) - 1 <= 200
    with pytest.raises(InvalidArgument):
        max_disjoint_crossings(g, CrossingQuery(5, length_cap=3))


def test_brute_force_limits():
    cfg = sample_ppp(Region.strip(3, 2), 3.0, Dirac(0.5), 1)
    assert len(cfg) > BRUTE_FORCE_LIMIT
    with pytest.raises(UnsupportedOperation):
        brute_force_crossings(build_graph(cfg, BooleanModel(), 0), 3)


def test_exact_matches_brute_force_small():
    hits = 0
    for seed in range(150):
        cfg = sample_ppp(Region.strip(1.5, 2, truncation=1.6), 1.0, Dirac(0.8), seed)
        if len(cfg) > 18:
            continue
        g = build_graph(cfg, BooleanModel(), seed)
        assert max_disjoint_crossings(g, CrossingQuery(1.5)).count == brute_force_crossings(g, 1.5)
        hits += 1
    assert hits > 50


def test_monotone_in_edges():
    g = build_graph(sample_ppp(Region.strip(4, 2), 2.0, Dirac(0.5), 8), BooleanModel(), 8)
    n = max_disjoint_crossings(g, CrossingQuery(4)).count
    fewer = g.with_edges(g.edges[::2])
    assert max_disjoint_crossings(fewer, CrossingQuery(4)).count <= n


def test_witnesses_inside_proxy_cluster():
    g = build_graph(sample_ppp(Region.strip(6, 2), 2.2, Dirac(0.5), 2), BooleanModel(), 2)
    keep = crossing_cluster_ids(g, 6, 3)
    res = max_disjoint_crossings(g, CrossingQuery(6, cluster_filter=keep))
    from rcmperc.graph import components
    lab = components(g).label
    assert all(lab[p[0]] in keep for p in res.witnesses)
