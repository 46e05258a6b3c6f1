"""Realized random connection graphs and their cluster structure."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .models import ConnectionModel
from .pointprocess import MarkedConfig
from .rng import keyed_uniform


def pair_uniforms(seed, ids_a, ids_b):
    """Per-pair edge variables keyed by the unordered pair of point identifiers."""
    ids_a = np.asarray(ids_a, dtype=np.int64)
    ids_b = np.asarray(ids_b, dtype=np.int64)
    return keyed_uniform(seed, "edge", np.minimum(ids_a, ids_b), np.maximum(ids_a, ids_b))


@dataclass(frozen=True, eq=False)
class GeomGraph:
    config: MarkedConfig
    model: ConnectionModel
    build_seed: int
    edges: np.ndarray
    range_bound: float

    @property
    def n(self):
        return len(self.config)

    @property
    def positions(self):
        return self.config.positions

    @property
    def region(self):
        return self.config.region

    @property
    def vertices(self):
        return self.config.points

    @cached_property
    def csr(self):
        n = self.n
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i), dtype=np.int8)
        m = coo_matrix((data, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        return m.tocsr()

    @cached_property
    def adjacency(self):
        csr = self.csr
        return [np.sort(csr.indices[csr.indptr[v]:csr.indptr[v + 1]]) for v in range(self.n)]

    def has_edge(self, a, b):
        return b in set(self.adjacency[a].tolist())

    def with_edges(self, edges):
        """Same vertices, different edge set (used by perturbation tests)."""
        edges = _canonical_edges(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
        return GeomGraph(self.config, self.model, self.build_seed, edges, self.range_bound)

    def to_json(self):
        verts = [{"x": [float(c) for c in x], "m": float(m), "id": int(i)}
                 for x, m, i in zip(self.positions, self.config.marks, self.config.ids)]
        return json.dumps({"vertices": verts, "edges": self.edges.tolist()})


def _canonical_edges(edges):
    if len(edges) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.sort(edges, axis=1)
    edges = np.unique(edges, axis=0)
    edges = edges[edges[:, 0] != edges[:, 1]]
    out = np.ascontiguousarray(edges, dtype=np.int64)
    out.setflags(write=False)
    return out


def candidate_pairs(positions, range_bound):
    """All pairs i < j with sup-norm distance <= range_bound."""
    if len(positions) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    tree = cKDTree(positions)
    pairs = tree.query_pairs(r=range_bound, p=np.inf, output_type="ndarray")
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def build_graph(config: MarkedConfig, model: ConnectionModel, seed: int) -> GeomGraph:
    rb = model.range_bound(config.marks)
    pairs = candidate_pairs(config.positions, rb)
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        dx = config.positions[j] - config.positions[i]
        ph = model.phi_arrays(dx, config.marks[i], config.marks[j])
        keep = ph > 0
        if not model.is_indicator:
            u = pair_uniforms(seed, config.ids[i], config.ids[j])
            keep &= u <= ph
        pairs = pairs[keep]
    return GeomGraph(config, model, seed, _canonical_edges(pairs), rb)


def graph_from_edges(config: MarkedConfig, edges, model: ConnectionModel | None = None) -> GeomGraph:
    """A graph with a hand-specified edge set, for tests and small examples."""
    from .models import KernelModel
    edges = _canonical_edges(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    if model is None:
        model = KernelModel("hard_range", {"p": 1.0, "r": 1.0}, 1.0)
    return GeomGraph(config, model, 0, edges, float("inf"))


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    label: np.ndarray
    sizes: dict

    def members(self, cid):
        return np.flatnonzero(self.label == cid)


def components(graph: GeomGraph) -> ClusterLabels:
    """Connected components, each labelled by its smallest vertex index."""
    n = graph.n
    if n == 0:
        return ClusterLabels(np.zeros(0, dtype=np.int64), {})
    ncomp, raw = connected_components(graph.csr, directed=False)
    smallest = np.full(ncomp, n, dtype=np.int64)
    np.minimum.at(smallest, raw, np.arange(n))
    label = smallest[raw]
    ids, counts = np.unique(label, return_counts=True)
    return ClusterLabels(label, dict(zip(ids.tolist(), counts.tolist())))


def relabel(labels: np.ndarray) -> np.ndarray:
    """Canonicalize an arbitrary labelling to smallest-member ids."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return labels.astype(np.int64)
    _, inv = np.unique(labels, return_inverse=True)
    smallest = np.full(inv.max() + 1, len(labels), dtype=np.int64)
    np.minimum.at(smallest, inv, np.arange(len(labels)))
    return smallest[inv]


def crossing_cluster_ids(graph: GeomGraph, ell: float, pad: float, labels: ClusterLabels | None = None) -> set:
    """Clusters with vertices on both sides beyond the padded window |x1| <= ell + pad.

    Finite-volume stand-in for the infinite cluster.
    """
    d = graph.region.d
    w = ell + pad
    if not graph.region.contains_box([-w] + [-ell] * (d - 1), [w] + [ell] * (d - 1)):
        raise InvalidArgument("region does not contain the padded window")
    if graph.n == 0:
        return set()
    if labels is None:
        labels = components(graph)
    x1 = graph.positions[:, 0]
    left = set(labels.label[x1 < -w].tolist())
    right = set(labels.label[x1 > w].tolist())
    return left & right


def local_uniqueness(graph: GeomGraph, r: float, s: float, x) -> bool:
    """At most one cluster of the graph restricted to Λ_s(x) joins Λ_r(x) to the
    inner shell {s - 1 <= |y - x|_inf <= s}."""
    x = np.asarray(x, dtype=float)
    if not r < s - 1:
        raise InvalidArgument("need r < s - 1")
    if not graph.region.contains_box(x - s, x + s):
        raise InvalidArgument("box of radius s around x leaves the region")
    dist = np.max(np.abs(graph.positions - x), axis=1) if graph.n else np.zeros(0)
    inside = np.flatnonzero(dist <= s)
    if len(inside) == 0:
        return True
    sub = graph.csr[inside][:, inside]
    _, lab = connected_components(sub, directed=False)
    dsub = dist[inside]
    inner = set(lab[dsub <= r].tolist())
    shell = set(lab[dsub >= s - 1].tolist())
    return len(inner & shell) <= 1
