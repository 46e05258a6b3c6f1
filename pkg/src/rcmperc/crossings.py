"""Left-right crossings of the box Λ_ℓ = [-ℓ, ℓ]^d and their maximal disjoint count."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .errors import InvalidArgument, UnsupportedOperation
from .graph import GeomGraph

EXACT = "exact_maxflow"
GREEDY = "greedy_lower_bound"


@dataclass(frozen=True)
class CrossingQuery:
    ell: float
    cluster_filter: frozenset | None = None
    length_cap: int | None = None

    def __post_init__(self):
        if not self.ell > 0:
            raise InvalidArgument("ell must be positive")
        if self.cluster_filter is not None:
            object.__setattr__(self, "cluster_filter", frozenset(self.cluster_filter))
        if self.length_cap is not None and self.length_cap < 2:
            raise InvalidArgument("length_cap must be >= 2")


@dataclass
class CrossingResult:
    count: int
    witnesses: list = field(default_factory=list)
    method: str = EXACT


def roles(positions: np.ndarray, ell: float):
    """Boolean masks (left, right, interior) for points of the strip R x [-ℓ, ℓ]^(d-1).

    The box is closed: |x1| = ℓ counts as interior.
    """
    positions = np.asarray(positions, dtype=float)
    if len(positions) == 0:
        z = np.zeros(0, dtype=bool)
        return z, z, z
    in_strip = np.all(np.abs(positions[:, 1:]) <= ell, axis=1)
    x1 = positions[:, 0]
    left = in_strip & (x1 < -ell)
    right = in_strip & (x1 > ell)
    interior = in_strip & (np.abs(x1) <= ell)
    return left, right, interior


def is_lr_crossing(graph: GeomGraph, path, ell: float) -> bool:
    path = [int(v) for v in path]
    if len(path) < 3 or len(set(path)) != len(path):
        return False
    if min(path) < 0 or max(path) >= graph.n:
        return False
    left, right, interior = roles(graph.positions, ell)
    if not (left[path[0]] and right[path[-1]] and all(interior[v] for v in path[1:-1])):
        return False
    adj = graph.adjacency
    return all(np.any(adj[a] == b) for a, b in zip(path, path[1:]))


def unit_vertex_flow(n, arcs, sources, sinks):
    """Maximum number of vertex-disjoint directed paths from ``sources`` to ``sinks``.

    ``arcs`` is an (m, 2) array of directed vertex pairs. Every vertex has unit
    capacity (split into in/out nodes). Returns (count, paths) where each path is
    a list of vertex indices.
    """
    sources = np.asarray(sources, dtype=np.int64)
    sinks = np.asarray(sinks, dtype=np.int64)
    arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
    if len(sources) == 0 or len(sinks) == 0:
        return 0, []
    s_node, t_node = 2 * n, 2 * n + 1
    v = np.arange(n)
    rows = np.concatenate([2 * v, 2 * arcs[:, 0] + 1, np.full(len(sources), s_node), 2 * sinks + 1])
    cols = np.concatenate([2 * v + 1, 2 * arcs[:, 1], 2 * sources, np.full(len(sinks), t_node)])
    cap = csr_matrix((np.ones(len(rows), dtype=np.int32), (rows, cols)), shape=(2 * n + 2, 2 * n + 2))
    cap.data = np.minimum(cap.data, 1).astype(np.int32)  # duplicate arcs sum on assembly
    res = maximum_flow(cap, s_node, t_node, method="dinic")
    count = int(res.flow_value)
    if count == 0:
        return 0, []
    flow = res.flow.tocsr()
    flow.eliminate_zeros()

    def next_node(u):
        lo, hi = flow.indptr[u], flow.indptr[u + 1]
        pos = np.flatnonzero(flow.data[lo:hi] > 0)
        return int(flow.indices[lo + pos[0]])

    paths = []
    lo, hi = flow.indptr[s_node], flow.indptr[s_node + 1]
    for k in range(lo, hi):
        if flow.data[k] <= 0:
            continue
        node = int(flow.indices[k])
        path = []
        while node != t_node:
            vtx = node // 2
            path.append(vtx)
            node = next_node(2 * vtx + 1)
        paths.append(path)
    return count, paths


def _crossing_arcs(graph: GeomGraph, left, right, interior):
    e = graph.edges
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    both = np.vstack([e, e[:, ::-1]])
    a, b = both[:, 0], both[:, 1]
    ok = (left[a] & interior[b]) | (interior[a] & interior[b]) | (interior[a] & right[b])
    return both[ok]


def _eligible(graph: GeomGraph, query: CrossingQuery):
    d = graph.region.d
    ell = query.ell
    if not graph.region.contains_box([-ell] * d, [ell] * d):
        raise InvalidArgument("region does not contain the box Λ_ℓ")
    left, right, interior = roles(graph.positions, ell)
    if query.cluster_filter is not None and graph.n:
        from .graph import components
        lab = components(graph).label
        keep = np.isin(lab, np.fromiter(query.cluster_filter, dtype=np.int64, count=len(query.cluster_filter)))
        left, right, interior = left & keep, right & keep, interior & keep
    return left, right, interior


def _greedy_pack(n, arcs, left, right, blocked, cap):
    """Repeatedly take a shortest available crossing of length <= cap."""
    out_adj = [[] for _ in range(n)]
    for a, b in arcs:
        out_adj[a].append(b)
    blocked = set(blocked)
    found = []
    while True:
        parent = {}
        depth = {}
        queue = deque()
        for s in np.flatnonzero(left):
            s = int(s)
            if s not in blocked:
                parent[s] = -1
                depth[s] = 0
                queue.append(s)
        hit = None
        while queue and hit is None:
            u = queue.popleft()
            if depth[u] >= cap:
                continue
            for w in out_adj[u]:
                if w in blocked or w in parent:
                    continue
                parent[w] = u
                depth[w] = depth[u] + 1
                if right[w]:
                    hit = w
                    break
                queue.append(w)
        if hit is None:
            return found
        path = [hit]
        while parent[path[-1]] != -1:
            path.append(parent[path[-1]])
        path.reverse()
        found.append(path)
        blocked.update(path)


def max_disjoint_crossings(graph: GeomGraph, query: CrossingQuery) -> CrossingResult:
    if graph.n == 0:
        return CrossingResult(0, [], EXACT if query.length_cap is None else GREEDY)
    left, right, interior = _eligible(graph, query)
    arcs = _crossing_arcs(graph, left, right, interior)
    count, paths = unit_vertex_flow(graph.n, arcs, np.flatnonzero(left), np.flatnonzero(right))
    if query.length_cap is None:
        return CrossingResult(count, paths, EXACT)

    cap = int(query.length_cap)
    if math.isfinite(graph.range_bound) and cap < math.ceil(2 * query.ell / graph.range_bound):
        raise InvalidArgument("length_cap is below the minimal possible crossing length")
    # two greedy packings: from scratch, and seeded with the short exact witnesses
    fresh = _greedy_pack(graph.n, arcs, left, right, (), cap)
    seeded = [p for p in paths if len(p) - 1 <= cap]
    used = {v for p in seeded for v in p}
    seeded = seeded + _greedy_pack(graph.n, arcs, left, right, used, cap)
    best = max(fresh, seeded, key=len)
    return CrossingResult(len(best), best, GREEDY)


BRUTE_FORCE_LIMIT = 22


def lr_crossing_vertex_sets(graph: GeomGraph, ell: float):
    """Inclusion-minimal vertex sets (bitmasks) of LR crossings, by exhaustive DFS."""
    left, right, interior = roles(graph.positions, ell)
    adj = [a.tolist() for a in graph.adjacency]
    found = set()
    seen = set()
    for s in np.flatnonzero(left):
        s = int(s)
        stack = [(s, 1 << s, True)]
        while stack:
            v, mask, at_start = stack.pop()
            if (v, mask) in seen:
                continue
            seen.add((v, mask))
            for w in adj[v]:
                if mask >> w & 1:
                    continue
                if interior[w]:
                    stack.append((w, mask | 1 << w, False))
                elif right[w] and not at_start:
                    found.add(mask | 1 << w)
    minimal = []
    for m in sorted(found, key=lambda x: bin(x).count("1")):
        if not any(k & m == k for k in minimal):
            minimal.append(m)
    return minimal


def brute_force_crossings(graph: GeomGraph, ell: float) -> int:
    """Exhaustive maximum number of vertex-disjoint LR crossings (small graphs)."""
    if graph.n > BRUTE_FORCE_LIMIT:
        raise UnsupportedOperation(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices")
    sets = lr_crossing_vertex_sets(graph, ell)
    if not sets:
        return 0
    # each crossing has exactly one vertex in the left half-strip: group by it
    left, _, _ = roles(graph.positions, ell)
    left_mask = sum(1 << int(v) for v in np.flatnonzero(left))
    groups = {}
    for m in sets:
        start = m & left_mask
        groups.setdefault(start, []).append(m)
    keys = sorted(groups)
    memo = {}

    def best(i, used):
        if i == len(keys):
            return 0
        key = (i, used)
        if key in memo:
            return memo[key]
        value = best(i + 1, used)
        for m in groups[keys[i]]:
            if m & used == 0:
                value = max(value, 1 + best(i + 1, used | m))
        memo[key] = value
        return value

    return best(0, 0)
