"""Resistor network on the strip, Dirichlet potential solve, directional conductivity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .crossings import roles
from .errors import ConvergenceFailure, InvalidArgument
from .graph import GeomGraph, components


@dataclass(frozen=True, eq=False)
class ResistorNetwork:
    ell: float
    vertex: np.ndarray          # graph vertex index of each node
    positions: np.ndarray
    edges: np.ndarray           # (k, 2) local node indices
    conductance: np.ndarray
    left: np.ndarray
    right: np.ndarray
    interior: np.ndarray

    @property
    def n_nodes(self):
        return len(self.vertex)

    @property
    def n_edges(self):
        return len(self.edges)

    def without_edge(self, k):
        keep = np.ones(self.n_edges, dtype=bool)
        keep[k] = False
        return self.with_conductance(self.conductance, keep)

    def with_conductance(self, conductance, keep=None):
        conductance = np.asarray(conductance, dtype=float)
        edges = self.edges
        if keep is not None:
            edges, conductance = edges[keep], conductance[keep]
        return ResistorNetwork(self.ell, self.vertex, self.positions, edges, conductance,
                               self.left, self.right, self.interior)


def _edge_conductance(graph, edges, conductance):
    if conductance is None:
        return np.ones(len(edges))
    if callable(conductance):
        pos = graph.positions
        return np.asarray(conductance(pos[edges[:, 0]], pos[edges[:, 1]]), dtype=float)
    c = np.asarray(conductance, dtype=float)
    if c.ndim == 0:
        return np.full(len(edges), float(c))
    return c


def build_rn(graph: GeomGraph, ell: float, conductance=None, cluster_filter=None) -> ResistorNetwork:
    """Nodes: vertices in the strip. Filaments: edges inside the strip meeting Λ_ℓ.

    ``conductance`` is None (unit), a scalar, an array aligned with
    ``graph.edges``, or a function (pos_a, pos_b) -> array.
    """
    if not ell > 0:
        raise InvalidArgument("ell must be positive")
    left, right, interior = roles(graph.positions, ell)
    in_strip = left | right | interior
    if cluster_filter is not None and graph.n:
        lab = components(graph).label
        in_strip &= np.isin(lab, np.array(sorted(cluster_filter), dtype=np.int64))
    vertex = np.flatnonzero(in_strip)
    local = np.full(graph.n, -1, dtype=np.int64)
    local[vertex] = np.arange(len(vertex))

    c_all = _edge_conductance(graph, graph.edges, conductance)
    e = graph.edges
    if len(e):
        a, b = e[:, 0], e[:, 1]
        both_in = in_strip[a] & in_strip[b]
        # the strip is convex, so a segment inside it meets the box iff its
        # first-coordinate range meets [-ell, ell]
        x1a, x1b = graph.positions[a, 0], graph.positions[b, 0]
        meets = (np.minimum(x1a, x1b) <= ell) & (np.maximum(x1a, x1b) >= -ell)
        keep = both_in & meets
        edges = np.column_stack([local[a[keep]], local[b[keep]]]).astype(np.int64)
        cond = c_all[keep]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
        cond = np.zeros(0)
    if np.any(~np.isfinite(cond)) or np.any(cond < 0):
        raise InvalidArgument("conductances must be finite and nonnegative")
    return ResistorNetwork(float(ell), vertex, graph.positions[vertex], edges, cond,
                           left[vertex], right[vertex], interior[vertex])


@dataclass
class SolveResult:
    potential: np.ndarray
    sigma: float
    residual: float
    iterations: int
    floating: np.ndarray = field(default=None)


def _pcg(A, b, tol, max_iter, scale):
    """Jacobi-preconditioned conjugate gradient from x0 = 0."""
    diag = A.diagonal()
    inv = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    z = inv * r
    p = z.copy()
    rz = r @ z
    best, best_res = x.copy(), np.linalg.norm(r) / scale
    if best_res <= tol:
        return x, best_res, 0
    for it in range(1, max_iter + 1):
        ap = A @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / scale
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol:
            true_res = np.linalg.norm(b - A @ x) / scale
            if true_res <= tol:
                return x, true_res, it
            r = b - A @ x  # recursive residual drifted; restart from the true one
            z = inv * r
            p = z.copy()
            rz = r @ z
            continue
        z = inv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceFailure(f"PCG did not reach tol={tol} in {max_iter} iterations",
                             best=best, residual=best_res, iterations=max_iter)


def _floating(rn: ResistorNetwork):
    n = rn.n_nodes
    live = rn.edges[rn.conductance > 0]
    adj = coo_matrix((np.ones(len(live)), (live[:, 0], live[:, 1])), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    touching = np.zeros(lab.max() + 1 if n else 0, dtype=bool)
    touching[lab[rn.left | rn.right]] = True
    return rn.interior & ~touching[lab]


def solve_potential(rn: ResistorNetwork, tol: float = 1e-10, max_iter: int | None = None) -> SolveResult:
    """v = 1 on left nodes, 0 on right nodes, harmonic on interior nodes.

    Interior components touching neither boundary are set to 0.
    """
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    n = rn.n_nodes
    v = np.zeros(n)
    v[rn.left] = 1.0
    if n == 0:
        return SolveResult(v, 0.0, 0.0, 0, np.zeros(0, dtype=bool))
    floating = _floating(rn)
    unknown = np.flatnonzero(rn.interior & ~floating)
    if len(unknown) == 0:
        res = SolveResult(v, 0.0, 0.0, 0, floating)
        res.sigma = conductivity(rn, res)
        return res
    pos = np.full(n, -1, dtype=np.int64)
    pos[unknown] = np.arange(len(unknown))

    a, b = rn.edges[:, 0], rn.edges[:, 1]
    c = rn.conductance
    m = len(unknown)
    deg = np.zeros(n)
    np.add.at(deg, a, c)
    np.add.at(deg, b, c)
    both = (pos[a] >= 0) & (pos[b] >= 0)
    rows = np.concatenate([pos[a[both]], pos[b[both]], np.arange(m)])
    cols = np.concatenate([pos[b[both]], pos[a[both]], np.arange(m)])
    vals = np.concatenate([-c[both], -c[both], deg[unknown]])
    A = coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    rhs = np.zeros(m)
    # known neighbours contribute c * v_known to the right-hand side
    ua = (pos[a] >= 0) & (pos[b] < 0)
    ub = (pos[b] >= 0) & (pos[a] < 0)
    np.add.at(rhs, pos[a[ua]], c[ua] * v[b[ua]])
    np.add.at(rhs, pos[b[ub]], c[ub] * v[a[ub]])

    scale = np.linalg.norm(rhs)
    if scale == 0:
        res = SolveResult(v, 0.0, 0.0, 0, floating)
        return res
    if max_iter is None:
        max_iter = max(20 * m, 100)
    try:
        x, resid, iters = _pcg(A, rhs, tol, max_iter, scale)
    except ConvergenceFailure as err:
        full = v.copy()
        full[unknown] = err.best
        err.best = full
        raise
    v[unknown] = x
    out = SolveResult(v, 0.0, float(resid), iters, floating)
    out.sigma = conductivity(rn, out)
    return out


def conductivity(rn: ResistorNetwork, solve: SolveResult) -> float:
    """Current leaving the left nodes into the box."""
    v = solve.potential
    a, b = rn.edges[:, 0], rn.edges[:, 1]
    c = rn.conductance
    fwd = rn.left[a] & rn.interior[b]
    bwd = rn.left[b] & rn.interior[a]
    return float(np.sum(c[fwd] * (v[a[fwd]] - v[b[fwd]])) + np.sum(c[bwd] * (v[b[bwd]] - v[a[bwd]])))


def right_current(rn: ResistorNetwork, solve: SolveResult) -> float:
    """Current entering the right nodes from the box."""
    v = solve.potential
    a, b = rn.edges[:, 0], rn.edges[:, 1]
    c = rn.conductance
    fwd = rn.interior[a] & rn.right[b]
    bwd = rn.interior[b] & rn.right[a]
    return float(np.sum(c[fwd] * (v[a[fwd]] - v[b[fwd]])) + np.sum(c[bwd] * (v[b[bwd]] - v[a[bwd]])))


def kirchhoff_imbalance(rn: ResistorNetwork, solve: SolveResult) -> np.ndarray:
    """Net current out of every interior node (zero for a harmonic potential)."""
    v = solve.potential
    a, b = rn.edges[:, 0], rn.edges[:, 1]
    flow = rn.conductance * (v[a] - v[b])
    net = np.zeros(rn.n_nodes)
    np.add.at(net, a, flow)
    np.add.at(net, b, -flow)
    return net[rn.interior]


def lb_check(sigma: float, n_crossings: int, n_vertices_in_box: int) -> bool:
    """sigma >= N^2 / (2 #(V ∩ Λ_ℓ)), up to 1e-9."""
    if n_vertices_in_box < 1:
        raise InvalidArgument("n_vertices_in_box must be >= 1")
    return sigma >= n_crossings ** 2 / (2.0 * n_vertices_in_box) - 1e-9


@dataclass
class KappaEstimate:
    kappa_hat: float
    stderr: float
    per_ell: list
    rho: float


def kappa_estimate(sigmas, rho: float, d: int) -> KappaEstimate:
    """Per-ℓ mean of (2ℓ)^(2-d) σ_ℓ / ρ; the estimate is the largest-ℓ mean."""
    sigmas = list(sigmas)
    if not sigmas:
        raise InvalidArgument("no conductivity samples")
    if not rho > 0:
        raise InvalidArgument("rho must be positive")
    by_ell = {}
    for ell, sigma in sigmas:
        by_ell.setdefault(float(ell), []).append((2 * ell) ** (2 - d) * sigma / rho)
    per_ell = []
    for ell in sorted(by_ell):
        vals = np.asarray(by_ell[ell])
        if len(vals) < 2:
            raise InvalidArgument(f"need >= 2 replicas at ell={ell}")
        per_ell.append((ell, float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))), len(vals)))
    _, mean, se, _ = per_ell[-1]
    return KappaEstimate(mean, se, per_ell, float(rho))
