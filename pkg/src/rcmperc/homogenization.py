"""Estimators around the homogenized matrix D(ρ) = κ(ρ) I.

* ``kappa_from_scaling``: (2ℓ)^(2-d) σ_ℓ / ρ over replicas and an ℓ grid.
* ``d_upper_bound``: the variational formula evaluated at f = 0, i.e.
  a·D a <= 1/2 E^0[ sum_{x ~ 0} (a·x)^2 ; 0 in the infinite cluster ].
* ``point_percolation_prob``: chance that an inserted point of mark m reaches
  the boundary shell of a window.
* ``isotropy_check``: κ estimated along each coordinate axis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import breadth_first_order
from statsmodels.stats.proportion import proportion_confint

from .errors import ConvergenceFailure, InsufficientData, InvalidArgument
from .graph import build_graph, components, crossing_cluster_ids
from .models import ConnectionModel
from .pointprocess import Dirac, MarkDistribution, MarkedPoint, Region, palm_insert, sample_ppp
from .resistor import KappaEstimate, build_rn, kappa_estimate, solve_potential
from .rng import derive_seed


def wilson_interval(k, n, level=0.95):
    if n == 0:
        return (0.0, 1.0)
    lo, hi = proportion_confint(k, n, alpha=1 - level, method="wilson")
    # the endpoints are exactly 0 / 1 at k = 0 / k = n; statsmodels leaves rounding noise
    lo = 0.0 if k == 0 else max(0.0, float(lo))
    hi = 1.0 if k == n else min(1.0, float(hi))
    return lo, hi


def _swap(d, axis):
    perm = list(range(d))
    perm[0], perm[axis] = perm[axis], perm[0]
    return perm


def strip_sigma(model, rho, ell, seed, d=2, marks=None, T=2.0, pad=None, restrict=True,
                conductance=None, axis=0, tol=1e-10):
    """σ_ℓ for one replica; the strip runs along coordinate ``axis``.

    Points are sampled in the rotated strip and their coordinates permuted so
    the strip axis comes first. A callable ``conductance`` sees the unrotated
    coordinates, so it can break isotropy on purpose.
    """
    marks = marks or Dirac(0.5)
    pad = 0.5 * ell if pad is None else pad
    perm = _swap(d, axis)
    region = Region.strip(ell, d, truncation=T).permuted(perm)
    raw = sample_ppp(region, rho, marks, seed)
    cfg = raw.permute_axes(perm)
    g = build_graph(cfg, model, seed)
    c = None
    if callable(conductance):
        e = g.edges
        c = np.asarray(conductance(raw.positions[e[:, 0]], raw.positions[e[:, 1]]), dtype=float)
    elif conductance is not None:
        c = conductance
    keep = crossing_cluster_ids(g, ell, pad) if restrict else None
    rn = build_rn(g, ell, c, cluster_filter=keep)
    try:
        res = solve_potential(rn, tol=tol)
    except ConvergenceFailure as err:
        err.seed = seed
        raise
    return res.sigma, rn, res


def kappa_from_scaling(model: ConnectionModel, rho: float, ell_list, replicas: int, seed: int,
                       d: int = 2, marks: MarkDistribution | None = None, T: float = 2.0,
                       pad=None, restrict=True, conductance=None, axis: int = 0,
                       sigma_override=None) -> KappaEstimate:
    """``sigma_override(ell, replica_seed)`` replaces the simulation (synthetic checks)."""
    ell_list = [float(x) for x in ell_list]
    if not ell_list or any(b <= a for a, b in zip(ell_list, ell_list[1:])):
        raise InvalidArgument("ell_list must be nonempty and increasing")
    if replicas < 2:
        raise InvalidArgument("need replicas >= 2")
    if not rho > 0:
        raise InvalidArgument("rho must be positive")
    samples = []
    for ell in ell_list:
        for r in range(replicas):
            s = derive_seed(seed, "kappa", axis, ell, r)
            if sigma_override is not None:
                sigma = float(sigma_override(ell, s))
            else:
                sigma, _, _ = strip_sigma(model, rho, ell, s, d, marks, T, pad, restrict, conductance, axis)
            samples.append((ell, sigma))
    return kappa_estimate(samples, rho, d)


def kappa_rows(est: KappaEstimate, direction=0):
    """CSV rows (direction, ell, mean, stderr, n)."""
    return [(direction, ell, mean, se, n) for ell, mean, se, n in est.per_ell]


# -- Palm samples and the f = 0 bound ---------------------------------------


@dataclass
class PalmReplica:
    config: object
    origin_in_proxy_cluster: bool
    neighbor_displacements: np.ndarray


@dataclass
class PalmBatch:
    replicas: list = field(default_factory=list)

    def permuted(self, perm):
        perm = list(perm)
        return PalmBatch([PalmReplica(r.config.permute_axes(perm), r.origin_in_proxy_cluster,
                                      r.neighbor_displacements[:, perm]) for r in self.replicas])

    @property
    def n_qualifying(self):
        return sum(r.origin_in_proxy_cluster for r in self.replicas)


def palm_batch(model, rho, nu: MarkDistribution, window_ell, replicas, seed, d=2, pad=None, T=2.0):
    """Palm configurations in the strip around the origin; the origin qualifies
    when it belongs to a cluster crossing the padded window."""
    if replicas < 1:
        raise InvalidArgument("replicas must be >= 1")
    pad = 0.5 * window_ell if pad is None else pad
    if T * window_ell <= window_ell + pad:
        raise InvalidArgument("truncation too short for the padded window")
    out = []
    for r in range(replicas):
        s = derive_seed(seed, "palm", r)
        region = Region.strip(window_ell, d, truncation=T)
        base = sample_ppp(region, rho, nu, s)
        m0 = float(nu.sample(1, derive_seed(s, "origin-mark"))[0])
        cfg = palm_insert(base, MarkedPoint(np.zeros(d), m0))
        g = build_graph(cfg, model, s)
        lab = components(g)
        crossing = crossing_cluster_ids(g, window_ell, pad, lab)
        nb = g.adjacency[0]
        out.append(PalmReplica(cfg, int(lab.label[0]) in crossing, g.positions[nb] - g.positions[0]))
    return PalmBatch(out)


def upper_bound_from_batch(batch: PalmBatch, a):
    a = np.asarray(a, dtype=float)
    vals = [0.5 * float(np.sum((r.neighbor_displacements @ a) ** 2))
            for r in batch.replicas if r.origin_in_proxy_cluster]
    if not vals:
        raise InsufficientData("no replica has the origin in the crossing cluster")
    vals = np.asarray(vals)
    se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else float("inf")
    return {"value": float(vals.mean()), "stderr": se, "n": len(vals)}


def d_upper_bound(a, model, rho, nu, window_ell, replicas, seed, d=None, pad=None):
    a = np.asarray(a, dtype=float)
    if replicas < 2:
        raise InvalidArgument("need replicas >= 2")
    d = len(a) if d is None else d
    return upper_bound_from_batch(palm_batch(model, rho, nu, window_ell, replicas, seed, d, pad), a)


# -- isotropy ---------------------------------------------------------------


def isotropy_check(model, rho, ell_list, replicas, seed, d=2, directions=None, **kw):
    if d < 2:
        raise InvalidArgument("need d >= 2")
    directions = list(range(d)) if directions is None else list(directions)
    per = []
    for k in directions:
        # independent stream per direction: the axis is part of every replica key
        est = kappa_from_scaling(model, rho, ell_list, replicas, seed, d=d, axis=k, **kw)
        per.append({"direction": k, "kappa_hat": est.kappa_hat, "stderr": est.stderr, "estimate": est})
    gap = 0.0
    for p, q in itertools.combinations(per, 2):
        se = np.hypot(p["stderr"], q["stderr"])
        diff = abs(p["kappa_hat"] - q["kappa_hat"])
        gap = max(gap, diff / se if se > 0 else (0.0 if diff == 0 else np.inf))
    return {"per_direction": per, "max_pairwise_gap_in_stderr": float(gap)}


def tilted_conductance(strength=3.0, axis=0):
    """Conductance 1 + strength * (share of the edge along ``axis``)^2."""
    def c(pa, pb):
        dx = pb - pa
        r2 = np.sum(dx ** 2, axis=1)
        share = np.divide(dx[:, axis] ** 2, r2, out=np.zeros_like(r2), where=r2 > 0)
        return 1.0 + strength * share
    return c


# -- per-mark percolation ---------------------------------------------------


def _reach_counts(model, rho, m, windows, replicas, seed, d, marks):
    windows = sorted(float(w) for w in windows)
    if windows[0] <= 1:
        raise InvalidArgument("window_ell must exceed 1")
    wmax = windows[-1]
    hits = np.zeros(len(windows), dtype=int)
    marks = marks or Dirac(0.5)
    for r in range(replicas):
        s = derive_seed(seed, "percprob", r)
        region = Region.cube(wmax, d)
        base = sample_ppp(region, rho, marks, s)
        cfg = palm_insert(base, MarkedPoint(np.zeros(d), float(m)))
        g = build_graph(cfg, model, s)
        dist = np.max(np.abs(g.positions), axis=1)
        for i, w in enumerate(windows):
            inside = np.flatnonzero(dist <= w)
            sub = g.csr[inside][:, inside]
            order = breadth_first_order(sub, 0, directed=False, return_predecessors=False)
            if np.any(dist[inside[order]] >= w - 1):
                hits[i] += 1
    return windows, hits


def point_percolation_prob(m, model, rho, window_ell, replicas, seed, d=2, marks=None):
    """Origin with mark m joined, inside Λ_w, to the shell {w - 1 <= |x|_inf <= w}."""
    if replicas < 1:
        raise InvalidArgument("replicas must be >= 1")
    _, hits = _reach_counts(model, rho, m, [window_ell], replicas, seed, d, marks)
    k = int(hits[0])
    return {"p_hat": float(k / replicas), "wilson_interval": wilson_interval(k, replicas), "n": replicas}


def point_percolation_curve(m, model, rho, windows, replicas, seed, d=2, marks=None):
    """All windows evaluated on the same samples, so the curve is coupled."""
    if replicas < 1:
        raise InvalidArgument("replicas must be >= 1")
    ws, hits = _reach_counts(model, rho, m, windows, replicas, seed, d, marks)
    return [{"window_ell": w, "p_hat": float(k / replicas), "wilson_interval": wilson_interval(int(k), replicas)}
            for w, k in zip(ws, hits)]
