"""Adaptive exploration of a site/link field on the domain Λ'_L ⊂ Z^2.

Rows s = 0..M-1 start at x_1^s = (0, s). Each row grows a reached set E^s and a
blocked set F^s, always probing the largest unexplored boundary site for the
order ≺ induced by the insertion order of E^s. The number of rows whose
reached set touches the right boundary equals the maximal number of
vertex-disjoint left-right paths in the field that survives the exploration.

Site occupations and links are supplied by a driver, queried at most once each.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .crossings import unit_vertex_flow
from .errors import InvalidArgument, ProtocolViolation
from .rng import keyed_uniform_scalar

UNIT = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _add(p, q):
    return (p[0] + q[0], p[1] + q[1])


def _clockwise(d):
    return (d[1], -d[0])


def neighbours(p):
    return [(p[0] + dx, p[1] + dy) for dx, dy in UNIT]


@dataclass(frozen=True)
class GridDomain:
    """([0, M-1]^2 ∪ [M, M+L] x [-L, M+L]) ∩ Z^2."""
    M: int
    L: int

    def __post_init__(self):
        if int(self.M) < 1 or int(self.L) < 1:
            raise InvalidArgument("M and L must be positive integers")

    def contains(self, p):
        x, y = p
        M, L = self.M, self.L
        return (0 <= x <= M - 1 and 0 <= y <= M - 1) or (M <= x <= M + L and -L <= y <= M + L)

    @cached_property
    def sites(self):
        M, L = self.M, self.L
        sq = [(x, y) for x in range(M) for y in range(M)]
        wide = [(x, y) for x in range(M, M + L + 1) for y in range(-L, M + L + 1)]
        return sq + wide

    @cached_property
    def left_boundary(self):
        return [(0, s) for s in range(self.M)]

    @cached_property
    def right_boundary(self):
        M, L = self.M, self.L
        side = {(M + L, y) for y in range(-L, M + L + 1)}
        caps = {(x, y) for x in range(M, M + L + 1) for y in (-L, M + L)}
        return frozenset(side | caps)

    def to_spec(self):
        return {"M": self.M, "L": self.L}


# ---------------------------------------------------------------------------
# the order ≺ on the outer boundary of an ordered string of sites


def boundary_order(E):
    """The outer boundary ΔE of the string ``E`` listed in increasing ≺ order.

    Each x_k orders its four neighbours clockwise starting from its anchor
    x_{a(k)}, the latest earlier string element adjacent to it (x_0 = x_1 - e_1).
    Boundary sites are grouped by the latest x_k they touch; groups of later
    x_k are larger.
    """
    E = [tuple(int(c) for c in p) for p in E]
    if not E:
        raise InvalidArgument("E must be nonempty")
    x0 = (E[0][0] - 1, E[0][1])
    string = [x0] + E
    latest = {x0: 0}
    anchor = [0] * len(string)
    for k in range(1, len(string)):
        xk = string[k]
        a = max((latest.get(nb, -1) for nb in neighbours(xk)), default=-1)
        if k >= 2 and (xk in E[:k - 1] or a < 1):
            raise InvalidArgument(f"string element {k} = {xk} is not on the boundary of its predecessors")
        anchor[k] = a
        latest[xk] = k
    members = set(E)
    placed = set()
    blocks = []
    for k in range(len(string) - 1, 0, -1):
        xk = string[k]
        d = (string[anchor[k]][0] - xk[0], string[anchor[k]][1] - xk[1])
        block = []
        for _ in range(4):
            y = _add(xk, d)
            if y not in members and y not in placed:
                block.append(y)
                placed.add(y)
            d = _clockwise(d)
        blocks.append(block)
    return [y for block in reversed(blocks) for y in block]


def anchors(E):
    """a(k) for k = 1..n (index 0 is the virtual x_0)."""
    E = [tuple(p) for p in E]
    string = [(E[0][0] - 1, E[0][1])] + E
    latest = {string[0]: 0}
    out = []
    for k in range(1, len(string)):
        out.append(max(latest.get(nb, -1) for nb in neighbours(string[k])))
        latest[string[k]] = k
    return out


# ---------------------------------------------------------------------------
# drivers
#
# A driver answers ``occupied(s, history)`` and ``linked(x, y, history)``;
# ``history`` is the tuple of (kind, coords, outcome) records revealed so far.


class BernoulliDriver:
    """I.i.d. occupations and links as a pure function of the seed.

    The engine probes every site at most once, always through one link ending
    at it, so one variable per probed site (``link_key="site"``, the default)
    has the same law as one per pair. Keying by site also couples drivers
    monotonically: with equal seeds and larger probabilities N_L never drops.
    Keying by the unordered pair (``"pair"``) gives a field in which it can.
    """

    def __init__(self, p_site, p_link, seed, link_key="site"):
        if not (0 <= p_site <= 1 and 0 <= p_link <= 1):
            raise InvalidArgument("probabilities must lie in [0, 1]")
        if link_key not in ("site", "pair"):
            raise InvalidArgument("link_key must be 'site' or 'pair'")
        self.p_site = p_site
        self.p_link = p_link
        self.seed = seed
        self.link_key = link_key

    def site_uniform(self, s):
        return keyed_uniform_scalar(self.seed, "site", s)

    def link_uniform(self, x, y):
        if self.link_key == "site":
            return keyed_uniform_scalar(self.seed, "link-site", _pack(x))
        a, b = sorted([tuple(x), tuple(y)])
        return keyed_uniform_scalar(self.seed, "link", _pack(a), _pack(b))

    def occupied(self, s, history=()):
        return self.site_uniform(s) < self.p_site

    def linked(self, x, y, history=()):
        """``x`` is the newly probed site, ``y`` the reached site it hangs from."""
        return self.link_uniform(x, y) < self.p_link


def _pack(p):
    return ((int(p[0]) + 32768) << 16) | (int(p[1]) + 32768)


def bernoulli_driver(p_site, p_link, seed, link_key="site"):
    return BernoulliDriver(p_site, p_link, seed, link_key)


class TableDriver:
    """Answers from explicit tables; a missing entry means the driver is exhausted."""

    def __init__(self, sites, links, default_link=None):
        self.sites = dict(sites)
        self.links = {frozenset(map(tuple, k)): v for k, v in dict(links).items()}
        self.default_link = default_link

    def occupied(self, s, history=()):
        if s not in self.sites:
            raise ProtocolViolation(f"no occupation value for row {s}")
        return self.sites[s]

    def linked(self, x, y, history=()):
        key = frozenset([tuple(x), tuple(y)])
        if key in self.links:
            return self.links[key]
        if self.default_link is None:
            raise ProtocolViolation(f"no link value for {tuple(x)}-{tuple(y)}")
        return self.default_link


class RecordingDriver:
    """Wraps a driver, records every query and enforces read-once access."""

    def __init__(self, driver):
        self.driver = driver
        self.transcript = []
        self._asked = set()

    def _record(self, kind, coords, outcome):
        key = (kind, coords if kind == "site" else frozenset(coords))
        if key in self._asked:
            raise ProtocolViolation(f"{kind} {coords} queried twice")
        self._asked.add(key)
        self.transcript.append({"type": kind, "coords": coords, "outcome": bool(outcome)})

    def occupied(self, s, history=()):
        out = self.driver.occupied(s, history)
        self._record("site", (0, s), out)
        return out

    def linked(self, x, y, history=()):
        out = self.driver.linked(x, y, history)
        self._record("link", (tuple(x), tuple(y)), out)
        return out

    def to_jsonl(self):
        lines = []
        for rec in self.transcript:
            coords = rec["coords"]
            coords = list(coords) if rec["type"] == "site" else [list(c) for c in coords]
            lines.append(json.dumps({"type": rec["type"], "coords": coords, "outcome": rec["outcome"]}))
        return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# the exploration


@dataclass
class ExplorationState:
    domain: GridDomain
    E: list                  # per row: reached sites in insertion order
    F: list                  # per row: blocked sites in insertion order
    x: list                  # per row: x^s_1, x^s_2, ... (reached or blocked)
    J: list                  # per row: index at which growth stopped
    W: set = field(default_factory=set)
    history: list = field(default_factory=list)

    def reached_right(self, s):
        rb = self.domain.right_boundary
        return any(p in rb for p in self.E[s])


def _ask(fn, *args):
    try:
        out = fn(*args)
    except (StopIteration, IndexError, KeyError) as err:
        raise ProtocolViolation(f"driver exhausted: {err!r}") from None
    if out is None:
        raise ProtocolViolation("driver returned no value")
    return bool(out)


def explore(domain: GridDomain, driver) -> ExplorationState:
    M = domain.M
    rb = domain.right_boundary
    history = []
    starts = domain.left_boundary
    W = set(starts)
    E, F, X, J = [], [], [], [None] * M
    for s in range(M):
        occ = _ask(driver.occupied, s, tuple(history))
        history.append(("site", starts[s], occ))
        E.append([starts[s]] if occ else [])
        F.append([] if occ else [starts[s]])
        X.append([starts[s]])

    for s in range(M):
        if not E[s]:
            J[s] = 1
            continue
        reached = set(E[s])
        seq = X[s]
        while True:
            j = len(seq)
            if any(p in rb for p in E[s]):
                J[s] = j
                break
            order = boundary_order(E[s])
            nxt = next((y for y in reversed(order) if domain.contains(y) and y not in W), None)
            if nxt is None:
                J[s] = j
                break
            # latest element of the row sequence that is reached and adjacent
            k = max(r for r, p in enumerate(seq) if p in reached and abs(p[0] - nxt[0]) + abs(p[1] - nxt[1]) == 1)
            link = _ask(driver.linked, nxt, seq[k], tuple(history))
            history.append(("link", (nxt, seq[k]), link))
            W.add(nxt)
            seq.append(nxt)
            if link:
                E[s].append(nxt)
                reached.add(nxt)
            else:
                F[s].append(nxt)
    return ExplorationState(domain, E, F, X, J, W, history)


def crossings_from_exploration(state: ExplorationState, domain: GridDomain | None = None) -> int:
    domain = domain or state.domain
    rb = domain.right_boundary
    return sum(1 for row in state.E if any(p in rb for p in row))


def menger_oracle(transcript, domain: GridDomain) -> int:
    """Maximal number of vertex-disjoint left-right paths in the explored field.

    Vertices are the domain sites minus those the transcript blocked (rejected
    starts and sites whose probing link failed); unit-distance sites are joined
    unless the transcript recorded that link as absent.
    """
    transcript = transcript.transcript if isinstance(transcript, RecordingDriver) else transcript
    site_seen = {}
    blocked = set()
    absent = set()
    for rec in transcript:
        kind, coords, out = rec["type"], rec["coords"], rec["outcome"]
        if kind == "site":
            site_seen[tuple(coords)] = out
            if not out:
                blocked.add(tuple(coords))
        elif kind == "link":
            a, b = tuple(coords[0]), tuple(coords[1])
            if not out:
                blocked.add(a)
                absent.add(frozenset([a, b]))
        else:
            raise InvalidArgument(f"unknown record type {kind!r}")
    if set(site_seen) != set(domain.left_boundary):
        raise InvalidArgument("transcript lacks occupation records for some rows")

    verts = [p for p in domain.sites if p not in blocked]
    index = {p: i for i, p in enumerate(verts)}
    arcs = []
    for p, i in index.items():
        for q in ((p[0] + 1, p[1]), (p[0], p[1] + 1)):
            j = index.get(q)
            if j is not None and frozenset([p, q]) not in absent:
                arcs.append((i, j))
                arcs.append((j, i))
    sources = [index[p] for p in domain.left_boundary if p in index]
    sinks = [index[p] for p in domain.right_boundary if p in index]
    count, _ = unit_vertex_flow(len(verts), np.array(arcs, dtype=np.int64).reshape(-1, 2), sources, sinks)
    return count


def run_recorded(domain: GridDomain, driver):
    """Explore through a recording wrapper; returns (state, recorder)."""
    rec = RecordingDriver(driver)
    return explore(domain, rec), rec


@dataclass
class DominationReport:
    min_conditional_freq: float
    violations: int
    n_bins: int
    bins: dict = field(default_factory=dict, repr=False)


def domination_probe(driver_factory, p: float, n_runs: int, domain: GridDomain,
                     min_samples: int = 30) -> DominationReport:
    """Empirical conditional success frequencies of every query, binned by the
    exact transcript revealed before it.

    ``driver_factory(run_index)`` returns a fresh driver for each run. A bin
    with at least ``min_samples`` visits counts as a violation when its
    frequency falls below p - 3 * sqrt(p (1 - p) / n).
    """
    if n_runs < 1:
        raise InvalidArgument("n_runs must be >= 1")
    bins = {}

    class _Probe:
        def __init__(self, inner):
            self.inner = inner

        def _tally(self, history, out):
            hits, total = bins.get(history, (0, 0))
            bins[history] = (hits + bool(out), total + 1)
            return out

        def occupied(self, s, history=()):
            return self._tally(history, self.inner.occupied(s, history))

        def linked(self, x, y, history=()):
            return self._tally(history, self.inner.linked(x, y, history))

    for r in range(n_runs):
        explore(domain, _Probe(driver_factory(r)))

    min_freq = float("nan")
    violations = 0
    for hits, total in bins.values():
        if total < min_samples:
            continue
        freq = hits / total
        min_freq = freq if not min_freq <= freq else min_freq
        if freq < p - 3 * np.sqrt(p * (1 - p) / total):
            violations += 1
    return DominationReport(min_freq, violations, len(bins), bins)
