import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcmperc.errors import InvalidArgument, ProtocolViolation
from rcmperc.exploration import (BernoulliDriver, GridDomain, RecordingDriver, TableDriver, anchors,
                                 boundary_order, crossings_from_exploration, domination_probe, explore,
                                 menger_oracle, neighbours, run_recorded)


def outer_boundary(E):
    s = set(map(tuple, E))
    return {y for x in s for y in neighbours(x) if y not in s}


class Always:
    def occupied(self, s, history=()):
        return True

    def linked(self, x, y, history=()):
        return True


class Never(Always):
    def occupied(self, s, history=()):
        return False


class FailAfterSuccess:
    """Answers True until its first success has been revealed, False afterwards."""

    def occupied(self, s, history=()):
        return True

    def linked(self, x, y, history=()):
        return not any(kind == "link" and out for kind, _, out in history)


def test_domain_sets():
    dom = GridDomain(2, 1)
    assert set(dom.left_boundary) == {(0, 0), (0, 1)}
    assert dom.contains((1, 1)) and dom.contains((3, -1)) and not dom.contains((1, 2))
    assert dom.right_boundary <= set(dom.sites)
    assert (3, 0) in dom.right_boundary and (2, -1) in dom.right_boundary and (2, 0) not in dom.right_boundary
    assert len(dom.sites) == 4 + 2 * 5
    for x, y in dom.sites:
        assert dom.contains((x, y))
    with pytest.raises(InvalidArgument):
        GridDomain(0, 1)


def test_boundary_order_singleton_golden():
    assert boundary_order([(0, 0)]) == [(-1, 0), (0, 1), (1, 0), (0, -1)]


def test_straight_path_anchors():
    path = [(k, 3) for k in range(6)]
    assert anchors(path) == list(range(6))


def test_boundary_order_path():
    order = boundary_order([(0, 0), (1, 0)])
    # block of x_1 first, then the block of x_2 anchored at x_1
    assert order == [(-1, 0), (0, 1), (0, -1), (1, 1), (2, 0), (1, -1)]


def test_boundary_order_precondition():
    with pytest.raises(InvalidArgument):
        boundary_order([(0, 0), (2, 0)])
    with pytest.raises(InvalidArgument):
        boundary_order([])


def grown_strings():
    """Random strings built by repeatedly appending a boundary site."""
    @st.composite
    def build(draw):
        E = [(0, 0)]
        for _ in range(draw(st.integers(0, 10))):
            cand = sorted(outer_boundary(E))
            E.append(cand[draw(st.integers(0, len(cand) - 1))])
        return E
    return build()


@settings(max_examples=150, deadline=None)
@given(grown_strings())
def test_boundary_order_is_permutation(E):
    order = boundary_order(E)
    assert len(order) == len(set(order))
    assert set(order) == outer_boundary(E)


def test_maximal_field():
    for M, L in [(1, 1), (3, 2), (2, 3)]:
        dom = GridDomain(M, L)
        state, rec = run_recorded(dom, Always())
        assert crossings_from_exploration(state) == M
        assert menger_oracle(rec, dom) == M


def test_empty_field():
    dom = GridDomain(3, 2)
    state = explore(dom, Never())
    assert state.E == [[], [], []]
    assert state.J == [1, 1, 1]
    assert crossings_from_exploration(state) == 0


def test_single_open_row():
    dom = GridDomain(3, 2)
    drv = TableDriver({0: False, 1: True, 2: False}, {}, default_link=True)
    state, rec = run_recorded(dom, drv)
    assert crossings_from_exploration(state) == 1 == menger_oracle(rec, dom)


def test_table_driver_exhaustion():
    with pytest.raises(ProtocolViolation):
        explore(GridDomain(2, 1), TableDriver({0: True}, {}))
    with pytest.raises(ProtocolViolation):
        explore(GridDomain(2, 1), TableDriver({0: True, 1: True}, {}))


def test_recording_read_once_and_jsonl():
    dom = GridDomain(3, 3)
    state, rec = run_recorded(dom, BernoulliDriver(0.7, 0.7, 5))
    lines = rec.to_jsonl().splitlines()
    assert len(lines) == len(rec.transcript)
    first = json.loads(lines[0])
    assert set(first) == {"type", "coords", "outcome"} and first["type"] == "site"
    r = RecordingDriver(Always())
    r.occupied(0)
    with pytest.raises(ProtocolViolation):
        r.occupied(0)
    r.linked((1, 0), (0, 0))
    with pytest.raises(ProtocolViolation):
        r.linked((0, 0), (1, 0))


def test_rows_disjoint_and_state_consistent():
    for seed in range(60):
        dom = GridDomain(3, 3)
        state = explore(dom, BernoulliDriver(0.8, 0.6, seed))
        seen = set()
        for s in range(dom.M):
            E, F = set(state.E[s]), set(state.F[s])
            assert not E & F
            assert not (E | F) & seen
            seen |= E | F
            assert set(state.x[s]) == E | F
            assert all(dom.contains(p) for p in E | F)


def test_oracle_needs_site_records():
    dom = GridDomain(2, 1)
    _, rec = run_recorded(dom, BernoulliDriver(0.5, 0.5, 1))
    with pytest.raises(InvalidArgument):
        menger_oracle(rec.transcript[1:], dom)


@pytest.mark.parametrize("M,L", [(1, 1), (2, 3), (3, 1), (3, 3)])
def test_claim_equivalence(M, L):
    dom = GridDomain(M, L)
    for seed in range(150):
        p = (0.3, 0.6, 0.9)[seed % 3]
        q = (0.9, 0.3, 0.6)[seed % 3]
        state, rec = run_recorded(dom, BernoulliDriver(p, q, seed))
        assert crossings_from_exploration(state) == menger_oracle(rec, dom)


@pytest.mark.parametrize("M,L", [(2, 1), (3, 1), (3, 3)])
def test_coupled_monotonicity(M, L):
    dom = GridDomain(M, L)
    for seed in range(300):
        lo = crossings_from_exploration(explore(dom, BernoulliDriver(0.4, 0.5, seed)))
        hi = crossings_from_exploration(explore(dom, BernoulliDriver(0.7, 0.8, seed)))
        assert lo <= hi


def test_pair_keyed_links_break_monotonicity():
    # found by search: the larger field links (1,0) to (1,1), which makes (2,0)
    # the latest neighbour of (2,1); the link (2,1)-(2,0) is closed, so (2,1)
    # is blocked although the smaller field crossed through it from (1,1)
    dom = GridDomain(2, 1)
    lo = explore(dom, BernoulliDriver(0.4, 0.5, 73, link_key="pair"))
    hi = explore(dom, BernoulliDriver(0.7, 0.8, 73, link_key="pair"))
    assert crossings_from_exploration(lo) == 1 and crossings_from_exploration(hi) == 0
    assert (2, 1) in lo.E[1] and (2, 1) in hi.F[1]


def test_pair_keyed_still_matches_oracle():
    dom = GridDomain(3, 2)
    for seed in range(150):
        state, rec = run_recorded(dom, BernoulliDriver(0.6, 0.6, seed, link_key="pair"))
        assert crossings_from_exploration(state) == menger_oracle(rec, dom)


def test_bernoulli_extremes():
    dom = GridDomain(2, 2)
    assert crossings_from_exploration(explore(dom, BernoulliDriver(1, 1, 3))) == 2
    assert crossings_from_exploration(explore(dom, BernoulliDriver(0, 0, 3))) == 0
    with pytest.raises(InvalidArgument):
        BernoulliDriver(1.2, 0.5, 0)


def test_domination_bernoulli():
    dom = GridDomain(2, 1)
    rep = domination_probe(lambda r: BernoulliDriver(0.6, 0.6, r), 0.6, 4000, dom)
    assert rep.violations == 0
    big = [h / n for h, n in rep.bins.values() if n >= 500]
    assert big and all(abs(f - 0.6) < 4 * (0.24 / 500) ** 0.5 for f in big)


def test_domination_all_present():
    rep = domination_probe(lambda r: Always(), 0.95, 50, GridDomain(2, 2))
    assert rep.violations == 0 and rep.min_conditional_freq == 1.0


def test_domination_adversary():
    rep = domination_probe(lambda r: FailAfterSuccess(), 0.9, 50, GridDomain(2, 2))
    assert rep.violations > 0


def test_probe_needs_runs():
    with pytest.raises(InvalidArgument):
        domination_probe(lambda r: Always(), 0.5, 0, GridDomain(1, 1))
