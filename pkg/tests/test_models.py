import numpy as np
import pytest

from rcmperc.errors import InvalidArgument, UnsupportedOperation
from rcmperc.models import (BooleanModel, KernelModel, MottModel, edge_present, model_from_spec,
                            mott_mark_isolated, mott_nu_is_good, mott_w, phi, symmetry_audit)
from rcmperc.pointprocess import DiscreteTable, Dirac, MarkedPoint, Mixture, UniformInterval


def mp(x, m):
    return MarkedPoint(tuple(float(c) for c in x), m)


def test_boolean_phi():
    B = BooleanModel()
    assert phi(B, mp((0, 0), 0.5), mp((1, 0), 0.5)) == 1.0
    assert phi(B, mp((0, 0), 0.5), mp((1.0001, 0), 0.5)) == 0.0
    assert phi(B, mp((0, 0), 0.5), mp((0, 0), 0.5)) == 0.0
    assert B.range_bound(np.array([0.5, 0.3])) > 1.0
    assert B.is_indicator


def test_mott_phi_and_weight():
    M = MottModel(1.5)
    assert mott_w(0.2, -0.1) == pytest.approx(0.2 + 0.1 + 0.3)
    assert mott_w(0.3, 0.3) == pytest.approx(0.6)
    # |x - y| = 0.8, w = 0.2 + 0.1 + 0.3 = 0.6 -> 1.4 <= 1.5
    assert phi(M, mp((0, 0), 0.2), mp((0.8, 0), -0.1)) == 1.0
    assert phi(M, mp((0, 0), 0.2), mp((1.0, 0), -0.1)) == 0.0
    assert mott_mark_isolated(0.75, 1.5) and not mott_mark_isolated(0.74, 1.5)
    with pytest.raises(InvalidArgument):
        MottModel(0.0)


def test_kernel_phi():
    K = KernelModel("linear_decay", {"p": 1.0, "r": 2.0}, 2.0)
    assert phi(K, mp((0, 0), 0), mp((1, 0), 0)) == pytest.approx(0.5)
    assert phi(K, mp((0, 0), 0), mp((2, 0), 0)) == 0.0
    H = KernelModel("hard_range", {"p": 0.3, "r": 1.0}, 1.0)
    assert phi(H, mp((0, 0), 0), mp((0.5, 0.5), 0)) == pytest.approx(0.3)
    with pytest.raises(UnsupportedOperation):
        KernelModel("nope", {}, 1.0)


def test_edge_present():
    H = KernelModel("hard_range", {"p": 0.3, "r": 1.0}, 1.0)
    a, b = mp((0, 0), 0), mp((0.5, 0), 0)
    assert edge_present(H, a, b, 0.3)
    assert not edge_present(H, a, b, 0.31)
    assert not edge_present(H, a, mp((3, 0), 0), 0.0)
    with pytest.raises(InvalidArgument):
        edge_present(H, a, b, 1.2)


def test_spec_roundtrip():
    for m in (BooleanModel(), MottModel(1.5), MottModel(2.0, "l1"),
              KernelModel("gaussian_cut", {"p": 0.9, "r": 1.5, "scale": 0.4}, 1.5)):
        assert model_from_spec(m.to_spec()) == m
    with pytest.raises(InvalidArgument):
        model_from_spec({"model": "other"})


@pytest.mark.parametrize("model,marks", [
    (BooleanModel(), UniformInterval(0.1, 0.6)),
    (MottModel(1.5), UniformInterval(-0.5, 0.5)),
    (KernelModel("linear_decay", {"p": 0.8, "r": 1.0}, 1.0), None),
])
def test_symmetry_audit_clean(model, marks):
    rep = symmetry_audit(model, 500, 3, d=2, marks=marks)
    assert rep.violations == 0 and rep.worst_gap < 1e-12
    rep3 = symmetry_audit(model, 200, 4, d=3, marks=marks)
    assert rep3.violations == 0


def test_symmetry_audit_catches_anisotropy():
    bad = KernelModel("tilted", {}, 1.0, profile=lambda dx, m1, m2: np.where(dx[..., 0] > 0, 1.0, 0.2))
    rep = symmetry_audit(bad, 300, 1)
    assert rep.violations > 0 and rep.worst_gap == pytest.approx(0.8)


# goodness table: (distribution, zeta, expected), evaluated by hand
GOOD_CASES = [
    (UniformInterval(-0.5, 0.5), 1.5, True),        # A- = 0, A+ = 0
    (Dirac(0.0), 1.0, True),
    (Dirac(0.6), 1.0, False),                        # no mass in (-0.5, 0.5)
    (UniformInterval(0.1, 0.3), 1.0, True),          # only the positive side
    (DiscreteTable([-0.4, 0.4], [0.5, 0.5]), 1.0, False),   # 0.4 + 0.4 >= 0.5
    (DiscreteTable([-0.2, 0.2], [0.5, 0.5]), 1.0, True),    # 0.4 < 0.5
    (DiscreteTable([-0.25, 0.25], [0.5, 0.5]), 1.0, False),  # gap equals zeta/2
    (Mixture([UniformInterval(-0.45, -0.3), UniformInterval(0.1, 0.4)], [0.5, 0.5]), 1.0, True),   # 0.1 + 0.3 < 0.5
    (Mixture([UniformInterval(-0.45, -0.35), UniformInterval(0.2, 0.4)], [0.5, 0.5]), 1.0, False),  # 0.2 + 0.35
    (DiscreteTable([-3.0, 3.0], [0.5, 0.5]), 1.0, False),
]


def test_goodness_table():
    got = [mott_nu_is_good(nu, z) for nu, z, _ in GOOD_CASES]
    assert got == [e for _, _, e in GOOD_CASES]
