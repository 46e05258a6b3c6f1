"""Connection functions: finite-range kernels, Poisson-Boolean, Mott hopping.

Every model evaluates ``phi`` vectorized over arrays of displacements and mark
pairs. An edge between two points is present when ``phi > 0`` and the pair's
uniform variable ``u`` satisfies ``u <= phi``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument, UnsupportedOperation
from .pointprocess import MarkDistribution, MarkedPoint
from .rng import generator

_NORMS = {"l2": 2, "l1": 1, "linf": np.inf}


def _norm(dx, norm):
    return np.linalg.norm(dx, ord=_NORMS[norm], axis=-1)


class ConnectionModel:
    name = "abstract"

    def phi_arrays(self, dx, m1, m2):
        raise NotImplementedError

    def range_bound(self, marks=None):
        """phi vanishes whenever the sup-norm displacement is >= this value.

        ``marks`` is an array of realized marks; only models whose range is
        mark dependent look at it.
        """
        raise NotImplementedError

    def range_for(self, nu: MarkDistribution):
        return self.range_bound(np.array([a for iv in nu.support() for a in iv]))

    @property
    def is_indicator(self):
        return False

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True)
class BooleanModel(ConnectionModel):
    """Balls of radius m and m' around the two points intersect."""
    name = "boolean"

    def phi_arrays(self, dx, m1, m2):
        r = np.linalg.norm(dx, axis=-1)
        return ((r <= np.asarray(m1) + np.asarray(m2)) & (r > 0)).astype(float)

    def range_bound(self, marks=None):
        if marks is None or len(marks) == 0:
            return np.nextafter(0.0, 1.0)
        return float(np.nextafter(2.0 * max(float(np.max(marks)), 0.0), np.inf))

    @property
    def is_indicator(self):
        return True

    def to_spec(self):
        return {"model": "boolean"}


@dataclass(frozen=True)
class MottModel(ConnectionModel):
    """Edge iff |x - y| + w(m, m') <= zeta."""
    zeta: float
    norm: str = "l2"
    name = "mott"

    def __post_init__(self):
        if not self.zeta > 0:
            raise InvalidArgument("Mott cutoff zeta must be positive")
        if self.norm not in _NORMS:
            raise InvalidArgument(f"unknown norm {self.norm!r}")

    def phi_arrays(self, dx, m1, m2):
        r = _norm(dx, self.norm)
        return ((r + mott_w(m1, m2) <= self.zeta) & (r > 0)).astype(float)

    def range_bound(self, marks=None):
        return float(np.nextafter(self.zeta, np.inf))

    @property
    def is_indicator(self):
        return True

    def to_spec(self):
        spec = {"model": "mott", "zeta": self.zeta}
        if self.norm != "l2":
            spec["norm"] = self.norm
        return spec


# built-in kernel profiles: (dx, m1, m2, params) -> phi, Euclidean distance r
def _hard_range(dx, m1, m2, p=1.0, r=1.0):
    d = np.linalg.norm(dx, axis=-1)
    return np.where(d < r, float(p), 0.0)


def _linear_decay(dx, m1, m2, p=1.0, r=1.0):
    d = np.linalg.norm(dx, axis=-1)
    return float(p) * np.clip(1.0 - d / r, 0.0, 1.0)


def _gaussian_cut(dx, m1, m2, p=1.0, r=1.0, scale=0.5):
    d = np.linalg.norm(dx, axis=-1)
    return np.where(d < r, float(p) * np.exp(-0.5 * (d / scale) ** 2), 0.0)


KERNELS = {
    "hard_range": _hard_range,
    "linear_decay": _linear_decay,
    "gaussian_cut": _gaussian_cut,
}


@dataclass(frozen=True)
class KernelModel(ConnectionModel):
    """Generic finite-range kernel given by a named profile and parameters.

    ``profile`` may be passed directly to use a custom (possibly non-symmetric,
    for testing audits) function of (dx, m1, m2).
    """
    kernel: str
    params: dict = field(default_factory=dict)
    range: float = 1.0
    profile: Callable | None = field(default=None, compare=False)
    name = "kernel"

    def __post_init__(self):
        if not self.range > 0:
            raise InvalidArgument("kernel range must be positive")
        if self.profile is None and self.kernel not in KERNELS:
            raise UnsupportedOperation(f"unknown kernel {self.kernel!r}")

    def __hash__(self):
        return hash((self.kernel, tuple(sorted(self.params.items())), self.range))

    def phi_arrays(self, dx, m1, m2):
        dx = np.asarray(dx, dtype=float)
        fn = self.profile or KERNELS[self.kernel]
        val = np.asarray(fn(dx, np.asarray(m1), np.asarray(m2), **self.params), dtype=float)
        far = np.max(np.abs(dx), axis=-1) >= self.range
        same = np.all(dx == 0, axis=-1)
        return np.clip(np.where(far | same, 0.0, val), 0.0, 1.0)

    def range_bound(self, marks=None):
        return float(self.range)

    def to_spec(self):
        return {"model": "kernel", "name": self.kernel, "params": dict(self.params), "range": self.range}


def model_from_spec(spec) -> ConnectionModel:
    kind = spec.get("model")
    if kind == "boolean":
        return BooleanModel()
    if kind == "mott":
        return MottModel(float(spec["zeta"]), spec.get("norm", "l2"))
    if kind == "kernel":
        return KernelModel(spec["name"], dict(spec.get("params", {})), float(spec["range"]))
    raise InvalidArgument(f"unknown model {kind!r}")


def phi(model: ConnectionModel, t: MarkedPoint, t2: MarkedPoint) -> float:
    dx = np.subtract(t2.position, t.position)[None, :]
    return float(model.phi_arrays(dx, np.array([t.mark]), np.array([t2.mark]))[0])


def edge_present(model: ConnectionModel, t: MarkedPoint, t2: MarkedPoint, u: float) -> bool:
    if not 0.0 <= u <= 1.0:
        raise InvalidArgument(f"u must lie in [0, 1], got {u}")
    p = phi(model, t, t2)
    return p > 0 and u <= p


def mott_w(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.abs(a) + np.abs(b) + np.abs(a - b)
    return float(w) if w.ndim == 0 else w


def mott_mark_isolated(m: float, zeta: float) -> bool:
    if not zeta > 0:
        raise InvalidArgument("zeta must be positive")
    return abs(m) >= zeta / 2


def mott_nu_is_good(marks: MarkDistribution, zeta: float) -> bool:
    """Goodness of a Mott mark distribution (irreducibility criterion).

    Requires mass in (-zeta/2, zeta/2); then either the support meets at most
    one of (-zeta/2, 0) and (0, zeta/2), or A+ - A- < zeta/2 where
    A- = sup(supp ∩ (-zeta/2, 0)) and A+ = inf(supp ∩ [0, zeta/2)).
    """
    if not zeta > 0:
        raise InvalidArgument("zeta must be positive")
    try:
        support = marks.support()
        has_center = marks.has_mass_in_open(-zeta / 2, zeta / 2)
    except NotImplementedError:
        raise UnsupportedOperation(f"cannot evaluate support of {type(marks).__name__}") from None
    if not has_center:
        return False
    h = zeta / 2
    meets_neg = any(lo < 0 and hi > -h for lo, hi in support)
    meets_pos = any(hi > 0 and lo < h for lo, hi in support)
    if not (meets_neg and meets_pos):
        return True
    a_minus = max(min(hi, 0.0) for lo, hi in support if lo < 0 and hi > -h)
    a_plus = min(max(lo, 0.0) for lo, hi in support if hi >= 0 and lo < h)
    return a_plus - a_minus < h


@dataclass
class SymmetryReport:
    violations: int
    worst_gap: float


def symmetry_audit(model: ConnectionModel, n_samples: int, seed: int, d: int = 2,
                   marks: MarkDistribution | None = None, tol: float = 1e-12) -> SymmetryReport:
    """Compare phi under coordinate permutations, single sign flips and point exchange.

    Gaps up to ``tol`` (summation-order rounding in norms) are not violations.
    """
    if n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    gen = generator(seed, "symmetry-audit")
    ell = model.range_for(marks) if marks is not None else model.range_bound(np.array([1.0]))
    dx = gen.uniform(-ell, ell, size=(n_samples, d))
    if marks is not None:
        m1, m2 = marks.sample(n_samples, seed), marks.sample(n_samples, seed + 1)
    else:
        m1, m2 = gen.uniform(0, 1, n_samples), gen.uniform(0, 1, n_samples)
    base = model.phi_arrays(dx, m1, m2)
    variants = [(dx[:, list(p)], m1, m2) for p in itertools.permutations(range(d))
                if list(p) != list(range(d))]
    for i in range(d):
        flipped = dx.copy()
        flipped[:, i] *= -1
        variants.append((flipped, m1, m2))
    # exchanging the two points
    variants.append((-dx, m2, m1))
    gaps = np.zeros(n_samples)
    for v_dx, v_m1, v_m2 in variants:
        gaps = np.maximum(gaps, np.abs(model.phi_arrays(v_dx, v_m1, v_m2) - base))
    return SymmetryReport(int(np.count_nonzero(gaps > tol)), float(gaps.max(initial=0.0)))
