"""Marked homogeneous Poisson point processes in boxes.

Configurations store positions, marks and stable point identifiers as numpy
arrays. Identifiers survive thinning and are what per-pair edge variables are
keyed on, so coupled configurations share their randomness exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, UnsupportedOperation
from .rng import generator, keyed_uniform


@dataclass(frozen=True)
class Region:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or len(lo) < 2:
            raise InvalidArgument("region needs matching lo/hi of dimension >= 2")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise InvalidArgument(f"degenerate region side [{a}, {b}]")

    @classmethod
    def box(cls, half_widths, center=None):
        half_widths = [float(h) for h in half_widths]
        if center is None:
            center = [0.0] * len(half_widths)
        return cls(tuple(c - h for c, h in zip(center, half_widths)),
                   tuple(c + h for c, h in zip(center, half_widths)))

    @classmethod
    def cube(cls, half_width, d):
        return cls.box([half_width] * d)

    @classmethod
    def strip(cls, ell, d, truncation=2.0, transverse=None):
        """First axis [-T*ell, T*ell], other axes [-ell, ell] (or ``transverse``)."""
        t = ell if transverse is None else transverse
        return cls.box([truncation * ell] + [t] * (d - 1))

    @property
    def d(self):
        return len(self.lo)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def contains_box(self, lo, hi):
        return all(a <= b for a, b in zip(self.lo, lo)) and all(a >= b for a, b in zip(self.hi, hi))

    def permuted(self, perm):
        return Region(tuple(self.lo[p] for p in perm), tuple(self.hi[p] for p in perm))


# ---------------------------------------------------------------------------
# mark distributions
#
# Each distribution turns a fixed number of uniforms into one mark, so that a
# configuration is drawn as one (n, d + k) block of uniforms: coordinates first,
# then the mark's uniforms, point by point.


class MarkDistribution:
    n_uniforms = 0

    def from_uniforms(self, u):
        raise NotImplementedError

    def support(self):
        """Closed intervals [lo, hi] whose union is the support."""
        raise NotImplementedError

    def has_mass_in_open(self, lo, hi):
        raise NotImplementedError

    def max_abs(self):
        return max(max(abs(a), abs(b)) for a, b in self.support())

    def sample(self, n, seed):
        u = generator(seed, "marks").random((n, self.n_uniforms))
        return self.from_uniforms(u)

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Dirac(MarkDistribution):
    m: float = 0.0
    n_uniforms = 0

    def from_uniforms(self, u):
        return np.full(len(u), float(self.m))

    def support(self):
        return [(self.m, self.m)]

    def has_mass_in_open(self, lo, hi):
        return lo < self.m < hi

    def to_spec(self):
        return {"kind": "dirac", "m": self.m}


@dataclass(frozen=True)
class UniformInterval(MarkDistribution):
    a: float
    b: float
    n_uniforms = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidArgument("uniform interval needs a < b")

    def from_uniforms(self, u):
        return self.a + (self.b - self.a) * u[:, 0]

    def support(self):
        return [(self.a, self.b)]

    def has_mass_in_open(self, lo, hi):
        return max(self.a, lo) < min(self.b, hi)

    def to_spec(self):
        return {"kind": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class DiscreteTable(MarkDistribution):
    values: tuple
    probabilities: tuple
    n_uniforms = 1

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probabilities", probs)
        if len(values) != len(probs) or not values:
            raise InvalidArgument("values and probabilities must be nonempty and match")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidArgument("probabilities must be nonnegative and sum to 1")

    def from_uniforms(self, u):
        cdf = np.cumsum(self.probabilities)
        idx = np.searchsorted(cdf, u[:, 0], side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]

    def support(self):
        return [(v, v) for v, p in zip(self.values, self.probabilities) if p > 0]

    def has_mass_in_open(self, lo, hi):
        return any(lo < v < hi for v, p in zip(self.values, self.probabilities) if p > 0)

    def to_spec(self):
        return {"kind": "discrete", "values": list(self.values), "probabilities": list(self.probabilities)}


@dataclass(frozen=True)
class Mixture(MarkDistribution):
    components: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if len(weights) != len(self.components) or not weights:
            raise InvalidArgument("components and weights must be nonempty and match")
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidArgument("weights must be nonnegative and sum to 1")

    @property
    def n_uniforms(self):
        return 1 + max(c.n_uniforms for c in self.components)

    def from_uniforms(self, u):
        cdf = np.cumsum(self.weights)
        which = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), len(self.weights) - 1)
        out = np.empty(len(u))
        for i, comp in enumerate(self.components):
            sel = which == i
            out[sel] = comp.from_uniforms(u[sel, 1:1 + comp.n_uniforms])
        return out

    def support(self):
        out = []
        for c, w in zip(self.components, self.weights):
            if w > 0:
                out.extend(c.support())
        return out

    def has_mass_in_open(self, lo, hi):
        return any(w > 0 and c.has_mass_in_open(lo, hi) for c, w in zip(self.components, self.weights))

    def to_spec(self):
        return {"kind": "mixture", "components": [c.to_spec() for c in self.components],
                "weights": list(self.weights)}


def marks_from_spec(spec) -> MarkDistribution:
    if isinstance(spec, (int, float)):
        return Dirac(float(spec))
    kind = spec.get("kind")
    if kind == "dirac":
        return Dirac(float(spec["m"]))
    if kind == "uniform":
        return UniformInterval(float(spec["a"]), float(spec["b"]))
    if kind == "discrete":
        return DiscreteTable(spec["values"], spec["probabilities"])
    if kind == "mixture":
        return Mixture([marks_from_spec(c) for c in spec["components"]], spec["weights"])
    raise UnsupportedOperation(f"unknown mark distribution {kind!r}")


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class MarkedPoint:
    position: tuple
    mark: float = 0.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if not all(math.isfinite(v) for v in pos):
            raise InvalidArgument("point position must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "mark", float(self.mark))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkedConfig:
    positions: np.ndarray
    marks: np.ndarray
    region: Region
    intensity: float = 0.0
    seed: int = 0
    stream_id: int = 0
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        d = self.region.d
        pos = np.asarray(self.positions, dtype=float).reshape(-1, d)
        object.__setattr__(self, "positions", _frozen(pos, float))
        object.__setattr__(self, "marks", _frozen(np.asarray(self.marks, dtype=float).reshape(-1), float))
        ids = np.arange(len(pos)) if self.ids is None else self.ids
        object.__setattr__(self, "ids", _frozen(ids, np.int64))
        if not (len(self.marks) == len(pos) == len(self.ids)):
            raise InvalidArgument("positions, marks and ids must have equal length")

    def __len__(self):
        return len(self.marks)

    @property
    def d(self):
        return self.region.d

    @property
    def points(self):
        return [MarkedPoint(tuple(x), m) for x, m in zip(self.positions, self.marks)]

    def replace(self, keep=None, positions=None, **kw):
        """A copy with a subset (boolean mask or index array) and/or new fields."""
        pos, marks, ids = self.positions, self.marks, self.ids
        if keep is not None:
            pos, marks, ids = pos[keep], marks[keep], ids[keep]
        if positions is not None:
            pos = positions
        args = dict(region=self.region, intensity=self.intensity, seed=self.seed,
                    stream_id=self.stream_id)
        args.update(kw)
        return MarkedConfig(pos, marks, ids=ids, **args)

    def permute_axes(self, perm):
        """Relabel coordinate axes: new axis i is old axis perm[i]."""
        perm = list(perm)
        return self.replace(positions=self.positions[:, perm], region=self.region.permuted(perm))

    def same_as(self, other):
        return (self.region == other.region and self.intensity == other.intensity
                and self.seed == other.seed and self.stream_id == other.stream_id
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.marks, other.marks)
                and np.array_equal(self.ids, other.ids))


def sample_ppp(region: Region, rho: float, marks: MarkDistribution, seed: int, stream_id: int = 0) -> MarkedConfig:
    """Poisson(rho * volume) points, i.i.d. uniform in ``region``, i.i.d. marks."""
    rho = float(rho)
    if not math.isfinite(rho) or rho < 0:
        raise InvalidArgument(f"intensity must be finite and nonnegative, got {rho}")
    d = region.d
    gen = generator(seed, stream_id, "ppp")
    n = int(gen.poisson(rho * region.volume))
    k = marks.n_uniforms
    lo, width = np.asarray(region.lo), np.subtract(region.hi, region.lo)
    u = gen.random((n, d + k))
    pos = lo + width * u[:, :d]
    m = marks.from_uniforms(u[:, d:])
    # duplicate positions have probability zero; resample the later copy
    while n > 1:
        _, first = np.unique(pos, axis=0, return_index=True)
        if len(first) == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        redraw = gen.random((len(dup), d + k))
        pos[dup] = lo + width * redraw[:, :d]
        m[dup] = marks.from_uniforms(redraw[:, d:])
    return MarkedConfig(pos, m, region, intensity=rho, seed=seed, stream_id=stream_id)


def thin(config: MarkedConfig, keep_prob: float, seed: int) -> MarkedConfig:
    """Independent p-thinning; a point's fate is keyed on its identifier."""
    if not 0.0 <= keep_prob <= 1.0:
        raise InvalidArgument(f"keep_prob must be in [0, 1], got {keep_prob}")
    u = keyed_uniform(seed, "thin", config.ids) if len(config) else np.empty(0)
    return config.replace(keep=u < keep_prob, intensity=config.intensity * keep_prob)


def palm_insert(config: MarkedConfig, point: MarkedPoint, ident: int | None = None) -> MarkedConfig:
    """Prepend ``point``. Its identifier defaults to a fresh negative integer."""
    x = np.asarray(point.position, dtype=float)
    if x.shape != (config.d,):
        raise InvalidArgument("point dimension does not match the configuration")
    if not config.region.contains(x):
        raise InvalidArgument("inserted point lies outside the region")
    if len(config) and np.any(np.all(config.positions == x, axis=1)):
        raise InvalidArgument("inserted point duplicates an existing position")
    if ident is None:
        ident = min(-1, int(config.ids.min()) - 1) if len(config) else -1
    elif ident in set(config.ids.tolist()):
        raise InvalidArgument(f"identifier {ident} already used")
    return MarkedConfig(np.vstack([x[None, :], config.positions]),
                        np.concatenate([[point.mark], config.marks]),
                        config.region, intensity=config.intensity, seed=config.seed,
                        stream_id=config.stream_id,
                        ids=np.concatenate([[ident], config.ids]))


# ---------------------------------------------------------------------------
# serialization


def _g17(v):
    return format(float(v), ".17g")


def config_to_json(config: MarkedConfig) -> str:
    pts = ",".join(
        '{"x":[%s],"m":%s,"id":%d}' % (",".join(_g17(c) for c in x), _g17(m), i)
        for x, m, i in zip(config.positions, config.marks, config.ids))
    return ('{"d":%d,"lo":[%s],"hi":[%s],"rho":%s,"seed":%d,"stream_id":%d,"points":[%s]}'
            % (config.d, ",".join(_g17(v) for v in config.region.lo),
               ",".join(_g17(v) for v in config.region.hi), _g17(config.intensity),
               config.seed, config.stream_id, pts))


def config_from_json(text: str) -> MarkedConfig:
    obj = json.loads(text)
    region = Region(obj["lo"], obj["hi"])
    pts = obj["points"]
    pos = np.array([p["x"] for p in pts], dtype=float).reshape(-1, obj["d"])
    marks = np.array([p["m"] for p in pts], dtype=float)
    ids = np.array([p.get("id", i) for i, p in enumerate(pts)], dtype=np.int64)
    return MarkedConfig(pos, marks, region, intensity=obj["rho"], seed=obj["seed"],
                        stream_id=obj["stream_id"], ids=ids)


def lattice_config(positions: Sequence, marks=None, region: Region | None = None) -> MarkedConfig:
    """Build a config from explicit points (handy for tests and CLI input)."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2:
        raise InvalidArgument("positions must be a 2-d array")
    if marks is None:
        marks = np.zeros(len(pos))
    if region is None:
        lo = pos.min(axis=0) - 1.0 if len(pos) else -np.ones(pos.shape[1])
        hi = pos.max(axis=0) + 1.0 if len(pos) else np.ones(pos.shape[1])
        region = Region(tuple(lo), tuple(hi))
    return MarkedConfig(pos, np.broadcast_to(np.asarray(marks, dtype=float), (len(pos),)), region)
