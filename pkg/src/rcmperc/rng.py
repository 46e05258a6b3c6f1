"""Reproducible random streams.

Two mechanisms are used:

* ``generator(seed, *keys)`` gives a Philox generator whose stream is fully
  determined by the seed and a tuple of integer/str keys.
* ``keyed_uniform(seed, tag, a, b)`` is a stateless counter-based hash mapping
  integer keys to uniforms in [0, 1). Graph edges use it so that the variable
  attached to a pair of points depends only on the two point identifiers.
"""
import zlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _key_to_int(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    if isinstance(key, float) and not key.is_integer():
        return zlib.crc32(repr(key).encode()) | (1 << 40)
    return int(key) & 0xFFFFFFFFFFFFFFFF


def seed_sequence(seed, *keys):
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.SeedSequence(entropy)


def generator(seed, *keys):
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def derive_seed(seed, *keys):
    """A 63-bit child seed, stable across platforms."""
    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & 0x7FFFFFFFFFFFFFFF


def _splitmix(z):
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
    return z ^ (z >> np.uint64(31))


def _as_u64(a):
    return np.asarray(a, dtype=np.int64).view(np.uint64)


def keyed_uniform(seed, tag, a, b=0):
    """Uniform in [0, 1) as a pure function of (seed, tag, a, b).

    ``a`` and ``b`` may be arrays (broadcast together); callers wanting an
    unordered key must sort them first.
    """
    a = np.atleast_1d(_as_u64(a))
    b = np.atleast_1d(_as_u64(b))
    with np.errstate(over="ignore"):
        h = _splitmix(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ _splitmix(np.uint64(_key_to_int(tag))))
        h = _splitmix(h ^ a)
        h = _splitmix(h ^ (b * _GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


_M64 = 0xFFFFFFFFFFFFFFFF


def _splitmix_int(z):
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def keyed_uniform_scalar(seed, tag, a, b=0):
    """Scalar twin of ``keyed_uniform`` (same values, no numpy overhead)."""
    h = _splitmix_int((int(seed) & _M64) ^ _splitmix_int(_key_to_int(tag)))
    h = _splitmix_int(h ^ (int(a) & _M64))
    h = _splitmix_int(h ^ (((int(b) & _M64) * 0x9E3779B97F4A7C15) & _M64))
    return (h >> 11) * (1.0 / 9007199254740992.0)
