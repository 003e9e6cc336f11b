"""Deterministic random streams.

Two named algorithms are used, both fully specified so other implementations
can reproduce streams bit for bit:

* ``splitmix64`` for seed derivation and for
  random-access register draws: the value at counter ``c`` under key ``k`` is
  ``mix(k + (c + 1) * 0x9E3779B97F4A7C15)`` in wrapping 64-bit arithmetic, and
  the uniform double is ``(value >> 11) * 2**-53``.
* ``Philox4x64-10`` (numpy ``Philox`` bit generator, keyed by a derived
  splitmix64 seed) for sequential bulk streams such as private coins.
"""

from __future__ import annotations

import hashlib

import numpy as np

RNG_NAME = "splitmix64(keyed registers, seed derivation) + philox4x64-10(streams)"

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)


def mix64(z):
    """splitmix64 finaliser, elementwise on uint64 arrays (wrapping)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    digest = hashlib.blake2b(str(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *keys) -> int:
    """Derive a child 64-bit seed from ``seed`` and a path of int/str keys."""
    h = np.array([_key_int(seed)], dtype=np.uint64)
    for key in keys:
        k = np.array([_key_int(key)], dtype=np.uint64)
        with np.errstate(over="ignore"):
            h = mix64(h ^ mix64(k + GOLDEN))
    return int(h[0])


def derive_seeds(seed: int, counters, *keys) -> np.ndarray:
    """Vectorised ``derive_seed(seed, *keys, c)`` over an array of counters."""
    base = np.uint64(derive_seed(seed, *keys))
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base ^ mix64(c + GOLDEN))


def counter_uniforms(keys, counters) -> np.ndarray:
    """Uniform doubles in [0, 1) at ``counters`` of the splitmix64 streams ``keys``.

    ``keys`` and ``counters`` broadcast against each other.
    """
    k = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        v = mix64(k + (c + np.uint64(1)) * GOLDEN)
    return (v >> np.uint64(11)).astype(np.float64) * _INV53


def generator(seed: int, *keys) -> np.random.Generator:
    """A Philox-backed numpy Generator keyed by ``derive_seed(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *keys)))
