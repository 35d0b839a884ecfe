"""Deterministic random number generation for operator synthesis.

Reproducibility across platforms and runs is part of the wire contract:
a (seed, subband) pair must always yield the same operator bytes.  numpy's
Generator machinery makes no such cross-version promise, so the generator
is pinned down explicitly:

* SplitMix64 produces the raw 64-bit stream: output i is ``mix(seed +
  (i + 1) * 0x9E3779B97F4A7C15)`` with the standard xor-shift/multiply
  finalizer, all arithmetic mod 2^64.
* Pairs of raw words map to standard normals via Box-Muller.  The first
  word of a pair becomes u1 = ((w >> 11) + 1) * 2^-53 in (0, 1], the
  second u2 = (w >> 11) * 2^-53 in [0, 1); the pair yields
  sqrt(-2 ln u1) * (cos, sin)(2 pi u2).  A trailing odd draw discards the
  sine term.
* Each subband draws from its own stream, derived from the master seed by
  xor with a per-subband tag.
"""

import numpy as np

from .wavelet import ORIENT_CODES

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

_INV_2_53 = 2.0 ** -53.0


def splitmix64(seed, count):
    """First ``count`` outputs of the SplitMix64 stream for ``seed``."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + np.uint64(_GOLDEN) * idx
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def standard_normals(seed, count):
    """``count`` standard normal draws from the seed's SplitMix64 stream."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.empty(0, dtype=np.float64)
    pairs = (count + 1) // 2
    words = splitmix64(seed, 2 * pairs)
    u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def subband_seed(master_seed, sid):
    """Per-subband stream seed: master xor golden-ratio tag of the subband."""
    tag = (_GOLDEN * (4 * sid.level + ORIENT_CODES[sid.orientation])) & _MASK64
    return (master_seed ^ tag) & _MASK64
