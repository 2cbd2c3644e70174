"""Seeding and Gaussian sampling.

All randomness goes through numpy's PCG64 bit generator. Child seeds are never
drawn from a parent stream; they are derived by hashing the parent seed together
with a key, so a trial's data depends only on ``(master_seed, key...)`` and not on
the order in which trials are scheduled.

Standard normals use the Box-Muller transform on PCG64 uniforms so that the
sample sequence is fully determined by the uniform stream.
"""
import hashlib

import numpy as np


def derive_seed(seed, *keys):
    """64-bit child seed from ``sha256("seed/key1/key2/...")``."""
    text = "/".join(str(part) for part in (int(seed),) + keys)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed, *keys):
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.Generator(np.random.PCG64(int(seed)))


def box_muller(rng, size):
    """``size`` iid N(0, 1) draws (int or shape tuple), two per uniform pair."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    total = int(np.prod(shape))
    pairs = (total + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:total].reshape(shape)
