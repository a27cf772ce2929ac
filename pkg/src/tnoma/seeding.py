"""Deterministic per-purpose random streams.

A master seed is split into independent streams keyed by a purpose name and
any number of integer counters (frame index, SNR index, ...).  The splitter is
counter based, so a given (seed, purpose, counters) tuple always yields the
same stream regardless of the order in which streams are requested.
"""

import zlib

import numpy as np

PURPOSES = ("data", "fading", "noise", "impairments", "init", "eval", "valid")


def _purpose_key(purpose):
    return zlib.crc32(purpose.encode("ascii"))


def stream(seed, purpose, *counters):
    """Return a ``numpy.random.Generator`` for ``(seed, purpose, *counters)``."""
    key = (_purpose_key(purpose),) + tuple(int(c) for c in counters)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
