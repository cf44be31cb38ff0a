"""Named, reproducible RNG substreams derived from a single root seed.

Every stochastic quantity in the suites and models pulls from
``substream(seed, name, ...)`` so that one ``--seed`` flag pins the whole
run and independent checks never share a stream.
"""

import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Generator keyed by the root seed plus a stable hash of each name."""
    keys = [int(seed)] + [zlib.crc32(str(n).encode("utf-8")) for n in names]
    return np.random.default_rng(keys)
