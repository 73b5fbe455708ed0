"""Counter-based random streams keyed by integer paths.

Every stream is a Philox generator whose key is derived from
``(seed, *path)``.  Two calls with the same path always produce the same
sequence, no matter which process or in what order they run.
"""

import zlib

import numpy as np

# stream tags, kept stable so stored results stay reproducible
OBSERVATION = 1
TRUTH = 2
PRIOR = 3
POSTERIOR = 4
EXPERIMENT = 5
PROBE = 6


def tag(name: str) -> int:
    """Stable integer tag for a string label (used for named signals etc.)."""
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, *path: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(p) & 0xFFFFFFFF for p in path]
    ss = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *path: int) -> int:
    """Derive a 63-bit integer seed for a sub-task."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(p) & 0xFFFFFFFF for p in path]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
