import zlib

import numpy as np


def role_key(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def make_rng(seed: int, role: str, *index: int) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, role, *index)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, role_key(role), *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
