"""
Named random sub-streams derived from a single root seed.

Each component asks for its own stream (``"data"``, ``"init"``, ``"split"``,
``"search"``, ...) so that adding randomness in one place never shifts the
numbers drawn somewhere else.
"""

import hashlib

import numpy as np

U64_MASK = (1 << 64) - 1


def derive_seed(root: int, *names) -> int:
    """
    Derive a 64-bit seed from a root seed and a path of names.

    Args:
        root: Root seed
        *names: Sub-stream path components (strings or integers)

    Returns:
        Unsigned 64-bit seed
    """
    key = "/".join([str(int(root) & U64_MASK), *[str(name) for name in names]])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int) -> np.random.Generator:
    """Create a PCG64 generator from an unsigned 64-bit seed."""
    return np.random.default_rng(int(seed) & U64_MASK)


def stream(root: int, *names) -> np.random.Generator:
    """Shortcut for ``make_rng(derive_seed(root, *names))``."""
    return make_rng(derive_seed(root, *names))
