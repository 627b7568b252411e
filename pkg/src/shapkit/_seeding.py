import hashlib

import numpy as np


def derive_seed(master: int, component: str, index: int = 0) -> int:
    """Stable 64-bit sub-seed for ``(master, component, index)``.

    Unlike ``hash()`` this does not change between interpreter runs.
    """
    key = f"{int(master)}:{component}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def rng_for(master: int, component: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, component, index))
