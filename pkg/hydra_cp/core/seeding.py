"""
Hydra-CP - Seed Derivation

Every random stream is keyed by the master seed plus a pipe-joined path
(frame, purpose, agent, sweep value ...). Streams never share state, so adding
a draw to one stream leaves all others unchanged.
"""

import hashlib
from typing import Union

import numpy as np

SeedPart = Union[int, float, str]


def derive_seed(master: int, *parts: SeedPart) -> int:
    """64-bit sub-seed from sha256 of the master seed and the key path."""
    key = "|".join([str(int(master))] + [_canonical(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(master: int, *parts: SeedPart) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *parts))


def _canonical(part: SeedPart) -> str:
    if isinstance(part, float):
        return repr(float(part))
    return str(part)
