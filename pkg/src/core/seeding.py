"""
Stable seed derivation

Every random stream in an experiment is keyed by (global seed, stage name,
client id, ...) so adding a method or a client never shifts another stream.
"""

import hashlib
from typing import Union

import numpy as np
import torch

SeedPart = Union[int, str]


def derive_seed(global_seed: int, *parts: SeedPart) -> int:
    """
    Derive an unsigned 64-bit seed from the global seed and a key path

    Args:
        global_seed: Experiment-wide seed
        *parts: Stage name, client id, round index, ...

    Returns:
        int: Seed in [0, 2**64)
    """
    key = "\x1f".join([str(int(global_seed))] + [str(part) for part in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(global_seed: int, *parts: SeedPart) -> np.random.Generator:
    """Numpy generator for the keyed stream"""
    return np.random.default_rng(np.random.SeedSequence(derive_seed(global_seed, *parts)))


def make_torch_generator(seed: int) -> torch.Generator:
    """CPU torch generator seeded from a 64-bit seed"""
    generator = torch.Generator(device="cpu")
    # torch.Generator.manual_seed takes values below 2**63
    generator.manual_seed(int(seed) % (2 ** 63))
    return generator
