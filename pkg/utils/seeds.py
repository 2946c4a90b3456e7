# utils/seeds.py
import numpy as np


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers, e.g. (root seed, epoch, index)."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def rng_for(*parts: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
