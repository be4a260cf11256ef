"""Domain-separated seed derivation.

One user-facing root seed fans out to every random draw in a run: schedule
noise, per-frame noise, mock encoders, projectors. Each consumer derives its
own 64-bit seed by hashing a label path, so streams never collide and adding
a new consumer cannot shift existing ones.
"""

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts) -> int:
    """Hash a label path (strings, ints, nested tuples) into a 64-bit seed."""
    payload = _SEP.join(repr(p).encode("utf-8") for p in parts)
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def spawn_rng(*parts) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the label path."""
    return np.random.default_rng(derive_seed(*parts))
