"""Seed derivation and deterministic torch configuration.

Every random draw in the project goes through an explicitly seeded
``torch.Generator`` or ``numpy`` generator derived here, never the global RNG,
so results are reproducible across process restarts and test orderings.
"""

from __future__ import annotations

import hashlib

import torch

_THREADS = 1
_configured = False


def configure_torch() -> None:
    """Pin the CPU thread count so reductions are bit-stable across runs."""
    global _configured
    if _configured:
        return
    torch.set_num_threads(_THREADS)
    _configured = True


def derive_seed(root: int, *parts: object) -> int:
    """Stable 63-bit seed derived from a root seed and a label path.

    Independent streams (per concept, per sample seed, per run index) are keyed
    by hashing the label path, so adding a stream never shifts another one.
    """
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for p in parts:
        h.update(b"/")
        h.update(str(p).encode())
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def make_generator(seed: int) -> torch.Generator:
    configure_torch()
    g = torch.Generator(device="cpu")
    g.manual_seed(int(seed))
    return g
