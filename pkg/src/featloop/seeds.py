"""Stable seed derivation so parallel and serial runs agree."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *tags) -> int:
    """Deterministic 63-bit child seed from a master seed and string/int tags."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for t in tags:
        h.update(b"|")
        h.update(str(t).encode())
    return int.from_bytes(h.digest()[:8], "big") & 0x7FFFFFFFFFFFFFFF
