"""Deterministic seed derivation.

All randomness in the package flows from a single master seed. Sub-seeds
for classes, folds and retries are derived with a keyed blake2b digest so
that serial and parallel runs, and runs on different platforms, agree
bit-for-bit. Python's builtin ``hash`` is process-salted and unusable here.

The generator seeded with these values is numpy's default PCG64
(``np.random.default_rng``).
"""

import hashlib


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a 64-bit sub-seed from a master seed and a label path.

    ``parts`` may mix strings and integers (class ids, fold indices,
    retry counters). The same inputs always yield the same output.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")
