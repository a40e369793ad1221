"""Deterministic stream derivation for all randomness in the package.

Every random draw anywhere in the library flows from a single root seed
through :func:`derive_seed`. A stream is addressed by the root seed plus a
path of component names and indices, e.g. ``derive_seed(seed, "xi", 3, 17)``
for the 17th parameter sample of iteration 3. The derivation is a SHA-256
hash of the textual path, so it is independent of platform, process, and
call order; parallel workers can derive their own streams and produce
results identical to a serial run.

Generators are built on the Philox counter-based bit generator, keyed with
the derived 128-bit value.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "make_rng"]


def derive_seed(root: int, *path: int | str) -> int:
    """Derive a 128-bit child seed from a root seed and a stream path.

    Parameters
    ----------
    root:
        Root seed (any Python int).
    path:
        Component names and indices identifying the stream, e.g.
        ``("rollout", 4)``. Elements are folded into the hash as text with
        a separator, so ``("ab", 1)`` and ``("a", "b1")`` differ.
    """
    h = hashlib.sha256()
    h.update(str(int(root)).encode("ascii"))
    for part in path:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:16], "little")


def make_rng(root: int, *path: int | str) -> np.random.Generator:
    """Return a Generator on an independent Philox stream for this path."""
    return np.random.Generator(np.random.Philox(key=derive_seed(root, *path)))
