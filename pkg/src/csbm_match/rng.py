"""Named random streams.

Every consumer of randomness asks for a stream by ``(seed, role)``.  The
stream is a Philox4x64 counter-based generator keyed by a
:class:`numpy.random.SeedSequence` whose spawn key is the CRC-32 of the role
name, so each role draws from an independent substream and adding a new role
never perturbs an existing one.

Roles used by the library:

=================  ==========================================
``labels``         community labels sigma*
``parent``         parent-graph edge draws
``subsample1``     edge retention for G1
``subsample2``     edge retention for G2'
``permutation``    hidden relabelling pi*
``coloring-A``     color-coding bank for G1
``coloring-B``     color-coding bank for G2
``partition``      random m-way split in community recovery
``power``          power-iteration start vectors
``seedset``        random subset used as a seed matching
=================  ==========================================
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def role_key(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def stream(seed: int, role: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``role`` under ``seed``.

    ``extra`` integers extend the spawn key (e.g. a part index) so that
    repeated sub-tasks of one role get their own substreams.
    """
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=(role_key(role), *extra))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed, e.g. for ``(base, cell, trial)``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
