"""Named-stream seed derivation.

All randomness in the pipeline flows from one global seed. Every stage
draws from its own substream, derived from (seed, stream name), so adding
or reordering stages never perturbs another stage's draws.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, name: str) -> int:
    """Stable 64-bit seed for the substream `name` under the global `seed`."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
