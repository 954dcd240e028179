"""Counter-based random streams.

Every stochastic component draws from its own Philox stream, keyed by a
hash of (seed, purpose, epoch, batch, ...). Streams are independent of
call order and of any batch-level parallelism, so runs are reproducible
bit for bit from the seed alone.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np


def _philox_from_key(key: np.ndarray) -> np.random.Philox:
    # equivalent to Philox(key=key) but avoids the constructor's discarded
    # os.urandom draw, which dominates stream setup cost on some hosts
    bg = np.random.Philox(seed=0)
    state = bg.state
    state["state"]["key"] = key
    state["state"]["counter"] = np.zeros(4, dtype=np.uint64)
    state["buffer"] = np.zeros(4, dtype=np.uint64)
    state["buffer_pos"] = 4
    state["has_uint32"] = 0
    state["uinteger"] = 0
    bg.state = state
    return bg


def stream(*key_parts: int | str) -> np.random.Generator:
    """Return a fresh Generator keyed by the given path.

    The same key parts always yield the same stream; any change to any
    part yields an unrelated stream.
    """
    tag = "/".join(str(p) for p in key_parts).encode("utf-8")
    digest = hashlib.blake2b(tag, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(_philox_from_key(key))


def thread_cap(default: int = 1) -> int:
    """Upper bound on worker parallelism, from SAFLEX_THREADS.

    All numeric results are required to be independent of this value;
    it only caps how many workers a parallel section may use.
    """
    raw = os.environ.get("SAFLEX_THREADS", "")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"SAFLEX_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"SAFLEX_THREADS must be >= 1, got {n}")
    return n
