"""Small shared helpers: seed derivation, canonical JSON, file hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def named_seed(seed: int, name: str) -> int:
    """Stable 64-bit sub-seed for the named random stream of a run."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def canonical_json(obj: object) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, no NaN."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def sha256_hex(path: str | Path) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            hasher.update(block)
    return hasher.hexdigest()
