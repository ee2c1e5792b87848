"""Small shared helpers: seed derivation and exact JSON file I/O."""

from __future__ import annotations

import json
from pathlib import Path

_MIX = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Mix integer parts into one stable 63-bit seed (splitmix64-style).

    Pure integer arithmetic, so derived seeds never depend on numpy
    internals and stay identical across versions and platforms.
    """
    h = _MIX
    for part in parts:
        h = (h ^ (int(part) & _MASK)) & _MASK
        h = (h * _MUL1) & _MASK
        h ^= h >> 30
        h = (h * _MUL2) & _MASK
        h ^= h >> 27
    return h >> 1


def write_json(payload, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)
