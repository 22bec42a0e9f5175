"""Counter-based splittable random streams.

Every sampling stage in the pipeline draws from a stream keyed by
(seed, purpose), and every random walk from a stream keyed by
(seed, link_index, endpoint, walk_index).  Keys are derived with the
splitmix64 finalizer, so adding a new stage never perturbs existing
streams and walks can be generated in any order (or in parallel) with
bitwise-identical results.

The compiled kernel backend re-implements `_mix64` / the stream update
in C; the two must stay in lockstep (see tests/test_kernels.py).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(x: int) -> int:
    """splitmix64 output function: avalanche a 64-bit value."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX_A) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX_B) & _MASK64
    return x ^ (x >> 31)


def derive_key(seed: int, *parts: int) -> int:
    """Derive a 64-bit stream key from a seed and integer coordinates."""
    h = _mix64((seed + _GOLDEN) & _MASK64)
    for p in parts:
        h = _mix64((h + p + _GOLDEN) & _MASK64)
    return h


def derive_seed(seed: int, *tags: str) -> int:
    """Derive a 64-bit seed for a named sampling purpose.

    Tags are hashed with FNV-1a (Python's hash() is salted per process
    and unusable here) and folded into the key chain.
    """
    h = _mix64((seed + _GOLDEN) & _MASK64)
    for tag in tags:
        t = _FNV_OFFSET
        for b in tag.encode("utf-8"):
            t = ((t ^ b) * _FNV_PRIME) & _MASK64
        h = _mix64((h + t + _GOLDEN) & _MASK64)
    return h


class SplitMix64:
    """Tiny deterministic u64 stream (state += golden; output = mix64)."""

    __slots__ = ("state",)

    def __init__(self, key: int):
        self.state = key & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def next_below(self, n: int) -> int:
        """Uniform draw in [0, n); bias is O(n / 2**64), negligible here."""
        return self.next_u64() % n


def walk_stream(seed: int, link_index: int, endpoint: int, walk: int) -> SplitMix64:
    """Stream for one random walk; pure function of its coordinates."""
    return SplitMix64(derive_key(seed, link_index, endpoint, walk))
