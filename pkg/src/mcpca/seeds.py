"""Deterministic 64-bit seed derivation.

Per-trial and per-stream seeds are derived from a single master seed with
the splitmix64 finalizer, so any run is reproducible bit-exactly from
(master_seed, index) regardless of execution order. Constants are the
standard splitmix64 ones:

    gamma = 0x9E3779B97F4A7C15  (golden-ratio increment)
    mix1  = 0xBF58476D1CE4E5B9
    mix2  = 0x94D049BB133111EB

mix64(seed, index) = finalizer(seed + (index + 1) * gamma), all mod 2^64.
"""

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def mix64(seed: int, index: int) -> int:
    """Derive a decorrelated 64-bit seed from (seed, index)."""
    z = (seed + (index + 1) * _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return (z ^ (z >> 31)) & _MASK
