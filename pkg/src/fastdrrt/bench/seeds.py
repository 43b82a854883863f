"""Seed splitting: ``seed_k = mix(master XOR k)`` with the SplitMix64 finalizer as the mixing permutation."""

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, k: int) -> int:
    return splitmix64((int(master) ^ int(k)) & _MASK)
