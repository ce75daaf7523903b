"""Deterministic, portable random number generation.

All randomness in the toolkit flows through :class:`SplitMix64`, a 64-bit
counter-based generator.  Its update function (documented in the README) is

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

which is pure integer arithmetic, so the integer stream is identical on any
platform.  Floats are derived deterministically from that stream.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# FNV-1a 64-bit, used to fold string salts into seeds.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *salts: int | str) -> int:
    """Derive an independent child seed from ``seed`` and a salt path.

    Successive salts are folded in with the splitmix finalizer so that e.g.
    ``derive_seed(s, "epoch", 3)`` and ``derive_seed(s, "init")`` give
    unrelated streams.
    """
    z = _mix(seed & _MASK64)
    for salt in salts:
        if isinstance(salt, str):
            salt = _fnv1a(salt.encode("utf-8"))
        z = _mix((z + _GAMMA + (salt & _MASK64)) & _MASK64)
    return z


class SplitMix64:
    """Counter-based 64-bit generator with a specified update function."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform()

    def normal(self) -> float:
        """Standard normal via Box-Muller on the uniform stream."""
        if self._spare_gauss is not None:
            value = self._spare_gauss
            self._spare_gauss = None
            return value
        # Shift into (0, 1] so log() is always defined.
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_gauss = radius * math.sin(theta)
        return radius * math.cos(theta)

    def next_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = _MASK64 - (_MASK64 + 1) % bound
        while True:
            value = self.next_u64()
            if value <= limit:
                return value % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def stable_token_hash(token: str, seed: int) -> int:
    """Deterministic 64-bit hash of a token, independent of PYTHONHASHSEED."""
    return _mix((derive_seed(seed) + _fnv1a(token.encode("utf-8"))) & _MASK64)
