"""Counter-based random streams for reproducible particle simulation.

Every random draw in the simulation is a pure function of a 64-bit
stream key and a step counter, so results never depend on scheduling,
batching, or thread count.  The generator is SplitMix64 (Steele, Lea &
Flood, "Fast splittable pseudorandom number generators", OOPSLA 2014):
the counter strides the state by the golden-ratio increment and the
output is the variant-13 avalanche finalizer.  The algorithm is fixed
here on purpose -- outputs for a given (key, counter) pair must stay
stable across platforms and library versions.

Scalar and vectorized entry points implement the identical integer
arithmetic (64-bit wrapping) and must be kept in sync.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# numpy copies of the constants, so array arithmetic stays in uint64
_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UONE = np.uint64(1)

_INV53 = 2.0 ** -53


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (scalar)."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def derive_key(*words: int) -> int:
    """Fold integer words (seed, release ordinal, particle ordinal, ...)
    into a single 64-bit stream key.

    Each word is absorbed with a golden-ratio offset before the
    avalanche mix, so (0, 1) and (1, 0) land on unrelated keys.
    """
    h = 0
    for w in words:
        h = mix64((h + _GOLDEN) ^ (w & _MASK64))
    return h


def draw_bits(key: int, counter: int) -> int:
    """The 64-bit output for draw number `counter` of stream `key`."""
    state = (key + ((counter + 1) & _MASK64) * _GOLDEN) & _MASK64
    return mix64(state)


def unit_from_bits(bits: int) -> float:
    """Map 64 random bits to a float in [0, 1) using the top 53 bits."""
    return (bits >> 11) * _INV53


def draw_unit(key: int, counter: int) -> float:
    return unit_from_bits(draw_bits(key, counter))


def derive_keys_array(seed: int, cell_ordinals: np.ndarray,
                      particle_ordinals: np.ndarray) -> np.ndarray:
    """Vector version of derive_key(seed, k, p) for uint64 arrays."""
    h = np.full(cell_ordinals.shape, _seed_word(seed), dtype=np.uint64)
    for w in (cell_ordinals.astype(np.uint64), particle_ordinals.astype(np.uint64)):
        h = _mix64_array((h + _U_GOLDEN) ^ w)
    return h


def draw_unit_array(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vector version of draw_unit; keys uint64, counters any integer dtype.

    Keep the arithmetic bit-identical to draw_bits/unit_from_bits above.
    """
    ctr = counters.astype(np.uint64) + _UONE
    state = keys + ctr * _U_GOLDEN
    bits = _mix64_array(state)
    return (bits >> _U11).astype(np.float64) * _INV53


def _seed_word(seed: int) -> np.uint64:
    # first absorption round of derive_key, done once for the scalar seed
    return np.uint64(mix64(_GOLDEN ^ (seed & _MASK64)))


def _mix64_array(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> _U30)) * _U_MIX1
    x = (x ^ (x >> _U27)) * _U_MIX2
    return x ^ (x >> _U31)


class CounterStream:
    """A single named stream: scalar draws addressed by step counter."""

    __slots__ = ("key",)

    def __init__(self, key: int):
        self.key = key & _MASK64

    @classmethod
    def for_particle(cls, seed: int, cell_ordinal: int, particle_ordinal: int) -> "CounterStream":
        return cls(derive_key(seed, cell_ordinal, particle_ordinal))

    def unit(self, counter: int) -> float:
        """Uniform float in [0, 1) for the given step counter."""
        return draw_unit(self.key, counter)

    def uniform(self, counter: int, lo: float, hi: float) -> float:
        return lo + self.unit(counter) * (hi - lo)
