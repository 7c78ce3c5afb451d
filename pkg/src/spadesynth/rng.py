"""Counter-based SplitMix64 random stream.

Every random draw in the package (weights, noise, scene geometry, batch
sampling) comes from this generator so runs are reproducible bit-for-bit
and the full RNG state fits in two unsigned 64-bit integers.

Update equations (all arithmetic mod 2^64):

    state(i) = seed + (i + 1) * 0x9E3779B97F4A7C15
    z = state(i)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output(i) = z ^ (z >> 31)

`i` is a draw counter, so the i-th output is a pure function of (seed, i)
and blocks of outputs vectorize. Doubles are built as (out >> 11) * 2^-53,
normals via the Box-Muller transform.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_INV_2_53 = float(2.0**-53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Seedable counter-based PRNG; state is (seed, counter)."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.counter = np.uint64(counter & 0xFFFFFFFFFFFFFFFF)

    def raw(self, n: int) -> np.ndarray:
        """Next n raw uint64 outputs, advancing the counter by n."""
        idx = self.counter + np.uint64(1) + np.arange(n, dtype=np.uint64)
        self.counter = (self.counter + np.uint64(n)) & _MASK
        with np.errstate(over="ignore"):
            return _mix(self.seed + idx * GAMMA)

    def uniform(self, size=None) -> np.ndarray | float:
        """Doubles in [0, 1)."""
        n = int(np.prod(size)) if size is not None else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size) -> np.ndarray:
        """Standard normals via Box-Muller on uniform pairs."""
        n = int(np.prod(size))
        m = (n + 1) // 2
        u1 = 1.0 - (self.raw(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(size)

    def integers(self, bound: int, size=None) -> np.ndarray | int:
        """Ints in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        u = self.raw(int(np.prod(size)) if size is not None else 1)
        v = (u % np.uint64(bound)).astype(np.int64)
        if size is None:
            return int(v[0])
        return v.reshape(size)

    def spawn(self, tag: int | str) -> "SplitMix64":
        """Independent child stream derived deterministically from a tag.

        Does not advance this stream's counter. String tags are folded to 64
        bits with FNV-1a so module names can key their own substreams.
        """
        if isinstance(tag, str):
            h = np.uint64(0xCBF29CE484222325)
            with np.errstate(over="ignore"):
                for b in tag.encode():
                    h = (h ^ np.uint64(b)) * np.uint64(0x100000001B3)
            tag = int(h)
        with np.errstate(over="ignore"):
            child = _mix(self.seed ^ _mix(np.uint64(tag & 0xFFFFFFFFFFFFFFFF) + GAMMA))
        return SplitMix64(int(child))

    def state(self) -> tuple[int, int]:
        return int(self.seed), int(self.counter)

    def set_state(self, state: tuple[int, int]) -> None:
        self.seed = np.uint64(state[0])
        self.counter = np.uint64(state[1])
