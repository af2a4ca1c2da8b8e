"""Deterministic 64-bit PRNG for parameter initialization.

xoshiro256** (Blackman & Vigna) seeded through splitmix64, so identical
seeds produce identical parameters on every platform.
"""

_MASK = (1 << 64) - 1


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** generator; uniform doubles in [0, 1) use the top 53 bits."""

    def __init__(self, seed):
        state = int(seed) & _MASK
        self.s = []
        for _ in range(4):
            state, v = _splitmix64(state)
            self.s.append(v)
        if all(v == 0 for v in self.s):
            self.s[0] = 1  # all-zero state is a fixed point

    def next_u64(self):
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform(self):
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform_in(self, lo, hi):
        return lo + (hi - lo) * self.uniform()
