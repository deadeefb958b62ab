"""Counter-based 64-bit RNG so generated instances are reproducible anywhere.

The generator is splitmix64. State advances by adding the odd constant
``0x9E3779B97F4A7C15`` modulo 2^64; the k-th output (k >= 1) is
``mix(seed + k * 0x9E3779B97F4A7C15)`` with

    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
            z ^= z >> 27; z *= 0x94D049BB133111EB;
            z ^= z >> 31

(all mod 2^64). Uniform doubles are ``((out >> 11) + 0.5) * 2**-53``, which
lies strictly inside (0, 1).
"""

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_uint64(self):
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        """Uniform double strictly inside (0, 1)."""
        return ((self.next_uint64() >> 11) + 0.5) * 2.0 ** -53
