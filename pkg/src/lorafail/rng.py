"""Seeded random streams on the Philox4x64-10 counter-based generator.

Only raw 64-bit words come from numpy's ``Philox``; every transform to a
float or a distribution is done here with plain formulas so the sequence is
reproducible outside numpy:

* uniform: top 53 bits of the word, ``(w >> 11) * 2**-53``, in ``[0, 1)``
* exponential: ``-mean * log1p(-u)``
* normal: Box-Muller on two uniforms, cosine branch only
* permutation: Fisher-Yates, ``j = floor(u * (i + 1))`` for ``i = n-1 .. 1``

A stream is keyed by ``(seed, stream_id)`` with the counter starting at 0.
"""

from __future__ import annotations

import math

from numpy.random import Philox

ALGORITHM = "philox4x64-10; key=(seed, stream_id); counter from 0; uniform=(w>>11)*2^-53"

_MASK64 = (1 << 64) - 1
_BLOCK = 4096


class Stream:
    UPLINK_HOPS = 1
    DOWNLINK_ARRIVALS = 2
    DOWNLINK_HOPS = 3
    DROPS = 4
    FAILURES = 5
    SHUFFLE = 6

    def __init__(self, seed: int, stream_id: int):
        self._gen = Philox(key=[int(seed) & _MASK64, int(stream_id) & _MASK64], counter=0)
        self._buf: list[int] = []
        self._pos = 0

    def word(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._gen.random_raw(_BLOCK).tolist()
            self._pos = 0
        w = self._buf[self._pos]
        self._pos += 1
        return w

    def uniform(self) -> float:
        return (self.word() >> 11) * (1.0 / 9007199254740992.0)

    def exponential(self, mean: float) -> float:
        return -mean * math.log1p(-self.uniform())

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)

    def bernoulli(self, p: float) -> int:
        return int(self.uniform() < p)

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = int(self.uniform() * (i + 1))
            items[i], items[j] = items[j], items[i]
        return items
