"""Two-universal hashing ``h(x) = ((a·x + b) mod p) mod K``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from measim.errors import BadRange
from measim.sampling import rng_from

PRIME = 2**31 - 1
COLLISION_CONSTANT = 2.0


@dataclass(frozen=True)
class HashFunction:
    a: int
    b: int
    K: int
    domain: int
    prime: int = PRIME

    def __post_init__(self):
        if self.K < 1:
            raise BadRange("range size must be positive")
        if self.K > self.domain:
            raise BadRange(f"range size {self.K} exceeds domain size {self.domain}")
        if self.domain > self.prime:
            raise BadRange(f"domain {self.domain} exceeds the hash prime {self.prime}")
        if not (1 <= self.a < self.prime and 0 <= self.b < self.prime):
            raise BadRange("hash parameters out of range")

    def __call__(self, x: int) -> int:
        return ((self.a * int(x) + self.b) % self.prime) % self.K

    def many(self, xs) -> np.ndarray:
        x = np.asarray(xs, dtype=np.int64)
        return ((self.a * x + self.b) % self.prime) % self.K

    @property
    def collision_bound(self) -> float:
        return COLLISION_CONSTANT / self.K


def two_universal_hash(seed, domain_bits: int, K: int, a: int | None = None, b: int | None = None) -> HashFunction:
    """Draw ``(a, b)`` from ``seed`` unless given; the domain is ``[0, 2^bits)``."""
    domain = 2 ** int(domain_bits)
    if K > domain:
        raise BadRange(f"range size {K} exceeds domain size {domain}")
    rng = rng_from(seed)
    a = int(rng.integers(1, PRIME)) if a is None else int(a)
    b = int(rng.integers(0, PRIME)) if b is None else int(b)
    return HashFunction(a, b, int(K), domain)


def bits_for(size: int) -> int:
    return max(int(np.ceil(np.log2(max(size, 1)))), 0)


def bins_for_rate(n: int, rate: float, domain_size: int) -> int:
    """``K = ⌈2^{nR}⌉`` clamped to the domain size."""
    if rate <= 0:
        return 1
    k = 2.0 ** (n * rate)
    if k >= domain_size:
        return int(domain_size)
    return max(int(np.ceil(k - 1e-9)), 1)
