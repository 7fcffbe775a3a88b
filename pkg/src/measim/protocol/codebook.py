"""Random codebooks drawn from the pruned source distribution."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from measim.cq import _check_pmf
from measim.sampling import rng_from
from measim.tolerances import check_size
from measim.typicality import PrunedDistribution, TypicalSetSpec, pruned, sequence_index


@dataclass(frozen=True)
class Codebook:
    """Entries ``xⁿ(l, m)`` stored as an ``(L, M, n)`` integer array."""

    entries: np.ndarray = field(repr=False)
    pmf: np.ndarray
    n: int
    delta: float
    seed: object
    mass: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.int64)
        if e.ndim != 3 or e.shape[0] < 1 or e.shape[1] < 1 or e.shape[2] != self.n:
            raise ValueError("entries must have shape (L, M, n) with L, M > 0")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def L(self) -> int:
        return int(self.entries.shape[0])

    @property
    def M(self) -> int:
        return int(self.entries.shape[1])

    @property
    def k(self) -> int:
        return int(self.pmf.size)

    def codeword(self, l: int, m: int) -> tuple:
        return tuple(int(s) for s in self.entries[l, m])

    def index(self, l: int, m: int) -> int:
        return sequence_index(self.entries[l, m], self.k)

    def column(self, m: int) -> list[tuple]:
        return [self.codeword(l, m) for l in range(self.L)]

    def counts(self) -> Counter:
        """Occurrences of each distinct codeword over all ``(l, m)``."""
        return Counter(tuple(int(s) for s in row) for row in self.entries.reshape(-1, self.n))

    def column_counts(self, m: int) -> Counter:
        return Counter(self.column(m))


def sample_codebook(
    pmf, n: int, L: int, M: int, delta: float, seed, dist: PrunedDistribution | None = None
) -> Codebook:
    """``L·M`` IID draws from the pruned distribution."""
    p = _check_pmf(pmf)
    if L < 1 or M < 1:
        raise ValueError("L and M must be positive")
    check_size("codebook entries (L*M*n)", L * M * n)
    pd = dist if dist is not None else pruned(TypicalSetSpec(p, n, delta))
    rng = rng_from(seed)
    draws = pd.sample(rng, L * M).reshape(L, M, n)
    return Codebook(draws, p, n, float(delta), seed if not isinstance(seed, np.random.Generator) else None, pd.mass)


def prescribed_sizes(i_xr: float, h_x_r: float, n: int, delta: float) -> tuple[int, int]:
    """``⌈2^{n[I(X;R)+3δ]}⌉`` and ``⌈2^{n[H(X|R)+δ]}⌉``."""
    return (
        int(np.ceil(2.0 ** (n * (i_xr + 3 * delta)) - 1e-9)),
        int(np.ceil(2.0 ** (n * (h_x_r + delta)) - 1e-9)),
    )
