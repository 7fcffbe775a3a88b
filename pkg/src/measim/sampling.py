"""Random states, effects, POVMs and instruments used by the randomized suites."""

import numpy as np
from scipy.stats import unitary_group

from measim.qcore import hermitize, psd_sqrt_and_pinv_sqrt


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(d: int, k: int, rng) -> np.ndarray:
    return (rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))) / np.sqrt(2)


def random_pure_state(d: int, rng) -> np.ndarray:
    """Gaussian amplitudes, normalized."""
    v = ginibre(d, 1, rng)[:, 0]
    return v / np.linalg.norm(v)


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    g = ginibre(d, d if rank is None else rank, rng)
    rho = g @ g.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_unitary(d: int, rng) -> np.ndarray:
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=complex)


def random_effect(d: int, rng) -> np.ndarray:
    """``Φ†Φ / λ_max`` for a Gaussian ``Φ``, so ``0 ≤ Λ ≤ I``."""
    g = ginibre(d, d, rng)
    e = g.conj().T @ g
    return hermitize(e / np.linalg.eigvalsh(hermitize(e))[-1])


def random_projector(d: int, rank: int, rng) -> np.ndarray:
    u = random_unitary(d, rng)[:, :rank]
    return u @ u.conj().T


def random_povm(d: int, k: int, rng, rank: int | None = None) -> list[np.ndarray]:
    """Normalize ``k`` random positive operators by ``S^{-1/2}``."""
    gs = []
    for _ in range(k):
        a = ginibre(d, d if rank is None else rank, rng)
        gs.append(a @ a.conj().T)
    _, inv = psd_sqrt_and_pinv_sqrt(sum(gs))
    return [hermitize(inv @ g @ inv) for g in gs]


def random_kraus_instrument(d: int, k: int, rng, kraus_per_outcome: int = 1) -> list[list[np.ndarray]]:
    """Random instrument from an isometry ``V`` cut into ``k·r`` Kraus blocks."""
    r = kraus_per_outcome
    v = random_unitary(d * k * r, rng)[:, :d]
    blocks = [v[i * d : (i + 1) * d, :] for i in range(k * r)]
    return [blocks[x * r : (x + 1) * r] for x in range(k)]
