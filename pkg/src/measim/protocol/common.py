"""Helpers shared by the protocol drivers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from measim.qcore import hermitize, kron_all
from measim.tolerances import check_size


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for trial ``trial`` of a run seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def run_trials(fn: Callable[[int], object], trials: int, threads: int = 1) -> list:
    """``[fn(0), …, fn(trials−1)]``, optionally on a thread pool (order kept)."""
    if threads <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def kron_seq(mats: Sequence[np.ndarray], seq: Sequence[int]) -> np.ndarray:
    return kron_all(mats[int(s)] for s in seq)


def lowrank_trace_norm(w: np.ndarray, signs: np.ndarray) -> float:
    """``‖W diag(signs) W†‖₁`` from the small Gram matrix ``W†W``."""
    g = hermitize(w.conj().T @ w)
    ev, vec = np.linalg.eigh(g)
    ev = np.clip(ev, 0.0, None)
    half = (vec * np.sqrt(ev)) @ vec.conj().T
    core = hermitize(half @ np.diag(signs.astype(float)) @ half)
    return float(np.abs(np.linalg.eigvalsh(core)).sum())


def rank_one_difference_norm(a: np.ndarray, b: np.ndarray) -> float:
    """``‖aa† − bb†‖₁ = √((|a|²+|b|²)² − 4|⟨a,b⟩|²)``."""
    na, nb = float(np.vdot(a, a).real), float(np.vdot(b, b).real)
    ov = abs(np.vdot(a, b)) ** 2
    return float(np.sqrt(max((na + nb) ** 2 - 4.0 * ov, 0.0)))


def grouped_tensor_power(op: np.ndarray, dims: Sequence[int], n: int) -> np.ndarray:
    """``op^{⊗n}`` on ``(S₁ⁿ, S₂ⁿ, …)`` instead of ``(S₁S₂…)ⁿ``."""
    dims = tuple(int(d) for d in dims)
    k = len(dims)
    total = int(np.prod(dims)) ** n
    check_size("grouped tensor power", total)
    big = kron_all([op] * n)
    shape = dims * n
    t = big.reshape(shape + shape)
    order = [copy * k + f for f in range(k) for copy in range(n)]
    perm = order + [len(shape) + i for i in order]
    return t.transpose(perm).reshape(total, total)


def grouped_dims(dims: Sequence[int], n: int) -> tuple:
    return tuple(int(d) ** n for d in dims)


def partial_trace_first(op: np.ndarray, d_first: int, d_rest: int, weight: np.ndarray | None = None) -> np.ndarray:
    """``Tr₁{(W ⊗ I) op}`` for a bipartite operator, ``W = I`` when omitted."""
    t = op.reshape(d_first, d_rest, d_first, d_rest)
    if weight is None:
        return np.einsum("ibic->bc", t)
    return np.einsum("ji,ibjc->bc", weight, t)


def multinomial_weight(counts: Sequence[int]) -> int:
    """Number of sequences with the given symbol counts."""
    out = math.factorial(int(sum(counts)))
    for c in counts:
        out //= math.factorial(int(c))
    return out


def type_classes(k: int, n: int):
    """Yield count vectors of length ``k`` summing to ``n``."""
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in type_classes(k - 1, n - first):
            yield (first,) + rest


def representative(counts: Sequence[int]) -> list[int]:
    out: list[int] = []
    for x, c in enumerate(counts):
        out.extend([x] * int(c))
    return out
