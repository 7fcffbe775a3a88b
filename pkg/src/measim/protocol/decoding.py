"""Sequential decoding by binary projective tests ``{Π_i, I − Π_i}``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import polar

from measim.errors import DecodeFailure, DimMismatch
from measim.qcore import hermitize
from measim.sampling import rng_from


@dataclass(frozen=True)
class DecodeResult:
    index: int
    state: np.ndarray = field(repr=False)
    outcomes: tuple = ()
    probability: float = 1.0


def _basis(p) -> np.ndarray:
    """Orthonormal basis of a projector's range (objects with ``basis`` pass through)."""
    if hasattr(p, "basis"):
        return np.asarray(p.basis)
    a = np.asarray(p)
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        w, v = np.linalg.eigh(hermitize(a))
        return v[:, w > 0.5]
    return a


def sequential_decode(projectors: Sequence, received, rng=None, recover: bool = True) -> DecodeResult:
    """Apply the tests in order, Born-sampling each binary outcome.

    ``received`` is a state vector or a density operator. Stops at the first
    "yes". On success the recovery ``U†`` from the left polar decomposition
    ``Π_j Π̂_{j−1}⋯Π̂_1 = U √Θ_j`` is applied. Raises DecodeFailure when every
    test answers "no".
    """
    g = rng_from(rng)
    state = np.array(received, dtype=complex)
    pure = state.ndim == 1
    dim = state.shape[0]
    if pure:
        state = state / np.linalg.norm(state)
    acc = np.eye(dim, dtype=complex) if recover else None
    outcomes = []
    prob = 1.0
    for j, p in enumerate(projectors):
        q = _basis(p)
        if q.shape[0] != dim:
            raise DimMismatch(f"test {j} has dimension {q.shape[0]}, state has {dim}")
        if pure:
            c = q.conj().T @ state
            yes_vec = q @ c
            py = float(np.vdot(yes_vec, yes_vec).real)
        else:
            c = q.conj().T @ state @ q
            py = float(np.real(np.trace(c)))
        py = min(max(py, 0.0), 1.0)
        hit = bool(g.random() < py)
        outcomes.append(hit)
        if hit:
            prob *= py
            if pure:
                state = yes_vec / np.sqrt(py)
            else:
                state = hermitize(q @ c @ q.conj().T) / py
            if recover:
                acc = (q @ q.conj().T) @ acc
                u = polar(acc, side="right")[0]
                if pure:
                    state = u.conj().T @ state
                else:
                    state = hermitize(u.conj().T @ state @ u)
            return DecodeResult(j, state, tuple(outcomes), prob)
        prob *= 1.0 - py
        if pure:
            no_vec = state - yes_vec
            nrm = np.linalg.norm(no_vec)
            state = no_vec / nrm if nrm > 0 else no_vec
        else:
            pr = q @ q.conj().T
            comp = np.eye(dim) - pr
            state = hermitize(comp @ state @ comp)
            tr = float(np.real(np.trace(state)))
            state = state / tr if tr > 0 else state
        if recover:
            acc = (np.eye(dim) - q @ q.conj().T) @ acc
    raise DecodeFailure(tuple(outcomes))
