"""Dense quantum primitives: validated states, layouts, partial trace,
purification, norms and entropies (all logarithms base 2)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from measim import tolerances as tol
from measim.errors import BadLayout, DimMismatch, InvalidOperator, InvalidState, NotPsd

ArrayLike = Union[np.ndarray, Sequence]


def as_operator(a) -> np.ndarray:
    """Return ``a`` as a square, finite complex matrix."""
    if isinstance(a, DensityOperator):
        return a.op
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidOperator(f"operator must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidOperator("operator has non-finite entries")
    return arr


def spectral_norm(a) -> float:
    a = as_operator(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_defect(a) -> float:
    """Spectral-norm distance from Hermiticity, relative to ``‖a‖``."""
    a = as_operator(a)
    scale = max(spectral_norm(a), 1.0)
    return float(np.linalg.norm(a - a.conj().T, 2)) / scale


def is_hermitian(a, atol: float = tol.TOL_HERM) -> bool:
    return hermitian_defect(a) <= atol


def hermitize(a) -> np.ndarray:
    a = as_operator(a)
    return 0.5 * (a + a.conj().T)


def _psd_eigvals(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian PSD matrix with small negatives clamped."""
    w = np.linalg.eigvalsh(hermitize(a))
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1.0)
    if w.size and w[0] < -tol.TOL_PSD * scale:
        raise NotPsd(f"eigenvalue {w[0]:.3e} below -tol_psd")
    return np.clip(w, 0.0, None)


def is_psd(a, atol: float = tol.TOL_PSD) -> bool:
    a = as_operator(a)
    if not is_hermitian(a):
        return False
    w = np.linalg.eigvalsh(hermitize(a))
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1.0)
    return bool(w.size == 0 or w[0] >= -atol * scale)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its first nonzero component is real positive."""
    mags = np.abs(v)
    big = np.flatnonzero(mags > 1e-12 * max(float(mags.max()), 1e-300))
    if big.size == 0:
        return v
    c = v[big[0]]
    return v * (np.conj(c) / abs(c))


def canonical_eigh(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs sorted by descending eigenvalue with a fixed phase convention.

    Eigenvalues equal within ``DEGENERACY_TOL`` keep the solver's order, so the
    result is reproducible for a deterministic eigensolver.  Each eigenvector
    has its first nonzero component real and positive.
    """
    a = hermitize(as_operator(a))
    w, v = np.linalg.eigh(a)
    d = w.size
    clusters: list[list[int]] = []
    for i in range(d):
        if clusters and abs(w[i] - w[clusters[-1][0]]) <= tol.DEGENERACY_TOL * max(1.0, abs(w[i])):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    order = [i for cl in reversed(clusters) for i in cl]
    w = w[order]
    v = v[:, order]
    for j in range(d):
        v[:, j] = _fix_phase(v[:, j])
    return w, v


@dataclass(frozen=True)
class DensityOperator:
    """Validated density operator: Hermitian, PSD and unit trace."""

    op: np.ndarray

    def __post_init__(self):
        try:
            arr = as_operator(self.op)
        except InvalidOperator as exc:
            raise InvalidState(str(exc)) from exc
        if not is_hermitian(arr):
            raise InvalidState("density operator is not Hermitian")
        w = np.linalg.eigvalsh(hermitize(arr))
        scale = max(float(np.max(np.abs(w))), 1.0)
        if w[0] < -tol.TOL_PSD * scale:
            raise InvalidState(f"density operator has eigenvalue {w[0]:.3e}")
        tr = float(np.real(np.trace(arr)))
        if abs(tr - 1.0) > tol.TOL_TRACE:
            raise InvalidState(f"density operator has trace {tr!r}")
        arr = hermitize(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "op", arr)

    @property
    def dim(self) -> int:
        return self.op.shape[0]


def as_density(rho) -> np.ndarray:
    """Validate ``rho`` as a density operator and return its matrix."""
    if isinstance(rho, DensityOperator):
        return rho.op
    return DensityOperator(rho).op


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors with their labels."""

    dims: tuple
    labels: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(s) for s in self.labels)
        if len(dims) != len(labels):
            raise BadLayout("dims and labels differ in length")
        if any(d < 1 for d in dims):
            raise BadLayout("factor dimensions must be positive")
        if len(set(labels)) != len(labels):
            raise BadLayout(f"duplicate labels in {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise BadLayout(f"unknown label {label!r}; layout has {self.labels}") from None

    def group(self, spec) -> tuple:
        """Resolve a label group given as a label, a string of one-letter
        labels, or an iterable of labels."""
        if isinstance(spec, str):
            if spec in self.labels:
                items = [spec]
            else:
                items = list(spec)
        else:
            items = list(spec)
        for s in items:
            self.index(s)
        if len(set(items)) != len(items):
            raise BadLayout(f"repeated label in group {spec!r}")
        return tuple(s for s in self.labels if s in items)

    def sub(self, keep) -> "SystemLayout":
        keep = self.group(keep)
        return SystemLayout(tuple(self.dims[self.index(s)] for s in keep), keep)

    def check(self, op: np.ndarray) -> None:
        if op.shape[0] != self.dim:
            raise DimMismatch(f"operator dim {op.shape[0]} != layout dim {self.dim}")


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    layout: SystemLayout

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise InvalidState("non-finite amplitudes")
        if abs(np.linalg.norm(v) - 1.0) > tol.TOL_NORM:
            raise InvalidState(f"state norm {np.linalg.norm(v)!r} is not 1")
        if v.size != self.layout.dim:
            raise DimMismatch("amplitude count does not match layout")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for a in ops:
        out = np.kron(out, a)
    return out


def tensor_power(a: np.ndarray, n: int) -> np.ndarray:
    return kron_all([np.asarray(a, dtype=complex)] * n)


def trace_norm(a) -> float:
    """Sum of singular values; eigenvalue route for Hermitian input."""
    a = as_operator(a)
    if a.size == 0:
        return 0.0
    if np.allclose(a, a.conj().T, rtol=0.0, atol=1e-13 * max(1.0, float(np.abs(a).max()))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(a)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def trace_distance(rho, sigma) -> float:
    """``‖ρ − σ‖₁`` (no factor one half)."""
    r = as_density(rho)
    s = as_density(sigma)
    if r.shape != s.shape:
        raise DimMismatch(f"dims {r.shape[0]} and {s.shape[0]} differ")
    # fixed argument order makes the result exactly symmetric
    if r.tobytes() > s.tobytes():
        r, s = s, r
    return trace_norm(r - s)


def partial_trace(op, layout: SystemLayout, keep) -> np.ndarray:
    """Reduced operator on the factors in ``keep`` (kept in layout order)."""
    op = as_operator(op)
    layout.check(op)
    kept = layout.group(keep)
    k = len(layout.dims)
    t = op.reshape(layout.dims + layout.dims)
    keep_idx = [layout.index(s) for s in kept]
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * k > len(letters):
        raise BadLayout("too many factors")
    row = list(letters[:k])
    col = list(letters[k : 2 * k])
    for i in range(k):
        if i not in keep_idx:
            col[i] = row[i]
    out = "".join(row[i] for i in keep_idx) + "".join(col[i] for i in keep_idx)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([layout.dims[i] for i in keep_idx])) if keep_idx else 1
    return red.reshape(d, d)


def purification_coefficients(rho) -> np.ndarray:
    """Coefficient matrix ``Ψ[r, a]`` of the canonical purification."""
    r = as_density(rho)
    w, v = canonical_eigh(r)
    w = np.clip(w, 0.0, None)
    return np.sqrt(w)[:, None] * v.T


def canonical_purification(rho) -> PureState:
    """``Σ_x √λ_x |x⟩^R |v_x⟩^A`` with eigenpairs from :func:`canonical_eigh`."""
    r = as_density(rho)
    psi = purification_coefficients(r)
    d = r.shape[0]
    vec = psi.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    return PureState(vec, SystemLayout((d, d), ("R", "A")))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def binary_entropy(e: float) -> float:
    """H₂ clamped so that ε ∉ (0, 1) gives 0."""
    if e <= 0.0 or e >= 1.0:
        return 0.0
    return shannon_entropy([e, 1.0 - e])


def von_neumann_entropy(rho) -> float:
    """``−Σ λ log₂ λ`` with eigenvalues clamped to [0, 1]."""
    a = as_operator(rho)
    w = np.clip(_psd_eigvals(a), 0.0, 1.0)
    return shannon_entropy(w)


def entropy(state, layout: SystemLayout, group) -> float:
    labels = layout.group(group)
    if not labels:
        return 0.0
    return von_neumann_entropy(partial_trace(state, layout, labels))


def _disjoint(layout: SystemLayout, *groups) -> list[tuple]:
    resolved = [layout.group(g) for g in groups]
    seen: set = set()
    for g in resolved:
        if seen & set(g):
            raise BadLayout(f"label groups overlap: {resolved}")
        seen |= set(g)
    return resolved


def conditional_entropy(state, layout: SystemLayout, a, b) -> float:
    a, b = _disjoint(layout, a, b)
    return entropy(state, layout, a + b) - entropy(state, layout, b)


def mutual_information(state, layout: SystemLayout, a, b) -> float:
    a, b = _disjoint(layout, a, b)
    return entropy(state, layout, a) + entropy(state, layout, b) - entropy(state, layout, a + b)


def conditional_mutual_information(state, layout: SystemLayout, a, b, c) -> float:
    a, b, c = _disjoint(layout, a, b, c)
    return (
        entropy(state, layout, a + c)
        + entropy(state, layout, b + c)
        - entropy(state, layout, a + b + c)
        - entropy(state, layout, c)
    )


def entropy_functionals(state, layout: SystemLayout, requests: Iterable[tuple]) -> dict:
    """Evaluate a batch of entropic quantities.

    Each request is ``("H", S)``, ``("H|", S, T)``, ``("I", S, T)`` or
    ``("I|", S, T, U)``; the result maps a readable key such as
    ``"I(X;R|B)"`` to its value in bits.
    """
    op = as_operator(state)
    layout.check(op)
    out = {}
    for req in requests:
        kind, *groups = req
        names = ["".join(layout.group(g)) for g in groups]
        if kind == "H":
            out[f"H({names[0]})"] = entropy(op, layout, groups[0])
        elif kind == "H|":
            out[f"H({names[0]}|{names[1]})"] = conditional_entropy(op, layout, *groups)
        elif kind == "I":
            out[f"I({names[0]};{names[1]})"] = mutual_information(op, layout, *groups)
        elif kind == "I|":
            out[f"I({names[0]};{names[1]}|{names[2]})"] = conditional_mutual_information(op, layout, *groups)
        else:
            raise BadLayout(f"unknown entropy request {kind!r}")
    return out


def psd_sqrt_and_pinv_sqrt(op, support_tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``√op`` and the pseudo-inverse square root on eigenvalues above
    ``support_tol`` (default: ``1e-12`` times the largest eigenvalue)."""
    a = as_operator(op)
    if not is_hermitian(a):
        raise NotPsd("operator is not Hermitian")
    w, v = np.linalg.eigh(hermitize(a))
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1.0)
    if w.size and w[0] < -tol.TOL_PSD * scale:
        raise NotPsd(f"eigenvalue {w[0]:.3e} below -tol_psd")
    w = np.clip(w, 0.0, None)
    if support_tol is None:
        support_tol = 1e-12 * (float(w.max()) if w.size else 0.0)
    root = np.sqrt(w)
    inv = np.zeros_like(root)
    keep = w > support_tol
    inv[keep] = 1.0 / root[keep]
    vh = v.conj().T
    return (v * root) @ vh, (v * inv) @ vh


def psd_sqrt(op) -> np.ndarray:
    return psd_sqrt_and_pinv_sqrt(op)[0]
