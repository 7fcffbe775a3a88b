"""Measurement models and the classical-quantum states they induce."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from measim import tolerances as tol
from measim.errors import (
    BadPmf,
    BadRefinement,
    DimMismatch,
    InvalidInstrument,
    InvalidPovm,
    InvalidState,
    Unsupported,
)
from measim.qcore import (
    SystemLayout,
    as_density,
    as_operator,
    canonical_eigh,
    canonical_purification,
    hermitize,
    is_psd,
    kron_all,
    mutual_information,
    partial_trace,
    spectral_norm,
    von_neumann_entropy,
)
from measim.tolerances import check_size


def _default_labels(k: int) -> tuple:
    return tuple(str(i) for i in range(k))


def _check_pmf(p, name: str = "pmf") -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < -tol.TOL_TRACE):
        raise BadPmf(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol.TOL_TRACE:
        raise BadPmf(f"{name} sums to {p.sum()!r}")
    return np.clip(p, 0.0, None)


@dataclass(frozen=True)
class Povm:
    """Ordered list of PSD elements summing to the identity."""

    elements: tuple
    labels: tuple = ()

    def __post_init__(self):
        els = tuple(hermitize(as_operator(e)) for e in self.elements)
        if not els:
            raise InvalidPovm("a POVM needs at least one element")
        d = els[0].shape[0]
        if any(e.shape != (d, d) for e in els):
            raise DimMismatch("POVM elements have different dimensions")
        labels = tuple(self.labels) if self.labels else _default_labels(len(els))
        if len(labels) != len(els):
            raise InvalidPovm("label count does not match element count")
        for i, e in enumerate(els):
            if not is_psd(e):
                raise InvalidPovm(f"element {labels[i]!r} is not PSD")
        total = sum(els)
        if spectral_norm(total - np.eye(d)) > tol.TOL_COMPLETE:
            raise InvalidPovm(f"elements sum to I only within {spectral_norm(total - np.eye(d)):.2e}")
        for e in els:
            e.setflags(write=False)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class QuantumInstrument:
    """Kraus families ``{N_{x,y}}_y`` indexed by the classical outcome x."""

    kraus: tuple
    labels: tuple = ()

    def __post_init__(self):
        fams = tuple(tuple(np.asarray(k, dtype=complex) for k in fam) for fam in self.kraus)
        if not fams or any(len(f) == 0 for f in fams):
            raise InvalidInstrument("every outcome needs at least one Kraus operator")
        d_in = fams[0][0].shape[1]
        d_out = fams[0][0].shape[0]
        if any(k.shape != (d_out, d_in) for f in fams for k in f):
            raise DimMismatch("Kraus operators have inconsistent shapes")
        labels = tuple(self.labels) if self.labels else _default_labels(len(fams))
        if len(labels) != len(fams):
            raise InvalidInstrument("label count does not match outcome count")
        eye = np.eye(d_in)
        total = np.zeros((d_in, d_in), dtype=complex)
        for x, fam in zip(labels, fams):
            e = sum(k.conj().T @ k for k in fam)
            if np.linalg.eigvalsh(hermitize(e))[-1] > 1.0 + tol.TOL_COMPLETE:
                raise InvalidInstrument(f"family {x!r} is not trace non-increasing")
            total = total + e
        if spectral_norm(total - eye) > tol.TOL_COMPLETE:
            raise InvalidInstrument("instrument is not trace preserving")
        object.__setattr__(self, "kraus", fams)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.kraus[0][0].shape[1]

    @property
    def single_kraus(self) -> bool:
        return all(len(f) == 1 for f in self.kraus)

    def povm(self) -> Povm:
        """The induced POVM ``Λ_x = Σ_y N_{x,y}† N_{x,y}``."""
        return Povm(tuple(sum(k.conj().T @ k for k in fam) for fam in self.kraus), self.labels)

    def apply(self, x: int, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus[x])


@dataclass(frozen=True)
class Ensemble:
    pmf: np.ndarray
    states: tuple

    def __post_init__(self):
        p = _check_pmf(self.pmf)
        states = tuple(as_density(s) for s in self.states)
        if len(states) != p.size:
            raise DimMismatch("pmf and state list differ in length")
        d = states[0].shape[0]
        if any(s.shape != (d, d) for s in states):
            raise DimMismatch("ensemble states have different dimensions")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    def average(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.pmf, self.states))


@dataclass(frozen=True)
class ClassicalQuantumState:
    """Blocks ``(x, p(x), θ_x)`` with unit-trace θ_x (zero when p(x) = 0)."""

    blocks: tuple
    layout: SystemLayout | None = None

    def __post_init__(self):
        blocks = []
        for label, w, op in self.blocks:
            op = hermitize(as_operator(op))
            w = float(w)
            if w < -tol.TOL_TRACE:
                raise InvalidState(f"negative weight for block {label!r}")
            w = max(w, 0.0)
            if w > 0.0:
                as_density(op)
            blocks.append((label, w, op))
        if not blocks:
            raise InvalidState("no blocks")
        if abs(sum(b[1] for b in blocks) - 1.0) > tol.TOL_TRACE:
            raise InvalidState("block weights do not sum to 1")
        d = blocks[0][2].shape[0]
        if any(b[2].shape != (d, d) for b in blocks):
            raise DimMismatch("blocks have different dimensions")
        layout = self.layout if self.layout is not None else SystemLayout((d,), ("Q",))
        if layout.dim != d:
            raise DimMismatch("layout does not match block dimension")
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "layout", layout)

    @property
    def labels(self) -> tuple:
        return tuple(b[0] for b in self.blocks)

    @property
    def weights(self) -> np.ndarray:
        return np.array([b[1] for b in self.blocks])

    @property
    def states(self) -> tuple:
        return tuple(b[2] for b in self.blocks)

    def joint(self, x_label: str = "X") -> tuple[np.ndarray, SystemLayout]:
        """Block-diagonal operator ``Σ p(x) |x⟩⟨x| ⊗ θ_x`` with X first."""
        entries = [((i,), w * op) for i, (_, w, op) in enumerate(self.blocks)]
        return cq_joint(entries, (len(self.blocks),), (x_label,), self.layout)


def cq_joint(entries, classical_dims: Sequence[int], classical_labels: Sequence[str], quantum_layout: SystemLayout):
    """Assemble ``Σ |i⟩⟨i| ⊗ A_i`` over classical index tuples ``i``."""
    dq = quantum_layout.dim
    dc = int(np.prod(classical_dims))
    out = np.zeros((dc * dq, dc * dq), dtype=complex)
    for idx, a in entries:
        flat = int(np.ravel_multi_index(tuple(idx), tuple(classical_dims)))
        out[flat * dq : (flat + 1) * dq, flat * dq : (flat + 1) * dq] += a
    layout = SystemLayout(tuple(classical_dims) + quantum_layout.dims, tuple(classical_labels) + quantum_layout.labels)
    return out, layout


@dataclass(frozen=True)
class Refinement:
    """Internal POVM ``{Ξ_w}`` (or trace non-increasing Kraus maps ``{M_w}``)
    followed by classical post-processing ``p(x|w)``, stored as a
    ``|X| × |W|`` column-stochastic matrix."""

    internal: object
    post: np.ndarray
    x_labels: tuple = ()

    def __post_init__(self):
        post = np.asarray(self.post, dtype=float)
        if isinstance(self.internal, QuantumInstrument):
            nw = len(self.internal.kraus)
        elif isinstance(self.internal, Povm):
            nw = len(self.internal)
        else:
            raise BadRefinement("internal part must be a Povm or QuantumInstrument")
        if post.ndim != 2 or post.shape[1] != nw:
            raise BadRefinement(f"post-processing must be |X| x {nw}")
        if np.any(post < -tol.TOL_REFINE) or np.any(np.abs(post.sum(axis=0) - 1.0) > tol.TOL_REFINE):
            raise BadRefinement("post-processing columns must be probability vectors")
        labels = tuple(self.x_labels) if self.x_labels else _default_labels(post.shape[0])
        if len(labels) != post.shape[0]:
            raise BadRefinement("x label count does not match post-processing rows")
        post = np.clip(post, 0.0, None)
        post.setflags(write=False)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "x_labels", labels)

    @property
    def internal_povm(self) -> Povm:
        if isinstance(self.internal, QuantumInstrument):
            return self.internal.povm()
        return self.internal


def born_distribution(povm: Povm, rho) -> np.ndarray:
    r = as_density(rho)
    if r.shape[0] != povm.dim:
        raise DimMismatch(f"state dim {r.shape[0]} != POVM dim {povm.dim}")
    p = np.array([float(np.real(np.trace(e @ r))) for e in povm.elements])
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) < tol.TOL_TRACE:
        p = p / s
    return p


def post_measurement_cq(povm: Povm, rho_multi, layout: SystemLayout, measured: str) -> ClassicalQuantumState:
    """Measure factor ``measured`` of a multipartite state and keep the rest."""
    r = as_density(rho_multi)
    layout.check(r)
    i = layout.index(measured)
    if layout.dims[i] != povm.dim:
        raise DimMismatch(f"factor {measured!r} has dim {layout.dims[i]}, POVM has {povm.dim}")
    rest = tuple(s for s in layout.labels if s != measured)
    rest_layout = layout.sub(rest) if rest else SystemLayout((1,), ("Q",))
    blocks = []
    for label, e in zip(povm.labels, povm.elements):
        ops = [np.eye(d) for d in layout.dims]
        ops[i] = e
        big = kron_all(ops)
        sub = big @ r
        if rest:
            red = partial_trace(sub, layout, rest)
        else:
            red = np.array([[np.trace(sub)]])
        red = hermitize(red)
        w = max(float(np.real(np.trace(red))), 0.0)
        blocks.append((label, w, red / w if w > 0 else np.zeros_like(red)))
    return _renormalized(blocks, rest_layout)


def _renormalized(blocks, layout) -> ClassicalQuantumState:
    s = sum(b[1] for b in blocks)
    if abs(s - 1.0) < tol.TOL_TRACE:
        blocks = [(x, w / s, op) for x, w, op in blocks]
    return ClassicalQuantumState(tuple(blocks), layout)


def transpose_trick_states(rho, povm: Povm) -> ClassicalQuantumState:
    """Reference blocks ``√ρ Λ_x^T √ρ / p(x)`` in the purification eigenbasis.

    The R factor is indexed by the eigenvectors of ρ, so in R's computational
    basis the block is ``√D (V† Λ_x V)^T √D``.
    """
    r = as_density(rho)
    if r.shape[0] != povm.dim:
        raise DimMismatch(f"state dim {r.shape[0]} != POVM dim {povm.dim}")
    w, v = canonical_eigh(r)
    sq = np.sqrt(np.clip(w, 0.0, None))
    blocks = []
    for label, e in zip(povm.labels, povm.elements):
        m = (v.conj().T @ e @ v).T
        blk = hermitize(sq[:, None] * m * sq[None, :])
        p = max(float(np.real(np.trace(blk))), 0.0)
        blocks.append((label, p, blk / p if p > 0 else np.zeros_like(blk)))
    return _renormalized(blocks, SystemLayout((r.shape[0],), ("R",)))


def measurement_map(povm: Povm) -> Callable:
    """``σ ↦ Σ_x Tr{Λ_x σ} |x⟩⟨x|`` as a cq state with a trivial quantum factor."""

    def apply(sigma) -> ClassicalQuantumState:
        p = born_distribution(povm, sigma)
        one = np.ones((1, 1), dtype=complex)
        blocks = tuple((x, w, one if w > 0 else 0 * one) for x, w in zip(povm.labels, p))
        return ClassicalQuantumState(blocks, SystemLayout((1,), ("Q",)))

    return apply


def tensor_povm(povm: Povm, n: int) -> Povm:
    """Elements ``Λ_{x₁} ⊗ … ⊗ Λ_{xₙ}`` labeled by the label tuple."""
    if n < 1:
        raise ValueError("n must be positive")
    k = len(povm)
    check_size("tensor POVM (|X|^n * d^n)", k**n * povm.dim**n)
    els, labels = [], []
    for seq in itertools.product(range(k), repeat=n):
        els.append(kron_all(povm.elements[i] for i in seq))
        labels.append(tuple(povm.labels[i] for i in seq))
    if n == 1:
        return povm
    return Povm(tuple(els), tuple(labels))


def tensor_elements(elements: Sequence[np.ndarray], n: int) -> list[np.ndarray]:
    """All n-fold tensor products in lexicographic sequence order."""
    k = len(elements)
    dim = elements[0].shape[0]
    check_size("tensor POVM (|X|^n * d^n)", k**n * dim**n)
    return [kron_all(elements[i] for i in seq) for seq in itertools.product(range(k), repeat=n)]


def convex_combine(povms: Sequence[Povm], weights) -> Povm:
    w = _check_pmf(weights, "weights")
    if len(w) != len(povms):
        raise BadPmf("weight count does not match POVM count")
    first = povms[0]
    for p in povms[1:]:
        if len(p) != len(first) or p.dim != first.dim:
            raise DimMismatch("POVMs differ in alphabet size or dimension")
    els = tuple(sum(wi * p.elements[x] for wi, p in zip(w, povms)) for x in range(len(first)))
    return Povm(els, first.labels)


def apply_refinement(r: Refinement) -> Povm:
    xi = r.internal_povm
    if r.post.shape[1] != len(xi):
        raise DimMismatch("post-processing width differs from internal outcome count")
    els = tuple(sum(r.post[x, w] * xi.elements[w] for w in range(len(xi))) for x in range(r.post.shape[0]))
    return Povm(els, r.x_labels)


def trivial_refinement(povm: Povm) -> Refinement:
    """W = X with identity post-processing."""
    return Refinement(povm, np.eye(len(povm)), povm.labels)


def is_rank_one_povm(povm: Povm, rank_tol: float = tol.RANK_TOL) -> bool:
    for e in povm.elements:
        w = np.linalg.eigvalsh(e)
        top = w[-1]
        if top <= 0:
            continue
        if int(np.sum(w > rank_tol * top)) != 1:
            return False
    return True


def instrument_apply(instr: QuantumInstrument, rho) -> ClassicalQuantumState:
    r = as_density(rho)
    if r.shape[0] != instr.dim:
        raise DimMismatch(f"state dim {r.shape[0]} != instrument dim {instr.dim}")
    blocks = []
    for x, label in enumerate(instr.labels):
        out = hermitize(instr.apply(x, r))
        w = max(float(np.real(np.trace(out))), 0.0)
        blocks.append((label, w, out / w if w > 0 else np.zeros_like(out)))
    d_out = instr.kraus[0][0].shape[0]
    return _renormalized(blocks, SystemLayout((d_out,), ("A",)))


def cq_mutual_information(cq: ClassicalQuantumState) -> float:
    """I(X;Q) of a cq state via its block-diagonal joint operator."""
    joint, layout = cq.joint("X")
    return mutual_information(joint, layout, ("X",), tuple(cq.layout.labels))


def random_unitary_tests(instr: QuantumInstrument, rho, atol: float = 1e-8) -> tuple[bool, bool, float]:
    """Run the operator test and the I(X;R) test; returns (op, entropy, I)."""
    if not instr.single_kraus:
        raise Unsupported("random-unitary criterion needs single-Kraus families")
    r = as_density(rho)
    w, v = canonical_eigh(r)
    supp = w > 1e-12 * max(w.max(), 1.0)
    vs = v[:, supp]
    op_ok = True
    for fam in instr.kraus:
        n = fam[0]
        m = (vs.conj().T @ (n.conj().T @ n) @ vs).T
        c = np.trace(m) / m.shape[0]
        if spectral_norm(m - c * np.eye(m.shape[0])) > atol * max(1.0, spectral_norm(m)):
            op_ok = False
            break
    info = cq_mutual_information(transpose_trick_states(r, instr.povm()))
    return op_ok, info < 1e-9, info


def is_random_unitary_kraus(instr: QuantumInstrument, rho) -> bool:
    """True iff every ``(N_x† N_x)^T`` is proportional to I on the support of ρ."""
    return random_unitary_tests(instr, rho)[0]


def groenewold_gain(rho, instr: QuantumInstrument) -> float:
    """``H(ρ) − Σ_x p(x) H(N_x(ρ)/p(x))`` in bits."""
    r = as_density(rho)
    cq = instrument_apply(instr, r)
    avg = sum(w * von_neumann_entropy(s) for _, w, s in cq.blocks if w > 0)
    return von_neumann_entropy(r) - avg


def purified_reference_states(rho, povm: Povm) -> ClassicalQuantumState:
    """Same blocks as :func:`transpose_trick_states`, via an explicit partial
    trace over the canonical purification."""
    phi = canonical_purification(rho)
    return post_measurement_cq(povm, phi.density(), phi.layout, "A")
