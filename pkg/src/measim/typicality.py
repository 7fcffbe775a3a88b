"""Strong typicality over finite alphabets and its quantum lifts.

Typicality is inclusive (``|N(x|xⁿ)/n − p(x)| ≤ δ``) and, following the
usual convention for strong typicality, a symbol of probability zero may not
occur at all.  Degenerate eigenvalues (equal within ``DEGENERACY_TOL``) form
one spectral symbol whose probability is the total mass of the eigenspace.

The exponent constant is ``c = Σ_{p(x)>0} log₂(1/p(x))`` (summed over
spectral symbols for states), which makes every bound below hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from measim import tolerances as tol
from measim.cq import Ensemble, _check_pmf
from measim.errors import BadSequence, EmptyTypicalSet, NotPsd
from measim.qcore import as_density, as_operator, canonical_eigh, hermitize, kron_all, shannon_entropy
from measim.sampling import rng_from
from measim.tolerances import check_size


@dataclass(frozen=True)
class TypicalSetSpec:
    pmf: np.ndarray
    n: int
    delta: float

    def __post_init__(self):
        p = _check_pmf(self.pmf)
        if int(self.n) < 1:
            raise ValueError("n must be at least 1")
        if not self.delta >= 0:
            raise ValueError("delta must be nonnegative")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta", float(self.delta))


def declared_constant(pmf) -> float:
    """Exponent constant ``c = Σ_{p(x)>0} log₂(1/p(x))``."""
    p = np.asarray(pmf, dtype=float)
    p = p[p > 0]
    return float(np.sum(-np.log2(p)))


def _counts(seqs: np.ndarray, k: int) -> np.ndarray:
    return np.stack([(seqs == x).sum(axis=1) for x in range(k)], axis=1)


def _typical_counts(counts: np.ndarray, pmf: np.ndarray, n: int, delta: float) -> np.ndarray:
    """Row mask of typical count vectors (rows of ``counts``)."""
    if n == 0:
        return np.ones(counts.shape[0], dtype=bool)
    dev = np.abs(counts / n - pmf[None, :])
    ok = np.all(dev <= delta + tol.TYPICALITY_SLACK, axis=1)
    zero = pmf <= 0
    if np.any(zero):
        ok &= np.all(counts[:, zero] == 0, axis=1)
    return ok


def is_strongly_typical(xn: Sequence[int], spec: TypicalSetSpec) -> bool:
    k = spec.pmf.size
    seq = np.asarray(list(xn), dtype=int)
    if seq.size != spec.n:
        raise BadSequence(f"sequence length {seq.size} != n = {spec.n}")
    if np.any(seq < 0) or np.any(seq >= k):
        raise BadSequence(f"symbols must lie in 0..{k - 1}")
    counts = _counts(seq[None, :], k)
    return bool(_typical_counts(counts, spec.pmf, spec.n, spec.delta)[0])


def all_sequences(k: int, n: int) -> np.ndarray:
    """All ``k^n`` sequences in lexicographic order, one per row."""
    check_size("sequence enumeration |X|^n", k**n)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    ranks = np.arange(k**n, dtype=np.int64)
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (ranks[:, None] // powers[None, :]) % k


def sequence_index(xn: Sequence[int], k: int) -> int:
    """Lexicographic rank of a sequence (its base-k value)."""
    v = 0
    for s in xn:
        v = v * k + int(s)
    return v


def sequence_probabilities(seqs: np.ndarray, pmf: np.ndarray) -> np.ndarray:
    logp = np.where(pmf > 0, np.log(np.where(pmf > 0, pmf, 1.0)), -np.inf)
    return np.exp(logp[seqs].sum(axis=1))


@dataclass(frozen=True)
class TypicalMass:
    mass: float
    cardinality: int
    log2_cardinality_bound: float
    bound_ok: bool
    sequences: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)


def typical_mass(spec: TypicalSetSpec) -> TypicalMass:
    """Exact typical mass S by enumeration, with ``|T| ≤ 2^{n[H+cδ]}``."""
    k = spec.pmf.size
    seqs = all_sequences(k, spec.n)
    mask = _typical_counts(_counts(seqs, k), spec.pmf, spec.n, spec.delta)
    typ = seqs[mask]
    probs = sequence_probabilities(typ, spec.pmf)
    h = shannon_entropy(spec.pmf)
    log_bound = spec.n * (h + declared_constant(spec.pmf) * spec.delta)
    card = int(typ.shape[0])
    ok = card == 0 or np.log2(card) <= log_bound + 1e-9
    return TypicalMass(float(probs.sum()), card, float(log_bound), bool(ok), typ, probs)


@dataclass(frozen=True)
class PrunedDistribution:
    """IID distribution restricted to the typical set and renormalized."""

    spec: TypicalSetSpec
    mass: float
    sequences: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)

    def prob(self, xn: Sequence[int]) -> float:
        if not is_strongly_typical(xn, self.spec):
            return 0.0
        p = float(sequence_probabilities(np.asarray([list(xn)]), self.spec.pmf)[0])
        return p / self.mass

    def pruned_probabilities(self) -> np.ndarray:
        return self.probabilities / self.mass

    def sample(self, rng, size: int) -> np.ndarray:
        """Draw ``size`` sequences by rejection from the IID sampler.

        When the typical mass is below 1e-3 the draw is made directly from
        the enumerated typical set, which has the same law.
        """
        rng = rng_from(rng)
        k, n = self.spec.pmf.size, self.spec.n
        if self.mass < 1e-3:
            idx = rng.choice(self.sequences.shape[0], size=size, p=self.pruned_probabilities())
            return self.sequences[idx]
        out = np.empty((0, n), dtype=np.int64)
        while out.shape[0] < size:
            need = size - out.shape[0]
            batch = max(16, int(np.ceil(1.2 * need / self.mass)))
            draws = rng.choice(k, size=(batch, n), p=self.spec.pmf)
            keep = _typical_counts(_counts(draws, k), self.spec.pmf, n, self.spec.delta)
            out = np.vstack([out, draws[keep]])
        return out[:size]


def pruned(spec: TypicalSetSpec) -> PrunedDistribution:
    tm = typical_mass(spec)
    if tm.cardinality == 0 or tm.mass <= 0:
        raise EmptyTypicalSet(f"no typical sequences at n={spec.n}, delta={spec.delta}")
    return PrunedDistribution(spec, tm.mass, tm.sequences, tm.probabilities)


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of a state grouped into spectral symbols."""

    values: np.ndarray
    vectors: np.ndarray
    symbol_of: np.ndarray
    symbol_values: np.ndarray
    symbol_mass: np.ndarray

    @property
    def entropy(self) -> float:
        return shannon_entropy(np.clip(self.values, 0.0, None))

    @property
    def constant(self) -> float:
        return declared_constant(self.symbol_values)


def spectrum(rho) -> Spectrum:
    r = as_density(rho)
    w, v = canonical_eigh(r)
    w = np.where(np.abs(w) <= tol.DEGENERACY_TOL, 0.0, w)
    sym = np.empty(w.size, dtype=np.int64)
    values: list[float] = []
    for i, lam in enumerate(w):
        if values and abs(lam - values[-1]) <= tol.DEGENERACY_TOL:
            sym[i] = len(values) - 1
        else:
            values.append(float(lam))
            sym[i] = len(values) - 1
    vals = np.array(values)
    mass = np.array([w[sym == j].sum() for j in range(vals.size)])
    return Spectrum(w, v, sym, vals, np.clip(mass, 0.0, None))


@dataclass(frozen=True)
class TypicalProjector:
    """Projector with an orthonormal basis of its range and, when it comes
    from a state, the state's eigenvalues along that basis."""

    projector: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    n: int
    delta: float
    constant: float
    entropy: float
    log2_rank_bound: float

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    @property
    def rank_bound_ok(self) -> bool:
        return self.rank == 0 or np.log2(self.rank) <= self.log2_rank_bound + 1e-9


def _index_sequences(d: int, n: int) -> np.ndarray:
    check_size("typical projector d^n", d**n)
    return all_sequences(d, n)


def typical_projector(rho, n: int, delta: float, spec: Spectrum | None = None) -> TypicalProjector:
    sp = spectrum(rho) if spec is None else spec
    d = sp.values.size
    idx = _index_sequences(d, n)
    sym_seq = sp.symbol_of[idx]
    mask = _typical_counts(_counts(sym_seq, sp.symbol_values.size), sp.symbol_mass, n, delta)
    full = kron_all([sp.vectors] * n)
    basis = full[:, mask]
    eig = np.prod(sp.values[idx[mask]], axis=1) if n > 0 else np.ones(1)
    h = sp.entropy
    c = sp.constant
    return TypicalProjector(basis @ basis.conj().T, basis, eig, n, float(delta), c, h, n * (h + c * delta))


def ensemble_spectra(ens: Ensemble) -> list[Spectrum]:
    return [spectrum(s) for s in ens.states]


def conditional_constant(ens: Ensemble, spectra: list[Spectrum] | None = None) -> float:
    """``max_x c_x + Σ_x H(ρ_x)`` over symbols with p(x) > 0."""
    sps = ensemble_spectra(ens) if spectra is None else spectra
    live = [s for p, s in zip(ens.pmf, sps) if p > 0]
    return max(s.constant for s in live) + sum(s.entropy for s in live)


def conditionally_typical_projector(
    ens: Ensemble, xn: Sequence[int], delta: float, spectra: list[Spectrum] | None = None
) -> TypicalProjector:
    """Tensor product over symbols x of typical projectors of ρ_x on the
    positions where x occurs: ``⊗_x Π^{I_x}_{ρ_x,δ}``."""
    sps = ensemble_spectra(ens) if spectra is None else spectra
    xn = [int(s) for s in xn]
    k = len(ens.states)
    if any(s < 0 or s >= k for s in xn):
        raise BadSequence(f"symbols must lie in 0..{k - 1}")
    n = len(xn)
    d = ens.dim
    idx = _index_sequences(d, n)
    mask = np.ones(idx.shape[0], dtype=bool)
    eig = np.ones(idx.shape[0])
    for x in sorted(set(xn)):
        pos = [i for i, s in enumerate(xn) if s == x]
        sp = sps[x]
        sub = sp.symbol_of[idx[:, pos]]
        mask &= _typical_counts(_counts(sub, sp.symbol_values.size), sp.symbol_mass, len(pos), delta)
        eig = eig * np.prod(sp.values[idx[:, pos]], axis=1)
    full = kron_all([sps[s].vectors for s in xn])
    basis = full[:, mask]
    h_cond = float(sum(p * s.entropy for p, s in zip(ens.pmf, sps)))
    c = conditional_constant(ens, sps)
    return TypicalProjector(basis @ basis.conj().T, basis, eig[mask], n, float(delta), c, h_cond, n * (h_cond + c * delta))


@dataclass(frozen=True)
class CutoffProjector:
    projector: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    kept: np.ndarray
    discarded_trace: float
    threshold: float

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    @property
    def accounting_ok(self) -> bool:
        """Discarded eigenvalues contribute at most ``threshold·(dim − rank)``."""
        dim = self.projector.shape[0]
        return self.discarded_trace <= self.threshold * (dim - self.rank) + 1e-12


def cutoff_projector(xi, threshold: float) -> CutoffProjector:
    """Projector onto eigenspaces of ``xi`` with eigenvalue above ``threshold``."""
    a = as_operator(xi)
    w, v = np.linalg.eigh(hermitize(a))
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1.0)
    if w.size and w[0] < -tol.TOL_PSD * scale:
        raise NotPsd(f"eigenvalue {w[0]:.3e} below -tol_psd")
    keep = w > threshold
    basis = v[:, keep]
    disc = float(np.clip(w[~keep], 0.0, None).sum())
    return CutoffProjector(basis @ basis.conj().T, basis, w[keep], disc, float(threshold))


def sandwich_bounds(rho, n: int, delta: float) -> dict:
    """Eigenvalues of ``Π ρ^{⊗n} Π`` on the typical subspace against
    ``2^{−n[H ± cδ]}``, computed from the compressed block."""
    r = as_density(rho)
    tp = typical_projector(r, n, delta)
    big = kron_all([r] * n)
    block = tp.basis.conj().T @ big @ tp.basis
    ev = np.linalg.eigvalsh(hermitize(block)) if tp.rank else np.zeros(0)
    lo = 2.0 ** (-n * (tp.entropy + tp.constant * delta))
    hi = 2.0 ** (-n * (tp.entropy - tp.constant * delta))
    ok = bool(tp.rank == 0 or (ev.min() >= lo * (1 - 1e-9) and ev.max() <= hi * (1 + 1e-9)))
    return {
        "rank": tp.rank,
        "min_eigenvalue": float(ev.min()) if ev.size else None,
        "max_eigenvalue": float(ev.max()) if ev.size else None,
        "lower": lo,
        "upper": hi,
        "constant": tp.constant,
        "entropy": tp.entropy,
        "ok": ok,
    }


def pruned_average_gap(ens: Ensemble, n: int, delta: float) -> dict:
    """Check ``Σ p′(xⁿ) ρ_{xⁿ} ≤ (1−ε)^{-1} ρ^{⊗n}`` with ε = 1 − S."""
    pd = pruned(TypicalSetSpec(ens.pmf, n, delta))
    check_size("pruned average operator", pd.sequences.shape[0] * ens.dim**n)
    avg = np.zeros((ens.dim**n, ens.dim**n), dtype=complex)
    for seq, p in zip(pd.sequences, pd.pruned_probabilities()):
        avg += p * kron_all(ens.states[s] for s in seq)
    eps = 1.0 - pd.mass
    rhs = kron_all([ens.average()] * n) / (1.0 - eps)
    gap = float(np.linalg.eigvalsh(hermitize(rhs - avg))[0])
    return {"epsilon": eps, "min_eigenvalue": gap, "ok": gap >= -1e-10}
