"""Randomized construction of the simulated POVM from a pruned codebook."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from measim import tolerances as tol
from measim.cq import Ensemble, Povm, born_distribution
from measim.errors import DimMismatch, SubPovmViolation
from measim.protocol.codebook import Codebook
from measim.protocol.common import kron_seq
from measim.qcore import as_density, hermitize, psd_sqrt_and_pinv_sqrt, tensor_power, von_neumann_entropy
from measim.tolerances import check_size
from measim.typicality import (
    PrunedDistribution,
    TypicalSetSpec,
    conditionally_typical_projector,
    cutoff_projector,
    ensemble_spectra,
    pruned,
    typical_projector,
)

DEFAULT_EPS = 0.1


@dataclass(frozen=True)
class XiPair:
    xi_prime: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    trace_prime: float
    trace_lower: float

    @property
    def trace_ok(self) -> bool:
        return self.trace_prime >= self.trace_lower - tol.TOL_TRACE


class SourceContext:
    """Everything about ``(ρ, Λ, n, δ, ε)`` that does not depend on the codebook.

    ``ρ̂_x = √ρ Λ_x √ρ / p(x)`` lives on the measured system, so that
    ``ω^{-1/2} (p(x) ρ̂_x) ω^{-1/2} = Λ_x`` on the support of ``ω = ρ^{⊗n}``.
    """

    def __init__(self, rho, povm: Povm, n: int, delta: float, eps: float = DEFAULT_EPS):
        r = as_density(rho)
        if r.shape[0] != povm.dim:
            raise DimMismatch(f"state dim {r.shape[0]} != POVM dim {povm.dim}")
        if n < 1:
            raise ValueError("n must be positive")
        if eps < 0 or eps >= 1:
            raise ValueError("eps must lie in [0, 1)")
        d = r.shape[0]
        check_size("ambient d^n", d**n)
        check_size("sequence enumeration |X|^n", len(povm) ** n)
        self.rho, self.povm, self.n, self.delta, self.eps = r, povm, int(n), float(delta), float(eps)
        self.d = d
        self.dim = d**n
        self.p = born_distribution(povm, r)
        self.root, self.pinv_root = psd_sqrt_and_pinv_sqrt(r)
        hats = []
        for px, e in zip(self.p, povm.elements):
            hats.append(hermitize(self.root @ e @ self.root / px) if px > 0 else r)
        self.hats = hats
        self.ensemble = Ensemble(self.p, tuple(hats))
        self.spectra = ensemble_spectra(self.ensemble)
        self.h_r = von_neumann_entropy(r)
        self.alpha = 2.0 ** (-n * (self.h_r + delta))
        self.typical = typical_projector(r, n, delta)
        self.omega = tensor_power(r, n)
        self.omega_root = tensor_power(self.root, n)
        self.omega_pinv_root = tensor_power(self.pinv_root, n)
        self.dist: PrunedDistribution = pruned(TypicalSetSpec(self.p, n, delta))
        self.S = float(self.dist.mass)
        self._prime: dict = {}
        self._cut = None

    def hat(self, seq) -> np.ndarray:
        return kron_seq(self.hats, seq)

    def element(self, seq) -> np.ndarray:
        return kron_seq(self.povm.elements, seq)

    def xi_prime(self, seq) -> np.ndarray:
        key = tuple(int(s) for s in seq)
        if key not in self._prime:
            pc = conditionally_typical_projector(self.ensemble, key, self.delta, self.spectra).projector
            pt = self.typical.projector
            self._prime[key] = hermitize(pt @ pc @ self.hat(key) @ pc @ pt)
        return self._prime[key]

    @property
    def cutoff(self):
        """Cutoff projector on ``E[ξ′]`` at ``ε·α`` (support of ``E[ξ′]`` when ε = 0)."""
        if self._cut is None:
            mean = np.zeros((self.dim, self.dim), dtype=complex)
            for seq, q in zip(self.dist.sequences, self.dist.pruned_probabilities()):
                mean += q * self.xi_prime(seq)
            top = float(np.linalg.eigvalsh(hermitize(mean))[-1]) if self.dim else 0.0
            thr = self.eps * self.alpha if self.eps > 0 else 1e-12 * max(top, 1e-300)
            cut = cutoff_projector(mean, thr)
            pb = cut.basis
            omega = hermitize(cut.projector @ mean @ cut.projector)
            self._cut = (cut, mean, omega, pb)
        return self._cut[0]

    @property
    def xi_prime_mean(self) -> np.ndarray:
        self.cutoff
        return self._cut[1]

    @property
    def Omega(self) -> np.ndarray:
        self.cutoff
        return self._cut[2]

    def xi(self, seq) -> np.ndarray:
        pc = self.cutoff.projector
        return hermitize(pc @ self.xi_prime(seq) @ pc)

    def sandwich(self, op: np.ndarray) -> np.ndarray:
        """``ω^{-1/2} op ω^{-1/2}``."""
        return hermitize(self.omega_pinv_root @ op @ self.omega_pinv_root)


def build_xi(rho, povm: Povm, xn, delta: float, eps: float = DEFAULT_EPS, context: SourceContext | None = None) -> XiPair:
    """``ξ′_{xⁿ}`` and its cutoff-projected version ``ξ_{xⁿ}``."""
    ctx = context if context is not None else SourceContext(rho, povm, len(xn), delta, eps)
    xp = ctx.xi_prime(xn)
    tr = float(np.real(np.trace(xp)))
    return XiPair(xp, ctx.xi(xn), tr, 1.0 - ctx.eps - 2.0 * np.sqrt(ctx.eps))


def _within(avg: np.ndarray, center: np.ndarray, eps: float, basis: np.ndarray) -> bool:
    """``(1−ε)C ≤ avg ≤ (1+ε)C`` on the range of ``basis``."""
    if basis.shape[1] == 0:
        return bool(np.allclose(avg, 0.0, atol=1e-12))
    a = hermitize(basis.conj().T @ avg @ basis)
    c = hermitize(basis.conj().T @ center @ basis)
    scale = max(float(np.abs(np.linalg.eigvalsh(c)).max()), 1e-300)
    slack = 1e-9 * scale
    lo = np.linalg.eigvalsh(hermitize(a - (1 - eps) * c))[0]
    hi = np.linalg.eigvalsh(hermitize((1 + eps) * c - a))[0]
    return bool(lo >= -slack and hi >= -slack)


def check_chernoff_events(cb: Codebook, context: SourceContext) -> tuple[tuple, bool]:
    """Per-column operator events ``E_m`` and the counting event ``E_0``."""
    ctx = context
    eps = ctx.eps
    basis = ctx.cutoff.basis
    flags = []
    for m in range(cb.M):
        avg = sum(ctx.xi(cb.codeword(l, m)) for l in range(cb.L)) / cb.L
        flags.append(_within(avg, ctx.Omega, eps, basis))
    counts = cb.counts()
    total = cb.L * cb.M
    e0 = True
    for seq, q in zip(ctx.dist.sequences, ctx.dist.pruned_probabilities()):
        c = counts.get(tuple(int(s) for s in seq), 0) / total
        if not ((1 - eps) * q - 1e-15 <= c <= (1 + eps) * q + 1e-15):
            e0 = False
            break
    return tuple(flags), e0


@dataclass
class SimulatedPovm:
    """Per-column sub-POVMs ``Υ_l^{(m)}`` with completions ``Γ₀^{(m)}``."""

    context: SourceContext
    codebook: Codebook
    coefficient: float
    scales: np.ndarray
    sums: list = field(repr=False)
    gamma0: list = field(repr=False)
    chernoff_Em_ok: tuple = ()
    chernoff_E0_ok: bool = True
    max_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    on_violation: str = "raise"

    @property
    def eps(self) -> float:
        return self.context.eps

    @property
    def S(self) -> float:
        return self.context.S

    @property
    def rescaled(self) -> bool:
        return bool(np.any(self.scales != 1.0))

    def weight(self, m: int) -> float:
        """Scalar in front of ``ω^{-1/2} ξ ω^{-1/2}`` for column ``m``."""
        return self.coefficient / self.scales[m]

    def upsilon(self, l: int, m: int) -> np.ndarray:
        return self.weight(m) * self.context.sandwich(self.context.xi(self.codebook.codeword(l, m)))

    def column_weights(self) -> dict:
        """``{xⁿ: (1/M) Σ_m w_m · #{l : xⁿ(l,m) = xⁿ}}``: the scalar multiplying
        ``ω^{-1/2} ξ_{xⁿ} ω^{-1/2}`` in ``Λ̃_{xⁿ}``."""
        out: dict = {}
        for m in range(self.codebook.M):
            w = self.weight(m) / self.codebook.M
            for seq, c in self.codebook.column_counts(m).items():
                out[seq] = out.get(seq, 0.0) + w * c
        return out

    def lambda_tilde(self) -> dict:
        return {seq: w * self.context.sandwich(self.context.xi(seq)) for seq, w in self.column_weights().items()}

    def gamma0_average(self) -> np.ndarray:
        return sum(self.gamma0) / len(self.gamma0)

    def completeness_defect(self) -> float:
        """``max_m ‖Σ_l Υ_l^{(m)} + Γ₀^{(m)} − I‖_∞``."""
        eye = np.eye(self.context.dim)
        return max(float(np.abs(np.linalg.eigvalsh(hermitize(s + g - eye))).max()) for s, g in zip(self.sums, self.gamma0))


def build_simulated_povm(
    cb: Codebook, context: SourceContext, on_violation: str = "raise"
) -> SimulatedPovm:
    """``Υ_l^{(m)} = [S/(1+ε)]·L⁻¹·ω^{-1/2} ξ_{xⁿ(l,m)} ω^{-1/2}`` plus ``Γ₀^{(m)}``.

    ``on_violation="rescale"`` divides column ``m`` by ``λ_max(Σ_l Υ_l^{(m)})``
    when it exceeds one instead of raising; the factors are kept in ``scales``.
    """
    if on_violation not in ("raise", "rescale"):
        raise ValueError("on_violation must be 'raise' or 'rescale'")
    ctx = context
    if cb.n != ctx.n or cb.k != len(ctx.povm):
        raise DimMismatch("codebook does not match the source context")
    em, e0 = check_chernoff_events(cb, ctx)
    if not all(em) or not e0:
        warnings.warn("Chernoff events failed for this codebook; proceeding", RuntimeWarning, stacklevel=2)
    coef = ctx.S / (1.0 + ctx.eps) / cb.L
    eye = np.eye(ctx.dim)
    sums, gam, scales, tops = [], [], [], []
    for m in range(cb.M):
        acc = sum(ctx.xi(cb.codeword(l, m)) for l in range(cb.L))
        s = coef * ctx.sandwich(acc)
        top = float(np.linalg.eigvalsh(s)[-1])
        tops.append(top)
        scale = 1.0
        if top > 1.0 + tol.TOL_COMPLETE:
            if on_violation == "raise":
                raise SubPovmViolation(f"column {m}: largest eigenvalue of the sum is {top:.6f}")
            scale = top
            s = s / scale
        sums.append(s)
        gam.append(hermitize(eye - s))
        scales.append(scale)
    return SimulatedPovm(ctx, cb, coef, np.array(scales), sums, gam, em, e0, np.array(tops), on_violation)
