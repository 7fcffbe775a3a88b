"""Faithfulness of a simulated POVM, by two independent routes.

Direct: ``Σ_x ‖√ω (Λ_x − Λ̃_x) √ω‖₁`` on the measured system.
Purification: ``Σ_x ‖Tr_A{(I ⊗ Λ_x) φ} − Tr_A{(I ⊗ Λ̃_x) φ}‖₁`` on the
reference, evaluated through the coefficient matrix Ψ of ``φ^{⊗n}`` as
``Ψ (Λ_x − Λ̃_x)^T Ψ†``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from measim import tolerances as tol
from measim.protocol.measurement import SimulatedPovm
from measim.qcore import as_density, kron_all, psd_sqrt, purification_coefficients, trace_norm
from measim.tolerances import check_size


@dataclass(frozen=True)
class FaithfulnessReport:
    delta_C: float
    delta_C_purified: float
    chernoff_Em_ok: tuple
    chernoff_E0_ok: bool
    n: int
    L: int
    M: int
    seed: object = None
    eps: float = 0.0
    delta: float = 0.0
    typical_mass: float = 1.0
    rescaled: bool = False
    max_column_eigenvalue: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def equivalence_gap(self) -> float:
        return abs(self.delta_C - self.delta_C_purified)

    @property
    def equivalent(self) -> bool:
        return self.equivalence_gap <= tol.TOL_RECON

    def to_dict(self) -> dict:
        return {
            "delta_C": self.delta_C,
            "delta_C_purified": self.delta_C_purified,
            "equivalence_gap": self.equivalence_gap,
            "chernoff_Em_ok": list(self.chernoff_Em_ok),
            "chernoff_E0_ok": self.chernoff_E0_ok,
            "n": self.n,
            "L": self.L,
            "M": self.M,
            "seed": self.seed,
            "eps": self.eps,
            "delta": self.delta,
            "typical_mass": self.typical_mass,
            "rescaled": self.rescaled,
            "max_column_eigenvalue": self.max_column_eigenvalue,
            **self.extras,
        }


def faithfulness_direct(omega, pairs) -> float:
    """``Σ ‖√ω (Λ − Λ̃) √ω‖₁`` over ``(Λ, Λ̃)`` pairs on a common outcome set."""
    w = as_density(omega)
    root = psd_sqrt(w)
    return float(sum(trace_norm(root @ (a - b) @ root) for a, b in pairs))


def faithfulness_purified(coefficients: np.ndarray, pairs) -> float:
    """Same quantity from the purification ``Σ Ψ_{ra}|r⟩|a⟩``."""
    psi = np.asarray(coefficients)
    return float(sum(trace_norm(psi @ (a - b).T @ psi.conj().T) for a, b in pairs))


def coefficient_power(rho, n: int) -> np.ndarray:
    return kron_all([purification_coefficients(rho)] * n)


def faithfulness_metric(sim: SimulatedPovm, seed=None) -> FaithfulnessReport:
    """Δ including the completion outcome, computed by both routes."""
    ctx = sim.context
    check_size("faithfulness d^n", ctx.dim)
    lt = sim.lambda_tilde()
    g0 = sim.gamma0_average()
    root = ctx.omega_root
    psi = coefficient_power(ctx.rho, ctx.n)

    direct = 0.0
    purified = 0.0
    cw_mass = 0.0
    cw_sum = np.zeros((ctx.dim, ctx.dim), dtype=complex)
    for seq in sorted(lt):
        lam = ctx.element(seq)
        diff = lam - lt[seq]
        direct += trace_norm(root @ diff @ root)
        purified += trace_norm(psi @ diff.T @ psi.conj().T)
        cw_mass += float(np.prod([ctx.p[s] for s in seq]))
        cw_sum += lam
    # non-codeword outcomes have Λ̃ = 0
    direct += max(1.0 - cw_mass, 0.0)
    purified += float(np.real(np.trace(psi @ (np.eye(ctx.dim) - cw_sum).T @ psi.conj().T)))
    direct += float(np.real(np.trace(ctx.omega @ g0)))
    purified += trace_norm(psi @ g0.T @ psi.conj().T)

    born_tv = sum(
        abs(float(np.prod([ctx.p[s] for s in seq])) - float(np.real(np.trace(ctx.omega @ lt[seq])))) for seq in lt
    ) + max(1.0 - cw_mass, 0.0) + float(np.real(np.trace(ctx.omega @ g0)))
    return FaithfulnessReport(
        float(direct),
        float(purified),
        sim.chernoff_Em_ok,
        sim.chernoff_E0_ok,
        ctx.n,
        sim.codebook.L,
        sim.codebook.M,
        seed if seed is not None else sim.codebook.seed,
        ctx.eps,
        ctx.delta,
        ctx.S,
        sim.rescaled,
        float(np.max(sim.max_eigenvalues)) if sim.max_eigenvalues.size else 0.0,
        {"born_tv": float(born_tv), "completion_mass": float(np.real(np.trace(ctx.omega @ g0)))},
    )


def measured_chain_terms(sim: SimulatedPovm) -> dict:
    """Measured ingredients of the faithfulness chain.

    ``typ = Σ_{typ} p′ ‖ρ̂ − ξ‖₁``, ``count = ‖P̂ − Ĉ/(1+ε)‖₁`` and
    ``bound = (1 − S) + typ + count``, which dominates the variant of Δ
    without the completion outcome.
    """
    ctx = sim.context
    typ = 0.0
    for seq, q in zip(ctx.dist.sequences, ctx.dist.pruned_probabilities()):
        typ += q * trace_norm(ctx.hat(seq) - ctx.xi(seq))
    counts = sim.codebook.counts()
    tot = sim.codebook.L * sim.codebook.M
    cnt = 0.0
    for seq, q in zip(ctx.dist.sequences, ctx.dist.pruned_probabilities()):
        cnt += abs(q - counts.get(tuple(int(s) for s in seq), 0) / tot / (1 + ctx.eps))
    return {"typ": float(typ), "count": float(cnt), "bound": float((1 - ctx.S) + typ + cnt)}
