"""Single-Kraus instrument simulation built on the simulated POVM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import polar

from measim.cq import QuantumInstrument
from measim.errors import DimMismatch, Unsupported
from measim.protocol.codebook import Codebook
from measim.protocol.common import kron_seq, rank_one_difference_norm
from measim.protocol.measurement import SourceContext, build_simulated_povm
from measim.qcore import as_density, psd_sqrt, trace_norm
from measim.typicality import all_sequences


@dataclass(frozen=True)
class InstrumentSimulation:
    """Approximate instrument ``F_{xⁿ}^{(m)}`` and its distance to ``N^{⊗n}``.

    ``distance`` sums over the outcome flags xⁿ as the simulated instrument is
    trace non-increasing; ``lost_trace`` is the weight that falls outside
    every flag, and ``distance_with_failure`` adds it as a separate outcome.
    """

    distance: float
    lost_trace: float
    chain_bound: float
    printed_bound: float
    terms: dict
    sim: object = field(repr=False)
    unitaries: tuple = field(repr=False, default=())

    @property
    def distance_with_failure(self) -> float:
        return self.distance + self.lost_trace

    def kraus(self, xn, m: int) -> np.ndarray:
        """``F_{xⁿ}^{(m)} = U_{xⁿ} √(p̃(xⁿ|m)·w_m·ξ_{xⁿ}) ω^{-1/2}``."""
        ctx = self.sim.context
        seq = tuple(int(s) for s in xn)
        cnt = self.sim.codebook.column_counts(m).get(seq, 0)
        if cnt == 0:
            return np.zeros((self.unitaries[0].shape[0] ** ctx.n, ctx.dim), dtype=complex)
        w = self.sim.weight(m) * cnt
        u = kron_seq(self.unitaries, seq)
        return u @ psd_sqrt(w * ctx.xi(seq)) @ ctx.omega_pinv_root

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "lost_trace": self.lost_trace,
            "distance_with_failure": self.distance_with_failure,
            "chain_bound": self.chain_bound,
            "printed_bound": self.printed_bound,
            **self.terms,
        }


def polar_unitaries(instr: QuantumInstrument, rho) -> list[np.ndarray]:
    """``N_x √ρ = U_x √(p(x) ρ̂_x)``; ``U_x`` from the right-sided polar factor."""
    root = psd_sqrt(as_density(rho))
    return [polar(fam[0] @ root, side="right")[0] for fam in instr.kraus]


def build_instrument_simulation(
    instr: QuantumInstrument, cb: Codebook, rho, eps: float, delta: float, on_violation: str = "raise"
) -> InstrumentSimulation:
    if not instr.single_kraus:
        raise Unsupported("instrument simulation needs one Kraus operator per outcome")
    r = as_density(rho)
    if r.shape[0] != instr.dim:
        raise DimMismatch("state and instrument dimensions differ")
    ctx = SourceContext(r, instr.povm(), cb.n, delta, eps)
    sim = build_simulated_povm(cb, ctx, on_violation)
    us = polar_unitaries(instr, r)
    kr = [fam[0] for fam in instr.kraus]
    n = cb.n
    root = ctx.omega_root
    supp = ctx.omega_pinv_root @ root
    weights = sim.column_weights()

    dist = 0.0
    kept = 0.0
    for seq, w in sorted(weights.items()):
        a = (kron_seq(kr, seq) @ root).reshape(-1)
        b = (kron_seq(us, seq) @ psd_sqrt(w * ctx.xi(seq)) @ supp).reshape(-1)
        dist += rank_one_difference_norm(a, b)
        kept += float(np.vdot(b, b).real)
    cw_mass = sum(float(np.prod([ctx.p[s] for s in seq])) for seq in weights)
    dist += max(1.0 - cw_mass, 0.0)
    lost = max(1.0 - kept, 0.0)

    typ = 0.0
    for seq, q in zip(ctx.dist.sequences, ctx.dist.pruned_probabilities()):
        typ += q * ctx.S * trace_norm(ctx.hat(seq) - ctx.xi(seq))
    e1 = typ + (1.0 - ctx.S)
    mismatch = sum(abs(float(np.prod([ctx.p[s] for s in seq])) - w) for seq, w in weights.items())
    mismatch += max(1.0 - cw_mass, 0.0)
    chain = 2.0 * np.sqrt(2.0) * e1**0.25 + mismatch
    e_prime = eps + 2.0 * np.sqrt(eps)
    e_second = 2.0 * eps + 2.0 * np.sqrt(eps)
    printed = 2.0 * np.sqrt(2.0) * (eps + 2.0 * np.sqrt(e_prime) + 2.0 * np.sqrt(e_second)) ** 0.25 + 2.0 * eps
    terms = {
        "typicality_term": float(e1),
        "weight_mismatch": float(mismatch),
        "eps_prime": float(e_prime),
        "eps_second": float(e_second),
        "n": n,
        "L": cb.L,
        "M": cb.M,
        "rescaled": sim.rescaled,
    }
    return InstrumentSimulation(float(dist), float(lost), float(chain), float(printed), terms, sim, tuple(us))


def instrument_distance_dense(instr: QuantumInstrument, sim_result: InstrumentSimulation) -> float:
    """Oracle: ``Σ_{xⁿ} ‖(I ⊗ N_{xⁿ}√ω)|I⟩⟨I|(…)† − (1/M)Σ_m (I ⊗ F√ω)|I⟩⟨I|(…)†‖₁``
    with explicit ``D·D_out``-dimensional operators."""
    sim = sim_result.sim
    ctx = sim.context
    n = ctx.n
    kr = [fam[0] for fam in instr.kraus]
    root = ctx.omega_root
    total = 0.0
    for seq in all_sequences(len(kr), n):
        a = (kron_seq(kr, seq) @ root).reshape(-1)
        ideal = np.outer(a, a.conj())
        simulated = np.zeros_like(ideal)
        for m in range(sim.codebook.M):
            f = sim_result.kraus(seq, m)
            b = (f @ root).reshape(-1)
            simulated += np.outer(b, b.conj()) / sim.codebook.M
        total += trace_norm(ideal - simulated)
    return float(total)
