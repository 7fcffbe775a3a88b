"""Multi-codebook drivers: feedback, instrument and non-feedback simulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from measim.cq import Povm, QuantumInstrument, Refinement, apply_refinement
from measim.errors import DimMismatch
from measim.protocol.codebook import sample_codebook
from measim.protocol.common import kron_seq, run_trials, trial_rng
from measim.protocol.faithfulness import FaithfulnessReport, coefficient_power, faithfulness_metric
from measim.protocol.instrument import InstrumentSimulation, build_instrument_simulation
from measim.protocol.measurement import DEFAULT_EPS, SourceContext, build_simulated_povm
from measim.qcore import as_density, trace_norm
from measim.tolerances import check_size
from measim.typicality import all_sequences


def _summary(values: list[float]) -> dict:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return {"median": None, "mean": None, "min": None, "max": None}
    return {"median": float(np.median(a)), "mean": float(a.mean()), "min": float(a.min()), "max": float(a.max())}


@dataclass(frozen=True)
class McRunReport:
    reports: tuple
    seed: object

    @property
    def deltas(self) -> list[float]:
        return [r.delta_C for r in self.reports]

    @property
    def median_delta(self) -> float:
        return float(np.median(self.deltas))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": [r.to_dict() for r in self.reports],
            "delta_C": _summary(self.deltas),
            "all_equivalent": all(r.equivalent for r in self.reports),
        }


def simulate_mc(
    rho,
    povm: Povm,
    n: int,
    L: int,
    M: int,
    delta: float,
    trials: int,
    seed: int,
    eps: float = DEFAULT_EPS,
    on_violation: str = "raise",
    threads: int = 1,
) -> McRunReport:
    """One fresh codebook per trial; Δ measured exactly for each."""
    ctx = SourceContext(rho, povm, n, delta, eps)
    ctx.cutoff

    def one(t: int) -> FaithfulnessReport:
        cb = sample_codebook(ctx.p, n, L, M, delta, trial_rng(seed, t), ctx.dist)
        sim = build_simulated_povm(cb, ctx, on_violation)
        return faithfulness_metric(sim, [seed, t])

    return McRunReport(tuple(run_trials(one, trials, threads)), seed)


@dataclass(frozen=True)
class InstrumentRunReport:
    results: tuple
    seed: object

    def to_dict(self) -> dict:
        d = [r.distance for r in self.results]
        return {
            "seed": self.seed,
            "trials": [r.to_dict() for r in self.results],
            "distance": _summary(d),
            "within_chain_bound": all(r.distance <= r.chain_bound + 1e-9 for r in self.results),
        }


def simulate_mc_instr(
    instr: QuantumInstrument,
    rho,
    n: int,
    L: int,
    M: int,
    delta: float,
    trials: int,
    seed: int,
    eps: float = DEFAULT_EPS,
    on_violation: str = "raise",
    threads: int = 1,
) -> InstrumentRunReport:
    ctx = SourceContext(rho, instr.povm(), n, delta, eps)

    def one(t: int) -> InstrumentSimulation:
        cb = sample_codebook(ctx.p, n, L, M, delta, trial_rng(seed, t), ctx.dist)
        return build_instrument_simulation(instr, cb, rho, eps, delta, on_violation)

    return InstrumentRunReport(tuple(run_trials(one, trials, threads)), seed)


@dataclass(frozen=True)
class NonFeedbackReport:
    deltas: tuple
    deltas_purified: tuple
    chernoff_ok: tuple
    rescaled: tuple
    n: int
    L: int
    M: int
    seed: object
    extras: dict = field(default_factory=dict)

    @property
    def median_delta(self) -> float:
        return float(np.median(self.deltas))

    @property
    def equivalence_gap(self) -> float:
        return float(max(abs(a - b) for a, b in zip(self.deltas, self.deltas_purified)))

    def to_dict(self) -> dict:
        return {
            "delta_C": _summary(list(self.deltas)),
            "deltas": list(self.deltas),
            "deltas_purified": list(self.deltas_purified),
            "equivalence_gap": self.equivalence_gap,
            "chernoff_ok": list(self.chernoff_ok),
            "rescaled": list(self.rescaled),
            "n": self.n,
            "L": self.L,
            "M": self.M,
            "seed": self.seed,
            **self.extras,
        }


def nonfeedback_effective(sim, post: np.ndarray, n: int) -> dict:
    """``Λ̃_{xⁿ} = Σ_{wⁿ} p(xⁿ|wⁿ) Λ̃_{wⁿ}`` over all ``xⁿ``."""
    lt = sim.lambda_tilde()
    nx = post.shape[0]
    dim = sim.context.dim
    out = {}
    for xs in all_sequences(nx, n):
        key = tuple(int(s) for s in xs)
        acc = np.zeros((dim, dim), dtype=complex)
        for w, op in lt.items():
            pr = float(np.prod([post[x, wi] for x, wi in zip(key, w)]))
            if pr > 0:
                acc += pr * op
        out[key] = acc
    return out


def simulate_nonfeedback(
    rho,
    refinement: Refinement,
    n: int,
    L: int,
    M: int,
    delta: float,
    trials: int,
    seed: int,
    eps: float = DEFAULT_EPS,
    on_violation: str = "raise",
    threads: int = 1,
) -> NonFeedbackReport:
    """Simulate the internal POVM over W-codewords; Bob draws xⁿ from ∏ p(x|wᵢ).

    Faithfulness is measured on the joint (X, R) output through the effective
    POVM ``Σ_{wⁿ} p(xⁿ|wⁿ) Λ̃_{wⁿ}`` plus the completion outcome.
    """
    r = as_density(rho)
    target = apply_refinement(refinement)
    xi = refinement.internal_povm
    if xi.dim != r.shape[0]:
        raise DimMismatch("state and refinement dimensions differ")
    check_size("target outcomes |X|^n", len(target) ** n * r.shape[0] ** n)
    ctx = SourceContext(r, xi, n, delta, eps)
    ctx.cutoff
    root = ctx.omega_root
    psi = coefficient_power(r, n)
    lam = {tuple(int(s) for s in xs): kron_seq(target.elements, xs) for xs in all_sequences(len(target), n)}

    def one(t: int):
        cb = sample_codebook(ctx.p, n, L, M, delta, trial_rng(seed, t), ctx.dist)
        sim = build_simulated_povm(cb, ctx, on_violation)
        eff = nonfeedback_effective(sim, refinement.post, n)
        g0 = sim.gamma0_average()
        direct = sum(trace_norm(root @ (lam[x] - eff[x]) @ root) for x in lam)
        direct += float(np.real(np.trace(ctx.omega @ g0)))
        pur = sum(trace_norm(psi @ (lam[x] - eff[x]).T @ psi.conj().T) for x in lam)
        pur += trace_norm(psi @ g0.T @ psi.conj().T)
        ok = all(sim.chernoff_Em_ok) and sim.chernoff_E0_ok
        return float(direct), float(pur), bool(ok), sim.rescaled

    res = run_trials(one, trials, threads)
    return NonFeedbackReport(
        tuple(a for a, _, _, _ in res),
        tuple(b for _, b, _, _ in res),
        tuple(c for _, _, c, _ in res),
        tuple(d for _, _, _, d in res),
        n,
        L,
        M,
        seed,
        {"typical_mass_W": ctx.S, "eps": eps, "delta": delta},
    )
