"""Numerical verifiers for the operator lemmas behind the coding theorems.

Each verifier returns a :class:`LemmaReport` comparing the two sides of one
inequality on a concrete instance. ``run_suite`` draws randomized instances
from per-instance seeds ``SeedSequence([seed, i])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from measim import tolerances as tol
from measim.cq import Ensemble
from measim.protocol.common import run_trials
from measim.errors import BadEffect, BadProjector, BadSampler, DimMismatch
from measim.qcore import (
    SystemLayout,
    as_density,
    as_operator,
    binary_entropy,
    canonical_purification,
    hermitize,
    kron_all,
    partial_trace,
    psd_sqrt,
    spectral_norm,
    tensor_power,
    trace_norm,
    von_neumann_entropy,
)
from measim.sampling import (
    random_density,
    random_effect,
    random_povm,
    random_projector,
    rng_from,
)


@dataclass(frozen=True)
class LemmaReport:
    lemma: str
    lhs: float
    rhs: float
    instance: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs + tol.TOL_LEMMA

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
            "instance": self.instance,
        }


def _effect(lam, d: int) -> np.ndarray:
    a = as_operator(lam)
    if a.shape != (d, d):
        raise DimMismatch(f"effect has shape {a.shape}, expected ({d}, {d})")
    if spectral_norm(a - a.conj().T) > tol.TOL_HERM * max(1.0, spectral_norm(a)):
        raise BadEffect("effect is not Hermitian")
    a = hermitize(a)
    w = np.linalg.eigvalsh(a)
    if w[0] < -tol.TOL_PSD or w[-1] > 1.0 + tol.TOL_PSD:
        raise BadEffect(f"effect spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [0, 1]")
    return a


def _psd(sigma) -> np.ndarray:
    a = hermitize(as_operator(sigma))
    w = np.linalg.eigvalsh(a)
    if w[0] < -tol.TOL_PSD * max(1.0, abs(w[-1])):
        raise BadEffect("operator is not positive semidefinite")
    return a


def gentle_disturbance(rho, lam) -> LemmaReport:
    """``‖ρ − √Λ ρ √Λ‖₁ ≤ 2√(1 − Tr{Λρ})``."""
    r = as_density(rho)
    e = _effect(lam, r.shape[0])
    s = psd_sqrt(e)
    lhs = trace_norm(r - s @ r @ s)
    rhs = 2.0 * math.sqrt(max(1.0 - float(np.real(np.trace(e @ r))), 0.0))
    return LemmaReport("gentle", float(lhs), float(rhs), {"dim": r.shape[0]})


def gentle_ensemble(ens: Ensemble, lam) -> LemmaReport:
    """``E_X ‖√Λ ρ_X √Λ − ρ_X‖₁ ≤ 2√(1 − Tr{Λ ρ̄})``."""
    d = ens.states[0].shape[0]
    e = _effect(lam, d)
    s = psd_sqrt(e)
    lhs = sum(p * trace_norm(s @ r @ s - r) for p, r in zip(ens.pmf, ens.states))
    avg = sum(p * r for p, r in zip(ens.pmf, ens.states))
    rhs = 2.0 * math.sqrt(max(1.0 - float(np.real(np.trace(e @ avg))), 0.0))
    return LemmaReport("gentle-ensemble", float(lhs), float(rhs), {"dim": d, "size": len(ens.states)})


def trace_inequality(rho, sigma, lam) -> LemmaReport:
    """``Tr{Λρ} ≤ Tr{Λσ} + ‖ρ − σ‖₁`` for positive ρ, σ and ``0 ≤ Λ ≤ I``."""
    r = _psd(rho)
    s = _psd(sigma)
    if r.shape != s.shape:
        raise DimMismatch("ρ and σ differ in dimension")
    e = _effect(lam, r.shape[0])
    lhs = float(np.real(np.trace(e @ r)))
    rhs = float(np.real(np.trace(e @ s))) + trace_norm(r - s)
    return LemmaReport("trace-ineq", lhs, rhs, {"dim": r.shape[0]})


def _projector(p, d: int) -> np.ndarray:
    a = as_operator(p)
    if a.shape != (d, d):
        raise DimMismatch(f"projector has shape {a.shape}, expected ({d}, {d})")
    scale = max(1.0, spectral_norm(a))
    if spectral_norm(a - a.conj().T) > tol.TOL_PROJ * scale or spectral_norm(a @ a - a) > tol.TOL_PROJ * scale:
        raise BadProjector("operator is not a Hermitian idempotent")
    return hermitize(a)


def sen_union_gap(sigma, projectors: Sequence) -> LemmaReport:
    """``Tr{σ} − Tr{Π_N⋯Π_1 σ Π_1⋯Π_N} ≤ 2√(Σ Tr{(I − Π_i)σ})``."""
    s = _psd(sigma)
    d = s.shape[0]
    if float(np.real(np.trace(s))) > 1.0 + tol.TOL_TRACE:
        raise BadEffect("σ must have trace at most one")
    projs = [_projector(p, d) for p in projectors]
    chain = np.eye(d, dtype=complex)
    for p in projs:
        chain = p @ chain
    kept = float(np.real(np.trace(chain @ s @ chain.conj().T)))
    lhs = float(np.real(np.trace(s))) - kept
    miss = sum(float(np.real(np.trace((np.eye(d) - p) @ s))) for p in projs)
    rhs = 2.0 * math.sqrt(max(miss, 0.0))
    return LemmaReport("sen", lhs, rhs, {"dim": d, "tests": len(projs)})


def entropy_closeness(rho_n, sigma, layout: SystemLayout) -> LemmaReport:
    """``|H(Aⁿ) − Σ_k H(A_k)| ≤ 2nε log|A| + (n + 1) H₂(ε)``, ``ε = ‖ρ − σ^{⊗n}‖₁``."""
    r = as_density(rho_n)
    s = as_density(sigma)
    d = s.shape[0]
    n = len(layout.dims)
    if any(k != d for k in layout.dims) or layout.dim != r.shape[0]:
        raise DimMismatch("layout must be n copies of the single-site dimension")
    eps = trace_norm(r - tensor_power(s, n))
    marg = sum(von_neumann_entropy(partial_trace(r, layout, [lab])) for lab in layout.labels)
    lhs = abs(von_neumann_entropy(r) - marg)
    rhs = 2.0 * n * eps * math.log2(d) + (n + 1) * binary_entropy(eps)
    return LemmaReport("entropy-close", float(lhs), float(rhs), {"dim": d, "n": n, "eps": float(eps)})


def equivalence_instance(rho, pairs: Sequence[tuple], n: int = 1) -> LemmaReport:
    """Direct ``Σ‖√ω(Λ − Λ̃)√ω‖₁`` against the reference-side trace distance.

    The second route builds the purification vector of ``ρ^{⊗n}`` on
    ``(Rⁿ, Aⁿ)``, applies ``I ⊗ Λ`` and traces out ``Aⁿ`` explicitly.
    ``lhs`` is the gap between the routes and ``rhs`` is zero.
    """
    r = as_density(rho)
    omega = tensor_power(r, n)
    root = psd_sqrt(omega)
    direct = sum(trace_norm(root @ (a - b) @ root) for a, b in pairs)
    pure = canonical_purification(r)
    d = r.shape[0]
    vec = pure.amplitudes.reshape(d, d)
    # reorder (R A)^n to (R^n, A^n)
    big = vec
    for _ in range(n - 1):
        big = np.einsum("ra,sb->rsab", big, vec).reshape(big.shape[0] * d, big.shape[1] * d)
    D = d**n
    phi = big.reshape(-1)
    rho_ra = np.outer(phi, phi.conj())
    lay = SystemLayout((D, D), ("R", "A"))
    purified = 0.0
    for a, b in pairs:
        op = np.kron(np.eye(D), np.asarray(a) - np.asarray(b))
        purified += trace_norm(partial_trace(op @ rho_ra, lay, ["R"]))
    return LemmaReport(
        "equivalence",
        float(abs(direct - purified)),
        0.0,
        {"dim": d, "n": n, "direct": float(direct), "purified": float(purified)},
    )


@dataclass(frozen=True)
class ChernoffSampler:
    """Sampler of operators in ``[0, I]`` with a known mean.

    ``kind`` is ``deterministic`` (``params["op"]``), ``bernoulli_diagonal``
    (independent diagonal bits with ``params["probs"]``) or
    ``random_projector`` (Haar rank-``params["rank"]`` projectors).
    """

    kind: str
    dim: int
    params: dict = field(default_factory=dict)

    def mean(self) -> np.ndarray:
        if self.kind == "deterministic":
            return hermitize(as_operator(self.params["op"]))
        if self.kind == "bernoulli_diagonal":
            return np.diag(np.asarray(self.params["probs"], dtype=float)).astype(complex)
        if self.kind == "random_projector":
            return (self.params["rank"] / self.dim) * np.eye(self.dim, dtype=complex)
        raise BadSampler(f"unknown sampler kind {self.kind!r}")

    def draw(self, rng) -> np.ndarray:
        if self.kind == "deterministic":
            return self.mean()
        if self.kind == "bernoulli_diagonal":
            p = np.asarray(self.params["probs"], dtype=float)
            return np.diag((rng.random(self.dim) < p).astype(float)).astype(complex)
        if self.kind == "random_projector":
            return random_projector(self.dim, int(self.params["rank"]), rng)
        raise BadSampler(f"unknown sampler kind {self.kind!r}")


@dataclass(frozen=True)
class ChernoffReport:
    frequency: float
    bound: float
    failures: int
    trials: int
    M: int
    a: float
    eta: float
    dim: int

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    @property
    def satisfied(self) -> bool:
        return self.vacuous or self.frequency <= self.bound

    def to_dict(self) -> dict:
        return {
            "lemma": "chernoff",
            "frequency": self.frequency,
            "bound": self.bound,
            "vacuous": self.vacuous,
            "satisfied": self.satisfied,
            "failures": self.failures,
            "trials": self.trials,
            "M": self.M,
            "a": self.a,
            "eta": self.eta,
            "dim": self.dim,
        }


def chernoff_bound(dim: int, M: int, a: float, eta: float) -> float:
    """``2·dim·exp(−Mη²a / (4 ln 2))``."""
    return float(2 * dim * math.exp(-M * eta**2 * a / (4 * math.log(2))))


def _in_interval(avg: np.ndarray, mu: np.ndarray, eta: float) -> bool:
    lo = np.linalg.eigvalsh(hermitize(avg - (1 - eta) * mu))[0]
    hi = np.linalg.eigvalsh(hermitize((1 + eta) * mu - avg))[0]
    return lo >= -tol.TOL_PSD and hi >= -tol.TOL_PSD


def operator_chernoff_experiment(sampler: ChernoffSampler, M: int, a: float, eta: float, trials: int, seed) -> ChernoffReport:
    """Frequency of ``ξ̄ ∉ [(1 ± η)μ]`` over ``trials`` batches of ``M`` draws."""
    if not 0.0 < eta < 0.5:
        raise BadSampler("η must lie in (0, 1/2)")
    if a <= 0.0 or a * (1 + eta) > 1.0:
        raise BadSampler("a must be positive with a(1 + η) ≤ 1")
    mu = sampler.mean()
    w = np.linalg.eigvalsh(mu)
    if w[0] < a - tol.TOL_PSD:
        raise BadSampler(f"mean has smallest eigenvalue {w[0]:.4f} < a = {a}")
    g = rng_from(seed)
    probe = sampler.draw(g)
    pw = np.linalg.eigvalsh(hermitize(probe))
    if pw[0] < -tol.TOL_PSD or pw[-1] > 1 + tol.TOL_PSD:
        raise BadSampler("sampler emitted an operator outside [0, I]")
    fails = 0
    for _ in range(trials):
        avg = sum(sampler.draw(g) for _ in range(M)) / M
        if not _in_interval(avg, mu, eta):
            fails += 1
    freq = fails / trials if trials else 0.0
    return ChernoffReport(freq, chernoff_bound(sampler.dim, M, a, eta), fails, trials, M, a, eta, sampler.dim)


def _instance_rng(seed, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


def _random_gentle(g, d_max: int) -> LemmaReport:
    d = int(g.integers(2, d_max + 1))
    rho = random_density(d, g, rank=int(g.integers(1, d + 1)))
    return gentle_disturbance(rho, random_effect(d, g))


def _random_gentle_ensemble(g, d_max: int) -> LemmaReport:
    d = int(g.integers(2, d_max + 1))
    k = int(g.integers(1, 5))
    p = g.dirichlet(np.ones(k))
    ens = Ensemble(p, tuple(random_density(d, g, rank=int(g.integers(1, d + 1))) for _ in range(k)))
    return gentle_ensemble(ens, random_effect(d, g))


def _random_trace_ineq(g, d_max: int) -> LemmaReport:
    d = int(g.integers(2, d_max + 1))
    rho = random_density(d, g) * g.uniform(0.1, 1.0)
    sigma = random_density(d, g) * g.uniform(0.1, 1.0)
    return trace_inequality(rho, sigma, random_effect(d, g))


def _random_sen(g, d_max: int) -> LemmaReport:
    d = int(g.integers(2, d_max + 1))
    sigma = random_density(d, g) * g.uniform(0.5, 1.0)
    k = int(g.integers(1, 4))
    projs = [random_projector(d, int(g.integers(1, d + 1)), g) for _ in range(k)]
    return sen_union_gap(sigma, projs)


def _random_entropy_close(g, d_max: int) -> LemmaReport:
    d = 2
    n = int(g.integers(2, 4))
    sigma = random_density(d, g)
    noise = random_density(d**n, g)
    lam = g.uniform(0.0, 0.2)
    rho_n = (1 - lam) * tensor_power(sigma, n) + lam * noise
    return entropy_closeness(rho_n, sigma, SystemLayout((d,) * n, tuple(f"A{k}" for k in range(n))))


def _random_equivalence(g, d_max: int) -> LemmaReport:
    d = int(g.integers(2, min(d_max, 3) + 1))
    n = int(g.integers(1, 3))
    k = int(g.integers(2, 4))
    rho = random_density(d, g)
    lam = [kron_all(t) for t in _product_elements(random_povm(d, k, g), n)]
    tilde = [kron_all(t) for t in _product_elements(random_povm(d, k, g), n)]
    return equivalence_instance(rho, list(zip(lam, tilde)), n)


def _product_elements(els: Sequence[np.ndarray], n: int) -> list[list[np.ndarray]]:
    import itertools

    return [[els[i] for i in idx] for idx in itertools.product(range(len(els)), repeat=n)]


SUITES: dict[str, Callable] = {
    "gentle": _random_gentle,
    "gentle-ensemble": _random_gentle_ensemble,
    "trace-ineq": _random_trace_ineq,
    "sen": _random_sen,
    "entropy-close": _random_entropy_close,
    "equivalence": _random_equivalence,
}


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    instances: int
    violations: tuple
    worst_margin: float | None
    seed: object

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "instances": self.instances,
            "violations": [v.to_dict() for v in self.violations],
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "seed": self.seed,
        }


def run_suite(name: str, instances: int, seed, d_max: int = 6, threads: int = 1) -> SuiteReport:
    """Randomized instances of one lemma; ``worst_margin`` is ``min(rhs − lhs)``."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    gen = SUITES[name]
    reps = run_trials(lambda i: gen(_instance_rng(seed, i), d_max), instances, threads)
    bad = tuple(
        LemmaReport(r.lemma, r.lhs, r.rhs, {**r.instance, "index": i}) for i, r in enumerate(reps) if not r.satisfied
    )
    worst = min((r.rhs - r.lhs for r in reps), default=None)
    return SuiteReport(name, instances, bad, None if worst is None else float(worst), seed)


def chernoff_suite(seed, trials: int = 200) -> list[ChernoffReport]:
    """Fixed battery: deterministic, Bernoulli-diagonal at several M, Haar projectors."""
    out = [operator_chernoff_experiment(ChernoffSampler("deterministic", 2, {"op": np.diag([0.5, 0.4])}), 50, 0.4, 0.2, trials, [seed, 0])]
    bern = ChernoffSampler("bernoulli_diagonal", 2, {"probs": [0.3, 0.5]})
    for j, M in enumerate((200, 2000, 4000)):
        out.append(operator_chernoff_experiment(bern, M, 0.3, 0.2, trials // 4 if M > 1000 else trials, [seed, 1 + j]))
    proj = ChernoffSampler("random_projector", 3, {"rank": 1})
    out.append(operator_chernoff_experiment(proj, 1500, 1 / 3, 0.3, max(trials // 20, 5), [seed, 9]))
    return out
