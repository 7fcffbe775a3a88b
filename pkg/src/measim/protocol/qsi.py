"""Protocols with quantum side information: classical compression (CDC-QSI)
and measurement compression (MC-QSI)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from measim.cq import ClassicalQuantumState, Ensemble, Povm, born_distribution
from measim.errors import DecodeFailure, DimMismatch
from measim.protocol.codebook import sample_codebook
from measim.protocol.common import (
    grouped_tensor_power,
    kron_seq,
    lowrank_trace_norm,
    multinomial_weight,
    rank_one_difference_norm,
    representative,
    run_trials,
    trial_rng,
    type_classes,
)
from measim.protocol.decoding import sequential_decode
from measim.protocol.faithfulness import FaithfulnessReport, faithfulness_metric
from measim.protocol.hashing import bins_for_rate, bits_for, two_universal_hash
from measim.protocol.measurement import DEFAULT_EPS, SourceContext, build_simulated_povm
from measim.qcore import SystemLayout, conditional_entropy, hermitize, kron_all, trace_norm
from measim.rates import ab_ordered, rab_purification
from measim.tolerances import check_size
from measim.typicality import (
    TypicalSetSpec,
    all_sequences,
    conditionally_typical_projector,
    ensemble_spectra,
    is_strongly_typical,
    pruned,
    typical_projector,
)


def _factor(rho: np.ndarray) -> np.ndarray:
    """``G`` with ``ρ = G G†`` and as few columns as the rank."""
    w, v = np.linalg.eigh(hermitize(rho))
    keep = w > 1e-12 * max(float(w.max()), 1e-300)
    return v[:, keep] * np.sqrt(w[keep])[None, :]


def _powers(k: int, n: int) -> np.ndarray:
    return k ** np.arange(n - 1, -1, -1, dtype=np.int64)


def ensemble_entropy(ens: Ensemble) -> float:
    """H(X|B) of the ensemble's cq state."""
    blocks = tuple((str(i), p, s) for i, (p, s) in enumerate(zip(ens.pmf, ens.states)))
    cq = ClassicalQuantumState(blocks, SystemLayout((ens.dim,), ("B",)))
    joint, lay = cq.joint("X")
    return float(conditional_entropy(joint, lay, "X", "B"))


_BOUND_CACHE: dict = {}


def cdcqsi_bound_terms(ens: Ensemble, n: int, delta: float) -> dict:
    """Hash-independent ingredients of the decoding error bound.

    For an analysis projector Π (the typical projector of ρ̄ or I):
    ``t1 = Σ_typ p (1 − Tr Πρ)``, ``t2 = Σ_typ p ‖ρ − ΠρΠ‖₁``,
    ``t3 = Σ_typ p Tr{(I − Π_x) ΠρΠ}``, ``t4 = Σ_{x′ typ} Tr{Π_{x′} Π ρ̄^{⊗n} Π}``.
    Every term is constant on type classes, so one representative per type
    is evaluated and weighted by its multinomial count.
    """
    key = (np.asarray(ens.pmf).tobytes(), tuple(s.tobytes() for s in ens.states), int(n), float(delta))
    if key in _BOUND_CACHE:
        return _BOUND_CACHE[key]
    k = len(ens.states)
    d = ens.dim
    check_size("side-information d^n", d**n)
    spec = TypicalSetSpec(ens.pmf, n, delta)
    spectra = ensemble_spectra(ens)
    factors = [_factor(s) for s in ens.states]
    avg = ens.average()
    tp = typical_projector(avg, n, delta)
    avg_n = kron_all([avg] * n)
    options = {"typical": tp.basis, "identity": None}
    compressed = {"typical": hermitize(tp.basis.conj().T @ avg_n @ tp.basis), "identity": avg_n}
    acc = {name: {"t1": 0.0, "t2": 0.0, "t3": 0.0, "t4": 0.0} for name in options}
    mass = 0.0
    worst_typ = 0.0
    worst_cond = 0.0
    for counts in type_classes(k, n):
        seq = representative(counts)
        if not is_strongly_typical(seq, spec):
            continue
        nseq = multinomial_weight(counts)
        pw = float(nseq * np.prod([ens.pmf[x] ** c for x, c in enumerate(counts)]))
        mass += pw
        g = kron_seq(factors, seq)
        qx = conditionally_typical_projector(ens, seq, delta, spectra).basis
        worst_cond = max(worst_cond, 1.0 - float(np.linalg.norm(qx.conj().T @ g) ** 2))
        for name, pb in options.items():
            if pb is None:
                pg = g
                tr_pi = float(np.linalg.norm(g) ** 2)
                t2 = 0.0
                z = qx
            else:
                c = pb.conj().T @ g
                pg = pb @ c
                tr_pi = float(np.linalg.norm(c) ** 2)
                w = np.hstack([g, pg])
                signs = np.concatenate([np.ones(g.shape[1]), -np.ones(g.shape[1])])
                t2 = lowrank_trace_norm(w, signs)
                z = pb.conj().T @ qx
                worst_typ = max(worst_typ, 1.0 - tr_pi)
            a = acc[name]
            a["t1"] += pw * (1.0 - tr_pi)
            a["t2"] += pw * t2
            a["t3"] += pw * (tr_pi - float(np.linalg.norm(qx.conj().T @ pg) ** 2))
            a["t4"] += nseq * float(np.real(np.trace(z.conj().T @ compressed[name] @ z)))
    out = {
        "typical_mass": mass,
        "options": acc,
        "h_x_given_b": ensemble_entropy(ens),
        "eps_measured": float(max(1.0 - mass, worst_typ, worst_cond)),
    }
    _BOUND_CACHE[key] = out
    return out


def cdcqsi_bound(terms: dict, K: int, collision: float = 2.0) -> tuple[float, str]:
    """``B = (1−S) + t1 + t2 + 2√(t3 + (c/K)·t4)`` minimized over Π."""
    best, which = np.inf, ""
    for name, t in terms["options"].items():
        b = (1.0 - terms["typical_mass"]) + t["t1"] + t["t2"] + 2.0 * np.sqrt(max(t["t3"] + collision / K * t["t4"], 0.0))
        if b < best:
            best, which = b, name
    return float(best), which


def printed_cdcqsi_bound(eps: float, n: int, rate: float, h_x_b: float, delta: float) -> float:
    """``ε + 2√ε + 2√(ε + 2√ε + 2^{−n[R − H(X|B) − 3δ]})``."""
    tail = 2.0 ** (-n * (rate - h_x_b - 3.0 * delta))
    return float(eps + 2 * np.sqrt(eps) + 2 * np.sqrt(eps + 2 * np.sqrt(eps) + tail))


@dataclass(frozen=True)
class CdcQsiReport:
    n: int
    R: float
    K: int
    delta: float
    trials: int
    errors: int
    atypical: int
    decode_failures: int
    bound: float
    bound_projector: str
    printed_bound: float
    h_x_given_b: float
    mean_state_distance: float | None
    seed: object
    terms: dict = field(repr=False, default_factory=dict)

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials if self.trials else 0.0

    @property
    def sigma(self) -> float:
        b = min(self.bound, 1.0)
        return float(np.sqrt(b * (1.0 - b) / self.trials)) if self.trials else 0.0

    @property
    def bound_ok(self) -> bool:
        return self.error_rate <= min(self.bound, 1.0) + 3.0 * self.sigma + 1e-12

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "R": self.R,
            "K": self.K,
            "delta": self.delta,
            "trials": self.trials,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "atypical": self.atypical,
            "decode_failures": self.decode_failures,
            "bound": self.bound,
            "bound_projector": self.bound_projector,
            "sigma": self.sigma,
            "bound_ok": self.bound_ok,
            "printed_bound": self.printed_bound,
            "H(X|B)": self.h_x_given_b,
            "mean_state_distance": self.mean_state_distance,
            "seed": self.seed,
        }


def simulate_cdcqsi(
    ens: Ensemble,
    n: int,
    R: float,
    delta: float,
    trials: int,
    seed: int,
    recover: bool = True,
    threads: int = 1,
) -> CdcQsiReport:
    """Hash ``xⁿ`` into ``K = ⌈2^{nR}⌉`` bins and decode from ``ρ_{xⁿ}``.

    Each trial draws a fresh hash and source sequence. Candidates are the
    typical sequences in the received bin, tested in ascending sequence
    index. Atypical source sequences and exhausted scans count as errors.
    """
    k = len(ens.states)
    domain = k**n
    check_size("sequence enumeration |X|^n", domain)
    K = bins_for_rate(n, R, domain)
    spec = TypicalSetSpec(ens.pmf, n, delta)
    pd = pruned(spec)
    typ = pd.sequences
    typ_idx = typ @ _powers(k, n)
    spectra = ensemble_spectra(ens)
    factors = [_factor(s) for s in ens.states]
    pure = all(f.shape[1] == 1 for f in factors)
    cache: dict = {}

    def projector(seq: tuple) -> np.ndarray:
        if seq not in cache:
            cache[seq] = conditionally_typical_projector(ens, seq, delta, spectra).basis
        return cache[seq]

    def one(t: int):
        rng = trial_rng(seed, t)
        xn = tuple(int(s) for s in rng.choice(k, size=n, p=ens.pmf))
        if K >= domain:
            bins = typ_idx
            target = int(np.dot(xn, _powers(k, n)))
        else:
            h = two_universal_hash(rng, bits_for(domain), K)
            bins = h.many(typ_idx)
            target = int(h(int(np.dot(xn, _powers(k, n)))))
        if not is_strongly_typical(xn, spec):
            return ("atypical", None)
        cands = [tuple(int(s) for s in typ[i]) for i in np.flatnonzero(bins == target)]
        g = kron_seq(factors, xn)
        state = g[:, 0] if pure else g @ g.conj().T
        try:
            res = sequential_decode([projector(c) for c in cands], state, rng, recover=recover)
        except DecodeFailure:
            return ("failure", None)
        if cands[res.index] != xn:
            return ("wrong", None)
        if not recover:
            return ("ok", None)
        if pure:
            return ("ok", rank_one_difference_norm(state, res.state))
        return ("ok", trace_norm(state - res.state))

    results = run_trials(one, trials, threads)
    atyp = sum(1 for r, _ in results if r == "atypical")
    fail = sum(1 for r, _ in results if r == "failure")
    errors = sum(1 for r, _ in results if r != "ok")
    dists = [d for r, d in results if r == "ok" and d is not None]
    terms = cdcqsi_bound_terms(ens, n, delta)
    bound, which = cdcqsi_bound(terms, K, 0.0 if K >= domain else 2.0)
    rate = float(np.log2(K) / n)
    printed = printed_cdcqsi_bound(terms["eps_measured"], n, rate, terms["h_x_given_b"], delta)
    return CdcQsiReport(
        n,
        float(R),
        int(K),
        float(delta),
        int(trials),
        int(errors),
        int(atyp),
        int(fail),
        bound,
        which,
        printed,
        terms["h_x_given_b"],
        float(np.mean(dists)) if dists else None,
        seed,
        terms,
    )


@dataclass(frozen=True)
class McQsiReport:
    faithfulness: FaithfulnessReport
    K: int
    trials: int
    decode_errors: int
    completion_events: int
    decode_failures: int
    end_to_end_distance: float | None
    seed: object

    @property
    def decoded_trials(self) -> int:
        return self.trials - self.completion_events

    @property
    def decode_error_rate(self) -> float:
        """Errors among trials that produced a codeword index."""
        t = self.decoded_trials
        return self.decode_errors / t if t else 0.0

    @property
    def sigma(self) -> float:
        p, t = self.decode_error_rate, self.decoded_trials
        return float(np.sqrt(p * (1 - p) / t)) if t else 0.0

    def to_dict(self) -> dict:
        return {
            "faithfulness": self.faithfulness.to_dict(),
            "K": self.K,
            "trials": self.trials,
            "decoded_trials": self.decoded_trials,
            "decode_errors": self.decode_errors,
            "decode_error_rate": self.decode_error_rate,
            "sigma": self.sigma,
            "completion_events": self.completion_events,
            "decode_failures": self.decode_failures,
            "end_to_end_distance": self.end_to_end_distance,
            "seed": self.seed,
        }


def side_ensemble(rho_ab: np.ndarray, da: int, db: int, povm: Povm) -> Ensemble:
    """``{p(x), Tr_A{(Λ_x ⊗ I) ρ^{AB}}/p(x)}``; absent outcomes get ρ_B."""
    t = rho_ab.reshape(da, db, da, db)
    rho_b = np.einsum("ibic->bc", t)
    rho_a = np.einsum("ibjb->ij", t)
    p = born_distribution(povm, rho_a)
    states = []
    for px, e in zip(p, povm.elements):
        if px > 0:
            states.append(hermitize(np.einsum("ji,ibjc->bc", e, t) / px))
        else:
            states.append(hermitize(rho_b))
    return Ensemble(p, tuple(states))


def _sim_decoder_kraus(projs: list[np.ndarray], dim: int):
    """Kraus operators ``U_j† Π_j Π̂_{j−1}⋯Π̂_1`` and the failure operator."""
    from scipy.linalg import polar

    out = []
    acc = np.eye(dim, dtype=complex)
    for q in projs:
        pr = q @ q.conj().T
        a = pr @ acc
        u = polar(a, side="right")[0]
        out.append(u.conj().T @ a)
        acc = (np.eye(dim) - pr) @ acc
    return out, acc


def simulate_mcqsi(
    rho_ab,
    layout: SystemLayout,
    povm: Povm,
    n: int,
    R_hash: float,
    L: int,
    M: int,
    delta: float,
    trials: int,
    seed: int,
    eps: float = DEFAULT_EPS,
    on_violation: str = "raise",
    threads: int = 1,
) -> McQsiReport:
    """Simulate Λ on A, hash the index l, and let Bob decode from B^n.

    Bob tests conditionally typical projectors of ``ρ^B_x`` for the codewords
    ``xⁿ(l′, m)`` with ``f(l′) = f(l)`` in ascending ``l′``. A trial errs when
    the completion outcome occurs, the scan is exhausted, or the decoded
    codeword differs from ``xⁿ(l, m)``. Completion outcomes are counted
    separately from decode errors.
    """
    r, da, db = ab_ordered(rho_ab, layout)
    if povm.dim != da:
        raise DimMismatch("POVM does not act on A")
    rho_a = np.einsum("ibjb->ij", r.reshape(da, db, da, db))
    ens_b = side_ensemble(r, da, db, povm)
    ctx = SourceContext(rho_a, povm, n, delta, eps)
    cb = sample_codebook(ctx.p, n, L, M, delta, np.random.default_rng(np.random.SeedSequence([int(seed), 0, 1])), ctx.dist)
    sim = build_simulated_povm(cb, ctx, on_violation)
    faith = faithfulness_metric(sim, seed)

    K = bins_for_rate(n, R_hash, L)
    if K >= L:
        f = np.arange(L)
        K = L
    else:
        h = two_universal_hash(np.random.default_rng(np.random.SeedSequence([int(seed), 0, 2])), bits_for(L), K)
        f = h.many(np.arange(L))

    DA, DB = da**n, db**n
    check_size("MC-QSI joint (d_A d_B)^n", DA * DB)
    joint = grouped_tensor_power(r, (da, db), n)
    j4 = joint.reshape(DA, DB, DA, DB)
    spectra = ensemble_spectra(ens_b)
    proj_cache: dict = {}

    def proj(seq: tuple) -> np.ndarray:
        if seq not in proj_cache:
            proj_cache[seq] = conditionally_typical_projector(ens_b, seq, delta, spectra).basis
        return proj_cache[seq]

    col_cache: dict = {}

    def column(m: int):
        if m not in col_cache:
            q = np.array([float(np.real(np.trace(sim.upsilon(l, m) @ ctx.omega))) for l in range(L)])
            col_cache[m] = np.clip(q, 0.0, None)
        return col_cache[m]

    def one(t: int):
        rng = trial_rng(seed, t)
        m = int(rng.integers(M))
        q = column(m)
        fail = max(1.0 - q.sum(), 0.0)
        probs = np.append(q, fail)
        probs = probs / probs.sum()
        l = int(rng.choice(L + 1, p=probs))
        if l == L:
            return "completion"
        bob = np.einsum("ji,ibjc->bc", sim.upsilon(l, m), j4)
        bob = hermitize(bob / max(float(np.real(np.trace(bob))), 1e-300))
        cands = [lp for lp in range(L) if f[lp] == f[l]]
        try:
            res = sequential_decode([proj(cb.codeword(lp, m)) for lp in cands], bob, rng, recover=False)
        except DecodeFailure:
            return "failure"
        return "ok" if cb.codeword(cands[res.index], m) == cb.codeword(l, m) else "wrong"

    outcomes = run_trials(one, trials, threads)
    errors = sum(1 for o in outcomes if o in ("wrong", "failure"))

    e2e = None
    dr = da * db
    if (dr * db) ** n <= 64:
        e2e = _end_to_end(r, da, db, povm, sim, cb, f, ens_b, delta, spectra)
    return McQsiReport(
        faith,
        int(K),
        int(trials),
        int(errors),
        sum(1 for o in outcomes if o == "completion"),
        sum(1 for o in outcomes if o == "failure"),
        e2e,
        seed,
    )


def _end_to_end(r, da, db, povm, sim, cb, f, ens_b, delta, spectra) -> float:
    """Exact ``Σ_x ‖ideal_x − sim_x‖₁ + Tr{fail}`` on ``(Rⁿ, Bⁿ)``."""
    n = cb.n
    phi, lay = rab_purification(r, SystemLayout((da, db), ("A", "B")))
    dr = lay.dims[0]
    big = grouped_tensor_power(phi, (dr, da, db), n)
    DR, DA, DB = dr**n, da**n, db**n
    t6 = big.reshape(DR, DA, DB, DR, DA, DB)

    def block(w):
        return np.einsum("ji,ribsjc->rbsc", w, t6).reshape(DR * DB, DR * DB)

    k = len(povm)
    sim_blocks: dict = {}
    fail = np.zeros((DR * DB, DR * DB), dtype=complex)
    for m in range(cb.M):
        fail += block(sim.gamma0[m]) / cb.M
        for l in range(cb.L):
            tau = block(sim.upsilon(l, m)) / cb.M
            cands = [lp for lp in range(cb.L) if f[lp] == f[l]]
            projs = [conditionally_typical_projector(ens_b, cb.codeword(lp, m), delta, spectra).basis for lp in cands]
            kraus, kfail = _sim_decoder_kraus(projs, DB)
            for lp, kr in zip(cands, kraus):
                op = np.kron(np.eye(DR), kr)
                out = op @ tau @ op.conj().T
                key = cb.codeword(lp, m)
                sim_blocks[key] = sim_blocks.get(key, 0) + out
            op = np.kron(np.eye(DR), kfail)
            fail += op @ tau @ op.conj().T
    total = 0.0
    for seq in all_sequences(k, n):
        key = tuple(int(s) for s in seq)
        ideal = block(kron_seq(povm.elements, key))
        total += trace_norm(ideal - sim_blocks.get(key, 0))
    total += float(np.real(np.trace(hermitize(fail))))
    return float(total)
